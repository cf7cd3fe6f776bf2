#include <gtest/gtest.h>

#include <cmath>

#include "motionduet/numkit/gradcheck.hpp"
#include "motionduet/numkit/ops.hpp"

namespace nk = motionduet::numkit;
using nk::Rng;
using nk::Tape;
using nk::Tensor;
using nk::Var;

namespace {

constexpr double kTol = 1e-6;

// Random linear readout of an op's output so every entry is exercised.
double checkUnary(const nk::Shape& inShape, const std::function<Var(Tape&, Var)>& op, std::uint64_t seed = 1) {
  Rng rng(seed);
  const Tensor x = nk::randomNormal(inShape, rng);
  Tape probe(false);
  const nk::Shape outShape = op(probe, probe.constant(x)).shape();
  const Tensor r = nk::randomNormal(outShape, rng);
  auto fn = nk::tapeObjective([&](Tape& tape, Var v) { return nk::sum(nk::mul(op(tape, v), tape.constant(r))); });
  return nk::gradcheck(fn, x).maxRelError;
}

}  // namespace

TEST(Ops, MatmulMatchesLoopAndGradients) {
  Rng rng(3);
  const Tensor a = nk::randomNormal({3, 4}, rng);
  const Tensor b = nk::randomNormal({4, 2}, rng);
  Tape tape;
  const Tensor y = nk::matmul(tape.constant(a), tape.constant(b)).value();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(y(i, j), s, 1e-12);
    }
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var x) { return nk::matmul(x, t.constant(b)); }), kTol);
  EXPECT_LT(checkUnary({4, 2}, [&](Tape& t, Var x) { return nk::matmul(t.constant(a), x); }), kTol);
}

TEST(Ops, MatmulShapeMismatchThrows) {
  Tape tape;
  EXPECT_THROW(nk::matmul(tape.constant(Tensor({2, 3})), tape.constant(Tensor({2, 3}))), nk::ShapeError);
}

TEST(Ops, LinearGradients) {
  Rng rng(4);
  const Tensor w = nk::randomNormal({4, 3}, rng);
  const Tensor b = nk::randomNormal({3}, rng);
  const Tensor x = nk::randomNormal({5, 4}, rng);
  EXPECT_LT(checkUnary({5, 4}, [&](Tape& t, Var v) { return nk::linear(v, t.constant(w), t.constant(b)); }), kTol);
  EXPECT_LT(checkUnary({4, 3}, [&](Tape& t, Var v) { return nk::linear(t.constant(x), v, t.constant(b)); }), kTol);
  EXPECT_LT(checkUnary({3}, [&](Tape& t, Var v) { return nk::linear(t.constant(x), t.constant(w), v); }), kTol);
}

TEST(Ops, ElementwiseAndActivationGradients) {
  Rng rng(5);
  const Tensor other = nk::randomNormal({3, 4}, rng);
  const Tensor row = nk::randomNormal({4}, rng);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var v) { return nk::add(v, t.constant(other)); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var v) { return nk::sub(t.constant(other), v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var v) { return nk::mul(v, t.constant(other)); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::mul(v, v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::scale(v, -2.5); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var v) { return nk::addRowVector(v, t.constant(row)); }), kTol);
  EXPECT_LT(checkUnary({4}, [&](Tape& t, Var v) { return nk::addRowVector(t.constant(other), v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::tanh(v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::gelu(v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::softplus(v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::relu(v); }), kTol);
}

TEST(Ops, NormalizationGradients) {
  Rng rng(6);
  const Tensor gamma = nk::randomNormal({5}, rng);
  const Tensor beta = nk::randomNormal({5}, rng);
  const Tensor x = nk::randomNormal({4, 5}, rng);
  EXPECT_LT(checkUnary({4, 5}, [&](Tape& t, Var v) { return nk::layerNorm(v, t.constant(gamma), t.constant(beta)); }),
            kTol);
  EXPECT_LT(checkUnary({5}, [&](Tape& t, Var v) { return nk::layerNorm(t.constant(x), v, t.constant(beta)); }), kTol);
  EXPECT_LT(checkUnary({5}, [&](Tape& t, Var v) { return nk::layerNorm(t.constant(x), t.constant(gamma), v); }), kTol);
  EXPECT_LT(checkUnary({4, 5}, [&](Tape&, Var v) { return nk::softmaxRows(v); }), kTol);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(7);
  Tape tape;
  const Tensor y = nk::softmaxRows(tape.constant(nk::randomNormal({3, 6}, rng, 10.0))).value();
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (double v : y.row(r)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, ShapeOpGradients) {
  Rng rng(8);
  const Tensor other = nk::randomNormal({3, 2}, rng);
  const Tensor tall = nk::randomNormal({2, 4}, rng);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::transpose(v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::reshape(v, {6, 2}); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var v) { return nk::concatCols(v, t.constant(other)); }), kTol);
  EXPECT_LT(checkUnary({3, 2}, [&](Tape& t, Var v) { return nk::concatCols(t.constant(other), v); }),
            kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape& t, Var v) { return nk::concatRows(v, t.constant(tall)); }), kTol);
  EXPECT_LT(checkUnary({2, 4}, [&](Tape& t, Var v) { return nk::concatRows(t.constant(Tensor({3, 4}, 0.5)), v); }), kTol);
  EXPECT_LT(checkUnary({5, 4}, [&](Tape&, Var v) { return nk::sliceRows(v, 1, 3); }), kTol);
  EXPECT_LT(checkUnary({5, 4}, [&](Tape&, Var v) { return nk::sliceCols(v, 1, 2); }), kTol);
  EXPECT_LT(checkUnary({5, 4}, [&](Tape&, Var v) { return nk::gatherRows(v, {4, 0, 0, 2}); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::sum(v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::mean(v); }), kTol);
  EXPECT_LT(checkUnary({3, 4}, [&](Tape&, Var v) { return nk::mse(v, Tensor({3, 4}, 0.25)); }), kTol);
}

TEST(Ops, SelectRowsRoutesGradientToChosenStream) {
  Rng rng(9);
  const Tensor b = nk::randomNormal({3, 2}, rng);
  const std::vector<bool> mask{true, false, true};
  EXPECT_LT(checkUnary({3, 2}, [&](Tape& t, Var v) { return nk::selectRows(v, t.constant(b), mask); }), kTol);
  EXPECT_LT(checkUnary({3, 2}, [&](Tape& t, Var v) { return nk::selectRows(t.constant(b), v, mask); }), kTol);
}

TEST(Ops, CosineRowsGradientAndZeroRow) {
  Rng rng(10);
  const Tensor b = nk::randomNormal({4, 3}, rng);
  EXPECT_LT(checkUnary({4, 3}, [&](Tape& t, Var v) { return nk::cosineRows(v, t.constant(b)); }), kTol);
  Tape tape;
  Tensor a = b;
  for (double& v : a.row(1)) v = 0.0;
  const Tensor c = nk::cosineRows(tape.constant(a), tape.constant(b)).value();
  EXPECT_DOUBLE_EQ(c[1], 0.0);
  EXPECT_NEAR(c[0], 1.0, 1e-12);
}

TEST(Ops, Conv1dMatchesSlidingWindowOracle) {
  Rng rng(11);
  const Tensor x = nk::randomNormal({7, 3}, rng);
  const Tensor k = nk::randomNormal({5, 3}, rng);
  Tape tape;
  const Tensor y = nk::conv1d(tape.constant(x), tape.constant(k)).value();
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t d = 0; d < 3; ++d) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        const long src = static_cast<long>(t + j) - 2;
        if (src >= 0 && src < 7) s += k(j, d) * x(static_cast<std::size_t>(src), d);
      }
      EXPECT_NEAR(y(t, d), s, 1e-12);
    }
}

TEST(Ops, Conv1dSharedKernelAndEvenWidth) {
  Rng rng(12);
  const Tensor x = nk::randomNormal({6, 2}, rng);
  Tape tape;
  const Tensor y = nk::conv1d(tape.constant(x), tape.constant(Tensor({3}, std::vector<double>{0.0, 1.0, 0.0}))).value();
  EXPECT_EQ(y, x);
  EXPECT_THROW(nk::conv1d(tape.constant(x), tape.constant(Tensor({4}, 1.0))), std::invalid_argument);
}

TEST(Ops, SpectralFilterIdentityAndZero) {
  Rng rng(13);
  const Tensor x = nk::randomNormal({10, 3}, rng);
  Tape tape;
  const Tensor same = nk::spectralFilter(tape.constant(x), tape.constant(Tensor({6, 3}, 1.0))).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-12);
  const Tensor zero = nk::spectralFilter(tape.constant(x), tape.constant(Tensor({6, 3}, 0.0))).value();
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(Ops, NearestIndicesCentreRule) {
  EXPECT_EQ(nk::nearestIndices(4, 16), (std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3}));
  EXPECT_EQ(nk::nearestIndices(16, 4), (std::vector<std::size_t>{2, 6, 10, 14}));
  EXPECT_EQ(nk::nearestIndices(5, 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(Ops, ParamGradientsAccumulateAcrossTapes) {
  nk::Param p("w", Tensor({2}, std::vector<double>{1.0, 2.0}));
  p.zeroGrad();
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(nk::sum(nk::mul(tape.param(p), tape.param(p))));
  }
  EXPECT_DOUBLE_EQ(p.grad[0], 4.0);
  EXPECT_DOUBLE_EQ(p.grad[1], 8.0);
}

TEST(Ops, InferenceTapeRecordsNoGradients) {
  nk::Param p("w", Tensor({2}, 1.0));
  Tape tape(false);
  Var y = nk::sum(tape.param(p));
  EXPECT_DOUBLE_EQ(y.value()[0], 2.0);
  EXPECT_FALSE(tape.requiresGrad(y));
}

TEST(Gradcheck, RejectsBadStepAndNonFinite) {
  const nk::ScalarFn fn = [](const Tensor& x, Tensor* g) {
    if (g) *g = x;
    return 0.5 * x[0] * x[0];
  };
  EXPECT_THROW(nk::gradcheck(fn, Tensor({1}, 1.0), 0.0), std::invalid_argument);
  EXPECT_THROW(nk::gradcheck(fn, Tensor({1}, 1.0), 0.1), std::invalid_argument);
  const nk::ScalarFn bad = [](const Tensor&, Tensor* g) {
    if (g) *g = Tensor({1});
    return std::nan("");
  };
  EXPECT_THROW(nk::gradcheck(bad, Tensor({1}, 1.0)), nk::NonFiniteError);
}

TEST(Gradcheck, DetectsWrongGradient) {
  const nk::ScalarFn wrong = [](const Tensor& x, Tensor* g) {
    if (g) *g = Tensor({1}, -x[0]);
    return 0.5 * x[0] * x[0];
  };
  EXPECT_GT(nk::gradcheck(wrong, Tensor({1}, 2.0)).maxRelError, 1.0);
}
