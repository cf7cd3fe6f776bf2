#include <gtest/gtest.h>

#include "motionduet/errors.hpp"
#include "motionduet/guidance.hpp"

namespace g = motionduet::guidance;
namespace nk = motionduet::numkit;
using nk::Rng;
using nk::Tensor;

TEST(Guidance, AutoGuideFixedPointWhenStrongEqualsWeak) {
  Rng rng(1);
  const Tensor s = nk::randomNormal({5, 4}, rng);
  for (double w : {0.0, 0.75, 1.25, 6.5}) EXPECT_EQ(g::autoGuide(s, s, w), s);
}

TEST(Guidance, ExtrapolationFormsAgree) {
  Rng rng(2);
  const Tensor c = nk::randomNormal({6, 3}, rng);
  const Tensor u = nk::randomNormal({6, 3}, rng);
  for (double w : {0.0, 0.5, 1.25, 7.5}) {
    const Tensor a = g::autoGuide(c, u, w);
    const Tensor f = g::cfgFused(c, u, w);
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_NEAR(a[i], (1 + w) * c[i] - w * u[i], 1e-12);
      EXPECT_EQ(a[i], f[i]);
    }
  }
  EXPECT_EQ(g::autoGuide(c, u, 0.0), c);
}

TEST(Guidance, DualWeights) {
  Rng rng(3);
  const Tensor v = nk::randomNormal({4, 2}, rng);
  const Tensor t = nk::randomNormal({4, 2}, rng);
  const Tensor d = g::cfgDual(v, t, 0.3, 1.7);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_DOUBLE_EQ(d[i], 0.3 * v[i] + 1.7 * t[i]);
  EXPECT_THROW(g::cfgDual(v, Tensor::matrix(2, 2), 1, 1), nk::ShapeError);
}

TEST(Guidance, PerturbationIdentitiesAndDeterminism) {
  Rng rng(4);
  const Tensor h = nk::randomNormal({8, 6}, rng);
  g::Perturbation p;
  p.strength = 0.0;
  EXPECT_EQ(g::perturb(h, p), h);
  p.kind = g::PerturbKind::gaussian;
  EXPECT_EQ(g::perturb(h, p), h);

  p.kind = g::PerturbKind::dropout;
  p.strength = 1.0;
  const Tensor dropped = g::perturb(h, p);
  for (double v : dropped.values()) EXPECT_EQ(v, 0.0);

  p.strength = 0.3;
  p.seed = 9;
  const Tensor a = g::perturb(h, p);
  EXPECT_EQ(a, g::perturb(h, p));
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_TRUE(a[i] == 0.0 || a[i] == h[i]);  // survivors unscaled
  p.seed = 10;
  EXPECT_NE(a, g::perturb(h, p));
}

TEST(Guidance, DropoutRateAndGaussianScale) {
  const Tensor ones({200, 50}, 1.0);
  g::Perturbation p;
  p.strength = 0.25;
  p.seed = 3;
  double zeros = 0;
  const Tensor d = g::perturb(ones, p);
  for (double v : d.values()) zeros += v == 0.0;
  EXPECT_NEAR(zeros / ones.size(), 0.25, 0.02);

  p.kind = g::PerturbKind::gaussian;
  p.strength = 0.4;
  double ss = 0;
  const Tensor n = g::perturb(ones, p);
  for (double v : n.values()) ss += (v - 1.0) * (v - 1.0);
  EXPECT_NEAR(std::sqrt(ss / ones.size()), 0.4, 0.02);
}

TEST(Guidance, GuidedPredictionRoutesContexts) {
  Rng rng(5);
  const Tensor fused = nk::randomNormal({3, 2}, rng);
  std::vector<Tensor> seen;
  const g::DenoiseFn f = [&](const Tensor& ctx) {
    seen.push_back(ctx);
    Tensor out = ctx;
    for (auto& v : out.data()) v = 2.0 * v + 1.0;
    return out;
  };
  g::GuidanceSpec spec;
  spec.mode = g::Mode::none;
  EXPECT_EQ(g::guidedPrediction(f, {fused, {}, {}}, spec), f(fused));

  seen.clear();
  spec.mode = g::Mode::fusedCfg;
  spec.omega = 2.0;
  const Tensor r = g::guidedPrediction(f, {fused, {}, {}}, spec);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[1], Tensor(fused.shape()));
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], 3.0 * (2 * fused[i] + 1) - 2.0 * 1.0, 1e-12);

  spec.mode = g::Mode::dualCfg;
  EXPECT_THROW(g::guidedPrediction(f, {fused, {}, {}}, spec), motionduet::UsageError);
  const Tensor vo = nk::randomNormal({3, 2}, rng);
  const Tensor to = nk::randomNormal({3, 2}, rng);
  EXPECT_EQ(g::guidedPrediction(f, {fused, vo, to}, spec), g::cfgDual(f(vo), f(to), 1.0, 1.0));

  seen.clear();
  spec.mode = g::Mode::autoGuide;
  spec.perturbation.strength = 0.5;
  const Tensor before = fused;
  const Tensor a = g::guidedPrediction(f, {fused, {}, {}}, spec);
  EXPECT_EQ(fused, before);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_EQ(seen[0], fused);
  EXPECT_EQ(seen[1], g::perturb(fused, spec.perturbation));
  EXPECT_EQ(a, g::autoGuide(f(fused), f(seen[1]), spec.omega));
}

TEST(Guidance, ParsingAndValidation) {
  EXPECT_EQ(g::parseMode("auto"), g::Mode::autoGuide);
  EXPECT_EQ(g::parseMode("dual_cfg"), g::Mode::dualCfg);
  EXPECT_EQ(g::parseMode(g::modeName(g::Mode::fusedCfg)), g::Mode::fusedCfg);
  EXPECT_EQ(g::parseMode("cfg"), g::Mode::fusedCfg);
  EXPECT_THROW(g::parseMode("guided"), motionduet::UsageError);
  EXPECT_EQ(g::parseKind("gaussian"), g::PerturbKind::gaussian);
  EXPECT_THROW(g::parseKind("blur"), motionduet::UsageError);
  g::Perturbation p;
  p.strength = 1.5;
  EXPECT_THROW(g::perturb(Tensor({2}), p), motionduet::UsageError);
  EXPECT_THROW(g::GuidanceSpec::fromJson({{"omega", -1.0}}), motionduet::UsageError);
  EXPECT_THROW(g::GuidanceSpec::fromJson({{"scale", 1.0}}), motionduet::UsageError);
  const auto s = g::GuidanceSpec::fromJson(g::GuidanceSpec{}.toJson());
  EXPECT_EQ(s.mode, g::Mode::autoGuide);
  EXPECT_DOUBLE_EQ(s.omega, 1.25);
}
