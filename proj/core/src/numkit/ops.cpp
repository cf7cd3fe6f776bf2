#include "motionduet/numkit/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "motionduet/numkit/fft.hpp"

namespace motionduet::numkit {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

MapC view(const Tensor& t) {
  return MapC(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
Map view(Tensor& t) {
  return Map(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void accumulate(Tape& tape, Var v, const Tensor& g) {
  if (!tape.requiresGrad(v)) return;
  auto dst = tape.gradBuffer(v.id).data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <class F>
Var unary(Var a, F f, double (*df)(double)) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->record(std::move(y), {a}, [a, df](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    const Tensor& xv = a.value();
    Tensor& dx = tape.gradBuffer(a.id);
    for (std::size_t i = 0; i < xv.size(); ++i) dx[i] += g[i] * df(xv[i]);
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double geluF(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}
double geluD(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
}
double softplusF(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double softplusD(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double tanhD(double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}
double reluD(double x) { return x > 0.0 ? 1.0 : 0.0; }

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner extents differ " + shapeString(av.shape()) + " · " +
                     shapeString(bv.shape()));
  }
  Tensor y({av.rows(), bv.cols()});
  view(y).noalias() = view(av) * view(bv);
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requiresGrad(a)) view(tape.gradBuffer(a.id)).noalias() += view(g) * view(b.value()).transpose();
    if (tape.requiresGrad(b)) view(tape.gradBuffer(b.id)).noalias() += view(a.value()).transpose() * view(g);
  });
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  if (xv.cols() != wv.rows() || bv.size() != wv.cols()) {
    throw ShapeError("linear: incompatible shapes x" + shapeString(xv.shape()) + " W" +
                     shapeString(wv.shape()) + " b" + shapeString(bv.shape()));
  }
  Tensor y({xv.rows(), wv.cols()});
  auto ym = view(y);
  ym.noalias() = view(xv) * view(wv);
  const Eigen::Map<const Eigen::RowVectorXd> brow(bv.data().data(), static_cast<Eigen::Index>(bv.size()));
  ym.rowwise() += brow;
  return x.tape->record(std::move(y), {x, weight, bias}, [x, weight, bias](Tape& tape, const Tensor& g) {
    const auto gm = view(g);
    if (tape.requiresGrad(x)) view(tape.gradBuffer(x.id)).noalias() += gm * view(weight.value()).transpose();
    if (tape.requiresGrad(weight)) view(tape.gradBuffer(weight.id)).noalias() += view(x.value()).transpose() * gm;
    if (tape.requiresGrad(bias)) {
      Tensor& db = tape.gradBuffer(bias.id);
      Eigen::Map<Eigen::RowVectorXd>(db.data().data(), static_cast<Eigen::Index>(db.size())) += gm.colwise().sum();
    }
  });
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  Tensor y({av.cols(), av.rows()});
  view(y) = view(av).transpose();
  return a.tape->record(std::move(y), {a}, [a](Tape& tape, const Tensor& g) {
    if (tape.requiresGrad(a)) view(tape.gradBuffer(a.id)) += view(g).transpose();
  });
}

Var reshape(Var a, Shape shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return a.tape->record(std::move(y), {a}, [a](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    auto dst = tape.gradBuffer(a.id).data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
  });
}

Var add(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    accumulate(tape, a, g);
    accumulate(tape, b, g);
  });
}

Var sub(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    accumulate(tape, a, g);
    if (tape.requiresGrad(b)) {
      Tensor& db = tape.gradBuffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.tape->record(std::move(y), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.requiresGrad(a)) {
      Tensor& da = tape.gradBuffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * b.value()[i];
    }
    if (tape.requiresGrad(b)) {
      Tensor& db = tape.gradBuffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor y = a.value();
  for (auto& v : y.data()) v *= s;
  return a.tape->record(std::move(y), {a}, [a, s](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    Tensor& da = tape.gradBuffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += s * g[i];
  });
}

Var addRowVector(Var a, Var row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.size() != av.cols()) {
    throw ShapeError("addRowVector: row " + shapeString(rv.shape()) + " vs matrix " + shapeString(av.shape()));
  }
  Tensor y = av;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += rv[c];
  return a.tape->record(std::move(y), {a, row}, [a, row](Tape& tape, const Tensor& g) {
    accumulate(tape, a, g);
    if (tape.requiresGrad(row)) {
      Tensor& dr = tape.gradBuffer(row.id);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) dr[c] += g(r, c);
    }
  });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, reluD);
}
Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, tanhD);
}
Var gelu(Var a) { return unary(a, geluF, geluD); }
Var softplus(Var a) { return unary(a, softplusF, softplusD); }

Var layerNorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows();
  const std::size_t d = xv.cols();
  if (gamma.value().size() != d || beta.value().size() != d) throw ShapeError("layerNorm: affine width mismatch");
  Tensor xhat(xv.shape());
  std::vector<double> invStd(n);
  for (std::size_t r = 0; r < n; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += xv(r, c);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (xv(r, c) - mu) * (xv(r, c) - mu);
    var /= static_cast<double>(d);
    invStd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) xhat(r, c) = (xv(r, c) - mu) * invStd[r];
  }
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) y(r, c) = gamma.value()[c] * xhat(r, c) + beta.value()[c];
  return x.tape->record(std::move(y), {x, gamma, beta},
                        [x, gamma, beta, xhat = std::move(xhat), invStd = std::move(invStd)](Tape& tape, const Tensor& g) {
                          const std::size_t rows = g.rows();
                          const std::size_t cols = g.cols();
                          if (tape.requiresGrad(gamma) || tape.requiresGrad(beta)) {
                            Tensor& dg = tape.gradBuffer(gamma.id);
                            Tensor& dbt = tape.gradBuffer(beta.id);
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t c = 0; c < cols; ++c) {
                                dg[c] += g(r, c) * xhat(r, c);
                                dbt[c] += g(r, c);
                              }
                          }
                          if (!tape.requiresGrad(x)) return;
                          Tensor& dx = tape.gradBuffer(x.id);
                          const auto& gm = gamma.value();
                          const double inv_d = 1.0 / static_cast<double>(cols);
                          for (std::size_t r = 0; r < rows; ++r) {
                            double s1 = 0.0, s2 = 0.0;
                            for (std::size_t c = 0; c < cols; ++c) {
                              const double dh = g(r, c) * gm[c];
                              s1 += dh;
                              s2 += dh * xhat(r, c);
                            }
                            for (std::size_t c = 0; c < cols; ++c) {
                              const double dh = g(r, c) * gm[c];
                              dx(r, c) += invStd[r] * (dh - inv_d * s1 - xhat(r, c) * inv_d * s2);
                            }
                          }
                        });
}

Var softmaxRows(Var x) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mx = xv(r, 0);
    for (std::size_t c = 1; c < xv.cols(); ++c) mx = std::max(mx, xv(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) z += (y(r, c) = std::exp(xv(r, c) - mx));
    for (std::size_t c = 0; c < xv.cols(); ++c) y(r, c) /= z;
  }
  Tensor saved = y;
  return x.tape->record(std::move(y), {x}, [x, saved = std::move(saved)](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(x)) return;
    Tensor& dx = tape.gradBuffer(x.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * saved(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) dx(r, c) += saved(r, c) * (g(r, c) - dot);
    }
  });
}

Var conv1d(Var signal, Var kernel) {
  const Tensor& xv = signal.value();
  const Tensor& kv = kernel.value();
  const bool shared = kv.rank() == 1;
  const std::size_t width = shared ? kv.size() : kv.rows();
  const std::size_t frames = xv.rows();
  const std::size_t channels = xv.cols();
  if (width % 2 == 0) throw std::invalid_argument("conv1d: kernel width must be odd, got " + std::to_string(width));
  if (!shared && kv.cols() != channels) {
    throw ShapeError("conv1d: kernel " + shapeString(kv.shape()) + " vs signal " + shapeString(xv.shape()));
  }
  const auto half = static_cast<std::ptrdiff_t>(width / 2);
  auto k = [&kv, shared](std::size_t j, std::size_t d) { return shared ? kv[j] : kv(j, d); };
  Tensor y(xv.shape());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < width; ++j) {
      const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
      for (std::size_t d = 0; d < channels; ++d) y(t, d) += k(j, d) * xv(static_cast<std::size_t>(src), d);
    }
  }
  return signal.tape->record(std::move(y), {signal, kernel}, [signal, kernel, shared, width, half](Tape& tape, const Tensor& g) {
    const Tensor& x = signal.value();
    const Tensor& kw = kernel.value();
    const std::size_t frames = x.rows();
    const std::size_t channels = x.cols();
    const bool needX = tape.requiresGrad(signal);
    const bool needK = tape.requiresGrad(kernel);
    Tensor* dx = needX ? &tape.gradBuffer(signal.id) : nullptr;
    Tensor* dk = needK ? &tape.gradBuffer(kernel.id) : nullptr;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t j = 0; j < width; ++j) {
        const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
        const auto s = static_cast<std::size_t>(src);
        for (std::size_t d = 0; d < channels; ++d) {
          if (dx) (*dx)(s, d) += g(t, d) * (shared ? kw[j] : kw(j, d));
          if (dk) (shared ? (*dk)[j] : (*dk)(j, d)) += g(t, d) * x(s, d);
        }
      }
    }
  });
}

Var spectralFilter(Var signal, Var magnitude) {
  const Tensor& xv = signal.value();
  const Tensor& wv = magnitude.value();
  const std::size_t frames = xv.rows();
  if (frames == 0) throw std::invalid_argument("spectralFilter: empty signal");
  if (wv.rows() != frames / 2 + 1 || wv.cols() != xv.cols()) {
    throw ShapeError("spectralFilter: filter " + shapeString(wv.shape()) + " does not match " +
                     std::to_string(frames / 2 + 1) + "x" + std::to_string(xv.cols()) + " bins");
  }
  Spectrum spec = rfft(xv);
  Spectrum filtered = spec;
  for (std::size_t k = 0; k < spec.binCount(); ++k)
    for (std::size_t d = 0; d < spec.channels; ++d) filtered.at(k, d) *= wv(k, d);
  Tensor y = irfft(filtered, frames);
  return signal.tape->record(std::move(y), {signal, magnitude},
                             [signal, magnitude, spec = std::move(spec)](Tape& tape, const Tensor& g) {
                               const std::size_t frames = g.rows();
                               const Tensor& w = magnitude.value();
                               Spectrum gs = rfft(g);
                               if (tape.requiresGrad(magnitude)) {
                                 Tensor& dw = tape.gradBuffer(magnitude.id);
                                 const double invT = 1.0 / static_cast<double>(frames);
                                 for (std::size_t k = 0; k < gs.binCount(); ++k) {
                                   const bool unpaired = k == 0 || (frames % 2 == 0 && k == frames / 2);
                                   const double c = (unpaired ? 1.0 : 2.0) * invT;
                                   for (std::size_t d = 0; d < gs.channels; ++d)
                                     dw(k, d) += c * (spec.at(k, d) * std::conj(gs.at(k, d))).real();
                                 }
                               }
                               if (tape.requiresGrad(signal)) {
                                 // The operator is a real even circular convolution, hence self-adjoint.
                                 for (std::size_t k = 0; k < gs.binCount(); ++k)
                                   for (std::size_t d = 0; d < gs.channels; ++d) gs.at(k, d) *= w(k, d);
                                 Tensor dx = irfft(gs, frames);
                                 accumulate(tape, signal, dx);
                               }
                             });
}

Var cosineRows(Var a, Var b) {
  requireSameShape(a.value(), b.value(), "cosineRows");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t n = av.rows();
  const std::size_t d = av.cols();
  Tensor y({n});
  std::vector<double> na(n), nb(n);
  for (std::size_t r = 0; r < n; ++r) {
    double dot = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += av(r, c) * bv(r, c);
      aa += av(r, c) * av(r, c);
      bb += bv(r, c) * bv(r, c);
    }
    na[r] = std::sqrt(aa);
    nb[r] = std::sqrt(bb);
    y[r] = (na[r] > 0.0 && nb[r] > 0.0) ? dot / (na[r] * nb[r]) : 0.0;
  }
  Tensor cosv = y;
  return a.tape->record(std::move(y), {a, b},
                        [a, b, na = std::move(na), nb = std::move(nb), cosv = std::move(cosv)](Tape& tape, const Tensor& g) {
                          const Tensor& av = a.value();
                          const Tensor& bv = b.value();
                          const bool needA = tape.requiresGrad(a);
                          const bool needB = tape.requiresGrad(b);
                          for (std::size_t r = 0; r < av.rows(); ++r) {
                            if (na[r] == 0.0 || nb[r] == 0.0) continue;
                            const double inv = 1.0 / (na[r] * nb[r]);
                            for (std::size_t c = 0; c < av.cols(); ++c) {
                              if (needA)
                                tape.gradBuffer(a.id)(r, c) +=
                                    g[r] * (bv(r, c) * inv - cosv[r] * av(r, c) / (na[r] * na[r]));
                              if (needB)
                                tape.gradBuffer(b.id)(r, c) +=
                                    g[r] * (av(r, c) * inv - cosv[r] * bv(r, c) / (nb[r] * nb[r]));
                            }
                          }
                        });
}

Var concatCols(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw ShapeError("concatCols: row counts differ");
  const std::size_t ca = av.cols();
  const std::size_t cb = bv.cols();
  Tensor y({av.rows(), ca + cb});
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < ca; ++c) y(r, c) = av(r, c);
    for (std::size_t c = 0; c < cb; ++c) y(r, ca + c) = bv(r, c);
  }
  return a.tape->record(std::move(y), {a, b}, [a, b, ca, cb](Tape& tape, const Tensor& g) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      if (tape.requiresGrad(a))
        for (std::size_t c = 0; c < ca; ++c) tape.gradBuffer(a.id)(r, c) += g(r, c);
      if (tape.requiresGrad(b))
        for (std::size_t c = 0; c < cb; ++c) tape.gradBuffer(b.id)(r, c) += g(r, ca + c);
    }
  });
}

Var concatRows(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) throw ShapeError("concatRows: column counts differ");
  std::vector<double> data(av.values());
  data.insert(data.end(), bv.values().begin(), bv.values().end());
  const std::size_t na = av.size();
  Tensor y({av.rows() + bv.rows(), av.cols()}, std::move(data));
  return a.tape->record(std::move(y), {a, b}, [a, b, na](Tape& tape, const Tensor& g) {
    if (tape.requiresGrad(a)) {
      Tensor& da = tape.gradBuffer(a.id);
      for (std::size_t i = 0; i < na; ++i) da[i] += g[i];
    }
    if (tape.requiresGrad(b)) {
      Tensor& db = tape.gradBuffer(b.id);
      for (std::size_t i = 0; i < db.size(); ++i) db[i] += g[na + i];
    }
  });
}

Var sliceRows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.rows()) throw ShapeError("sliceRows: range exceeds " + shapeString(av.shape()));
  const std::size_t w = av.cols();
  std::vector<double> data(av.values().begin() + static_cast<std::ptrdiff_t>(begin * w),
                           av.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * w));
  Tensor y({count, w}, std::move(data));
  return a.tape->record(std::move(y), {a}, [a, begin, w](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    Tensor& da = tape.gradBuffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) da[begin * w + i] += g[i];
  });
}

Var sliceCols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.cols()) throw ShapeError("sliceCols: range exceeds " + shapeString(av.shape()));
  Tensor y({av.rows(), count});
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) y(r, c) = av(r, begin + c);
  return a.tape->record(std::move(y), {a}, [a, begin](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    Tensor& da = tape.gradBuffer(a.id);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) da(r, begin + c) += g(r, c);
  });
}

Var gatherRows(Var a, std::vector<std::size_t> indices) {
  const Tensor& av = a.value();
  Tensor y({indices.size(), av.cols()});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= av.rows()) throw ShapeError("gatherRows: index out of range");
    for (std::size_t c = 0; c < av.cols(); ++c) y(r, c) = av(indices[r], c);
  }
  return a.tape->record(std::move(y), {a}, [a, indices = std::move(indices)](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    Tensor& da = tape.gradBuffer(a.id);
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) da(indices[r], c) += g(r, c);
  });
}

Var selectRows(Var a, Var b, std::vector<bool> takeFirst) {
  requireSameShape(a.value(), b.value(), "selectRows");
  if (takeFirst.size() != a.value().rows()) throw ShapeError("selectRows: mask length differs from row count");
  Tensor y = b.value();
  for (std::size_t r = 0; r < y.rows(); ++r)
    if (takeFirst[r])
      for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) = a.value()(r, c);
  return a.tape->record(std::move(y), {a, b}, [a, b, takeFirst = std::move(takeFirst)](Tape& tape, const Tensor& g) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const Var& dst = takeFirst[r] ? a : b;
      if (!tape.requiresGrad(dst)) continue;
      Tensor& d = tape.gradBuffer(dst.id);
      for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) += g(r, c);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return a.tape->record(Tensor::scalar(s), {a}, [a](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    for (auto& v : tape.gradBuffer(a.id).data()) v += g[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mse(Var a, const Tensor& target) {
  requireSameShape(a.value(), target, "mse");
  const Tensor& av = a.value();
  const double inv = 1.0 / static_cast<double>(av.size());
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - target[i]) * (av[i] - target[i]);
  return a.tape->record(Tensor::scalar(s * inv), {a}, [a, target, inv](Tape& tape, const Tensor& g) {
    if (!tape.requiresGrad(a)) return;
    Tensor& da = tape.gradBuffer(a.id);
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < av.size(); ++i) da[i] += g[0] * 2.0 * inv * (av[i] - target[i]);
  });
}

std::vector<std::size_t> nearestIndices(std::size_t from, std::size_t to) {
  if (from == 0 || to == 0) throw std::invalid_argument("nearestIndices: empty extent");
  std::vector<std::size_t> idx(to);
  for (std::size_t l = 0; l < to; ++l) idx[l] = std::min(from - 1, ((2 * l + 1) * from) / (2 * to));
  return idx;
}

}  // namespace motionduet::numkit
