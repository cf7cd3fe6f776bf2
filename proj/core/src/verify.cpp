#include "motionduet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "motionduet/dash.hpp"
#include "motionduet/diffusion.hpp"
#include "motionduet/numkit/gradcheck.hpp"
#include "motionduet/numkit/ops.hpp"

namespace motionduet::verify {

namespace nk = numkit;
using nk::Rng;
using nk::Tape;
using nk::Tensor;
using nk::Var;

namespace {

constexpr double kKinkMargin = 1e-4;

double cosine(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    dot += a(i, c) * b(j, c);
    na += a(i, c) * a(i, c);
    nb += b(j, c) * b(j, c);
  }
  return dot / std::sqrt(na * nb);
}

// Distance of the closest hinge argument to its kink.
double kinkDistance(const Tensor& z, const Tensor& v, const dash::DashConfig& cfg) {
  double d = 1e300;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    d = std::min(d, std::abs(1.0 - cfg.marginCos - cosine(z, i, v, i)));
    for (std::size_t j = i + 1; j < z.rows(); ++j) {
      const double diff = cosine(z, i, z, j) - cosine(v, i, v, j);
      d = std::min({d, std::abs(diff), std::abs(std::abs(diff) - cfg.marginPair)});
    }
  }
  return d;
}

struct DashPoint {
  Tensor z;
  Tensor v;
};

DashPoint drawDashPoint(Rng& rng, const dash::DashConfig& cfg) {
  for (;;) {
    DashPoint p{nk::randomNormal({6, 5}, rng), nk::randomNormal({6, 5}, rng)};
    // Pull half the motion rows toward their video rows so both sides of the
    // token hinge are exercised.
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 5; ++c) p.z(i, c) = p.v(i, c) + 0.3 * p.z(i, c);
    if (kinkDistance(p.z, p.v, cfg) > kKinkMargin) return p;
  }
}

CheckResult runPoints(const std::string& name, const SuiteOptions& opt, std::uint64_t stream,
                      const std::function<nk::GradcheckReport(Rng&)>& one) {
  CheckResult r{name, opt.points, 0.0, true};
  Rng rng(Rng::derive(opt.seed, stream));
  for (std::size_t p = 0; p < opt.points; ++p) {
    const auto rep = one(rng);
    if (!std::isfinite(rep.maxRelError)) r.maxRelError = rep.maxRelError;
    else r.maxRelError = std::max(r.maxRelError, rep.maxRelError);
  }
  r.passed = std::isfinite(r.maxRelError) && r.maxRelError <= opt.tolerance;
  return r;
}

CheckResult dashCheck(const std::string& name, const SuiteOptions& opt, std::uint64_t stream,
                      const std::function<dash::LossTerms(const dash::AlignedPairBatch&)>& loss) {
  const dash::DashConfig cfg;
  return runPoints(name, opt, stream, [&](Rng& rng) {
    const DashPoint p = drawDashPoint(rng, cfg);
    const nk::ScalarFn fn = [&](const Tensor& z, Tensor* grad) {
      auto terms = loss({z, p.v});
      if (grad) *grad = terms.grad;
      return terms.value;
    };
    return nk::gradcheck(fn, p.z, opt.step);
  });
}

dash::LossTerms pairTerms(const dash::AlignedPairBatch& b, const dash::DashConfig& cfg, bool flip) {
  auto t = dash::pairStructureLoss(b, cfg.marginPair);
  if (flip)
    for (auto& g : t.grad.data()) g = -g;
  return t;
}

CheckResult endToEnd(const SuiteOptions& opt) {
  diffusion::ModelConfig mc;
  mc.duet.textTokens = 4;
  mc.duet.textWidth = 8;
  mc.duet.videoTokens = 4;
  mc.duet.videoWidth = 8;
  mc.duet.hidden = 16;
  mc.denoiser.frames = 16;
  mc.denoiser.dims = 4;
  mc.denoiser.patch = 4;
  mc.denoiser.hidden = 16;
  mc.denoiser.layers = 2;
  mc.denoiser.heads = 2;
  mc.denoiser.mlpWidth = 24;
  mc.denoiser.contextTokens = 4;
  mc.denoiser.alignWidth = 8;
  mc.diffusionSteps = 20;
  mc.alignLayer = 1;
  constexpr std::size_t kCoordinates = 24;
  dash::DashConfig dcfg;
  dcfg.lambda = 0.5;

  return runPoints("denoiser.end_to_end", opt, 7, [&](Rng& rng) {
    mc.seed = rng.next();
    diffusion::Model model = diffusion::Model::create(mc);
    auto params = model.parameters();
    // Larger random values everywhere so no branch sits at its initial value.
    for (auto* p : params)
      for (auto& v : p->value.data()) v += 0.2 * rng.normal();
    const Tensor video = nk::randomNormal({4, 8}, rng);
    const Tensor text = nk::randomNormal({4, 8}, rng);
    const Tensor xt = nk::randomNormal({16, 4}, rng);
    const Tensor eps = nk::randomNormal({16, 4}, rng);
    const std::size_t t = 1 + rng.below(mc.diffusionSteps);

    std::vector<std::pair<nk::Param*, std::size_t>> coords;
    Tensor point({kCoordinates});
    while (coords.size() < kCoordinates) {
      nk::Param* p = params[rng.below(params.size())];
      const std::pair<nk::Param*, std::size_t> c{p, rng.below(p->value.size())};
      if (std::find(coords.begin(), coords.end(), c) != coords.end()) continue;
      point[coords.size()] = p->value[c.second];
      coords.push_back(c);
    }
    const nk::ScalarFn fn = [&](const Tensor& x, Tensor* grad) {
      for (std::size_t k = 0; k < kCoordinates; ++k) coords[k].first->value[coords[k].second] = x[k];
      for (auto* p : params) p->zeroGrad();
      Tape tape(grad != nullptr);
      Var h = duet::duetForward(tape, model.duet, mc.duet, video, text).context;
      auto out = diffusion::denoise(tape, model.denoiser, mc.denoiser, tape.constant(xt), t, h, mc.alignLayer);
      Var loss = nk::add(nk::mse(out.prediction, eps), nk::scale(dash::dashLossVar(out.aligned, video, dcfg), dcfg.lambda));
      if (grad) {
        tape.backward(loss);
        *grad = Tensor({kCoordinates});
        for (std::size_t k = 0; k < kCoordinates; ++k) {
          const auto& g = coords[k].first->grad;
          (*grad)[k] = g.empty() ? 0.0 : g[coords[k].second];
        }
      }
      return loss.value()[0];
    };
    return nk::gradcheck(fn, point, opt.step);
  });
}

}  // namespace

std::vector<CheckResult> runGradcheckSuite(const SuiteOptions& opt) {
  const dash::DashConfig cfg;
  std::vector<CheckResult> out;
  out.push_back(dashCheck("dash.token", opt, 1, [&](const dash::AlignedPairBatch& b) {
    return dash::tokenMarginLoss(b, cfg.marginCos);
  }));
  out.push_back(dashCheck("dash.pair", opt, 2, [&](const dash::AlignedPairBatch& b) {
    return pairTerms(b, cfg, opt.flipPairSign);
  }));
  out.push_back(dashCheck("dash.total", opt, 3, [&](const dash::AlignedPairBatch& b) {
    auto t = dash::tokenMarginLoss(b, cfg.marginCos);
    const auto p = pairTerms(b, cfg, opt.flipPairSign);
    t.value += p.value;
    for (std::size_t i = 0; i < t.grad.size(); ++i) t.grad[i] += p.grad[i];
    return t;
  }));

  // Random linear readout so every output entry contributes to the objective.
  auto readout = [](Rng& rng, const nk::Shape& s) { return nk::randomNormal(s, rng); };
  for (const std::size_t frames : {8u, 9u}) {
    const std::string suffix = frames % 2 ? "_odd" : "_even";
    out.push_back(runPoints("duet.fourier_w" + suffix, opt, 4 + frames, [&](Rng& rng) {
      const Tensor signal = nk::randomNormal({frames, 3}, rng);
      const Tensor r = readout(rng, {frames, 3});
      const Tensor w = nk::randomNormal({frames / 2 + 1, 3}, rng);
      auto fn = nk::tapeObjective([&](Tape& tape, Var wv) {
        return nk::sum(nk::mul(nk::spectralFilter(tape.constant(signal), wv), tape.constant(r)));
      });
      return nk::gradcheck(fn, w, opt.step);
    }));
    out.push_back(runPoints("duet.fourier_signal" + suffix, opt, 20 + frames, [&](Rng& rng) {
      const Tensor signal = nk::randomNormal({frames, 3}, rng);
      const Tensor r = readout(rng, {frames, 3});
      const Tensor w = nk::randomNormal({frames / 2 + 1, 3}, rng);
      auto fn = nk::tapeObjective([&](Tape& tape, Var x) {
        return nk::sum(nk::mul(nk::spectralFilter(x, tape.constant(w)), tape.constant(r)));
      });
      return nk::gradcheck(fn, signal, opt.step);
    }));
  }
  out.push_back(runPoints("duet.conv_kernel", opt, 40, [&](Rng& rng) {
    const Tensor signal = nk::randomNormal({10, 4}, rng);
    const Tensor r = readout(rng, {10, 4});
    const Tensor k = nk::randomNormal({3, 4}, rng);
    auto fn = nk::tapeObjective([&](Tape& tape, Var kv) {
      return nk::sum(nk::mul(nk::conv1d(tape.constant(signal), kv), tape.constant(r)));
    });
    return nk::gradcheck(fn, k, opt.step);
  }));
  out.push_back(runPoints("duet.conv_signal", opt, 41, [&](Rng& rng) {
    const Tensor signal = nk::randomNormal({10, 4}, rng);
    const Tensor r = readout(rng, {10, 4});
    const Tensor k = nk::randomNormal({5, 4}, rng);
    auto fn = nk::tapeObjective([&](Tape& tape, Var x) {
      return nk::sum(nk::mul(nk::conv1d(x, tape.constant(k)), tape.constant(r)));
    });
    return nk::gradcheck(fn, signal, opt.step);
  }));
  out.push_back(endToEnd(opt));
  return out;
}

}  // namespace motionduet::verify
