#include "motionduet/guidance.hpp"

#include <cmath>

#include "motionduet/errors.hpp"

namespace motionduet::guidance {

namespace nk = numkit;

Mode parseMode(const std::string& name) {
  if (name == "none") return Mode::none;
  if (name == "dual_cfg") return Mode::dualCfg;
  if (name == "fused_cfg" || name == "cfg") return Mode::fusedCfg;
  if (name == "auto") return Mode::autoGuide;
  throw UsageError("unknown guidance mode '" + name + "' (expected none|dual_cfg|fused_cfg|auto)");
}

std::string modeName(Mode m) {
  switch (m) {
    case Mode::none: return "none";
    case Mode::dualCfg: return "dual_cfg";
    case Mode::fusedCfg: return "fused_cfg";
    case Mode::autoGuide: return "auto";
  }
  return "none";
}

PerturbKind parseKind(const std::string& name) {
  if (name == "dropout") return PerturbKind::dropout;
  if (name == "gaussian") return PerturbKind::gaussian;
  throw UsageError("unknown perturbation kind '" + name + "' (expected dropout|gaussian)");
}

std::string kindName(PerturbKind k) { return k == PerturbKind::dropout ? "dropout" : "gaussian"; }

void Perturbation::validate() const {
  if (!(strength >= 0.0 && strength <= 1.0)) throw UsageError("guidance: perturbation strength must lie in [0, 1]");
}

void GuidanceSpec::validate() const {
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw UsageError("guidance: omega must be finite and >= 0");
  if (!std::isfinite(omegaVideo) || !std::isfinite(omegaText)) throw UsageError("guidance: dual weights must be finite");
  perturbation.validate();
}

nlohmann::json GuidanceSpec::toJson() const {
  return {{"mode", modeName(mode)},
          {"omega", omega},
          {"omega_video", omegaVideo},
          {"omega_text", omegaText},
          {"kind", kindName(perturbation.kind)},
          {"strength", perturbation.strength},
          {"seed", perturbation.seed}};
}

GuidanceSpec GuidanceSpec::fromJson(const nlohmann::json& j) {
  GuidanceSpec s;
  for (const auto& [key, v] : j.items()) {
    if (key == "mode") s.mode = parseMode(v.get<std::string>());
    else if (key == "omega") s.omega = v.get<double>();
    else if (key == "omega_video") s.omegaVideo = v.get<double>();
    else if (key == "omega_text") s.omegaText = v.get<double>();
    else if (key == "kind") s.perturbation.kind = parseKind(v.get<std::string>());
    else if (key == "strength") s.perturbation.strength = v.get<double>();
    else if (key == "seed") s.perturbation.seed = v.get<std::uint64_t>();
    else throw UsageError("guidance config: unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

Tensor perturb(const Tensor& context, const Perturbation& p) {
  p.validate();
  if (p.strength == 0.0) return context;
  nk::Rng rng(nk::Rng::derive(p.seed, p.kind == PerturbKind::dropout ? 0xD20Fu : 0x6A55u));
  Tensor out = context;
  if (p.kind == PerturbKind::dropout) {
    for (auto& v : out.data())
      if (rng.uniform() < p.strength) v = 0.0;
  } else {
    for (auto& v : out.data()) v += p.strength * rng.normal();
  }
  return out;
}

Tensor autoGuide(const Tensor& strong, const Tensor& weak, double omega) {
  nk::requireSameShape(strong, weak, "autoGuide");
  Tensor out = strong;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = strong[i] + omega * (strong[i] - weak[i]);
  return out;
}

Tensor cfgDual(const Tensor& condVideo, const Tensor& condText, double omegaVideo, double omegaText) {
  nk::requireSameShape(condVideo, condText, "cfgDual");
  Tensor out = condVideo;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = omegaVideo * condVideo[i] + omegaText * condText[i];
  return out;
}

Tensor cfgFused(const Tensor& cond, const Tensor& uncond, double omega) {
  nk::requireSameShape(cond, uncond, "cfgFused");
  Tensor out = cond;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cond[i] + omega * (cond[i] - uncond[i]);
  return out;
}

Tensor guidedPrediction(const DenoiseFn& denoise, const GuidanceContexts& contexts, const GuidanceSpec& spec) {
  switch (spec.mode) {
    case Mode::none:
      return denoise(contexts.fused);
    case Mode::dualCfg: {
      if (!contexts.videoOnly || !contexts.textOnly) {
        throw UsageError("guidance: dual_cfg requires video-only and text-only contexts");
      }
      const Tensor video = denoise(*contexts.videoOnly);
      const Tensor text = denoise(*contexts.textOnly);
      return cfgDual(video, text, spec.omegaVideo, spec.omegaText);
    }
    case Mode::fusedCfg: {
      const Tensor cond = denoise(contexts.fused);
      const Tensor uncond = denoise(Tensor(contexts.fused.shape()));
      return cfgFused(cond, uncond, spec.omega);
    }
    case Mode::autoGuide: {
      const Tensor strong = denoise(contexts.fused);
      const Tensor weak = denoise(perturb(contexts.fused, spec.perturbation));
      return autoGuide(strong, weak, spec.omega);
    }
  }
  throw std::logic_error("guidance: unhandled mode");
}

}  // namespace motionduet::guidance
