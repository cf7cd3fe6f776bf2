#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "motionduet/numkit/tensor.hpp"

namespace motionduet::guidance {

using numkit::Tensor;

enum class Mode { none, dualCfg, fusedCfg, autoGuide };
enum class PerturbKind { dropout, gaussian };

Mode parseMode(const std::string& name);
std::string modeName(Mode m);
PerturbKind parseKind(const std::string& name);
std::string kindName(PerturbKind k);

struct Perturbation {
  PerturbKind kind = PerturbKind::dropout;
  double strength = 0.05;  // dropout probability p, or Gaussian σ
  std::uint64_t seed = 0;

  void validate() const;
};

struct GuidanceSpec {
  Mode mode = Mode::autoGuide;
  double omega = 1.25;
  double omegaVideo = 1.0;
  double omegaText = 1.0;
  Perturbation perturbation;

  void validate() const;
  nlohmann::json toJson() const;
  static GuidanceSpec fromJson(const nlohmann::json& j);
};

/// Dropout zeroes each entry independently with probability p and leaves the
/// survivors unscaled. Gaussian adds seeded N(0, σ²) noise. The result is a
/// pure function of (input, kind, strength, seed); strength 0 returns the
/// input unchanged.
Tensor perturb(const Tensor& context, const Perturbation& p);

/// strong + ω·(strong − weak), i.e. (1 + ω)·strong − ω·weak.
Tensor autoGuide(const Tensor& strong, const Tensor& weak, double omega);
/// ω_v·condVideo + ω_t·condText.
Tensor cfgDual(const Tensor& condVideo, const Tensor& condText, double omegaVideo, double omegaText);
/// cond + ω·(cond − uncond), i.e. (1 + ω)·cond − ω·uncond.
Tensor cfgFused(const Tensor& cond, const Tensor& uncond, double omega);

/// Prediction of the shared denoiser for a given context.
using DenoiseFn = std::function<Tensor(const Tensor& context)>;

/// Contexts the combinators may need. The single-modality contexts are only
/// consulted in dualCfg mode.
struct GuidanceContexts {
  Tensor fused;
  std::optional<Tensor> videoOnly;
  std::optional<Tensor> textOnly;
};

/// Combines predictions of one denoiser under the chosen mode. autoGuide
/// evaluates the clean context (strong) and perturb(clean) (weak); fusedCfg
/// uses an all-zero context as the unconditional branch. The inputs are never
/// modified.
Tensor guidedPrediction(const DenoiseFn& denoise, const GuidanceContexts& contexts, const GuidanceSpec& spec);

}  // namespace motionduet::guidance
