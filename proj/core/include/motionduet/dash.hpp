#pragma once

#include <cstddef>

#include <nlohmann/json.hpp>

#include "motionduet/numkit/tape.hpp"

namespace motionduet::dash {

using numkit::Tensor;
using numkit::Var;

struct DashConfig {
  double marginCos = 0.2;
  double marginPair = 0.1;
  double lambda = 0.1;
  std::size_t layer = 2;  // 1-based denoiser block whose output is aligned

  void validate() const;
  nlohmann::json toJson() const;
  static DashConfig fromJson(const nlohmann::json& j);
};

/// Row i of motion and video is the same temporal segment. Video rows are
/// frozen references; only motion rows receive gradients.
struct AlignedPairBatch {
  Tensor motion;  // N × D_a
  Tensor video;   // N × D_a
};

struct LossTerms {
  double value = 0.0;
  Tensor grad;              // d value / d motion
  std::size_t skipped = 0;  // zero-norm tokens excluded from the mean
  bool degenerate = false;  // pair loss with fewer than 2 usable tokens
};

/// (1/N) Σ ReLU(1 − m − cos(ẑ_i, v_i)). Zero-norm pairs are excluded from the
/// mean and counted in `skipped`.
LossTerms tokenMarginLoss(const AlignedPairBatch& batch, double marginCos);

/// (1/N²) Σ_{i,j} ReLU(|cos(ẑ_i, ẑ_j) − cos(v_i, v_j)| − m), diagonal included.
/// Derivatives at kinks are 0: ReLU'(0) = 0 and sign(0) = 0.
LossTerms pairStructureLoss(const AlignedPairBatch& batch, double marginPair);

/// L_token + L_pair with unit weights.
LossTerms dashLoss(const AlignedPairBatch& batch, const DashConfig& cfg);

/// L_MLD + λ·L_DASH; throws NumericalError on non-finite inputs.
double totalLoss(double mld, double dash, double lambda);

/// Records dashLoss on the tape with its analytic gradient flowing into
/// `motionTokens`. Video rows are resampled to the motion token count by
/// nearest index when the counts differ.
Var dashLossVar(Var motionTokens, const Tensor& videoTokens, const DashConfig& cfg);

}  // namespace motionduet::dash
