#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "motionduet/nn.hpp"
#include "motionduet/trace.hpp"

namespace motionduet::duet {

using numkit::Param;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

/// selectCloser keeps the stream nearer to R_fusion (ties go to text);
/// literalEq8 keeps the text stream only when it is strictly farther.
enum class DmmPolicy { selectCloser, literalEq8 };

DmmPolicy parsePolicy(const std::string& name);
std::string policyName(DmmPolicy p);

struct DuetConfig {
  std::size_t textTokens = 4;
  std::size_t textWidth = 16;
  std::size_t videoTokens = 16;
  std::size_t videoWidth = 16;
  std::size_t hidden = 32;
  std::size_t kernelWidth = 3;
  DmmPolicy policy = DmmPolicy::selectCloser;
  // Ablation switches for the enhancement branches and the mask.
  bool useFft = true;
  bool useConv = true;
  bool useIdentity = true;
  bool useDmm = true;

  std::size_t contextTokens() const { return std::max(textTokens, videoTokens); }
  void validate() const;
  nlohmann::json toJson() const;
  static DuetConfig fromJson(const nlohmann::json& j);
};

/// Learnable state. The spectral magnitude filter is W = filterRoot ⊙ filterRoot,
/// so it is nonnegative for every parameter value.
struct DuetParams {
  nn::Linear projText;
  Param projVideo;  // bias-free: V = 0 gives R_b = 0
  Param filterRoot;  // (L/2+1) × hidden
  Param convKernel;  // kernelWidth × hidden
  nn::Linear outProj;  // 2·hidden → hidden

  static DuetParams create(const DuetConfig& cfg, std::uint64_t seed);
  void collect(std::vector<Param*>& out);
  Tensor magnitude() const;
  void setMagnitude(const Tensor& w);  // requires w ≥ 0
};

struct FusionStreams {
  Var text;    // R_o
  Var video;   // R_b
  Var fusion;  // R_o + R_b
};

/// Projects both streams to the hidden width, resamples each to L tokens by
/// nearest index and adds them.
FusionStreams baseFusion(Tape& tape, DuetParams& params, const DuetConfig& cfg, const Tensor& video, const Tensor& text);

/// irfft(W ⊙ rfft(R)) along the token axis.
Var fourierBranch(Var r, Var magnitude);

/// Per-token choice: true selects the text stream.
std::vector<bool> dmmMask(const Tensor& text, const Tensor& video, const Tensor& fusion, DmmPolicy policy);

struct DmmResult {
  Var selected;  // R_DMM
  Var stacked;   // [R_DMM ; R_fusion] along the feature axis
  std::vector<bool> mask;
};

DmmResult dmm(Var text, Var video, Var fusion, DmmPolicy policy);

struct DuetOutput {
  Var context;  // H
  FusionStreams streams;
  std::vector<bool> mask;
};

/// H = outProj([R_DMM ; R_enh]) with R_enh = 2·R_fusion + F(R_fusion) + conv(R_fusion).
/// Text-only calls pass an all-zero video tensor and take the same path.
DuetOutput duetForward(Tape& tape, DuetParams& params, const DuetConfig& cfg, const Tensor& video, const Tensor& text,
                       PathTrace* trace = nullptr);

/// Value-only convenience wrapper.
Tensor fuse(DuetParams& params, const DuetConfig& cfg, const Tensor& video, const Tensor& text,
            PathTrace* trace = nullptr);

}  // namespace motionduet::duet
