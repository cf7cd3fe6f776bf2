#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "motionduet/numkit/tensor.hpp"

namespace motionduet::synthdata {

using numkit::Tensor;

struct MotionSequence {
  Tensor values;  // frames × dims
  double fps = 20.0;
  int label = -1;  // class id; -1 when unknown

  std::size_t frames() const { return values.rows(); }
  std::size_t dims() const { return values.cols(); }
};

/// Video tokens may be absent; text is always present. Absent video is
/// materialized as zeros so every consumer runs the same code path.
struct ConditionBundle {
  std::optional<Tensor> video;
  Tensor text;
  std::string sourceId;

  Tensor videoOrZeros(std::size_t tokens, std::size_t width) const;
};

struct SynthSpec {
  std::size_t classes = 8;
  std::size_t samplesPerClass = 64;
  std::size_t frames = 64;
  std::size_t dims = 8;
  std::size_t harmonics = 2;
  double noise = 0.1;
  double fps = 20.0;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Noiseless template of class k:
///   x(t, d) = Σ_{h=1..H} (1/h) · sin(2π f_{k,h} t / T + φ_{k,h,d})
/// with f_{k,h} = h (k + 2) / 2 and φ_{k,h,d} = π (d + 1)(k + h) / (D + 1).
Tensor classTemplate(const SynthSpec& spec, std::size_t label);

/// samplesPerClass sequences per class, class-major order, template plus
/// seeded N(0, noise²) per entry.
std::vector<MotionSequence> synthesizeMotion(const SynthSpec& spec);

/// Surrogate video encoder: temporal mean-pooling into ⌈T/stride⌉ tokens,
/// a 3-tap [¼, ½, ¼] smoother with edge replication, then v = A·x + b.
struct GapMap {
  Tensor weight;  // videoDims × motionDims
  Tensor bias;    // videoDims
  std::size_t stride = 4;

  static GapMap create(std::size_t motionDims, std::size_t videoDims, std::uint64_t seed, std::size_t stride = 4);
  std::size_t tokensFor(std::size_t frames) const { return (frames + stride - 1) / stride; }
};

Tensor videoFeatures(const MotionSequence& motion, const GapMap& map);

struct TextSpec {
  std::size_t classes = 8;
  std::size_t tokens = 4;
  std::size_t width = 16;
  std::uint64_t seed = 11;
};

/// Column `label` of a seeded Gaussian projection [tokens·width × classes],
/// reshaped to tokens × width with every row scaled to unit norm.
Tensor textFeatures(std::size_t label, const TextSpec& spec);

}  // namespace motionduet::synthdata
