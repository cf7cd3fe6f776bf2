#include "motionduet/synthdata.hpp"

#include <cmath>
#include <numbers>

#include "motionduet/errors.hpp"

namespace motionduet::synthdata {

using numkit::Rng;

Tensor ConditionBundle::videoOrZeros(std::size_t tokens, std::size_t width) const {
  if (video) {
    if (video->rows() != tokens || video->cols() != width) {
      throw numkit::ShapeError("condition video " + numkit::shapeString(video->shape()) + " expected " +
                               std::to_string(tokens) + "x" + std::to_string(width));
    }
    return *video;
  }
  return Tensor::matrix(tokens, width);
}

void SynthSpec::validate() const {
  if (classes < 2) throw UsageError("synth: at least 2 classes required, got " + std::to_string(classes));
  if (frames < 1 || dims < 1) throw UsageError("synth: frames and dims must be positive");
  if (harmonics < 1) throw UsageError("synth: harmonics must be positive");
  if (!(noise >= 0.0)) throw UsageError("synth: noise level must be non-negative");
  if (samplesPerClass < 1) throw UsageError("synth: samplesPerClass must be positive");
}

Tensor classTemplate(const SynthSpec& spec, std::size_t label) {
  if (label >= spec.classes) throw UsageError("synth: label " + std::to_string(label) + " out of range");
  const double pi = std::numbers::pi;
  const auto T = static_cast<double>(spec.frames);
  const auto D = static_cast<double>(spec.dims);
  const auto k = static_cast<double>(label);
  Tensor out = Tensor::matrix(spec.frames, spec.dims);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t d = 0; d < spec.dims; ++d) {
      double v = 0.0;
      for (std::size_t hi = 1; hi <= spec.harmonics; ++hi) {
        const auto h = static_cast<double>(hi);
        const double freq = h * (k + 2.0) / 2.0;
        const double phase = pi * (static_cast<double>(d) + 1.0) * (k + h) / (D + 1.0);
        v += std::sin(2.0 * pi * freq * static_cast<double>(t) / T + phase) / h;
      }
      out(t, d) = v;
    }
  }
  return out;
}

std::vector<MotionSequence> synthesizeMotion(const SynthSpec& spec) {
  spec.validate();
  std::vector<MotionSequence> out;
  out.reserve(spec.classes * spec.samplesPerClass);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    const Tensor base = classTemplate(spec, k);
    for (std::size_t s = 0; s < spec.samplesPerClass; ++s) {
      Rng rng(Rng::derive(spec.seed, k * spec.samplesPerClass + s));
      MotionSequence m{base, spec.fps, static_cast<int>(k)};
      if (spec.noise > 0.0)
        for (auto& v : m.values.data()) v += spec.noise * rng.normal();
      out.push_back(std::move(m));
    }
  }
  return out;
}

GapMap GapMap::create(std::size_t motionDims, std::size_t videoDims, std::uint64_t seed, std::size_t stride) {
  if (stride == 0) throw UsageError("video stride must be positive");
  Rng rng(Rng::derive(seed, 0x5649444Fu));
  GapMap map;
  map.weight = numkit::randomNormal({videoDims, motionDims}, rng, 1.0 / std::sqrt(static_cast<double>(motionDims)));
  map.bias = numkit::randomNormal({videoDims}, rng, 0.5);
  map.stride = stride;
  return map;
}

Tensor videoFeatures(const MotionSequence& motion, const GapMap& map) {
  const std::size_t frames = motion.frames();
  const std::size_t dims = motion.dims();
  if (map.weight.cols() != dims) {
    throw numkit::ShapeError("videoFeatures: map expects " + std::to_string(map.weight.cols()) + " motion dims, got " +
                             std::to_string(dims));
  }
  const std::size_t tokens = map.tokensFor(frames);
  Tensor pooled = Tensor::matrix(tokens, dims);
  for (std::size_t n = 0; n < tokens; ++n) {
    const std::size_t begin = n * map.stride;
    const std::size_t end = std::min(frames, begin + map.stride);
    for (std::size_t t = begin; t < end; ++t)
      for (std::size_t d = 0; d < dims; ++d) pooled(n, d) += motion.values(t, d);
    for (std::size_t d = 0; d < dims; ++d) pooled(n, d) /= static_cast<double>(end - begin);
  }
  Tensor smooth = Tensor::matrix(tokens, dims);
  for (std::size_t n = 0; n < tokens; ++n) {
    const std::size_t prev = n == 0 ? 0 : n - 1;
    const std::size_t next = n + 1 == tokens ? n : n + 1;
    for (std::size_t d = 0; d < dims; ++d)
      smooth(n, d) = 0.25 * pooled(prev, d) + 0.5 * pooled(n, d) + 0.25 * pooled(next, d);
  }
  const std::size_t width = map.weight.rows();
  Tensor out = Tensor::matrix(tokens, width);
  for (std::size_t n = 0; n < tokens; ++n) {
    for (std::size_t j = 0; j < width; ++j) {
      double acc = map.bias[j];
      for (std::size_t d = 0; d < dims; ++d) acc += map.weight(j, d) * smooth(n, d);
      out(n, j) = acc;
    }
  }
  return out;
}

Tensor textFeatures(std::size_t label, const TextSpec& spec) {
  if (label >= spec.classes) {
    throw UsageError("textFeatures: unknown label " + std::to_string(label) + " (classes=" +
                     std::to_string(spec.classes) + ")");
  }
  Rng rng(Rng::derive(spec.seed, 0x54455854u));
  const std::size_t rows = spec.tokens * spec.width;
  const Tensor projection = numkit::randomNormal({rows, spec.classes}, rng);
  Tensor out = Tensor::matrix(spec.tokens, spec.width);
  for (std::size_t i = 0; i < rows; ++i) out[i] = projection(i, label);
  for (std::size_t r = 0; r < spec.tokens; ++r) {
    double norm = 0.0;
    for (double v : out.row(r)) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : out.row(r)) v /= norm;
  }
  return out;
}

}  // namespace motionduet::synthdata
