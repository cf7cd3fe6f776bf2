#include "motionduet/nn.hpp"

#include <cmath>

namespace motionduet::nn {

Linear Linear::create(const std::string& name, std::size_t in, std::size_t out, Rng& rng, double gain) {
  const double stddev = gain / std::sqrt(static_cast<double>(in));
  return Linear{Param(name + ".weight", numkit::randomNormal({in, out}, rng, stddev)),
                Param(name + ".bias", Tensor({out}))};
}

Var Linear::operator()(Tape& tape, Var x) { return numkit::linear(x, tape.param(weight), tape.param(bias)); }

LayerNorm LayerNorm::create(const std::string& name, std::size_t width) {
  return LayerNorm{Param(name + ".gamma", Tensor({width}, 1.0)), Param(name + ".beta", Tensor({width}))};
}

Var LayerNorm::operator()(Tape& tape, Var x) { return numkit::layerNorm(x, tape.param(gamma), tape.param(beta)); }

Tensor sinusoidalEmbedding(double position, std::size_t width, double base) {
  Tensor out({width});
  const std::size_t half = width / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double freq = std::pow(base, -static_cast<double>(i) / static_cast<double>(half));
    out[2 * i] = std::sin(position * freq);
    out[2 * i + 1] = std::cos(position * freq);
  }
  return out;
}

Tensor sinusoidalTable(std::size_t count, std::size_t width, double base) {
  Tensor out({count, width});
  for (std::size_t p = 0; p < count; ++p) {
    const Tensor row = sinusoidalEmbedding(static_cast<double>(p), width, base);
    for (std::size_t c = 0; c < width; ++c) out(p, c) = row[c];
  }
  return out;
}

}  // namespace motionduet::nn
