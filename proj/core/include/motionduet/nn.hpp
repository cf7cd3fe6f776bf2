#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "motionduet/numkit/ops.hpp"

namespace motionduet::nn {

using numkit::Param;
using numkit::Rng;
using numkit::Tape;
using numkit::Tensor;
using numkit::Var;

/// y = x·W + b with W [in×out].
struct Linear {
  Param weight;
  Param bias;

  static Linear create(const std::string& name, std::size_t in, std::size_t out, Rng& rng, double gain = 1.0);
  Var operator()(Tape& tape, Var x);
  void collect(std::vector<Param*>& out) { out.push_back(&weight); out.push_back(&bias); }
};

struct LayerNorm {
  Param gamma;
  Param beta;

  static LayerNorm create(const std::string& name, std::size_t width);
  Var operator()(Tape& tape, Var x);
  void collect(std::vector<Param*>& out) { out.push_back(&gamma); out.push_back(&beta); }
};

/// Fixed sinusoidal table [count × width].
Tensor sinusoidalTable(std::size_t count, std::size_t width, double base = 10000.0);
Tensor sinusoidalEmbedding(double position, std::size_t width, double base = 10000.0);

}  // namespace motionduet::nn
