#pragma once

#include <cstddef>
#include <functional>

#include "motionduet/numkit/tape.hpp"

namespace motionduet::numkit {

/// Scalar objective that also fills `grad` (same shape as the point) with its
/// analytic gradient when `grad` is non-null.
using ScalarFn = std::function<double(const Tensor& point, Tensor* grad)>;

struct GradcheckReport {
  double maxRelError = 0.0;
  std::size_t worstIndex = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Max over coordinates of |analytic − central difference| / max(1, |central difference|).
/// Throws NonFiniteError if fn evaluates to a non-finite value, and
/// std::invalid_argument for a step outside (0, 1e-2].
GradcheckReport gradcheck(const ScalarFn& fn, const Tensor& point, double step = 1e-5);

/// Adapts a tape-built objective: `build` receives the point as a gradient
/// receiving input and returns a scalar Var.
ScalarFn tapeObjective(std::function<Var(Tape&, Var)> build);

}  // namespace motionduet::numkit
