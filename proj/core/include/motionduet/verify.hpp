#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace motionduet::verify {

struct SuiteOptions {
  std::size_t points = 10;
  double tolerance = 1e-5;
  double step = 1e-5;
  std::uint64_t seed = 2024;
  // Fault injection: negate the analytic gradient of the pair-structure term.
  bool flipPairSign = false;
};

struct CheckResult {
  std::string name;
  std::size_t points = 0;
  double maxRelError = 0.0;
  bool passed = false;
};

/// Finite-difference checks of every hand-derived gradient: DASH token, pair
/// and combined terms, the Fourier branch w.r.t. its signal and magnitude
/// filter, the depthwise convolution, and the end-to-end training objective
/// through DUET and the denoiser. DASH points are redrawn until every hinge
/// argument sits at least 1e-4 away from its kink.
std::vector<CheckResult> runGradcheckSuite(const SuiteOptions& options);

}  // namespace motionduet::verify
