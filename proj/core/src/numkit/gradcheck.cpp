#include "motionduet/numkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace motionduet::numkit {

GradcheckReport gradcheck(const ScalarFn& fn, const Tensor& point, double step) {
  if (!(step > 0.0 && step <= 1e-2)) throw std::invalid_argument("gradcheck: step must lie in (0, 1e-2]");
  Tensor analytic(point.shape());
  const double f0 = fn(point, &analytic);
  if (!std::isfinite(f0)) throw NonFiniteError("gradcheck: objective is non-finite at the base point");

  GradcheckReport report;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + step;
    const double fp = fn(probe, nullptr);
    probe[i] = x - step;
    const double fm = fn(probe, nullptr);
    probe[i] = x;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NonFiniteError("gradcheck: objective is non-finite near coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (rel > report.maxRelError || i == 0) {
      report = GradcheckReport{std::max(rel, report.maxRelError), i, analytic[i], numeric};
    }
  }
  return report;
}

ScalarFn tapeObjective(std::function<Var(Tape&, Var)> build) {
  return [build = std::move(build)](const Tensor& point, Tensor* grad) {
    Tape tape(grad != nullptr);
    Var x = tape.input(point);
    Var out = build(tape, x);
    const double value = out.value()[0];
    if (grad != nullptr) {
      tape.backward(out);
      const Tensor& g = tape.grad(x);
      *grad = g.empty() ? Tensor(point.shape()) : g;
    }
    return value;
  };
}

}  // namespace motionduet::numkit
