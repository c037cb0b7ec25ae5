#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "segfuse/tensor.hpp"

namespace segfuse {

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients of a scalar-valued function against central
/// finite differences. Relative error uses max(1, |fd|, |ad|) as denominator so
/// tiny gradients are judged on absolute terms.
inline GradCheckReport finite_difference_check(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
    double step = 1e-5, double tol = 1e-6) {
  Tensor probe = Tensor::from_data(x.shape(), x.values(), /*requires_grad=*/true);
  Tensor y = f(probe);
  if (y.size() != 1)
    throw InvalidInputError("finite_difference_check: function must return a scalar");
  if (!std::isfinite(y.item()))
    throw EvaluationError("finite_difference_check: function value is not finite");
  std::vector<double> analytic(x.size(), 0.0);
  if (y.requires_grad()) {  // a constant function legitimately has zero gradient
    y.backward();
    analytic = probe.grad();
    if (analytic.empty()) analytic.assign(x.size(), 0.0);
  }

  GradCheckReport report;
  report.passed = true;
  std::vector<double> vals = x.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double orig = vals[i];
    NoGradGuard no_grad;
    vals[i] = orig + step;
    const double hi = f(Tensor::from_data(x.shape(), vals)).item();
    vals[i] = orig - step;
    const double lo = f(Tensor::from_data(x.shape(), vals)).item();
    vals[i] = orig;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw EvaluationError("finite_difference_check: perturbed value is not finite");
    const double fd = (hi - lo) / (2.0 * step);
    const double ad = analytic[i];
    const double rel =
        std::abs(fd - ad) / std::max({1.0, std::abs(fd), std::abs(ad)});
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace segfuse
