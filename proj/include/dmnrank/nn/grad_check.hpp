#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace dmnrank::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// Compares `analytic` with central differences (f(x+h) - f(x-h)) / 2h taken
/// coordinate-wise over `x`. Each coordinate is restored after probing. The
/// relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckResult grad_check(const std::function<double()>& f, std::span<double> x,
                           std::span<const double> analytic, double h = 1e-5);

}  // namespace dmnrank::nn
