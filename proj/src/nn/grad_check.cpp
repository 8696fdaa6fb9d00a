#include "dmnrank/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "dmnrank/error.hpp"

namespace dmnrank::nn {

GradCheckResult grad_check(const std::function<double()>& f, std::span<double> x, std::span<const double> analytic,
                           double h) {
  if (x.size() != analytic.size()) throw ShapeError("grad_check: gradient size differs from parameter size");
  if (!(h > 0.0)) throw ConfigError("grad_check: step must be positive");
  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_index = i;
      result.analytic_at_worst = analytic[i];
      result.numeric_at_worst = numeric;
    }
  }
  return result;
}

}  // namespace dmnrank::nn
