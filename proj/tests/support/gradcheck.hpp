#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "das/tensor.hpp"

// Central finite-difference oracle used by the gradient tests. `forward`
// must rebuild the computation from scratch for the given parameter values.
namespace das::testing {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;
  size_t checked = 0;
};

using ForwardFn = std::function<double(const std::vector<num::Tensor<double>>&)>;

inline double central_difference(const ForwardFn& forward,
                                 std::vector<num::Tensor<double>> params, size_t pi,
                                 int64_t elem, double h) {
  params[pi][elem] += h;
  const double up = forward(params);
  params[pi][elem] -= 2 * h;
  const double down = forward(params);
  return (up - down) / (2 * h);
}

// Compares analytic gradients against central differences elementwise.
// Pairs where both magnitudes are below `abs_floor` count as agreeing.
inline GradCheckReport compare_gradients(const ForwardFn& forward,
                                         const std::vector<num::Tensor<double>>& params,
                                         const std::vector<num::Tensor<double>>& analytic,
                                         const std::vector<std::string>& names,
                                         double h = 1e-5, double abs_floor = 1e-7) {
  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    for (int64_t e = 0; e < params[pi].numel(); ++e) {
      const double fd = central_difference(forward, params, pi, e, h);
      const double an = analytic[pi][e];
      const double denom = std::max(std::abs(fd), std::abs(an));
      ++report.checked;
      if (denom < abs_floor) continue;
      const double rel = std::abs(fd - an) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = names.empty()
                           ? "param " + std::to_string(pi)
                           : names[pi] + "[" + std::to_string(e) + "]";
      }
    }
  }
  return report;
}

}  // namespace das::testing
