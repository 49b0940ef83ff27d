#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ces/nd/optim.hpp"
#include "ces/nd/random.hpp"

namespace ces::nd {

struct GradCheckOptions {
  double step = 1e-5;
  // Per-parameter element budget; tensors at or below it are checked fully.
  std::size_t max_elements_per_param = 64;
  std::uint64_t sample_seed = 0;
  // Test hook: scales the analytic gradient before comparison.
  double corrupt_factor = 1.0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t elements_checked = 0;
};

// |a - n| / max(|a|, |n|, 1e-6): relative for ordinary magnitudes, absolute
// near zero.
inline double gradient_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

// Compares the analytic gradient of `loss_fn` (which must rebuild the graph
// from the current parameter values on each call and be deterministic)
// against central differences.
inline GradCheckResult finite_diff_check(const std::function<Var<double>()>& loss_fn,
                                         std::vector<NamedParam<double>>& params,
                                         const GradCheckOptions& opts = {}) {
  for (auto& p : params) p.var.zero_grad();
  Var<double> loss = loss_fn();
  loss.backward();
  std::vector<Tensor<double>> analytic;
  for (auto& p : params) analytic.push_back(p.var.has_grad() ? p.var.grad() : Tensor<double>(p.var.shape()));

  Rng rng(opts.sample_seed, "gradcheck");
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& value = params[k].var.mutable_value();
    std::vector<std::size_t> indices(value.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    if (indices.size() > opts.max_elements_per_param) {
      rng.shuffle(std::span<std::size_t>(indices));
      indices.resize(opts.max_elements_per_param);
    }
    for (auto i : indices) {
      const double orig = value[i];
      value[i] = orig + opts.step;
      const double up = loss_fn().value()[0];
      value[i] = orig - opts.step;
      const double down = loss_fn().value()[0];
      value[i] = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double err = gradient_relative_error(analytic[k][i] * opts.corrupt_factor, numeric);
      ++result.elements_checked;
      if (result.worst_param.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = params[k].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace ces::nd
