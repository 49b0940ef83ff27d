#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ces/nd/autodiff.hpp"

namespace ces::nd {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

// Linear decay from base_lr at step 0 to zero at total_steps, no warmup.
class LrSchedule {
 public:
  LrSchedule(double base_lr, std::uint64_t total_steps) : base_lr_(base_lr), total_steps_(total_steps) {
    if (total_steps == 0) throw std::invalid_argument("LrSchedule: total_steps must be positive");
  }

  double operator()(std::uint64_t step) const {
    const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps_);
    return base_lr_ * std::max(0.0, frac);
  }

  double base_lr() const { return base_lr_; }
  std::uint64_t total_steps() const { return total_steps_; }

 private:
  double base_lr_;
  std::uint64_t total_steps_;
};

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedParam<T>>& params, AdamOptions options = {}) {
  AdamState<T> s;
  s.options = options;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.var.shape());
    s.second_moment.emplace_back(p.var.shape());
  }
  return s;
}

// One bias-corrected Adam update using each parameter's accumulated
// gradient. Throws before touching any parameter if a gradient is not finite.
template <typename T>
void adam_step(std::vector<NamedParam<T>>& params, AdamState<T>& state, double lr) {
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameter list");
  }
  for (auto& p : params) {
    if (!p.var.has_grad()) continue;
    // x - x is 0 for finite x and NaN otherwise.
    const auto g = p.var.grad().mat().array();
    if (!((g - g).sum() == T(0))) throw std::runtime_error("adam_step: non-finite gradient in " + p.name);
  }
  state.step += 1;
  const auto& o = state.options;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const T b1 = T(o.beta1);
  const T b2 = T(o.beta2);
  const T step_size = T(lr / bc1);
  const T inv_sqrt_bc2 = T(1.0 / std::sqrt(bc2));
  const T eps = T(o.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& var = params[k].var;
    if (!var.has_grad()) continue;
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.shape() != var.shape()) throw std::invalid_argument("adam_step: state shape mismatch for " + params[k].name);
    using Array = Eigen::Array<T, Eigen::Dynamic, 1>;
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::Map<const Array> g(var.grad().data(), n);
    Eigen::Map<Array> mm(m.data(), n);
    Eigen::Map<Array> vv(v.data(), n);
    Eigen::Map<Array> w(var.mutable_value().data(), n);
    mm = b1 * mm + (T(1) - b1) * g;
    vv = b2 * vv + (T(1) - b2) * g.square();
    w -= step_size * mm / (vv.sqrt() * inv_sqrt_bc2 + eps);
  }
}

}  // namespace ces::nd
