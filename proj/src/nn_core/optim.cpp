#include "bwe/nn/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bwe::nn {

OptimizerState OptimizerState::for_params(const std::vector<Tensor>& params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.numel(), Real{0});
    s.second_moment.emplace_back(p.numel(), Real{0});
  }
  return s;
}

void adamw_step(std::vector<Tensor>& params, OptimizerState& state, double lr) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adamw_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.size() != p.numel() || v.size() != p.numel()) {
      throw std::invalid_argument("adamw_step: moment shape mismatch for parameter " + std::to_string(i));
    }
    auto value = p.data();
    const bool has = p.has_grad();
    const auto grad = has ? p.grad() : std::span<const Real>{};
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = has ? grad[j] : 0.0;
      value[j] -= lr * state.weight_decay * value[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      value[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double lr_at(const LrSchedule& sched, std::int64_t epoch) {
  if (epoch < 0) throw std::invalid_argument("lr_at: epoch must be non-negative");
  if (!(sched.gamma > 0.0 && sched.gamma <= 1.0)) throw std::invalid_argument("lr_at: gamma must lie in (0, 1]");
  return std::pow(sched.gamma, static_cast<double>(epoch)) * sched.lr_init;
}

}  // namespace bwe::nn
