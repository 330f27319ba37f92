#include "mgstc/adam.hpp"

#include <cmath>

#include "mgstc/error.hpp"

namespace mgstc {

void adam_step(Tensor& param, AdamState& state) {
  if (!param.has_grad()) throw UsageError("adam_step: parameter has no gradient");
  if (state.first_moment.size() != param.size() || state.second_moment.size() != param.size()) {
    throw DimensionError("adam_step: moment arrays do not match parameter of shape " +
                         shape_string(param.shape()));
  }
  const auto& h = state.hyper;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  auto values = param.mutable_data();
  auto grad = param.grad();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grad[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g * g;
    values[i] -= h.lr * (m / bc1) / (std::sqrt(v / bc2) + h.epsilon);
  }
  param.zero_grad();
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  states_.reserve(params_.size());
  for (const auto& p : params_) states_.emplace_back(p.size(), config_);
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].has_grad()) params_[i].mutable_grad();
    adam_step(params_[i], states_[i]);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::set_lr(double lr) {
  config_.lr = lr;
  for (auto& s : states_) s.hyper.lr = lr;
}

}  // namespace mgstc
