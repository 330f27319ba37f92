#pragma once

#include <cstdint>
#include <vector>

#include "mgstc/tensor.hpp"

namespace mgstc {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments shadowing one parameter tensor.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  AdamConfig hyper;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig config)
      : first_moment(size, 0.0), second_moment(size, 0.0), hyper(config) {}
};

/// One bias-corrected Adam update of `param` from its gradient, which is then
/// cleared. Throws UsageError when the parameter has no gradient.
void adam_step(Tensor& param, AdamState& state);

/// Adam over a fixed parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, AdamConfig config);

  /// Steps every parameter. Parameters that received no gradient in the last
  /// backward pass are treated as having a zero gradient.
  void step();
  void zero_grad();

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr);
  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamConfig config_;
};

}  // namespace mgstc
