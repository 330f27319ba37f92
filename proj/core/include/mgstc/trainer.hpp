#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "mgstc/adam.hpp"
#include "mgstc/frame.hpp"
#include "mgstc/model.hpp"

namespace mgstc {

struct TrainOptions {
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;
  std::size_t max_steps = 0;      // 0: no step limit
  std::size_t window_stride = 1;
  std::uint64_t seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;          // 1-based
  std::size_t steps = 0;          // cumulative optimizer steps
  double train_mse = 0.0;         // mean of the epoch's mini-batch losses
  double val_mse = 0.0;
  bool improved = false;
};

struct TrainResult {
  double initial_val_mse = 0.0;
  double best_val_mse = 0.0;
  std::size_t best_epoch = 0;     // 0: the untrained model was never beaten
  std::size_t steps = 0;
  bool early_stopped = false;
  std::vector<EpochLog> epochs;
};

/// Mean squared error of `model` over every window, in batches.
double evaluate_mse(const Model& model, const WindowRange& windows, std::size_t batch_size = 64);

/// Mini-batch Adam over shuffled training windows with early stopping on
/// validation MSE. On return the model and optimizer hold the state of the
/// best validation epoch. `on_epoch` (optional) sees each log entry.
TrainResult train_offline(Model& model, Adam& optimizer, const WindowRange& train, const WindowRange& val,
                          const TrainOptions& options, const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace mgstc
