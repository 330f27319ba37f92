#include "mgstc/trainer.hpp"

#include <algorithm>

#include "mgstc/error.hpp"
#include "mgstc/metrics.hpp"
#include "mgstc/rng.hpp"

namespace mgstc {

double evaluate_mse(const Model& model, const WindowRange& windows, std::size_t batch_size) {
  if (windows.empty()) throw UsageError("evaluate_mse: no windows");
  if (batch_size == 0) throw UsageError("evaluate_mse: batch size must be positive");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t first = 0; first < windows.size(); first += batch_size) {
    const auto batch = windows.batch(first, batch_size);
    const auto pred = model.predict(batch);
    std::size_t k = 0;
    for (const auto& s : batch) {
      for (double y : s.target) {
        const double e = pred[k++] - y;
        total += e * e;
      }
    }
    count += pred.size();
  }
  return total / static_cast<double>(count);
}

TrainResult train_offline(Model& model, Adam& optimizer, const WindowRange& train, const WindowRange& val,
                          const TrainOptions& options, const std::function<void(const EpochLog&)>& on_epoch) {
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  if (options.max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (train.empty() || val.empty()) throw ConfigError("training and validation segments need at least one window");

  TrainResult result;
  result.initial_val_mse = evaluate_mse(model, val);
  result.best_val_mse = result.initial_val_mse;

  Model best = model.clone();
  std::vector<AdamState> best_moments = optimizer.states();
  std::size_t stale = 0;
  Rng rng(options.seed);

  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    const auto order = rng.permutation(train.size());
    RunningMean epoch_loss;
    bool out_of_steps = false;
    for (std::size_t first = 0; first < order.size(); first += options.batch_size) {
      if (options.max_steps && result.steps >= options.max_steps) {
        out_of_steps = true;
        break;
      }
      const std::size_t end = std::min(order.size(), first + options.batch_size);
      std::vector<Sample> batch;
      batch.reserve(end - first);
      for (std::size_t i = first; i < end; ++i) batch.push_back(train[order[i]]);
      Tensor loss = model.loss(batch);
      epoch_loss.add(loss.item());
      loss.backward();
      optimizer.step();
      ++result.steps;
    }

    EpochLog log;
    log.epoch = epoch;
    log.steps = result.steps;
    log.train_mse = epoch_loss.count() ? epoch_loss.mean() : 0.0;
    log.val_mse = evaluate_mse(model, val);
    log.improved = log.val_mse < result.best_val_mse;
    if (log.improved) {
      result.best_val_mse = log.val_mse;
      result.best_epoch = epoch;
      best.copy_values_from(model);
      best_moments = optimizer.states();
      stale = 0;
    } else {
      ++stale;
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);

    if (stale >= options.patience) {
      result.early_stopped = true;
      break;
    }
    if (out_of_steps || (options.max_steps && result.steps >= options.max_steps)) break;
  }

  model.copy_values_from(best);
  optimizer.states() = best_moments;
  return result;
}

}  // namespace mgstc
