#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mgstc/adam.hpp"
#include "mgstc/frame.hpp"
#include "mgstc/metrics.hpp"
#include "mgstc/model.hpp"
#include "mgstc/rng.hpp"
#include "mgstc/sample.hpp"

namespace mgstc {

/// How the fine-tuning stage replays from the buffer.
enum class ReplayMode { mini_batch, single_sample };

std::string_view to_string(ReplayMode mode);
ReplayMode parse_replay_mode(std::string_view name);

struct OnlineConfig {
  double threshold = 0.05;                 // d
  std::size_t buffer_capacity = 100;       // |B|
  std::size_t repository_capacity = 256;   // |H|
  double eta_fine = 0.5;                   // weight of the replayed loss while fine-tuning
  double eta_aggressive = 0.5;             // weight of the history loss in aggressive updates
  std::size_t aggressive_epochs = 5;
  double perturbation_variance = 0.0025;   // xi, variance of the history perturbation
  std::size_t batch_size = 16;
  ReplayMode replay = ReplayMode::mini_batch;
  double sigma_floor = 1e-8;
  bool updates_enabled = true;             // false: frozen model, no monitor, no updates

  void validate() const;
};

struct BufferEntry {
  Sample sample;
  double loss = 0.0;
};

/// FIFO buffer B of recent samples with their test losses, and FIFO
/// repository H of older samples. Both evict oldest-first at capacity.
class ReplayStores {
 public:
  ReplayStores(std::size_t buffer_capacity, std::size_t repository_capacity);

  void push(Sample sample, double loss);
  /// Moves every buffered sample into the repository in arrival order, then
  /// empties the buffer. Returns the number of samples moved.
  std::size_t flush_to_repository();

  const std::deque<BufferEntry>& buffer() const { return buffer_; }
  const std::deque<Sample>& repository() const { return repository_; }
  std::vector<double> buffer_losses() const;
  std::size_t buffer_capacity() const { return buffer_capacity_; }
  std::size_t repository_capacity() const { return repository_capacity_; }

 private:
  std::size_t buffer_capacity_;
  std::size_t repository_capacity_;
  std::deque<BufferEntry> buffer_;
  std::deque<Sample> repository_;
};

/// Monitor output for one batch. `drifted == (p_value < threshold)`; a
/// warm-up verdict (no reference losses yet) reports z = 0, p = 1.
struct DriftVerdict {
  double z_statistic = 0.0;
  double p_value = 1.0;
  bool drifted = false;
  bool warming_up = true;
  std::size_t batch_index = 0;
};

/// Upper-tail test of a loss increase:
///   z = (batch_mean - window_mean) / (max(batch_std, floor) / sqrt(batch_count)),
///   p = 1 - Phi(z), drift when p < threshold.
DriftVerdict drift_test(double batch_mean, double batch_std, std::size_t batch_count, double window_mean,
                        double threshold, double sigma_floor = 1e-8);

/// drift_test over raw losses: mean/std (n - 1 denominator) of `batch_losses`
/// against the mean of `loss_window`. Needs at least two batch losses for a
/// spread; otherwise, or with an empty window, the verdict is warm-up.
DriftVerdict monitor_check(std::span<const double> batch_losses, std::span<const double> loss_window,
                           double threshold, double sigma_floor = 1e-8);

/// Stateful wrapper. With single-sample batches the spread comes from the
/// most recent min(8, available) test losses; `reset()` forgets them.
class DriftMonitor {
 public:
  explicit DriftMonitor(double threshold, double sigma_floor = 1e-8);

  DriftVerdict check(std::span<const double> batch_losses, std::span<const double> loss_window,
                     std::size_t batch_index);
  void reset();
  double threshold() const { return threshold_; }

  static constexpr std::size_t single_sample_history = 8;

 private:
  double threshold_;
  double sigma_floor_;
  std::deque<double> recent_;
};

/// Copy of `sample` whose input carries i.i.d. N(0, variance) noise.
Sample augment_sample(const Sample& sample, double variance, Rng& rng);

struct FineTuneResult {
  double current_loss = 0.0;
  double replay_loss = 0.0;
  double total_loss = 0.0;
  std::size_t replayed = 0;
};

struct AggressiveResult {
  double buffer_loss = 0.0;
  double history_loss = 0.0;
  double total_loss = 0.0;
  std::size_t steps = 0;
  std::size_t moved_to_history = 0;
};

enum class Stage { frozen, fine_tune, fine_tune_aggressive };
std::string_view to_string(Stage stage);

struct StageLosses {
  double current = 0.0;
  double replay = 0.0;
  double fine_total = 0.0;
  double buffer = 0.0;
  double history = 0.0;
  double aggressive_total = 0.0;
  double eta_fine = 0.0;
  double eta_aggressive = 0.0;
};

/// Fine-tuning and aggressive-update stages around one model and optimizer.
class OnlineLearner {
 public:
  OnlineLearner(Model& model, Adam& optimizer, OnlineConfig config, std::uint64_t seed);

  /// L = L(current) + eta_fine * L(replay) with the replay drawn from B
  /// (zero when B is empty or eta_fine is 0); one backward pass and one
  /// optimizer step; then the current samples enter B with `test_losses`.
  FineTuneResult fine_tune_step(std::span<const Sample> current, std::span<const double> test_losses);

  /// For each epoch, one pass over B in shuffled mini-batches, each paired
  /// with an equal-sized perturbed draw (with replacement) from H:
  /// L = L(B batch) + eta_aggressive * L(H batch). Afterwards B moves into H
  /// and the monitor resets.
  AggressiveResult aggressive_update();

  struct Outcome {
    DriftVerdict verdict;
    Stage stage = Stage::fine_tune;
    FineTuneResult fine;
    std::optional<AggressiveResult> aggressive;
  };

  /// One labelled batch: drift test against the losses already in B, then
  /// fine-tuning, then the aggressive update if drift was flagged.
  Outcome process(std::span<const Sample> batch, std::span<const double> test_losses, std::size_t batch_index);

  ReplayStores& stores() { return stores_; }
  const ReplayStores& stores() const { return stores_; }
  DriftMonitor& monitor() { return monitor_; }
  const OnlineConfig& config() const { return config_; }

 private:
  std::vector<Sample> draw_from_buffer(std::size_t count);

  Model& model_;
  Adam& optimizer_;
  OnlineConfig config_;
  Rng rng_;
  ReplayStores stores_;
  DriftMonitor monitor_;
};

/// Per-sample MSE of predictions laid out as Model::forward returns them.
std::vector<double> per_sample_losses(std::span<const double> predictions, std::span<const Sample> batch,
                                      std::size_t n_series, std::size_t horizon);

struct BatchRecord {
  std::size_t batch = 0;
  double mse = 0.0;
  double mae = 0.0;
  double cum_mse = 0.0;
  DriftVerdict verdict;
  Stage stage = Stage::frozen;
  StageLosses losses;
};

struct OnlineTrace {
  MetricTrace metrics;
  std::vector<BatchRecord> records;
  std::size_t drift_events = 0;
  std::size_t aggressive_steps = 0;
};

/// Receives every prediction: batch index, window index, the window and the
/// model output for it ([N x tau], series-major).
using PredictionSink = std::function<void(std::size_t batch, std::size_t window, const Sample& sample,
                                          std::span<const double> prediction)>;

struct StreamOptions {
  OnlineConfig online;
  std::uint64_t seed = 0;
  /// When set, metrics are computed after mapping predictions and targets
  /// back to raw units.
  const Normalizer* denormalize = nullptr;
  PredictionSink sink;
};

/// Replays `stream` in batches of online.batch_size. Each batch is predicted
/// and scored on arrival; its labels become available once the stream has
/// advanced past its last target step, at which point the batch is handed to
/// OnlineLearner::process. Batches still waiting at stream end are processed
/// after the last prediction.
OnlineTrace online_loop(Model& model, Adam& optimizer, const WindowRange& stream, const StreamOptions& options);

/// Newline-delimited JSON: {"batch_index":..,"z":..,"p_value":..,"drifted":..,"stage":".."}.
void write_drift_log(const OnlineTrace& trace, std::ostream& out);

}  // namespace mgstc
