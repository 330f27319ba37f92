#include "mgstc/online.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "mgstc/error.hpp"
#include "mgstc/ops.hpp"

namespace mgstc {

std::string_view to_string(ReplayMode mode) { return mode == ReplayMode::mini_batch ? "batch" : "single"; }

ReplayMode parse_replay_mode(std::string_view name) {
  if (name == "batch") return ReplayMode::mini_batch;
  if (name == "single") return ReplayMode::single_sample;
  throw ConfigError("unknown replay mode '" + std::string(name) + "' (expected batch or single)");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::frozen: return "frozen";
    case Stage::fine_tune: return "fine_tune";
    case Stage::fine_tune_aggressive: return "fine_tune+aggressive";
  }
  return "unknown";
}

void OnlineConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("drift threshold d must lie in (0, 1)");
  if (buffer_capacity == 0) throw ConfigError("buffer capacity must be positive");
  if (repository_capacity == 0) throw ConfigError("repository capacity must be positive");
  if (eta_fine < 0.0 || eta_aggressive < 0.0) throw ConfigError("eta coefficients must be non-negative");
  if (perturbation_variance < 0.0) throw ConfigError("perturbation variance must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(sigma_floor > 0.0)) throw ConfigError("sigma floor must be positive");
}

// ---------------------------------------------------------------------------
// Replay stores

ReplayStores::ReplayStores(std::size_t buffer_capacity, std::size_t repository_capacity)
    : buffer_capacity_(buffer_capacity), repository_capacity_(repository_capacity) {
  if (buffer_capacity == 0 || repository_capacity == 0) throw ConfigError("store capacities must be positive");
}

void ReplayStores::push(Sample sample, double loss) {
  if (buffer_.size() == buffer_capacity_) buffer_.pop_front();
  buffer_.push_back({std::move(sample), loss});
}

std::size_t ReplayStores::flush_to_repository() {
  const std::size_t moved = buffer_.size();
  for (auto& entry : buffer_) {
    if (repository_.size() == repository_capacity_) repository_.pop_front();
    repository_.push_back(std::move(entry.sample));
  }
  buffer_.clear();
  return moved;
}

std::vector<double> ReplayStores::buffer_losses() const {
  std::vector<double> out;
  out.reserve(buffer_.size());
  for (const auto& e : buffer_) out.push_back(e.loss);
  return out;
}

// ---------------------------------------------------------------------------
// Drift monitor

DriftVerdict drift_test(double batch_mean, double batch_std, std::size_t batch_count, double window_mean,
                        double threshold, double sigma_floor) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("drift threshold d must lie in (0, 1)");
  if (batch_count == 0) throw UsageError("drift_test: empty batch");
  DriftVerdict v;
  v.warming_up = false;
  const double sigma = std::max(batch_std, sigma_floor);
  v.z_statistic = (batch_mean - window_mean) / (sigma / std::sqrt(static_cast<double>(batch_count)));
  v.p_value = 0.5 * std::erfc(v.z_statistic / std::sqrt(2.0));
  v.drifted = v.p_value < threshold;
  return v;
}

namespace {

double mean_of(std::span<const double> xs) {
  RunningMean m;
  for (double x : xs) m.add(x);
  return m.mean();
}

double sample_std(std::span<const double> xs) {
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

DriftVerdict warm_up(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("drift threshold d must lie in (0, 1)");
  return DriftVerdict{};
}

}  // namespace

DriftVerdict monitor_check(std::span<const double> batch_losses, std::span<const double> loss_window,
                           double threshold, double sigma_floor) {
  if (loss_window.empty() || batch_losses.size() < 2) return warm_up(threshold);
  return drift_test(mean_of(batch_losses), sample_std(batch_losses), batch_losses.size(), mean_of(loss_window),
                    threshold, sigma_floor);
}

DriftMonitor::DriftMonitor(double threshold, double sigma_floor) : threshold_(threshold), sigma_floor_(sigma_floor) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("drift threshold d must lie in (0, 1)");
}

DriftVerdict DriftMonitor::check(std::span<const double> batch_losses, std::span<const double> loss_window,
                                 std::size_t batch_index) {
  DriftVerdict v;
  if (batch_losses.size() == 1) {
    recent_.push_back(batch_losses[0]);
    while (recent_.size() > single_sample_history) recent_.pop_front();
    if (loss_window.empty() || recent_.size() < 2) {
      v = warm_up(threshold_);
    } else {
      std::vector<double> spread(recent_.begin(), recent_.end());
      v = drift_test(batch_losses[0], sample_std(spread), 1, mean_of(loss_window), threshold_, sigma_floor_);
    }
  } else {
    v = monitor_check(batch_losses, loss_window, threshold_, sigma_floor_);
  }
  v.batch_index = batch_index;
  return v;
}

void DriftMonitor::reset() { recent_.clear(); }

// ---------------------------------------------------------------------------
// Update stages

Sample augment_sample(const Sample& sample, double variance, Rng& rng) {
  if (variance < 0.0) throw ConfigError("perturbation variance must be non-negative");
  Sample out = sample;
  if (variance == 0.0) return out;
  const double sd = std::sqrt(variance);
  for (auto& v : out.input) v += rng.normal(0.0, sd);
  return out;
}

OnlineLearner::OnlineLearner(Model& model, Adam& optimizer, OnlineConfig config, std::uint64_t seed)
    : model_(model),
      optimizer_(optimizer),
      config_(config),
      rng_(seed),
      stores_(config.buffer_capacity, config.repository_capacity),
      monitor_(config.threshold, config.sigma_floor) {
  config_.validate();
}

std::vector<Sample> OnlineLearner::draw_from_buffer(std::size_t count) {
  const auto& buffer = stores_.buffer();
  count = std::min(count, buffer.size());
  // Partial Fisher-Yates: uniform without replacement.
  std::vector<std::size_t> idx(buffer.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng_.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(buffer[idx[i]].sample);
  }
  return out;
}

FineTuneResult OnlineLearner::fine_tune_step(std::span<const Sample> current, std::span<const double> test_losses) {
  if (current.empty()) throw UsageError("fine_tune_step: empty batch");
  if (test_losses.size() != current.size()) throw DimensionError("fine_tune_step: one test loss per sample required");
  FineTuneResult r;
  Tensor total = model_.loss(current);
  r.current_loss = total.item();
  if (config_.eta_fine > 0.0 && !stores_.buffer().empty()) {
    const std::size_t want = config_.replay == ReplayMode::single_sample ? 1 : config_.batch_size;
    auto replay = draw_from_buffer(want);
    Tensor replay_loss = model_.loss(replay);
    r.replay_loss = replay_loss.item();
    r.replayed = replay.size();
    total = add(total, scale(replay_loss, config_.eta_fine));
  }
  r.total_loss = total.item();
  total.backward();
  optimizer_.step();
  for (std::size_t i = 0; i < current.size(); ++i) stores_.push(current[i], test_losses[i]);
  return r;
}

AggressiveResult OnlineLearner::aggressive_update() {
  AggressiveResult r;
  const auto& buffer = stores_.buffer();
  const auto& history = stores_.repository();
  for (std::size_t epoch = 0; epoch < config_.aggressive_epochs && !buffer.empty(); ++epoch) {
    const auto order = rng_.permutation(buffer.size());
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      std::vector<Sample> recent;
      for (std::size_t i = start; i < end; ++i) recent.push_back(buffer[order[i]].sample);
      Tensor total = model_.loss(recent);
      r.buffer_loss = total.item();
      r.history_loss = 0.0;
      if (config_.eta_aggressive > 0.0 && !history.empty()) {
        std::vector<Sample> older;
        for (std::size_t i = 0; i < recent.size(); ++i) {
          older.push_back(augment_sample(history[rng_.index(history.size())], config_.perturbation_variance, rng_));
        }
        Tensor history_loss = model_.loss(older);
        r.history_loss = history_loss.item();
        total = add(total, scale(history_loss, config_.eta_aggressive));
      }
      r.total_loss = total.item();
      total.backward();
      optimizer_.step();
      ++r.steps;
    }
  }
  r.moved_to_history = stores_.flush_to_repository();
  monitor_.reset();
  return r;
}

OnlineLearner::Outcome OnlineLearner::process(std::span<const Sample> batch, std::span<const double> test_losses,
                                              std::size_t batch_index) {
  Outcome out;
  const auto window = stores_.buffer_losses();
  out.verdict = monitor_.check(test_losses, window, batch_index);
  out.fine = fine_tune_step(batch, test_losses);
  out.stage = Stage::fine_tune;
  if (out.verdict.drifted) {
    out.aggressive = aggressive_update();
    out.stage = Stage::fine_tune_aggressive;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stream loop

std::vector<double> per_sample_losses(std::span<const double> predictions, std::span<const Sample> batch,
                                      std::size_t n_series, std::size_t horizon) {
  const std::size_t per = n_series * horizon;
  if (predictions.size() != batch.size() * per) throw DimensionError("per_sample_losses: prediction count mismatch");
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out.push_back(mse(predictions.subspan(b * per, per), batch[b].target));
  }
  return out;
}

namespace {

struct Pending {
  std::size_t batch;
  std::vector<Sample> samples;
  std::vector<double> losses;
  std::size_t label_ready;
};

}  // namespace

OnlineTrace online_loop(Model& model, Adam& optimizer, const WindowRange& stream, const StreamOptions& options) {
  const auto& cfg = options.online;
  cfg.validate();
  const std::size_t n = model.config().n_series;
  const std::size_t tau = model.config().horizon;
  const std::size_t history = model.config().chunking.history;

  OnlineTrace trace;
  std::optional<OnlineLearner> learner;
  if (cfg.updates_enabled) learner.emplace(model, optimizer, cfg, options.seed);

  std::deque<Pending> pending;
  auto settle = [&](Pending& p) {
    auto outcome = learner->process(p.samples, p.losses, p.batch);
    auto& rec = trace.records[p.batch];
    rec.verdict = outcome.verdict;
    rec.stage = outcome.stage;
    rec.losses.current = outcome.fine.current_loss;
    rec.losses.replay = outcome.fine.replay_loss;
    rec.losses.fine_total = outcome.fine.total_loss;
    rec.losses.eta_fine = cfg.eta_fine;
    rec.losses.eta_aggressive = cfg.eta_aggressive;
    if (outcome.aggressive) {
      rec.losses.buffer = outcome.aggressive->buffer_loss;
      rec.losses.history = outcome.aggressive->history_loss;
      rec.losses.aggressive_total = outcome.aggressive->total_loss;
      trace.aggressive_steps += outcome.aggressive->steps;
      ++trace.drift_events;
    }
    trace.metrics.set_drift(p.batch, outcome.verdict.drifted);
  };

  const std::size_t total = stream.size();
  for (std::size_t first = 0, batch = 0; first < total; first += cfg.batch_size, ++batch) {
    auto samples = stream.batch(first, cfg.batch_size);
    const std::size_t last = first + samples.size() - 1;
    const std::size_t arrival = stream.start_of(last) + history - 1;

    while (learner && !pending.empty() && pending.front().label_ready <= arrival) {
      settle(pending.front());
      pending.pop_front();
    }

    const auto predictions = model.predict(samples);
    const auto losses = per_sample_losses(predictions, samples, n, tau);

    std::vector<double> flat_pred = predictions, flat_target;
    flat_target.reserve(predictions.size());
    for (const auto& s : samples) flat_target.insert(flat_target.end(), s.target.begin(), s.target.end());
    if (options.denormalize) {
      for (std::size_t i = 0; i < flat_pred.size(); ++i) {
        const std::size_t series = (i / tau) % n;
        flat_pred[i] = options.denormalize->inverse_value(series, flat_pred[i]);
        flat_target[i] = options.denormalize->inverse_value(series, flat_target[i]);
      }
    }
    const auto& m = trace.metrics.record(mse(flat_pred, flat_target), mae(flat_pred, flat_target));
    BatchRecord rec;
    rec.batch = batch;
    rec.mse = m.mse;
    rec.mae = m.mae;
    rec.cum_mse = m.cum_mse;
    rec.verdict.batch_index = batch;
    trace.records.push_back(rec);

    if (options.sink) {
      const std::size_t per = n * tau;
      for (std::size_t b = 0; b < samples.size(); ++b) {
        options.sink(batch, first + b, samples[b], std::span<const double>(predictions).subspan(b * per, per));
      }
    }

    if (learner) {
      pending.push_back({batch, std::move(samples), losses, stream.start_of(last) + history + tau - 1});
    }
  }
  while (learner && !pending.empty()) {
    settle(pending.front());
    pending.pop_front();
  }
  return trace;
}

namespace {
std::string json_number(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}
}  // namespace

void write_drift_log(const OnlineTrace& trace, std::ostream& out) {
  for (const auto& r : trace.records) {
    out << "{\"batch_index\":" << r.batch << ",\"z\":" << json_number(r.verdict.z_statistic)
        << ",\"p_value\":" << json_number(r.verdict.p_value) << ",\"drifted\":" << (r.verdict.drifted ? "true" : "false")
        << ",\"stage\":\"" << to_string(r.stage) << "\"}\n";
  }
}

}  // namespace mgstc
