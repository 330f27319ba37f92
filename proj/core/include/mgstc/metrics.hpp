#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace mgstc {

/// Running mean with Neumaier-compensated summation.
class RunningMean {
 public:
  void add(double value);
  double mean() const;
  std::size_t count() const { return count_; }
  double sum() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
  std::size_t count_ = 0;
};

/// Entry k is the mean of the first k+1 values.
std::vector<double> cumulative_mse(std::span<const double> batch_mse);

struct BatchMetrics {
  std::size_t batch = 0;
  double mse = 0.0;
  double mae = 0.0;
  double cum_mse = 0.0;
  bool drift = false;
};

/// Append-only per-batch metric log.
class MetricTrace {
 public:
  const BatchMetrics& record(double mse, double mae, bool drift = false);
  void set_drift(std::size_t batch, bool drift);

  const std::vector<BatchMetrics>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  double final_cum_mse() const { return entries_.empty() ? 0.0 : entries_.back().cum_mse; }

  /// CSV `batch,mse,mae,cum_mse,drift`.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<BatchMetrics> entries_;
  RunningMean running_;
};

}  // namespace mgstc
