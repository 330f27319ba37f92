#include "mgstc/metrics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

#include "mgstc/error.hpp"

namespace mgstc {

void RunningMean::add(double value) {
  const double t = sum_ + value;
  if (std::abs(sum_) >= std::abs(value)) {
    compensation_ += (sum_ - t) + value;
  } else {
    compensation_ += (value - t) + sum_;
  }
  sum_ = t;
  ++count_;
}

double RunningMean::mean() const {
  return count_ == 0 ? 0.0 : (sum_ + compensation_) / static_cast<double>(count_);
}

std::vector<double> cumulative_mse(std::span<const double> batch_mse) {
  if (batch_mse.empty()) throw UsageError("cumulative_mse: empty trace");
  std::vector<double> out;
  out.reserve(batch_mse.size());
  RunningMean running;
  for (double v : batch_mse) {
    running.add(v);
    out.push_back(running.mean());
  }
  return out;
}

const BatchMetrics& MetricTrace::record(double mse, double mae, bool drift) {
  running_.add(mse);
  entries_.push_back({entries_.size(), mse, mae, running_.mean(), drift});
  return entries_.back();
}

void MetricTrace::set_drift(std::size_t batch, bool drift) {
  if (batch >= entries_.size()) throw UsageError("set_drift: unknown batch " + std::to_string(batch));
  entries_[batch].drift = drift;
}

namespace {
std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}
}  // namespace

void MetricTrace::write_csv(std::ostream& out) const {
  out << "batch,mse,mae,cum_mse,drift\n";
  for (const auto& e : entries_) {
    out << e.batch << ',' << fmt(e.mse) << ',' << fmt(e.mae) << ',' << fmt(e.cum_mse) << ',' << (e.drift ? 1 : 0) << '\n';
  }
}

}  // namespace mgstc
