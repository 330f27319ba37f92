#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mgstc/frame.hpp"

namespace mgstc {

enum class DriftKind { mean_shift, scale_shift, correlation_shift };

std::string_view to_string(DriftKind kind);
DriftKind parse_drift_kind(std::string_view name);

/// A drift applied to rows [start, start + length); length 0 runs to the end.
///  - mean_shift: adds `magnitude` to every series.
///  - scale_shift: scales each series' deviation from its base level by (1 + magnitude).
///  - correlation_shift: moves the mean pairwise Pearson correlation of the
///    segment by `magnitude` (added shared component when positive,
///    idiosyncratic noise when negative; the target is clamped to [0.05, 0.95]).
struct DriftSegment {
  std::size_t start = 0;
  std::size_t length = 0;
  DriftKind kind = DriftKind::mean_shift;
  double magnitude = 0.0;

  /// "start,length,kind,magnitude"
  static DriftSegment parse(std::string_view text);
  std::string to_string() const;
};

struct SynthConfig {
  std::size_t n_series = 4;
  std::size_t length = 2000;
  std::size_t period = 24;        // steps per day
  double level = 10.0;
  double amplitude = 3.0;         // daily sinusoid amplitude
  double noise_std = 0.3;
  double burst_rate = 0.05;       // burst events per step
  double burst_amplitude = 3.0;
  double burst_decay = 3.0;       // e-folding time in steps
  std::size_t propagation_lag = 2;  // steps per hop on the series ring
  double propagation_gain = 0.8;    // amplitude retained per hop
  std::int64_t start_time = 1704067200;  // 2024-01-01T00:00:00Z
  std::int64_t interval = 3600;
  std::vector<DriftSegment> drifts;

  void validate() const;
};

/// Daily sinusoid per series + bursts that start at one series and spread to
/// its ring neighbours with a per-hop delay and gain + Gaussian noise, with
/// the drift plan applied on top. Same seed, same frame.
TrafficFrame synth_stream(const SynthConfig& config, std::uint64_t seed);

/// Mean pairwise Pearson correlation of rows [begin, end).
double mean_pairwise_correlation(const TrafficFrame& frame, std::size_t begin, std::size_t end);

}  // namespace mgstc
