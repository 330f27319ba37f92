#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "mgstc/sample.hpp"

namespace mgstc {

/// Gamma x N observation matrix (time-major) with uniformly spaced
/// timestamps in epoch seconds.
struct TrafficFrame {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> series_ids;
  std::vector<double> values;
  std::int64_t interval = 0;

  std::size_t length() const { return timestamps.size(); }
  std::size_t series() const { return series_ids.size(); }
  double at(std::size_t t, std::size_t n) const { return values[t * series() + n]; }
  double& at(std::size_t t, std::size_t n) { return values[t * series() + n]; }
  std::vector<double> column(std::size_t n) const;
  /// Rows [begin, end).
  TrafficFrame slice(std::size_t begin, std::size_t end) const;
  /// Throws FormatError when sizes disagree or spacing is not uniform.
  void validate() const;

  friend bool operator==(const TrafficFrame&, const TrafficFrame&) = default;
};

/// Accepts epoch seconds ("1383264000") or ISO-8601 UTC
/// ("2013-11-01 00:00", "2013-11-01T00:00:00Z").
std::int64_t parse_timestamp(std::string_view text);
/// "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(std::int64_t epoch_seconds);

/// Header `timestamp,<id_1>,...,<id_N>`. Rows are sorted by time; duplicate
/// timestamps raise ParseError naming the line, uneven spacing FormatError.
TrafficFrame read_csv(std::istream& in);
TrafficFrame load_csv(const std::filesystem::path& path);
/// Shortest round-trip decimal formatting; read_csv(write_csv(f)) == f.
void write_csv(const TrafficFrame& frame, std::ostream& out);
void save_csv(const TrafficFrame& frame, const std::filesystem::path& path);

/// Exponentially weighted smoothing per series: s_0 = x_0,
/// s_t = alpha x_t + (1 - alpha) s_{t-1}.
TrafficFrame ewm_smooth(const TrafficFrame& frame, double alpha = 0.3);

/// Chronological train:val:test ratio.
struct SplitSpec {
  unsigned train = 5;
  unsigned val = 2;
  unsigned test = 55;

  static SplitSpec parse(std::string_view text);
  std::string to_string() const;
  void validate() const;
};

struct SegmentBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t total = 0;
};

/// train gets floor(total*train/sum) rows, val floor(total*val/sum), test the rest.
SegmentBounds split_bounds(std::size_t total, const SplitSpec& spec);

/// Per-series z-score fitted on one frame (the training segment).
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> means, std::vector<double> stds);

  static Normalizer fit(const TrafficFrame& frame);

  TrafficFrame transform(const TrafficFrame& frame) const;
  TrafficFrame inverse(const TrafficFrame& frame) const;
  double transform_value(std::size_t series, double value) const;
  double inverse_value(std::size_t series, double value) const;

  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& stds() const { return stds_; }

  static constexpr double std_floor = 1e-8;

 private:
  std::vector<double> means_;
  std::vector<double> stds_;
};

struct SplitResult {
  TrafficFrame train;
  TrafficFrame val;
  TrafficFrame test;
  Normalizer normalizer;
};

/// Splits chronologically, fits the normalizer on train only and transforms
/// all three segments. Every segment must hold at least `min_segment_length`
/// rows (history + horizon) or ConfigError is thrown.
SplitResult split_and_normalize(const TrafficFrame& frame, const SplitSpec& spec, std::size_t min_segment_length);

/// Lazy view of the sliding (input, target) windows of a frame. Samples are
/// materialized on access; the frame must outlive the range.
class WindowRange {
 public:
  WindowRange(const TrafficFrame& frame, std::size_t history, std::size_t horizon, std::size_t stride = 1);

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  /// First input row of window i.
  std::size_t start_of(std::size_t i) const { return i * stride_; }
  Sample operator[](std::size_t i) const;
  /// Windows [first, first + count) clipped to the range.
  std::vector<Sample> batch(std::size_t first, std::size_t count) const;

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Sample;
    using difference_type = std::ptrdiff_t;
    using pointer = void;
    using reference = Sample;

    iterator() = default;
    iterator(const WindowRange* range, std::size_t pos) : range_(range), pos_(pos) {}
    Sample operator*() const { return (*range_)[pos_]; }
    iterator& operator++() { ++pos_; return *this; }
    iterator operator++(int) { auto old = *this; ++pos_; return old; }
    bool operator==(const iterator& other) const { return pos_ == other.pos_; }

   private:
    const WindowRange* range_ = nullptr;
    std::size_t pos_ = 0;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, count_}; }

 private:
  const TrafficFrame* frame_;
  std::size_t history_;
  std::size_t horizon_;
  std::size_t stride_;
  std::size_t count_;
};

/// Count = (length - history - horizon) / stride + 1; ConfigError when the
/// frame is shorter than history + horizon.
WindowRange windows(const TrafficFrame& frame, std::size_t history, std::size_t horizon, std::size_t stride = 1);

}  // namespace mgstc
