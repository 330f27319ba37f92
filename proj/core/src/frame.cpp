#include "mgstc/frame.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mgstc/error.hpp"

namespace mgstc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool parse_int(std::string_view s, long long& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::int64_t parse_timestamp(std::string_view text) {
  text = trim(text);
  long long epoch = 0;
  if (parse_int(text, epoch)) return epoch;

  // YYYY-MM-DD[T| ]HH:MM[:SS][Z]
  auto number = [&](std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    long long v = 0;
    if (!parse_int(text.substr(pos, len), v)) return false;
    out = static_cast<int>(v);
    return true;
  };
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  if (text.size() < 16 || !number(0, 4, year) || text[4] != '-' || !number(5, 2, month) || text[7] != '-' ||
      !number(8, 2, day) || (text[10] != 'T' && text[10] != ' ') || !number(11, 2, hour) || text[13] != ':' ||
      !number(14, 2, minute)) {
    throw ParseError("unrecognized timestamp '" + std::string(text) + "'");
  }
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (!number(pos + 1, 2, second)) throw ParseError("unrecognized timestamp '" + std::string(text) + "'");
    pos += 3;
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) throw ParseError("unrecognized timestamp '" + std::string(text) + "'");

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw ParseError("invalid calendar time '" + std::string(text) + "'");
  }
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hour * 3600 + minute * 60 + second;
}

std::string format_timestamp(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const auto day_count = static_cast<int>(std::floor(static_cast<double>(epoch_seconds) / 86400.0));
  const std::int64_t rem = epoch_seconds - static_cast<std::int64_t>(day_count) * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
  return buf;
}

std::vector<double> TrafficFrame::column(std::size_t n) const {
  std::vector<double> out(length());
  for (std::size_t t = 0; t < length(); ++t) out[t] = at(t, n);
  return out;
}

TrafficFrame TrafficFrame::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > length()) throw UsageError("frame slice out of range");
  TrafficFrame out;
  out.series_ids = series_ids;
  out.interval = interval;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * series()),
                    values.begin() + static_cast<std::ptrdiff_t>(end * series()));
  return out;
}

void TrafficFrame::validate() const {
  if (series_ids.empty()) throw FormatError("frame has no series");
  if (values.size() != timestamps.size() * series_ids.size()) throw FormatError("frame values do not match its shape");
  for (std::size_t t = 1; t < timestamps.size(); ++t) {
    if (timestamps[t] - timestamps[t - 1] != interval) {
      throw FormatError("non-uniform interval between " + format_timestamp(timestamps[t - 1]) + " and " +
                        format_timestamp(timestamps[t]));
    }
  }
}

TrafficFrame read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  TrafficFrame frame;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ParseError("missing header row");
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "timestamp") {
    throw ParseError("header must be 'timestamp,<id_1>,...,<id_N>'", line_no);
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].empty()) throw ParseError("empty series id in header", line_no);
    frame.series_ids.emplace_back(header[i]);
  }
  const std::size_t n = frame.series();

  struct Row {
    std::int64_t ts;
    std::size_t line;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n + 1) {
      throw ParseError("expected " + std::to_string(n + 1) + " fields, found " + std::to_string(fields.size()), line_no);
    }
    Row row{0, line_no, std::vector<double>(n)};
    try {
      row.ts = parse_timestamp(fields[0]);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!parse_double(fields[i + 1], row.values[i])) {
        throw ParseError("malformed value '" + std::string(fields[i + 1]) + "' in column " +
                         frame.series_ids[i], line_no);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ts == rows[i - 1].ts) {
      throw ParseError("duplicate timestamp " + format_timestamp(rows[i].ts) + " (first seen on line " +
                       std::to_string(rows[i - 1].line) + ")", rows[i].line);
    }
  }
  frame.interval = rows.size() > 1 ? rows[1].ts - rows[0].ts : 0;
  frame.timestamps.reserve(rows.size());
  frame.values.reserve(rows.size() * n);
  for (auto& r : rows) {
    frame.timestamps.push_back(r.ts);
    frame.values.insert(frame.values.end(), r.values.begin(), r.values.end());
  }
  frame.validate();
  return frame;
}

TrafficFrame load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return read_csv(in);
}

void write_csv(const TrafficFrame& frame, std::ostream& out) {
  out << "timestamp";
  for (const auto& id : frame.series_ids) out << ',' << id;
  out << '\n';
  for (std::size_t t = 0; t < frame.length(); ++t) {
    out << format_timestamp(frame.timestamps[t]);
    for (std::size_t n = 0; n < frame.series(); ++n) out << ',' << format_double(frame.at(t, n));
    out << '\n';
  }
}

void save_csv(const TrafficFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  write_csv(frame, out);
}

TrafficFrame ewm_smooth(const TrafficFrame& frame, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("smoothing factor must lie in (0, 1]");
  TrafficFrame out = frame;
  for (std::size_t t = 1; t < out.length(); ++t) {
    for (std::size_t n = 0; n < out.series(); ++n) {
      out.at(t, n) = alpha * frame.at(t, n) + (1.0 - alpha) * out.at(t - 1, n);
    }
  }
  return out;
}

SplitSpec SplitSpec::parse(std::string_view text) {
  SplitSpec spec;
  unsigned* parts[3] = {&spec.train, &spec.val, &spec.test};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto colon = text.find(':', pos);
    if ((i < 2) == (colon == std::string_view::npos)) throw ConfigError("split must look like 5:2:55, got '" + std::string(text) + "'");
    long long v = 0;
    if (!parse_int(trim(text.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos)), v) || v <= 0) {
      throw ConfigError("split ratios must be positive integers, got '" + std::string(text) + "'");
    }
    *parts[i] = static_cast<unsigned>(v);
    pos = colon + 1;
  }
  return spec;
}

std::string SplitSpec::to_string() const {
  return std::to_string(train) + ":" + std::to_string(val) + ":" + std::to_string(test);
}

void SplitSpec::validate() const {
  if (train == 0 || val == 0 || test == 0) throw ConfigError("split ratios must be positive");
}

SegmentBounds split_bounds(std::size_t total, const SplitSpec& spec) {
  spec.validate();
  const std::size_t sum = spec.train + spec.val + spec.test;
  SegmentBounds b;
  b.total = total;
  b.train_end = total * spec.train / sum;
  b.val_end = b.train_end + total * spec.val / sum;
  return b;
}

Normalizer::Normalizer(std::vector<double> means, std::vector<double> stds)
    : means_(std::move(means)), stds_(std::move(stds)) {
  if (means_.size() != stds_.size()) throw DimensionError("normalizer: means and stds differ in length");
  for (auto& s : stds_) s = std::max(s, std_floor);
}

Normalizer Normalizer::fit(const TrafficFrame& frame) {
  if (frame.length() == 0) throw UsageError("normalizer: cannot fit an empty frame");
  const std::size_t n = frame.series();
  std::vector<double> means(n, 0.0), stds(n, 0.0);
  const auto len = static_cast<double>(frame.length());
  for (std::size_t s = 0; s < n; ++s) {
    double mu = 0.0;
    for (std::size_t t = 0; t < frame.length(); ++t) mu += frame.at(t, s);
    mu /= len;
    double var = 0.0;
    for (std::size_t t = 0; t < frame.length(); ++t) var += (frame.at(t, s) - mu) * (frame.at(t, s) - mu);
    means[s] = mu;
    stds[s] = std::sqrt(var / len);
  }
  return Normalizer(std::move(means), std::move(stds));
}

double Normalizer::transform_value(std::size_t series, double value) const {
  return (value - means_[series]) / stds_[series];
}

double Normalizer::inverse_value(std::size_t series, double value) const {
  return value * stds_[series] + means_[series];
}

TrafficFrame Normalizer::transform(const TrafficFrame& frame) const {
  if (frame.series() != means_.size()) throw DimensionError("normalizer fitted on a different series count");
  TrafficFrame out = frame;
  for (std::size_t t = 0; t < out.length(); ++t)
    for (std::size_t n = 0; n < out.series(); ++n) out.at(t, n) = transform_value(n, frame.at(t, n));
  return out;
}

TrafficFrame Normalizer::inverse(const TrafficFrame& frame) const {
  if (frame.series() != means_.size()) throw DimensionError("normalizer fitted on a different series count");
  TrafficFrame out = frame;
  for (std::size_t t = 0; t < out.length(); ++t)
    for (std::size_t n = 0; n < out.series(); ++n) out.at(t, n) = inverse_value(n, frame.at(t, n));
  return out;
}

SplitResult split_and_normalize(const TrafficFrame& frame, const SplitSpec& spec, std::size_t min_segment_length) {
  const auto b = split_bounds(frame.length(), spec);
  const std::size_t lengths[3] = {b.train_end, b.val_end - b.train_end, b.total - b.val_end};
  const char* names[3] = {"train", "val", "test"};
  for (int i = 0; i < 3; ++i) {
    if (lengths[i] < min_segment_length) {
      throw ConfigError(std::string(names[i]) + " segment has " + std::to_string(lengths[i]) +
                        " rows, fewer than history + horizon = " + std::to_string(min_segment_length));
    }
  }
  SplitResult out;
  TrafficFrame train = frame.slice(0, b.train_end);
  out.normalizer = Normalizer::fit(train);
  out.train = out.normalizer.transform(train);
  out.val = out.normalizer.transform(frame.slice(b.train_end, b.val_end));
  out.test = out.normalizer.transform(frame.slice(b.val_end, b.total));
  return out;
}

WindowRange::WindowRange(const TrafficFrame& frame, std::size_t history, std::size_t horizon, std::size_t stride)
    : frame_(&frame), history_(history), horizon_(horizon), stride_(stride), count_(0) {
  if (history == 0 || horizon == 0 || stride == 0) throw ConfigError("windows: history, horizon and stride must be positive");
  if (frame.length() < history + horizon) {
    throw ConfigError("windows: segment of " + std::to_string(frame.length()) + " rows is shorter than history + horizon = " +
                      std::to_string(history + horizon));
  }
  count_ = (frame.length() - history - horizon) / stride + 1;
}

Sample WindowRange::operator[](std::size_t i) const {
  const std::size_t n = frame_->series();
  const std::size_t start = start_of(i);
  Sample s{std::vector<double>(n * history_), std::vector<double>(n * horizon_)};
  for (std::size_t series = 0; series < n; ++series) {
    for (std::size_t t = 0; t < history_; ++t) s.input[series * history_ + t] = frame_->at(start + t, series);
    for (std::size_t t = 0; t < horizon_; ++t) s.target[series * horizon_ + t] = frame_->at(start + history_ + t, series);
  }
  return s;
}

std::vector<Sample> WindowRange::batch(std::size_t first, std::size_t count) const {
  std::vector<Sample> out;
  for (std::size_t i = first; i < std::min(first + count, count_); ++i) out.push_back((*this)[i]);
  return out;
}

WindowRange windows(const TrafficFrame& frame, std::size_t history, std::size_t horizon, std::size_t stride) {
  return WindowRange(frame, history, horizon, stride);
}

}  // namespace mgstc
