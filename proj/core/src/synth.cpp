#include "mgstc/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "mgstc/error.hpp"
#include "mgstc/rng.hpp"

namespace mgstc {

std::string_view to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::mean_shift: return "mean_shift";
    case DriftKind::scale_shift: return "scale_shift";
    case DriftKind::correlation_shift: return "correlation_shift";
  }
  return "unknown";
}

DriftKind parse_drift_kind(std::string_view name) {
  if (name == "mean_shift") return DriftKind::mean_shift;
  if (name == "scale_shift") return DriftKind::scale_shift;
  if (name == "correlation_shift") return DriftKind::correlation_shift;
  throw ConfigError("unknown drift kind '" + std::string(name) + "'");
}

DriftSegment DriftSegment::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto comma = text.find(',', pos);
    auto piece = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    parts.push_back(piece);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (parts.size() != 4) throw ConfigError("drift must be 'start,length,kind,magnitude', got '" + std::string(text) + "'");
  DriftSegment seg;
  auto parse_size = [&](std::string_view s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("drift: bad integer '" + std::string(s) + "'");
  };
  parse_size(parts[0], seg.start);
  parse_size(parts[1], seg.length);
  seg.kind = parse_drift_kind(parts[2]);
  auto [p, ec] = std::from_chars(parts[3].data(), parts[3].data() + parts[3].size(), seg.magnitude);
  if (ec != std::errc() || p != parts[3].data() + parts[3].size()) {
    throw ConfigError("drift: bad magnitude '" + std::string(parts[3]) + "'");
  }
  return seg;
}

std::string DriftSegment::to_string() const {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), magnitude);
  return std::to_string(start) + "," + std::to_string(length) + "," + std::string(mgstc::to_string(kind)) + "," +
         std::string(buf, p);
}

void SynthConfig::validate() const {
  if (n_series == 0) throw ConfigError("synth: n_series must be positive");
  if (length < 2) throw ConfigError("synth: length must be at least 2");
  if (period == 0) throw ConfigError("synth: period must be positive");
  if (interval <= 0) throw ConfigError("synth: interval must be positive");
  if (noise_std < 0.0 || burst_rate < 0.0 || burst_rate > 1.0 || burst_decay <= 0.0) {
    throw ConfigError("synth: noise_std >= 0, burst_rate in [0, 1] and burst_decay > 0 required");
  }
  auto sorted = drifts;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& d = sorted[i];
    if (d.start >= length) throw ConfigError("synth: drift starts at " + std::to_string(d.start) + ", past the stream end");
    const std::size_t end = d.length == 0 ? length : d.start + d.length;
    if (i + 1 < sorted.size() && sorted[i + 1].start < end) {
      throw ConfigError("synth: drift segments starting at " + std::to_string(d.start) + " and " +
                        std::to_string(sorted[i + 1].start) + " overlap");
    }
  }
}

double mean_pairwise_correlation(const TrafficFrame& frame, std::size_t begin, std::size_t end) {
  const std::size_t n = frame.series();
  if (n < 2 || end <= begin + 1) return 0.0;
  const auto len = static_cast<double>(end - begin);
  std::vector<double> mu(n, 0.0), sd(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = begin; t < end; ++t) mu[s] += frame.at(t, s);
    mu[s] /= len;
    for (std::size_t t = begin; t < end; ++t) sd[s] += (frame.at(t, s) - mu[s]) * (frame.at(t, s) - mu[s]);
    sd[s] = std::sqrt(sd[s] / len);
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      double cov = 0.0;
      for (std::size_t t = begin; t < end; ++t) cov += (frame.at(t, a) - mu[a]) * (frame.at(t, b) - mu[b]);
      cov /= len;
      total += cov / std::max(sd[a] * sd[b], 1e-300);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

namespace {

void apply_correlation_shift(TrafficFrame& frame, std::size_t begin, std::size_t end, double magnitude, Rng& rng) {
  const std::size_t n = frame.series();
  if (n < 2 || end <= begin + 1) return;
  const auto len = static_cast<double>(end - begin);
  std::vector<double> mu(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = begin; t < end; ++t) mu[s] += frame.at(t, s);
    mu[s] /= len;
  }
  double var = 0.0, cov = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t t = begin; t < end; ++t) var += (frame.at(t, a) - mu[a]) * (frame.at(t, a) - mu[a]);
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t t = begin; t < end; ++t) cov += (frame.at(t, a) - mu[a]) * (frame.at(t, b) - mu[b]);
      ++pairs;
    }
  }
  var /= len * static_cast<double>(n);
  cov /= len * static_cast<double>(pairs);
  const double current = cov / var;
  const double target = std::clamp(current + magnitude, 0.05, 0.95);
  if (target > current) {
    const double k = std::sqrt(std::max(0.0, (target * var - cov) / (1.0 - target)));
    for (std::size_t t = begin; t < end; ++t) {
      const double shared = k * rng.normal();
      for (std::size_t s = 0; s < n; ++s) frame.at(t, s) += shared;
    }
  } else if (target < current) {
    const double k = std::sqrt(std::max(0.0, cov / target - var));
    for (std::size_t t = begin; t < end; ++t)
      for (std::size_t s = 0; s < n; ++s) frame.at(t, s) += k * rng.normal();
  }
}

}  // namespace

TrafficFrame synth_stream(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = config.n_series, len = config.length;
  Rng rng(seed);

  std::vector<double> levels(n), amplitudes(n), phases(n);
  for (std::size_t s = 0; s < n; ++s) {
    levels[s] = config.level * rng.uniform(0.8, 1.2);
    amplitudes[s] = config.amplitude * rng.uniform(0.8, 1.2);
    phases[s] = rng.uniform(0.0, 0.25) * static_cast<double>(config.period);
  }

  TrafficFrame frame;
  frame.interval = config.interval;
  for (std::size_t s = 0; s < n; ++s) frame.series_ids.push_back("s" + std::to_string(s));
  frame.timestamps.resize(len);
  frame.values.assign(len * n, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    frame.timestamps[t] = config.start_time + static_cast<std::int64_t>(t) * config.interval;
    for (std::size_t s = 0; s < n; ++s) {
      const double angle = 2.0 * std::numbers::pi * (static_cast<double>(t) + phases[s]) / static_cast<double>(config.period);
      frame.at(t, s) = levels[s] + amplitudes[s] * std::sin(angle);
    }
  }

  // Bursts: origin series at time t0, ring distance k reached at t0 + k*lag
  // with amplitude * gain^k, each decaying exponentially.
  const std::size_t tail = static_cast<std::size_t>(std::ceil(config.burst_decay * 8.0));
  for (std::size_t t0 = 0; t0 < len; ++t0) {
    if (!rng.bernoulli(config.burst_rate)) continue;
    const std::size_t origin = rng.index(n);
    const double amp = config.burst_amplitude * rng.uniform(0.5, 1.5);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t forward = (s + n - origin) % n;
      const std::size_t hops = std::min(forward, n - forward);
      const double gain = amp * std::pow(config.propagation_gain, static_cast<double>(hops));
      const std::size_t onset = t0 + hops * config.propagation_lag;
      for (std::size_t dt = 0; dt < tail && onset + dt < len; ++dt) {
        frame.at(onset + dt, s) += gain * std::exp(-static_cast<double>(dt) / config.burst_decay);
      }
    }
  }

  for (auto& v : frame.values) v += config.noise_std * rng.normal();

  for (const auto& d : config.drifts) {
    const std::size_t end = d.length == 0 ? len : std::min(len, d.start + d.length);
    switch (d.kind) {
      case DriftKind::mean_shift:
        for (std::size_t t = d.start; t < end; ++t)
          for (std::size_t s = 0; s < n; ++s) frame.at(t, s) += d.magnitude;
        break;
      case DriftKind::scale_shift:
        for (std::size_t t = d.start; t < end; ++t)
          for (std::size_t s = 0; s < n; ++s) frame.at(t, s) = levels[s] + (1.0 + d.magnitude) * (frame.at(t, s) - levels[s]);
        break;
      case DriftKind::correlation_shift: {
        Rng drift_rng(seed ^ (0x9e3779b97f4a7c15ULL * (d.start + 1)));
        apply_correlation_shift(frame, d.start, end, d.magnitude, drift_rng);
        break;
      }
    }
  }
  return frame;
}

}  // namespace mgstc
