#include "commands.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "mgstc/checkpoint.hpp"
#include "mgstc/error.hpp"
#include "mgstc/frame.hpp"
#include "mgstc/online.hpp"

namespace mgstc::cli {

namespace {

std::string num(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot read ") + what + " '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

TrafficFrame load_frame(const std::filesystem::path& path, double smoothing) {
  TrafficFrame frame = load_csv(path);
  if (smoothing > 0.0) frame = ewm_smooth(frame, smoothing);
  return frame;
}

template <class T>
T header_number(const std::map<std::string, std::string>& header, const std::string& key, T fallback) {
  auto it = header.find(key);
  if (it == header.end()) return fallback;
  T v{};
  auto [p, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (ec != std::errc() || p != it->second.data() + it->second.size())
    throw FormatError("checkpoint header: bad value for " + key);
  return v;
}

// Lists every field where an explicitly configured value disagrees with the
// checkpoint, plus a series-count mismatch with the data.
std::vector<std::string> checkpoint_mismatches(const RunConfig& config, const Checkpoint& ck,
                                               std::size_t data_series) {
  std::vector<std::string> diffs;
  const ModelConfig stored = model_config_from(ck.header);
  if (data_series != stored.n_series) {
    diffs.push_back("n_series (checkpoint " + std::to_string(stored.n_series) + ", data " +
                    std::to_string(data_series) + ")");
  }
  const auto theirs = describe(stored);
  for (const auto& [key, mine] : describe(config.model_config(stored.n_series))) {
    if (!config.explicit_keys.count(key)) continue;
    auto it = theirs.find(key);
    if (it != theirs.end() && it->second != mine)
      diffs.push_back(key + " (checkpoint " + it->second + ", config " + mine + ")");
  }
  for (const auto& [key, mine] : config.data_header()) {
    if (key == "lr" || !config.explicit_keys.count(key)) continue;
    auto it = ck.header.find(key);
    if (it != ck.header.end() && it->second != mine)
      diffs.push_back(key + " (checkpoint " + it->second + ", config " + mine + ")");
  }
  return diffs;
}

const char* mode_name(StreamMode mode) {
  switch (mode) {
    case StreamMode::online: return "online";
    case StreamMode::frozen: return "frozen";
    case StreamMode::compare: return "compare";
  }
  return "?";
}

}  // namespace

TrainResult cmd_train(const RunConfig& config, const TrainPaths& paths, std::ostream& out) {
  config.validate();
  const TrafficFrame raw = load_frame(paths.data, config.smoothing);
  const auto split = split_and_normalize(raw, config.split, config.history + config.horizon);

  Model model(config.model_config(raw.series()), config.seed);
  Adam adam(model.parameters(), config.adam_config());
  const WindowRange train(split.train, config.history, config.horizon, config.window_stride);
  const WindowRange val(split.val, config.history, config.horizon, 1);

  std::optional<std::ofstream> log;
  if (paths.log) log = open_out(*paths.log);
  auto emit = [&](const std::string& line) {
    out << line << '\n';
    if (log) *log << line << '\n';
  };
  emit("train series=" + std::to_string(raw.series()) + " windows=" + std::to_string(train.size()) +
       " val_windows=" + std::to_string(val.size()) + " parameters=" + std::to_string(model.parameter_count()));

  auto result = train_offline(model, adam, train, val, config.train_options(), [&](const EpochLog& e) {
    emit("epoch=" + std::to_string(e.epoch) + " steps=" + std::to_string(e.steps) + " train_mse=" + num(e.train_mse) +
         " val_mse=" + num(e.val_mse) + (e.improved ? " improved" : ""));
  });
  emit("best_epoch=" + std::to_string(result.best_epoch) + " best_val_mse=" + num(result.best_val_mse) +
       " initial_val_mse=" + num(result.initial_val_mse) + (result.early_stopped ? " early_stopped" : ""));

  save_checkpoint(make_checkpoint(model, &adam, config.seed, split.normalizer, config.data_header()), paths.checkpoint);
  emit("checkpoint=" + paths.checkpoint.string());
  return result;
}

StreamSummary cmd_stream(const RunConfig& config, const StreamPaths& paths, StreamMode mode, bool denormalize,
                         std::ostream& out) {
  config.validate();
  const Checkpoint ck = load_checkpoint(paths.checkpoint);

  const bool split_set = config.explicit_keys.count("split") > 0;
  const SplitSpec split =
      split_set || !ck.header.count("split") ? config.split : SplitSpec::parse(ck.header.at("split"));
  const double smoothing =
      config.explicit_keys.count("smoothing") ? config.smoothing : header_number(ck.header, "smoothing", config.smoothing);
  const double lr = config.explicit_keys.count("lr") ? config.lr : header_number(ck.header, "lr", config.lr);

  const TrafficFrame raw = load_frame(paths.data, smoothing);
  if (auto diffs = checkpoint_mismatches(config, ck, raw.series()); !diffs.empty()) {
    std::string msg = "configuration does not match checkpoint:";
    for (const auto& d : diffs) msg += "\n  " + d;
    throw ConfigError(msg);
  }

  const ModelConfig model_config = model_config_from(ck.header);
  const auto bounds = split_bounds(raw.length(), split);
  const Normalizer normalizer = restore_normalizer(ck);
  const TrafficFrame test = normalizer.transform(raw.slice(bounds.val_end, bounds.total));
  const WindowRange stream(test, model_config.chunking.history, model_config.horizon, 1);
  const std::size_t horizon = model_config.horizon;

  std::optional<std::ofstream> predictions;
  if (paths.predictions) {
    predictions = open_out(*paths.predictions);
    *predictions << "batch,window,series,step,prediction,target\n";
  }

  auto run = [&](bool online) {
    Model model = restore_model(ck);
    Adam adam(model.parameters(), AdamConfig{});
    restore_optimizer(ck, adam);
    adam.set_lr(lr);
    StreamOptions options;
    options.online = config.online_config();
    options.online.updates_enabled = online;
    options.seed = config.seed;
    options.denormalize = denormalize ? &normalizer : nullptr;
    const bool record = predictions && (online || mode == StreamMode::frozen);
    if (record) {
      options.sink = [&](std::size_t batch, std::size_t window, const Sample& sample, std::span<const double> pred) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
          const std::size_t n = i / horizon;
          double p = pred[i], t = sample.target[i];
          if (denormalize) {
            p = normalizer.inverse_value(n, p);
            t = normalizer.inverse_value(n, t);
          }
          *predictions << batch << ',' << window << ',' << n << ',' << i % horizon << ',' << num(p) << ',' << num(t)
                       << '\n';
        }
      };
    }
    return online_loop(model, adam, stream, options);
  };

  StreamSummary summary;
  std::optional<OnlineTrace> online_trace, frozen_trace;
  if (mode != StreamMode::online) frozen_trace = run(false);
  if (mode != StreamMode::frozen) online_trace = run(true);

  out << "stream mode=" << mode_name(mode) << " windows=" << stream.size() << " batch_size=" << config.batch_size
      << '\n';
  if (frozen_trace) {
    summary.batches = frozen_trace->metrics.size();
    summary.frozen_cum_mse = frozen_trace->metrics.final_cum_mse();
    out << "frozen batches=" << summary.batches << " cum_mse=" << num(summary.frozen_cum_mse) << '\n';
  }
  if (online_trace) {
    summary.batches = online_trace->metrics.size();
    summary.online_cum_mse = online_trace->metrics.final_cum_mse();
    summary.drift_events = online_trace->drift_events;
    summary.aggressive_steps = online_trace->aggressive_steps;
    out << "online batches=" << summary.batches << " cum_mse=" << num(summary.online_cum_mse)
        << " drift_events=" << summary.drift_events << " aggressive_steps=" << summary.aggressive_steps << '\n';
  }
  if (mode == StreamMode::compare) {
    const double gain = summary.frozen_cum_mse > 0.0
                            ? (summary.frozen_cum_mse - summary.online_cum_mse) / summary.frozen_cum_mse
                            : 0.0;
    out << "compare frozen_cum_mse=" << num(summary.frozen_cum_mse) << " online_cum_mse="
        << num(summary.online_cum_mse) << " relative_improvement=" << num(gain) << '\n';
  }

  if (paths.metrics) {
    auto f = open_out(*paths.metrics);
    if (mode == StreamMode::compare) {
      const auto& a = frozen_trace->metrics.entries();
      const auto& b = online_trace->metrics.entries();
      f << "batch,frozen_mse,online_mse,frozen_cum_mse,online_cum_mse,drift\n";
      for (std::size_t i = 0; i < a.size(); ++i) {
        f << i << ',' << num(a[i].mse) << ',' << num(b[i].mse) << ',' << num(a[i].cum_mse) << ','
          << num(b[i].cum_mse) << ',' << (b[i].drift ? 1 : 0) << '\n';
      }
    } else {
      (online_trace ? online_trace : frozen_trace)->metrics.write_csv(f);
    }
  }
  if (paths.drift_log) {
    auto f = open_out(*paths.drift_log);
    write_drift_log(online_trace ? *online_trace : *frozen_trace, f);
  }
  return summary;
}

SynthConfig parse_synth_spec(const std::string& text, const std::string& source) {
  using Setter = std::function<void(SynthConfig&, const std::string&)>;
  auto size_of = [](const std::string& k, const std::string& v) {
    std::size_t x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(k + ": expected a non-negative integer");
    return x;
  };
  auto int_of = [](const std::string& k, const std::string& v) {
    std::int64_t x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(k + ": expected an integer");
    return x;
  };
  auto real_of = [](const std::string& k, const std::string& v) {
    double x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(k + ": expected a number");
    return x;
  };
  const std::map<std::string, Setter> setters = {
      {"n_series", [&](SynthConfig& c, const std::string& v) { c.n_series = size_of("n_series", v); }},
      {"length", [&](SynthConfig& c, const std::string& v) { c.length = size_of("length", v); }},
      {"period", [&](SynthConfig& c, const std::string& v) { c.period = size_of("period", v); }},
      {"level", [&](SynthConfig& c, const std::string& v) { c.level = real_of("level", v); }},
      {"amplitude", [&](SynthConfig& c, const std::string& v) { c.amplitude = real_of("amplitude", v); }},
      {"noise_std", [&](SynthConfig& c, const std::string& v) { c.noise_std = real_of("noise_std", v); }},
      {"burst_rate", [&](SynthConfig& c, const std::string& v) { c.burst_rate = real_of("burst_rate", v); }},
      {"burst_amplitude", [&](SynthConfig& c, const std::string& v) { c.burst_amplitude = real_of("burst_amplitude", v); }},
      {"burst_decay", [&](SynthConfig& c, const std::string& v) { c.burst_decay = real_of("burst_decay", v); }},
      {"propagation_lag", [&](SynthConfig& c, const std::string& v) { c.propagation_lag = size_of("propagation_lag", v); }},
      {"propagation_gain", [&](SynthConfig& c, const std::string& v) { c.propagation_gain = real_of("propagation_gain", v); }},
      {"start_time", [&](SynthConfig& c, const std::string& v) { c.start_time = int_of("start_time", v); }},
      {"interval", [&](SynthConfig& c, const std::string& v) { c.interval = int_of("interval", v); }},
      {"drift", [](SynthConfig& c, const std::string& v) { c.drifts.push_back(DriftSegment::parse(v)); }},
  };

  SynthConfig config;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(where + "unknown setting '" + key + "'");
    try {
      it->second(config, trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw ConfigError(where + e.what());
    }
  }
  config.validate();
  return config;
}

void cmd_synth(const std::filesystem::path& spec, const std::filesystem::path& out_path, std::uint64_t seed,
               std::ostream& out) {
  const SynthConfig config = parse_synth_spec(read_text(spec, "synth spec"), spec.string());
  const TrafficFrame frame = synth_stream(config, seed);
  save_csv(frame, out_path);
  out << "synth rows=" << frame.length() << " series=" << frame.series() << " drifts=" << config.drifts.size()
      << " out=" << out_path.string() << '\n';
}

AppendixReport cmd_verify_appendix(std::size_t trials, std::uint64_t seed, std::ostream& out) {
  const auto r = verify_appendix(trials, seed);
  out << "trials=" << r.trials << " violations=" << r.violations << '\n';
  out << "spectral_checks=" << r.spectral_checks << " max_spectral_error=" << num(r.max_spectral_error) << '\n';
  out << "wide_xi_trials=" << r.wide_xi_trials << " wide_xi_violations=" << r.wide_xi_violations << '\n';
  const auto& e = r.example;
  std::ostringstream ex;
  ex << std::fixed << std::setprecision(4) << r.example_values.plain << " vs " << r.example_values.augmented;
  out << "example alpha=" << num(e.alpha) << " beta=" << num(e.beta) << " gamma=" << num(e.gamma)
      << " nu_inf=" << num(e.nu_inf) << " xi=" << num(e.xi) << " gap_plain=" << num(r.example_values.plain)
      << " gap_augmented=" << num(r.example_values.augmented) << '\n';
  out << "example " << ex.str() << '\n';
  out << (r.violations == 0 ? "result=ok" : "result=violations") << '\n';
  return r;
}

MetricTrace cmd_eval(const std::filesystem::path& predictions, const std::optional<std::filesystem::path>& out_path,
                     std::ostream& out) {
  std::ifstream in(predictions);
  if (!in) throw ParseError("cannot open '" + predictions.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "batch,window,series,step,prediction,target")
    throw ParseError("expected header batch,window,series,step,prediction,target", 1);

  struct Acc {
    RunningMean se, ae;
  };
  std::map<std::size_t, Acc> batches;
  RunningMean all_se, all_ae;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw ParseError("expected 6 fields, got " + std::to_string(cells.size()), number);
    std::size_t batch = 0;
    double pred = 0, target = 0;
    auto bad = [&](const std::string& c) { return ParseError("malformed field '" + c + "'", number); };
    if (auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), batch);
        ec != std::errc() || p != cells[0].data() + cells[0].size())
      throw bad(cells[0]);
    if (auto [p, ec] = std::from_chars(cells[4].data(), cells[4].data() + cells[4].size(), pred);
        ec != std::errc() || p != cells[4].data() + cells[4].size())
      throw bad(cells[4]);
    if (auto [p, ec] = std::from_chars(cells[5].data(), cells[5].data() + cells[5].size(), target);
        ec != std::errc() || p != cells[5].data() + cells[5].size())
      throw bad(cells[5]);
    const double d = pred - target;
    auto& acc = batches[batch];
    acc.se.add(d * d);
    acc.ae.add(std::abs(d));
    all_se.add(d * d);
    all_ae.add(std::abs(d));
  }
  if (batches.empty()) throw ParseError("prediction file has no rows");

  MetricTrace trace;
  for (const auto& [b, acc] : batches) trace.record(acc.se.mean(), acc.ae.mean());
  out << "eval batches=" << trace.size() << " values=" << all_se.count() << " mse=" << num(all_se.mean())
      << " mae=" << num(all_ae.mean()) << " cum_mse=" << num(trace.final_cum_mse()) << '\n';
  if (out_path) {
    auto f = open_out(*out_path);
    trace.write_csv(f);
  }
  return trace;
}

namespace {

struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value run configuration file");
    for (const auto& key : config_keys()) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      options[key] = app->add_option("--" + flag, values[key], "override " + key);
    }
  }

  RunConfig build() const {
    RunConfig config;
    if (!config_path.empty()) load_config_file(config, config_path);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) config.set(key, values.at(key));
    return config;
  }
};

int exit_code_for(const Error& e) {
  switch (e.category()) {
    case Error::Category::usage:
    case Error::Category::config: return exit_usage;
    case Error::Category::data: return exit_data;
    case Error::Category::numeric: return exit_numeric;
  }
  return exit_usage;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-grained spatial-temporal traffic forecasting with online updates", "mgstc"};
  app.require_subcommand(1);

  ConfigFlags train_flags, stream_flags;
  TrainPaths train_paths;
  std::string train_log;
  auto* train = app.add_subcommand("train", "offline training with early stopping");
  train_flags.attach(train);
  train->add_option("--data", train_paths.data, "input CSV")->required();
  train->add_option("--checkpoint", train_paths.checkpoint, "checkpoint to write")->required();
  train->add_option("--log", train_log, "copy of the training log");

  StreamPaths stream_paths;
  std::string metrics, drift_log, preds;
  bool online = false, frozen = false, compare = false, denormalize = false;
  auto* stream = app.add_subcommand("stream", "replay the test split as a stream");
  stream_flags.attach(stream);
  stream->add_option("--data", stream_paths.data, "input CSV")->required();
  stream->add_option("--checkpoint", stream_paths.checkpoint, "checkpoint written by train")->required();
  auto* o_online = stream->add_flag("--online", online, "online updates (default)");
  auto* o_frozen = stream->add_flag("--frozen", frozen, "no updates");
  auto* o_compare = stream->add_flag("--compare", compare, "frozen and online side by side");
  o_online->excludes(o_frozen)->excludes(o_compare);
  o_frozen->excludes(o_compare);
  stream->add_option("--metrics", metrics, "per-batch metric CSV");
  stream->add_option("--drift-log", drift_log, "drift verdicts as JSON lines");
  stream->add_option("--predictions", preds, "prediction CSV");
  stream->add_flag("--denormalize", denormalize, "metrics and predictions in raw units");

  std::string synth_spec, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic stream");
  synth->add_option("--spec", synth_spec, "key=value stream description")->required();
  synth->add_option("--out", synth_out, "output CSV")->required();
  synth->add_option("--seed", synth_seed, "random seed");

  std::size_t trials = 10000;
  std::uint64_t appendix_seed = 0;
  auto* appendix = app.add_subcommand("verify-appendix", "check the augmentation gap inequality");
  appendix->add_option("--trials", trials, "number of sampled tuples");
  appendix->add_option("--seed", appendix_seed, "random seed");

  std::string eval_in, eval_out;
  auto* eval = app.add_subcommand("eval", "metrics over a prediction file");
  eval->add_option("--predictions", eval_in, "prediction CSV")->required();
  eval->add_option("--out", eval_out, "per-batch metric CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (train->parsed()) {
      if (!train_log.empty()) train_paths.log = train_log;
      cmd_train(train_flags.build(), train_paths, out);
    } else if (stream->parsed()) {
      if (!metrics.empty()) stream_paths.metrics = metrics;
      if (!drift_log.empty()) stream_paths.drift_log = drift_log;
      if (!preds.empty()) stream_paths.predictions = preds;
      const StreamMode mode = compare ? StreamMode::compare : frozen ? StreamMode::frozen : StreamMode::online;
      cmd_stream(stream_flags.build(), stream_paths, mode, denormalize, out);
    } else if (synth->parsed()) {
      cmd_synth(synth_spec, synth_out, synth_seed, out);
    } else if (appendix->parsed()) {
      const auto report = cmd_verify_appendix(trials, appendix_seed, out);
      if (report.violations != 0) return exit_numeric;
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> target;
      if (!eval_out.empty()) target = eval_out;
      cmd_eval(eval_in, target, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_numeric;
  }
  return exit_ok;
}

}  // namespace mgstc::cli
