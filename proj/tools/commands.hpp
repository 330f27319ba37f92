#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mgstc/augmentation.hpp"
#include "mgstc/metrics.hpp"
#include "mgstc/synth.hpp"
#include "mgstc/trainer.hpp"
#include "run_config.hpp"

namespace mgstc::cli {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_numeric = 3 };

struct TrainPaths {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> log;
};

enum class StreamMode { online, frozen, compare };

struct StreamPaths {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> metrics;
  std::optional<std::filesystem::path> drift_log;
  std::optional<std::filesystem::path> predictions;
};

struct StreamSummary {
  std::size_t batches = 0;
  double online_cum_mse = 0.0;
  double frozen_cum_mse = 0.0;
  std::size_t drift_events = 0;
  std::size_t aggressive_steps = 0;
};

/// Offline training with early stopping; writes the checkpoint and echoes
/// one line per epoch to `out` (and the log file when given).
TrainResult cmd_train(const RunConfig& config, const TrainPaths& paths, std::ostream& out);

/// Replays the test split of `paths.data` against the checkpoint.
StreamSummary cmd_stream(const RunConfig& config, const StreamPaths& paths, StreamMode mode, bool denormalize,
                         std::ostream& out);

/// Synthetic stream description: SynthConfig keys as key=value plus one
/// `drift=start,length,kind,magnitude` line per drift segment.
SynthConfig parse_synth_spec(const std::string& text, const std::string& source);
void cmd_synth(const std::filesystem::path& spec, const std::filesystem::path& out_path, std::uint64_t seed,
               std::ostream& out);

AppendixReport cmd_verify_appendix(std::size_t trials, std::uint64_t seed, std::ostream& out);

/// Metrics over a prediction file written by `stream --predictions`.
MetricTrace cmd_eval(const std::filesystem::path& predictions, const std::optional<std::filesystem::path>& out_path,
                     std::ostream& out);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgstc::cli
