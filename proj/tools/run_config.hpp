#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mgstc/frame.hpp"
#include "mgstc/model.hpp"
#include "mgstc/online.hpp"
#include "mgstc/trainer.hpp"

namespace mgstc::cli {

/// Every tunable of a run. Defaults are the full-scale settings; desk runs
/// override the model width and window geometry.
struct RunConfig {
  // model
  std::size_t history = 128;
  std::size_t chunk = 48;
  std::size_t stride = 32;
  std::size_t d_model = 512;
  std::size_t horizon = 60;
  std::size_t heads = 8;
  std::size_t aggregators = 10;
  bool use_fgsa = true;
  Activation activation = Activation::gelu;
  double norm_epsilon = 1e-5;

  // data
  SplitSpec split;
  double smoothing = 0.0;  // 0 disables exponential smoothing
  std::size_t window_stride = 1;

  // offline training
  double lr = 1e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t patience = 3;
  std::size_t max_steps = 0;

  // online learning
  double threshold = 0.05;
  std::size_t buffer_capacity = 100;
  std::size_t repository_capacity = 256;
  double eta_fine = 0.5;
  double eta_aggressive = 0.5;
  std::size_t aggressive_epochs = 5;
  double perturbation_variance = 0.0025;
  ReplayMode replay = ReplayMode::mini_batch;

  std::uint64_t seed = 0;

  /// Keys assigned by a config file or flag, as opposed to defaults.
  std::set<std::string> explicit_keys;

  /// Applies one key=value setting; throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  /// Checks every model, data and online constraint.
  void validate() const;

  ModelConfig model_config(std::size_t n_series) const;
  OnlineConfig online_config() const;
  TrainOptions train_options() const;
  AdamConfig adam_config() const;

  /// Settings recorded in checkpoints besides the model geometry.
  std::map<std::string, std::string> data_header() const;
};

/// Names of all settable keys, in documentation order.
const std::vector<std::string>& config_keys();

/// Flat key=value text: one setting per line, '#' comments, blank lines ignored.
void apply_config_text(RunConfig& config, const std::string& text, const std::string& source);
void load_config_file(RunConfig& config, const std::filesystem::path& path);

}  // namespace mgstc::cli
