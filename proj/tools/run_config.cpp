#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mgstc/error.hpp"

namespace mgstc::cli {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = to_size(#name, v); }, \
           [](const RunConfig& c) { return std::to_string(c.name); }}}
#define DOUBLE_FIELD(name) \
  {#name, {[](RunConfig& c, const std::string& v) { c.name = to_double(#name, v); }, \
           [](const RunConfig& c) { return fmt(c.name); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      SIZE_FIELD(history),
      SIZE_FIELD(chunk),
      SIZE_FIELD(stride),
      SIZE_FIELD(d_model),
      SIZE_FIELD(horizon),
      SIZE_FIELD(heads),
      SIZE_FIELD(aggregators),
      {"use_fgsa", {[](RunConfig& c, const std::string& v) { c.use_fgsa = to_bool("use_fgsa", v); },
                    [](const RunConfig& c) { return std::string(c.use_fgsa ? "true" : "false"); }}},
      {"activation", {[](RunConfig& c, const std::string& v) {
                        try {
                          c.activation = parse_activation(v);
                        } catch (const Error&) {
                          throw ConfigError("activation: expected gelu or relu, got '" + v + "'");
                        }
                      },
                      [](const RunConfig& c) { return std::string(to_string(c.activation)); }}},
      DOUBLE_FIELD(norm_epsilon),
      {"split", {[](RunConfig& c, const std::string& v) { c.split = SplitSpec::parse(v); },
                 [](const RunConfig& c) { return c.split.to_string(); }}},
      DOUBLE_FIELD(smoothing),
      SIZE_FIELD(window_stride),
      DOUBLE_FIELD(lr),
      SIZE_FIELD(batch_size),
      SIZE_FIELD(max_epochs),
      SIZE_FIELD(patience),
      SIZE_FIELD(max_steps),
      DOUBLE_FIELD(threshold),
      SIZE_FIELD(buffer_capacity),
      SIZE_FIELD(repository_capacity),
      DOUBLE_FIELD(eta_fine),
      DOUBLE_FIELD(eta_aggressive),
      SIZE_FIELD(aggressive_epochs),
      DOUBLE_FIELD(perturbation_variance),
      {"replay", {[](RunConfig& c, const std::string& v) { c.replay = parse_replay_mode(v); },
                  [](const RunConfig& c) { return std::string(to_string(c.replay)); }}},
      {"seed", {[](RunConfig& c, const std::string& v) { c.seed = to_size("seed", v); },
                [](const RunConfig& c) { return std::to_string(c.seed); }}},
  };
  return table;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD

const Field& field(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError("unknown setting '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, f] : fields()) out.push_back(k);
    return out;
  }();
  return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, trim(value));
  explicit_keys.insert(key);
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

void RunConfig::validate() const {
  model_config(1).validate();
  split.validate();
  if (smoothing < 0.0 || smoothing > 1.0) throw ConfigError("smoothing: must lie in [0, 1] (0 disables)");
  if (window_stride == 0) throw ConfigError("window_stride: must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr: must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs: must be positive");
  if (patience == 0) throw ConfigError("patience: must be positive");
  online_config().validate();
}

ModelConfig RunConfig::model_config(std::size_t n_series) const {
  ModelConfig m;
  m.n_series = n_series;
  m.chunking = {history, chunk, stride, d_model};
  m.horizon = horizon;
  m.heads = heads;
  m.aggregators = aggregators;
  m.use_fgsa = use_fgsa;
  m.activation = activation;
  m.norm_epsilon = norm_epsilon;
  return m;
}

OnlineConfig RunConfig::online_config() const {
  OnlineConfig o;
  o.threshold = threshold;
  o.buffer_capacity = buffer_capacity;
  o.repository_capacity = repository_capacity;
  o.eta_fine = eta_fine;
  o.eta_aggressive = eta_aggressive;
  o.aggressive_epochs = aggressive_epochs;
  o.perturbation_variance = perturbation_variance;
  o.batch_size = batch_size;
  o.replay = replay;
  return o;
}

TrainOptions RunConfig::train_options() const {
  TrainOptions t;
  t.batch_size = batch_size;
  t.max_epochs = max_epochs;
  t.patience = patience;
  t.max_steps = max_steps;
  t.window_stride = window_stride;
  t.seed = seed;
  return t;
}

AdamConfig RunConfig::adam_config() const {
  AdamConfig a;
  a.lr = lr;
  return a;
}

std::map<std::string, std::string> RunConfig::data_header() const {
  return {{"split", split.to_string()}, {"smoothing", fmt(smoothing)}, {"lr", fmt(lr)}};
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key=value, got '" + line + "'");
    }
    try {
      config.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  apply_config_text(config, buf.str(), path.string());
}

}  // namespace mgstc::cli
