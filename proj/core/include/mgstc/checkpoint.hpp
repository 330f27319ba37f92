#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mgstc/adam.hpp"
#include "mgstc/frame.hpp"
#include "mgstc/model.hpp"

namespace mgstc {

/// Versioned binary container:
///   "MGSTCKPT" | u32 version | u64 seed | header (key=value pairs)
///   | normalizer means/stds | parameters (name, shape, values, Adam moments)
/// All integers and doubles are stored little-endian as raw bits, so a
/// write/read cycle is bit-exact.
struct Checkpoint {
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<double> values;
    std::optional<AdamState> adam;
  };

  static constexpr std::uint32_t format_version = 1;

  std::uint64_t seed = 0;
  std::map<std::string, std::string> header;
  std::vector<double> norm_means;
  std::vector<double> norm_stds;
  std::vector<Entry> parameters;

  friend bool operator==(const Checkpoint&, const Checkpoint&);
};

void write_checkpoint(const Checkpoint& checkpoint, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// key=value description of a model configuration, merged into headers.
std::map<std::string, std::string> describe(const ModelConfig& config);
ModelConfig model_config_from(const std::map<std::string, std::string>& header);

/// Snapshot of a model (and optionally its optimizer). Header gets the model
/// description merged over `extra_header`.
Checkpoint make_checkpoint(const Model& model, const Adam* optimizer, std::uint64_t seed, const Normalizer& normalizer,
                           std::map<std::string, std::string> extra_header = {});

/// Rebuilds the model recorded in the header and loads its values.
Model restore_model(const Checkpoint& checkpoint);
/// Loads stored Adam moments into `optimizer` (built over model.parameters()).
void restore_optimizer(const Checkpoint& checkpoint, Adam& optimizer);
Normalizer restore_normalizer(const Checkpoint& checkpoint);

}  // namespace mgstc
