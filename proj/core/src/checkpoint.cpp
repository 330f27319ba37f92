#include "mgstc/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mgstc/error.hpp"

namespace mgstc {

namespace {

constexpr char kMagic[8] = {'M', 'G', 'S', 'T', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void put_doubles(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("checkpoint truncated");
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  read_exact(in, &v, sizeof v);
  return v;
}
std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  read_exact(in, &v, sizeof v);
  return v;
}
std::string get_string(std::istream& in) {
  const auto n = get_u64(in);
  if (n > (1u << 20)) throw FormatError("checkpoint string too long");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}
std::vector<double> get_doubles(std::istream& in) {
  const auto n = get_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("checkpoint array too long");
  std::vector<double> v(n);
  read_exact(in, v.data(), n * sizeof(double));
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

const std::string& require(const std::map<std::string, std::string>& header, const std::string& key) {
  auto it = header.find(key);
  if (it == header.end()) throw FormatError("checkpoint header lacks '" + key + "'");
  return it->second;
}

std::size_t to_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) throw FormatError("bad integer for '" + key + "': " + text);
  return v;
}

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  if (a.seed != b.seed || a.header != b.header || !bit_equal(a.norm_means, b.norm_means) ||
      !bit_equal(a.norm_stds, b.norm_stds) || a.parameters.size() != b.parameters.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.parameters.size(); ++i) {
    const auto& x = a.parameters[i];
    const auto& y = b.parameters[i];
    if (x.name != y.name || x.shape != y.shape || !bit_equal(x.values, y.values) || x.adam.has_value() != y.adam.has_value()) {
      return false;
    }
    if (x.adam && (x.adam->step_count != y.adam->step_count || !bit_equal(x.adam->first_moment, y.adam->first_moment) ||
                   !bit_equal(x.adam->second_moment, y.adam->second_moment))) {
      return false;
    }
  }
  return true;
}

void write_checkpoint(const Checkpoint& ck, std::ostream& out) {
  out.write(kMagic, sizeof kMagic);
  put_u32(out, Checkpoint::format_version);
  put_u64(out, ck.seed);
  put_u64(out, ck.header.size());
  for (const auto& [k, v] : ck.header) {
    put_string(out, k);
    put_string(out, v);
  }
  put_doubles(out, ck.norm_means);
  put_doubles(out, ck.norm_stds);
  put_u64(out, ck.parameters.size());
  for (const auto& e : ck.parameters) {
    put_string(out, e.name);
    put_u64(out, e.shape.size());
    for (auto d : e.shape) put_u64(out, d);
    put_doubles(out, e.values);
    put_u32(out, e.adam ? 1 : 0);
    if (e.adam) {
      put_u64(out, e.adam->step_count);
      put_doubles(out, e.adam->first_moment);
      put_doubles(out, e.adam->second_moment);
      const double hyper[4] = {e.adam->hyper.lr, e.adam->hyper.beta1, e.adam->hyper.beta2, e.adam->hyper.epsilon};
      out.write(reinterpret_cast<const char*>(hyper), sizeof hyper);
    }
  }
  if (!out) throw FormatError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  read_exact(in, magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError("not a checkpoint file (bad magic)");
  const auto version = get_u32(in);
  if (version != Checkpoint::format_version) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.seed = get_u64(in);
  const auto header_count = get_u64(in);
  for (std::uint64_t i = 0; i < header_count; ++i) {
    auto k = get_string(in);
    ck.header[k] = get_string(in);
  }
  ck.norm_means = get_doubles(in);
  ck.norm_stds = get_doubles(in);
  const auto count = get_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    Checkpoint::Entry e;
    e.name = get_string(in);
    const auto rank = get_u64(in);
    if (rank > 8) throw FormatError("checkpoint tensor rank too large");
    for (std::uint64_t r = 0; r < rank; ++r) e.shape.push_back(get_u64(in));
    e.values = get_doubles(in);
    if (shape_size(e.shape) != e.values.size()) throw FormatError("checkpoint tensor '" + e.name + "' has inconsistent shape");
    if (get_u32(in)) {
      AdamState s;
      s.step_count = get_u64(in);
      s.first_moment = get_doubles(in);
      s.second_moment = get_doubles(in);
      double hyper[4];
      read_exact(in, hyper, sizeof hyper);
      s.hyper = {hyper[0], hyper[1], hyper[2], hyper[3]};
      e.adam = std::move(s);
    }
    ck.parameters.push_back(std::move(e));
  }
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  write_checkpoint(checkpoint, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

std::map<std::string, std::string> describe(const ModelConfig& c) {
  return {
      {"n_series", std::to_string(c.n_series)},
      {"history", std::to_string(c.chunking.history)},
      {"chunk", std::to_string(c.chunking.chunk)},
      {"stride", std::to_string(c.chunking.stride)},
      {"d_model", std::to_string(c.chunking.d_model)},
      {"horizon", std::to_string(c.horizon)},
      {"heads", std::to_string(c.heads)},
      {"aggregators", std::to_string(c.aggregators)},
      {"use_fgsa", c.use_fgsa ? "true" : "false"},
      {"activation", std::string(to_string(c.activation))},
      {"norm_epsilon", fmt_double(c.norm_epsilon)},
  };
}

ModelConfig model_config_from(const std::map<std::string, std::string>& h) {
  ModelConfig c;
  c.n_series = to_size("n_series", require(h, "n_series"));
  c.chunking.history = to_size("history", require(h, "history"));
  c.chunking.chunk = to_size("chunk", require(h, "chunk"));
  c.chunking.stride = to_size("stride", require(h, "stride"));
  c.chunking.d_model = to_size("d_model", require(h, "d_model"));
  c.horizon = to_size("horizon", require(h, "horizon"));
  c.heads = to_size("heads", require(h, "heads"));
  c.aggregators = to_size("aggregators", require(h, "aggregators"));
  c.use_fgsa = require(h, "use_fgsa") == "true";
  c.activation = parse_activation(require(h, "activation"));
  const auto& eps = require(h, "norm_epsilon");
  auto [p, ec] = std::from_chars(eps.data(), eps.data() + eps.size(), c.norm_epsilon);
  if (ec != std::errc()) throw FormatError("bad norm_epsilon in checkpoint header");
  return c;
}

Checkpoint make_checkpoint(const Model& model, const Adam* optimizer, std::uint64_t seed, const Normalizer& normalizer,
                           std::map<std::string, std::string> extra_header) {
  Checkpoint ck;
  ck.seed = seed;
  ck.header = std::move(extra_header);
  for (auto& [k, v] : describe(model.config())) ck.header[k] = v;
  ck.norm_means = normalizer.means();
  ck.norm_stds = normalizer.stds();
  const auto named = model.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, t] = named[i];
    Checkpoint::Entry e{name, t.shape(), {t.data().begin(), t.data().end()}, std::nullopt};
    if (optimizer) e.adam = optimizer->states().at(i);
    ck.parameters.push_back(std::move(e));
  }
  return ck;
}

Model restore_model(const Checkpoint& ck) {
  Model model(model_config_from(ck.header), ck.seed);
  auto named = model.named_parameters();
  if (named.size() != ck.parameters.size()) {
    throw FormatError("checkpoint holds " + std::to_string(ck.parameters.size()) + " tensors, model expects " +
                      std::to_string(named.size()));
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, t] = named[i];
    const auto& e = ck.parameters[i];
    if (e.name != name || e.shape != t.shape()) {
      throw FormatError("checkpoint tensor '" + e.name + "' " + shape_string(e.shape) + " does not match '" + name +
                        "' " + shape_string(t.shape()));
    }
    std::copy(e.values.begin(), e.values.end(), t.mutable_data().begin());
  }
  return model;
}

void restore_optimizer(const Checkpoint& ck, Adam& optimizer) {
  auto& states = optimizer.states();
  if (states.size() != ck.parameters.size()) throw FormatError("optimizer does not match checkpoint");
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (ck.parameters[i].adam) states[i] = *ck.parameters[i].adam;
  }
}

Normalizer restore_normalizer(const Checkpoint& ck) { return Normalizer(ck.norm_means, ck.norm_stds); }

}  // namespace mgstc
