#include "mgstc/model.hpp"

#include <algorithm>
#include <cmath>

#include "mgstc/error.hpp"
#include "mgstc/ops.hpp"
#include "mgstc/rng.hpp"

namespace mgstc {

std::string_view to_string(Activation activation) {
  return activation == Activation::gelu ? "gelu" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "gelu") return Activation::gelu;
  if (name == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected gelu or relu)");
}

void ModelConfig::validate() const {
  chunking.validate();
  if (n_series == 0) throw ConfigError("n_series must be positive");
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  if (heads == 0 || chunking.d_model % heads != 0) {
    throw ConfigError("d_model (" + std::to_string(chunking.d_model) + ") must be divisible by heads (" +
                      std::to_string(heads) + ")");
  }
  if (aggregators == 0) throw ConfigError("aggregators must be at least 1");
  if (!(norm_epsilon > 0.0)) throw ConfigError("norm_epsilon must be positive");
}

std::vector<std::pair<std::string, Tensor>> ModelState::named() const {
  std::vector<std::pair<std::string, Tensor>> out{
      {"embed.W_C", chunk_projection},
      {"cgta.W_Q", temporal.query},
      {"cgta.W_K", temporal.key},
      {"cgta.W_V", temporal.value},
      {"cgta.norm.gamma", temporal_norm.gamma},
      {"cgta.norm.beta", temporal_norm.beta},
      {"cgta.ffn.W_H", temporal_ffn.weight},
      {"cgta.ffn.b_H", temporal_ffn.bias},
  };
  if (aggregator.defined()) {
    out.insert(out.end(), {
        {"fgsa.G", aggregator},
        {"fgsa.gather.W_Q", spatial_gather.query},
        {"fgsa.gather.W_K", spatial_gather.key},
        {"fgsa.gather.W_V", spatial_gather.value},
        {"fgsa.scatter.W_Q", spatial_scatter.query},
        {"fgsa.scatter.W_K", spatial_scatter.key},
        {"fgsa.scatter.W_V", spatial_scatter.value},
        {"fgsa.norm.gamma", spatial_norm.gamma},
        {"fgsa.norm.beta", spatial_norm.beta},
        {"fgsa.ffn.W_Z", spatial_ffn.weight},
        {"fgsa.ffn.b_Z", spatial_ffn.bias},
    });
  }
  out.emplace_back("decoder.W", decoder_weight);
  out.emplace_back("decoder.b", decoder_bias);
  return out;
}

namespace {

Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (auto& v : values) v = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(values), true);
}

AttentionWeights xavier_attention(Rng& rng, std::size_t d) {
  auto q = xavier(rng, d, d);
  auto k = xavier(rng, d, d);
  auto v = xavier(rng, d, d);
  return {q, k, v};
}

NormParams identity_norm(std::size_t d) {
  return {Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)};
}

void check_finite(const Tensor& t, const char* stage) {
  if (!all_finite(t.data())) throw NumericFault(std::string("non-finite values produced by ") + stage);
}

}  // namespace

Tensor feed_forward_residual(const Tensor& x, const FeedForward& ffn, Activation activation) {
  Tensor pre = add_tiled_rows(matmul(x, ffn.weight), ffn.bias);
  Tensor act = activation == Activation::gelu ? gelu(pre) : relu(pre);
  return add(act, x);
}

Tensor cgta_forward(const Tensor& embedded, const ModelState& state, const ModelConfig& config, std::size_t groups,
                    AttentionProbe* probe) {
  const std::size_t m = config.chunks();
  AttentionLayout layout{groups, m, m, config.heads, false};
  Tensor attended = multi_head_attention(embedded, embedded, embedded, state.temporal, layout, probe);
  Tensor normed = layer_norm(add(attended, embedded), state.temporal_norm.gamma, state.temporal_norm.beta,
                             config.norm_epsilon);
  return feed_forward_residual(normed, state.temporal_ffn, config.activation);
}

Tensor fgsa_forward(const Tensor& tokens, const ModelState& state, const ModelConfig& config, std::size_t groups,
                    std::size_t series, AttentionProbe* gather_probe, AttentionProbe* scatter_probe) {
  if (!state.aggregator.defined()) throw UsageError("fgsa_forward: spatial block is disabled");
  const std::size_t g = state.aggregator.rows();
  AttentionLayout gather{groups, g, series, config.heads, true};
  Tensor aggregate = multi_head_attention(state.aggregator, tokens, tokens, state.spatial_gather, gather, gather_probe);
  AttentionLayout scatter{groups, series, g, config.heads, false};
  Tensor refined = multi_head_attention(tokens, aggregate, aggregate, state.spatial_scatter, scatter, scatter_probe);
  Tensor normed = layer_norm(add(refined, tokens), state.spatial_norm.gamma, state.spatial_norm.beta,
                             config.norm_epsilon);
  return feed_forward_residual(normed, state.spatial_ffn, config.activation);
}

Tensor full_spatial_attention(const Tensor& tokens, const AttentionWeights& weights, std::size_t groups,
                              std::size_t series, std::size_t heads) {
  AttentionLayout layout{groups, series, series, heads, false};
  return multi_head_attention(tokens, tokens, tokens, weights, layout);
}

Tensor decode(const Tensor& z, const ModelState& state, const ModelConfig& config) {
  const std::size_t block = config.chunks() * config.d_model();
  if (z.size() % block != 0) {
    throw DimensionError("decode: " + shape_string(z.shape()) + " is not a whole number of " +
                         std::to_string(config.chunks()) + "x" + std::to_string(config.d_model()) + " blocks");
  }
  Tensor flat = reshape(z, {z.size() / block, block});
  return add_tiled_rows(matmul(flat, state.decoder_weight), state.decoder_bias);
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.d_model();
  const std::size_t m = config_.chunks();
  Rng rng(seed);
  state_.chunk_projection = xavier(rng, config_.chunking.chunk, d);
  state_.temporal = xavier_attention(rng, d);
  state_.temporal_norm = identity_norm(d);
  state_.temporal_ffn = {xavier(rng, d, d), Tensor::zeros({d}, true)};
  if (config_.use_fgsa) {
    std::vector<double> g(config_.aggregators * d);
    const double sd = std::sqrt(1.0 / static_cast<double>(d));
    for (auto& v : g) v = rng.normal(0.0, sd);
    state_.aggregator = Tensor::matrix(config_.aggregators, d, std::move(g), true);
    state_.spatial_gather = xavier_attention(rng, d);
    state_.spatial_scatter = xavier_attention(rng, d);
    state_.spatial_norm = identity_norm(d);
    state_.spatial_ffn = {xavier(rng, d, d), Tensor::zeros({d}, true)};
  }
  state_.decoder_weight = xavier(rng, m * d, config_.horizon);
  state_.decoder_bias = Tensor::zeros({config_.horizon}, true);
  positional_ = positional_matrix(m, d);
}

Model::Model(ModelConfig config, ModelState state)
    : config_(std::move(config)), state_(std::move(state)),
      positional_(positional_matrix(config_.chunks(), config_.d_model())) {}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : state_.named()) out.push_back(t);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (auto& [name, t] : state_.named()) total += t.size();
  return total;
}

Tensor Model::forward(std::span<const Sample> batch, ForwardTrace* trace) const {
  if (batch.empty()) throw UsageError("forward: empty batch");
  const std::size_t n = config_.n_series;
  const std::size_t t = config_.chunking.history;
  const std::size_t m = config_.chunks();
  const std::size_t c = config_.chunking.chunk;
  const std::size_t rows = batch.size() * n;

  std::vector<double> chunks;
  chunks.reserve(rows * m * c);
  for (const auto& sample : batch) {
    if (sample.input.size() != n * t) {
      throw DimensionError("forward: sample input has " + std::to_string(sample.input.size()) + " values, expected " +
                           std::to_string(n) + "x" + std::to_string(t));
    }
    for (std::size_t s = 0; s < n; ++s) {
      auto cm = segment(std::span<const double>(sample.input).subspan(s * t, t), config_.chunking, s);
      chunks.insert(chunks.end(), cm.values.begin(), cm.values.end());
    }
  }
  Tensor chunk_rows = Tensor::matrix(rows * m, c, std::move(chunks));
  Tensor embedded = add_tiled_rows(matmul(chunk_rows, state_.chunk_projection), positional_);
  check_finite(embedded, "embedding");

  Tensor temporal = cgta_forward(embedded, state_, config_, rows, trace ? &trace->temporal_attention : nullptr);
  check_finite(temporal, "temporal attention block");

  Tensor z = temporal;
  if (config_.use_fgsa) {
    // (b, n, m) -> (b, m, n) so each chunk position sees all N series together.
    const std::size_t b_count = batch.size();
    std::vector<std::size_t> to_position(rows * m), to_series(rows * m);
    for (std::size_t b = 0; b < b_count; ++b) {
      for (std::size_t pos = 0; pos < m; ++pos) {
        for (std::size_t s = 0; s < n; ++s) {
          const std::size_t by_position = (b * m + pos) * n + s;
          const std::size_t by_series = (b * n + s) * m + pos;
          to_position[by_position] = by_series;
          to_series[by_series] = by_position;
        }
      }
    }
    Tensor tokens = gather_rows(temporal, to_position);
    Tensor spatial = fgsa_forward(tokens, state_, config_, b_count * m, n,
                                  trace ? &trace->gather_attention : nullptr,
                                  trace ? &trace->scatter_attention : nullptr);
    check_finite(spatial, "spatial attention block");
    z = gather_rows(spatial, to_series);
  }

  Tensor out = decode(z, state_, config_);
  check_finite(out, "decoder");
  if (trace) {
    trace->embedded = embedded;
    trace->temporal = temporal;
    trace->spatial = z;
  }
  return out;
}

Tensor stack_targets(std::span<const Sample> batch, std::size_t n_series, std::size_t horizon) {
  std::vector<double> values;
  values.reserve(batch.size() * n_series * horizon);
  for (const auto& s : batch) {
    if (s.target.size() != n_series * horizon) {
      throw DimensionError("sample target has " + std::to_string(s.target.size()) + " values, expected " +
                           std::to_string(n_series) + "x" + std::to_string(horizon));
    }
    values.insert(values.end(), s.target.begin(), s.target.end());
  }
  return Tensor::matrix(batch.size() * n_series, horizon, std::move(values));
}

Tensor Model::loss(std::span<const Sample> batch) const {
  return mse_loss(forward(batch), stack_targets(batch, config_.n_series, config_.horizon));
}

std::vector<double> Model::predict(std::span<const Sample> batch) const {
  NoGradGuard no_grad;
  Tensor out = forward(batch);
  return {out.data().begin(), out.data().end()};
}

Model Model::clone() const {
  ModelState copy = state_;
  auto deep = [](Tensor& t) {
    if (t.defined()) t = t.clone(true);
  };
  for (Tensor* t : {&copy.chunk_projection, &copy.temporal.query, &copy.temporal.key, &copy.temporal.value,
                    &copy.temporal_norm.gamma, &copy.temporal_norm.beta, &copy.temporal_ffn.weight,
                    &copy.temporal_ffn.bias, &copy.aggregator, &copy.spatial_gather.query,
                    &copy.spatial_gather.key, &copy.spatial_gather.value, &copy.spatial_scatter.query,
                    &copy.spatial_scatter.key, &copy.spatial_scatter.value, &copy.spatial_norm.gamma,
                    &copy.spatial_norm.beta, &copy.spatial_ffn.weight, &copy.spatial_ffn.bias,
                    &copy.decoder_weight, &copy.decoder_bias}) {
    deep(*t);
  }
  return Model(config_, std::move(copy));
}

void Model::copy_values_from(const Model& other) {
  auto mine = state_.named();
  auto theirs = other.state_.named();
  if (mine.size() != theirs.size()) throw UsageError("copy_values_from: parameter sets differ");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].first != theirs[i].first || mine[i].second.shape() != theirs[i].second.shape()) {
      throw UsageError("copy_values_from: parameter '" + mine[i].first + "' differs");
    }
    auto dst = mine[i].second.mutable_data();
    auto src = theirs[i].second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

}  // namespace mgstc
