#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgstc/attention.hpp"
#include "mgstc/sample.hpp"
#include "mgstc/segmenter.hpp"
#include "mgstc/tensor.hpp"

namespace mgstc {

enum class Activation { gelu, relu };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

struct ModelConfig {
  std::size_t n_series = 1;
  ChunkConfig chunking;
  std::size_t horizon = 60;
  std::size_t heads = 8;
  std::size_t aggregators = 10;
  bool use_fgsa = true;
  Activation activation = Activation::gelu;
  double norm_epsilon = 1e-5;

  void validate() const;
  std::size_t chunks() const { return chunking.chunks(); }
  std::size_t d_model() const { return chunking.d_model; }
  std::size_t head_dim() const { return chunking.d_model / heads; }
};

struct NormParams {
  Tensor gamma;
  Tensor beta;
};

/// sigma(x W + b) + x
struct FeedForward {
  Tensor weight;
  Tensor bias;
};

/// Every learnable tensor of the network. Projections use the row-vector
/// convention (tokens are rows, weights multiply on the right).
struct ModelState {
  Tensor chunk_projection;          // W_C   [C x D]
  AttentionWeights temporal;        // W_Q, W_K, W_V
  NormParams temporal_norm;         // gamma, beta of the temporal block
  FeedForward temporal_ffn;         // W_H, b_H
  Tensor aggregator;                // G     [G_agg x D]
  AttentionWeights spatial_gather;  // W'_Q, W'_K, W'_V  (aggregator queries the series)
  AttentionWeights spatial_scatter; // W''_Q, W''_K, W''_V (series query the aggregate)
  NormParams spatial_norm;
  FeedForward spatial_ffn;          // W_Z, b_Z
  Tensor decoder_weight;            // W     [(M*D) x tau]
  Tensor decoder_bias;              // b     [tau]

  /// Canonical (name, tensor) pairs in a fixed order; spatial entries are
  /// absent when the spatial block is disabled.
  std::vector<std::pair<std::string, Tensor>> named() const;
};

/// Intermediate results captured by Model::forward for inspection.
struct ForwardTrace {
  Tensor embedded;
  Tensor temporal;
  Tensor spatial;
  AttentionProbe temporal_attention;
  AttentionProbe gather_attention;
  AttentionProbe scatter_attention;
};

/// sigma(x W + b) + x
Tensor feed_forward_residual(const Tensor& x, const FeedForward& ffn, Activation activation);

/// Temporal block over `groups` series, each contributing M consecutive rows
/// of `embedded`: A = MHA(E, E, E); H~ = LN(A + E); H = FFN(H~) + H~.
Tensor cgta_forward(const Tensor& embedded, const ModelState& state, const ModelConfig& config, std::size_t groups,
                    AttentionProbe* probe = nullptr);

/// Spatial block over `groups` token sets of `series` rows each (one set per
/// chunk position): F = MHA(G, H, H); B = MHA(H, F, F); Z~ = LN(B + H);
/// Z = FFN(Z~) + Z~.
Tensor fgsa_forward(const Tensor& tokens, const ModelState& state, const ModelConfig& config, std::size_t groups,
                    std::size_t series, AttentionProbe* gather_probe = nullptr,
                    AttentionProbe* scatter_probe = nullptr);

/// Reference full spatial self-attention MHA(H, H, H) over the same token
/// sets; used to contrast cost with the aggregator route.
Tensor full_spatial_attention(const Tensor& tokens, const AttentionWeights& weights, std::size_t groups,
                              std::size_t series, std::size_t heads);

/// Flatten each series' M x D block and apply the shared linear head:
/// [(rows*M) x D] -> [rows x tau].
Tensor decode(const Tensor& z, const ModelState& state, const ModelConfig& config);

/// The full forecaster: segmentation, embedding, temporal block, spatial
/// block per chunk position, and the linear decoder.
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelState& state() { return state_; }
  const ModelState& state() const { return state_; }

  std::vector<std::pair<std::string, Tensor>> named_parameters() const { return state_.named(); }
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;

  /// Predictions as [(batch*N) x tau]; row b*N + n is series n of sample b.
  Tensor forward(std::span<const Sample> batch, ForwardTrace* trace = nullptr) const;
  /// Mean squared error of forward() against the batch targets.
  Tensor loss(std::span<const Sample> batch) const;
  /// forward() without recording history, flattened.
  std::vector<double> predict(std::span<const Sample> batch) const;

  /// Deep copy with independent parameter storage.
  Model clone() const;
  /// Overwrite parameter values from a model of identical configuration.
  void copy_values_from(const Model& other);

 private:
  Model(ModelConfig config, ModelState state);

  ModelConfig config_;
  ModelState state_;
  Tensor positional_;
};

/// Targets of a batch stacked as [(batch*N) x tau].
Tensor stack_targets(std::span<const Sample> batch, std::size_t n_series, std::size_t horizon);

}  // namespace mgstc
