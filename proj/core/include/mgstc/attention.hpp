#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mgstc/tensor.hpp"

namespace mgstc {

/// Query/key/value projections of one attention layer, each [D x D]. Head h
/// owns columns [h*d_k, (h+1)*d_k) of every projection, d_k = D / heads.
struct AttentionWeights {
  Tensor query;
  Tensor key;
  Tensor value;
};

/// Describes how rows of the (already projected) Q/K/V matrices split into
/// independent attention problems. Group g uses query rows
/// [g*query_rows, (g+1)*query_rows) -- or rows [0, query_rows) for every
/// group when `shared_query` is set -- and key/value rows
/// [g*key_rows, (g+1)*key_rows).
struct AttentionLayout {
  std::size_t groups = 1;
  std::size_t query_rows = 0;
  std::size_t key_rows = 0;
  std::size_t heads = 1;
  bool shared_query = false;
};

/// Optional capture of the softmax probabilities, stored as
/// groups x heads blocks of query_rows x key_rows.
struct AttentionProbe {
  AttentionLayout layout;
  std::vector<double> probabilities;

  double at(std::size_t group, std::size_t head, std::size_t q, std::size_t k) const {
    return probabilities[((group * layout.heads + head) * layout.query_rows + q) * layout.key_rows + k];
  }
};

/// Per group and head: softmax(Q_h K_h^T / sqrt(d_k)) V_h, heads concatenated
/// back to width D.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout,
                            AttentionProbe* probe = nullptr);

/// Projects with `weights` then applies scaled_dot_attention. No output
/// projection: the concatenated heads are the result.
Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const AttentionWeights& weights, const AttentionLayout& layout,
                            AttentionProbe* probe = nullptr);

/// Single-group form: query [a x D], key/value [b x D].
Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const AttentionWeights& weights, std::size_t heads, AttentionProbe* probe = nullptr);

/// Floating-point operations spent inside scaled_dot_attention (score
/// products, softmax, weighted sums) on this thread since the last reset.
/// Projections are not counted.
std::uint64_t attention_flops();
void reset_attention_flops();

}  // namespace mgstc
