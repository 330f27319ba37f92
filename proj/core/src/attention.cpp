#include "mgstc/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgstc/error.hpp"
#include "mgstc/ops.hpp"

namespace mgstc {

namespace {

thread_local std::uint64_t g_attention_flops = 0;

void check_layout(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw DimensionError("attention: Q/K/V must be matrices");
  const std::size_t width = q.cols();
  if (k.cols() != width || v.cols() != width) {
    throw DimensionError("attention: width mismatch between " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()) + " and " + shape_string(v.shape()));
  }
  if (layout.heads == 0 || width % layout.heads != 0) {
    throw DimensionError("attention: width " + std::to_string(width) + " not divisible by " +
                         std::to_string(layout.heads) + " heads");
  }
  const std::size_t q_expected = layout.shared_query ? layout.query_rows : layout.groups * layout.query_rows;
  if (layout.groups == 0 || layout.query_rows == 0 || layout.key_rows == 0 || q.rows() != q_expected ||
      k.rows() != layout.groups * layout.key_rows || v.rows() != k.rows()) {
    throw DimensionError("attention: layout (" + std::to_string(layout.groups) + " groups, " +
                         std::to_string(layout.query_rows) + " queries, " + std::to_string(layout.key_rows) +
                         " keys) does not match " + shape_string(q.shape()) + ", " + shape_string(k.shape()) +
                         ", " + shape_string(v.shape()));
  }
}

}  // namespace

std::uint64_t attention_flops() { return g_attention_flops; }
void reset_attention_flops() { g_attention_flops = 0; }

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionLayout& layout,
                            AttentionProbe* probe) {
  check_layout(q, k, v, layout);
  const std::size_t width = q.cols();
  const std::size_t heads = layout.heads;
  const std::size_t dk = width / heads;
  const std::size_t a = layout.query_rows, b = layout.key_rows, groups = layout.groups;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  const double* pq = q.data().data();
  const double* pk = k.data().data();
  const double* pv = v.data().data();
  std::vector<double> probs(groups * heads * a * b);
  std::vector<double> out(groups * a * width, 0.0);

  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t q0 = layout.shared_query ? 0 : g * a;
    const std::size_t k0 = g * b;
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t c0 = h * dk;
      double* p = probs.data() + (g * heads + h) * a * b;
      for (std::size_t i = 0; i < a; ++i) {
        const double* qi = pq + (q0 + i) * width + c0;
        double* row = p + i * b;
        double peak = -INFINITY;
        for (std::size_t j = 0; j < b; ++j) {
          const double* kj = pk + (k0 + j) * width + c0;
          double s = 0.0;
          for (std::size_t c = 0; c < dk; ++c) s += qi[c] * kj[c];
          row[j] = s * inv_scale;
          peak = std::max(peak, row[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < b; ++j) total += row[j] = std::exp(row[j] - peak);
        for (std::size_t j = 0; j < b; ++j) row[j] /= total;
        double* oi = out.data() + (g * a + i) * width + c0;
        for (std::size_t j = 0; j < b; ++j) {
          const double w = row[j];
          const double* vj = pv + (k0 + j) * width + c0;
          for (std::size_t c = 0; c < dk; ++c) oi[c] += w * vj[c];
        }
      }
    }
  }
  g_attention_flops += static_cast<std::uint64_t>(groups * heads * a * b * (4 * dk + 3));

  if (probe) {
    probe->layout = layout;
    probe->probabilities = probs;
  }

  return Tensor::from_op({groups * a, width}, std::move(out), {q, k, v},
      [layout, width, dk, inv_scale, probs = std::move(probs)](detail::Node& self) {
        auto& nq = *self.parents[0];
        auto& nk = *self.parents[1];
        auto& nv = *self.parents[2];
        const std::size_t a = layout.query_rows, b = layout.key_rows;
        std::span<double> gq, gk, gv;
        if (nq.requires_grad) gq = nq.grad_buffer();
        if (nk.requires_grad) gk = nk.grad_buffer();
        if (nv.requires_grad) gv = nv.grad_buffer();
        std::vector<double> dp(b);
        for (std::size_t g = 0; g < layout.groups; ++g) {
          const std::size_t q0 = layout.shared_query ? 0 : g * a;
          const std::size_t k0 = g * b;
          for (std::size_t h = 0; h < layout.heads; ++h) {
            const std::size_t c0 = h * dk;
            const double* p = probs.data() + (g * layout.heads + h) * a * b;
            for (std::size_t i = 0; i < a; ++i) {
              const double* go = self.grad.data() + (g * a + i) * width + c0;
              const double* pi = p + i * b;
              // dP = dO V^T ; dV += P^T dO
              double dot = 0.0;
              for (std::size_t j = 0; j < b; ++j) {
                const double* vj = nv.data.data() + (k0 + j) * width + c0;
                double s = 0.0;
                for (std::size_t c = 0; c < dk; ++c) s += go[c] * vj[c];
                dp[j] = s;
                dot += s * pi[j];
                if (!gv.empty()) {
                  double* dvj = gv.data() + (k0 + j) * width + c0;
                  for (std::size_t c = 0; c < dk; ++c) dvj[c] += pi[j] * go[c];
                }
              }
              // dS = P * (dP - <dP, P>), scaled into dQ and dK.
              const double* qi = nq.data.data() + (q0 + i) * width + c0;
              for (std::size_t j = 0; j < b; ++j) {
                const double ds = pi[j] * (dp[j] - dot) * inv_scale;
                if (ds == 0.0) continue;
                const double* kj = nk.data.data() + (k0 + j) * width + c0;
                if (!gq.empty()) {
                  double* dqi = gq.data() + (q0 + i) * width + c0;
                  for (std::size_t c = 0; c < dk; ++c) dqi[c] += ds * kj[c];
                }
                if (!gk.empty()) {
                  double* dkj = gk.data() + (k0 + j) * width + c0;
                  for (std::size_t c = 0; c < dk; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      },
      "attention");
}

Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const AttentionWeights& weights, const AttentionLayout& layout, AttentionProbe* probe) {
  return scaled_dot_attention(matmul(query, weights.query), matmul(key, weights.key), matmul(value, weights.value),
                              layout, probe);
}

Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                            const AttentionWeights& weights, std::size_t heads, AttentionProbe* probe) {
  if (query.rank() != 2 || key.rank() != 2) throw DimensionError("attention: query and key must be matrices");
  AttentionLayout layout{1, query.rows(), key.rows(), heads, false};
  return multi_head_attention(query, key, value, weights, layout, probe);
}

}  // namespace mgstc
