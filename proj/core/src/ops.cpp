#include "mgstc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mgstc/error.hpp"

namespace mgstc {

namespace {

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = pa[i * k + p];
      if (s == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
    }
  }
  return Tensor::from_op({m, n}, std::move(out), {a, b},
      [m, k, n](detail::Node& self) {
        auto& na = parent(self, 0);
        auto& nb = parent(self, 1);
        const double* g = self.grad.data();
        if (na.requires_grad) {
          auto ga = na.grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double* brow = nb.data.data() + p * n;
              const double* grow = g + i * n;
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              ga[i * k + p] += acc;
            }
          }
        }
        if (nb.requires_grad) {
          auto gb = nb.grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            const double* grow = g + i * n;
            for (std::size_t p = 0; p < k; ++p) {
              const double s = na.data[i * k + p];
              if (s == 0.0) continue;
              double* dst = gb.data() + p * n;
              for (std::size_t j = 0; j < n; ++j) dst[j] += s * grow[j];
            }
          }
        }
      },
      "matmul");
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b},
      [](detail::Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
          auto& np = parent(self, p);
          if (!np.requires_grad) continue;
          auto g = np.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
      },
      "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b},
      [](detail::Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
          auto& np = parent(self, p);
          if (!np.requires_grad) continue;
          const double sign = p == 0 ? 1.0 : -1.0;
          auto g = np.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
        }
      },
      "sub");
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * x.data()[i];
  return Tensor::from_op(x.shape(), std::move(out), {x},
      [factor](detail::Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
      },
      "scale");
}

Tensor add_tiled_rows(const Tensor& x, const Tensor& tile) {
  require_matrix(x, "add_tiled_rows");
  const std::size_t cols = x.cols();
  std::size_t tile_rows = 0;
  if (tile.rank() == 1 && tile.dim(0) == cols) {
    tile_rows = 1;
  } else if (tile.rank() == 2 && tile.cols() == cols) {
    tile_rows = tile.rows();
  }
  if (tile_rows == 0 || x.rows() % tile_rows != 0) {
    throw DimensionError("add_tiled_rows: cannot tile " + shape_string(tile.shape()) + " over " +
                         shape_string(x.shape()));
  }
  const std::size_t period = tile_rows * cols;
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += tile.data()[i % period];
  return Tensor::from_op(x.shape(), std::move(out), {x, tile},
      [period](detail::Node& self) {
        auto& nx = parent(self, 0);
        auto& nt = parent(self, 1);
        if (nx.requires_grad) {
          auto g = nx.grad_buffer();
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (nt.requires_grad) {
          auto g = nt.grad_buffer();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % period] += self.grad[i];
        }
      },
      "add_tiled_rows");
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return Tensor::from_op({1}, {acc}, {x},
      [](detail::Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (auto& v : g) v += self.grad[0];
      },
      "sum");
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  return Tensor::from_op(x.shape(), std::move(out), {x},
      [](detail::Node& self) {
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        auto& nx = parent(self, 0);
        auto g = nx.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = nx.data[i];
          const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
          const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
          g[i] += self.grad[i] * (cdf + v * pdf);
        }
      },
      "gelu");
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, x.data()[i]);
  return Tensor::from_op(x.shape(), std::move(out), {x},
      [](detail::Node& self) {
        auto& nx = parent(self, 0);
        auto g = nx.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (nx.data[i] > 0.0) g[i] += self.grad[i];
        }
      },
      "relu");
}

Tensor softmax_rows(const Tensor& x) {
  require_matrix(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = x.data().data() + i * n;
    double* row = out.data() + i * n;
    const double peak = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += row[j] = std::exp(in[j] - peak);
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return Tensor::from_op({m, n}, std::move(out), {x},
      [m, n](detail::Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
          const double* y = self.data.data() + i * n;
          const double* dy = self.grad.data() + i * n;
          double dot = 0.0;
          for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
          for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (dy[j] - dot);
        }
      },
      "softmax_rows");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
  require_matrix(x, "layer_norm");
  if (!(epsilon > 0.0)) throw ConfigError("layer_norm: epsilon must be positive");
  const std::size_t m = x.rows(), n = x.cols();
  for (const Tensor* p : {&gamma, &beta}) {
    if (p->size() != 1 && p->size() != n) {
      throw DimensionError("layer_norm: affine parameter " + shape_string(p->shape()) +
                           " does not match width " + std::to_string(n));
    }
  }
  const bool gamma_vec = gamma.size() == n && n != 1;
  const bool beta_vec = beta.size() == n && n != 1;

  std::vector<double> xhat(m * n), inv_std(m), out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = x.data().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (in[j] - mu) * inv_std[i];
      xhat[i * n + j] = h;
      out[i * n + j] = gamma.data()[gamma_vec ? j : 0] * h + beta.data()[beta_vec ? j : 0];
    }
  }
  return Tensor::from_op({m, n}, std::move(out), {x, gamma, beta},
      [m, n, gamma_vec, beta_vec, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& self) {
        auto& nx = parent(self, 0);
        auto& ng = parent(self, 1);
        auto& nb = parent(self, 2);
        const double* dy = self.grad.data();
        if (ng.requires_grad) {
          auto g = ng.grad_buffer();
          for (std::size_t i = 0; i < m * n; ++i) g[gamma_vec ? i % n : 0] += dy[i] * xhat[i];
        }
        if (nb.requires_grad) {
          auto g = nb.grad_buffer();
          for (std::size_t i = 0; i < m * n; ++i) g[beta_vec ? i % n : 0] += dy[i];
        }
        if (nx.requires_grad) {
          auto g = nx.grad_buffer();
          std::vector<double> dxhat(n);
          for (std::size_t i = 0; i < m; ++i) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              dxhat[j] = dy[i * n + j] * ng.data[gamma_vec ? j : 0];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[i * n + j];
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
              g[i * n + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
            }
          }
        }
      },
      "layer_norm");
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  return Tensor::from_op(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
      [](detail::Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "reshape");
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.cols(), rows = x.rows();
  std::vector<double> out(index.size() * n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= rows) throw DimensionError("gather_rows: index out of range");
    std::copy_n(x.data().data() + index[i] * n, n, out.data() + i * n);
  }
  return Tensor::from_op({index.size(), n}, std::move(out), {x},
      [n, idx = std::vector<std::size_t>(index.begin(), index.end())](detail::Node& self) {
        auto g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < n; ++j) g[idx[i] * n + j] += self.grad[i * n + j];
        }
      },
      "gather_rows");
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mse_loss");
  const auto count = static_cast<double>(prediction.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double e = prediction.data()[i] - target.data()[i];
    acc += e * e;
  }
  return Tensor::from_op({1}, {acc / count}, {prediction, target},
      [count](detail::Node& self) {
        auto& np = parent(self, 0);
        auto& nt = parent(self, 1);
        const double g0 = self.grad[0] * 2.0 / count;
        for (std::size_t p = 0; p < 2; ++p) {
          auto& node = p == 0 ? np : nt;
          if (!node.requires_grad) continue;
          auto g = node.grad_buffer();
          const double sign = p == 0 ? 1.0 : -1.0;
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * g0 * (np.data[i] - nt.data[i]);
        }
      },
      "mse_loss");
}

double mse(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || prediction.empty()) {
    throw DimensionError("mse: length mismatch " + std::to_string(prediction.size()) + " vs " +
                         std::to_string(target.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double e = prediction[i] - target[i];
    acc += e * e;
  }
  return acc / static_cast<double>(prediction.size());
}

double mae(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || prediction.empty()) {
    throw DimensionError("mae: length mismatch " + std::to_string(prediction.size()) + " vs " +
                         std::to_string(target.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) acc += std::abs(prediction[i] - target[i]);
  return acc / static_cast<double>(prediction.size());
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace mgstc
