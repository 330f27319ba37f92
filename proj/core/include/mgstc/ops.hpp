#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mgstc/tensor.hpp"

namespace mgstc {

// Differentiable primitives. Matrices are rank-2 row-major tensors.

/// a[m x k] * b[k x n]. Throws DimensionError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise a + b, a - b on identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// x[R x n] + tile(t[r x n]) where r divides R: row i of x receives row
/// (i mod r) of t. Covers bias vectors (r = 1) and positional tables.
Tensor add_tiled_rows(const Tensor& x, const Tensor& tile);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);

/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

/// Per-row layer normalization over the last axis followed by the affine
/// map gamma * xhat + beta. gamma/beta hold either one value or one per column.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon);

/// Same values, new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// Output row i is input row index[i]; gradients scatter-add back.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

/// Mean squared error over all entries.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

/// Plain (non-differentiable) error metrics over equal-length arrays.
double mse(std::span<const double> prediction, std::span<const double> target);
double mae(std::span<const double> prediction, std::span<const double> target);

bool all_finite(std::span<const double> values);

}  // namespace mgstc
