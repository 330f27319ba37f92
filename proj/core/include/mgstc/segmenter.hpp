#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mgstc/tensor.hpp"

namespace mgstc {

/// Chunk geometry of one input window: history length, chunk length, stride
/// and embedding width. Valid when 0 < stride <= chunk <= history and the
/// embedding width is even.
struct ChunkConfig {
  std::size_t history = 128;
  std::size_t chunk = 48;
  std::size_t stride = 32;
  std::size_t d_model = 512;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  std::size_t chunks() const;
};

/// Chunks of one series: `rows` x `chunk_length`, row-major.
struct ChunkMatrix {
  std::size_t series = 0;
  std::size_t rows = 0;
  std::size_t chunk_length = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t m) const {
    return std::span<const double>(values).subspan(m * chunk_length, chunk_length);
  }
};

/// Appends `stride` copies of the last value.
std::vector<double> pad_series(std::span<const double> series, std::size_t stride);

/// floor((history - chunk) / stride) + 2.
std::size_t count_chunks(std::size_t history, std::size_t chunk, std::size_t stride);

/// Row m is padded[m*stride, m*stride + chunk).
ChunkMatrix segment(std::span<const double> series, const ChunkConfig& config, std::size_t series_index = 0);

/// Sinusoidal table: P[pos, 2i] = sin(pos / 10000^(2i/D)), P[pos, 2i+1] = cos(...).
Tensor positional_matrix(std::size_t chunks, std::size_t d_model);

/// E = C * W_C + P with W_C stored as [chunk x D].
Tensor embed(const ChunkMatrix& chunks, const Tensor& projection, const Tensor& positional);

}  // namespace mgstc
