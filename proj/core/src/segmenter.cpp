#include "mgstc/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgstc/error.hpp"
#include "mgstc/ops.hpp"

namespace mgstc {

void ChunkConfig::validate() const {
  if (stride == 0) throw ConfigError("stride must be positive");
  if (stride > chunk) throw ConfigError("stride (" + std::to_string(stride) + ") exceeds chunk length (" + std::to_string(chunk) + ")");
  if (chunk > history) throw ConfigError("chunk length (" + std::to_string(chunk) + ") exceeds history (" + std::to_string(history) + ")");
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("d_model must be even and positive, got " + std::to_string(d_model));
}

std::size_t ChunkConfig::chunks() const { return count_chunks(history, chunk, stride); }

std::vector<double> pad_series(std::span<const double> series, std::size_t stride) {
  if (series.empty()) throw ParseError("pad_series: empty series");
  if (stride == 0) throw ConfigError("pad_series: stride must be positive");
  std::vector<double> out(series.begin(), series.end());
  out.insert(out.end(), stride, series.back());
  return out;
}

std::size_t count_chunks(std::size_t history, std::size_t chunk, std::size_t stride) {
  if (stride == 0 || chunk == 0) throw ConfigError("chunk and stride must be positive");
  if (chunk > history) throw ConfigError("chunk length (" + std::to_string(chunk) + ") exceeds history (" + std::to_string(history) + ")");
  if (stride > chunk) throw ConfigError("stride (" + std::to_string(stride) + ") exceeds chunk length (" + std::to_string(chunk) + ")");
  return (history - chunk) / stride + 2;
}

ChunkMatrix segment(std::span<const double> series, const ChunkConfig& config, std::size_t series_index) {
  if (series.size() != config.history) {
    throw DimensionError("segment: series length " + std::to_string(series.size()) +
                         " differs from history " + std::to_string(config.history));
  }
  const std::size_t rows = count_chunks(config.history, config.chunk, config.stride);
  const auto padded = pad_series(series, config.stride);
  ChunkMatrix out{series_index, rows, config.chunk, std::vector<double>(rows * config.chunk)};
  for (std::size_t m = 0; m < rows; ++m) {
    std::copy_n(padded.begin() + static_cast<std::ptrdiff_t>(m * config.stride), config.chunk,
                out.values.begin() + static_cast<std::ptrdiff_t>(m * config.chunk));
  }
  return out;
}

Tensor positional_matrix(std::size_t chunks, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("positional_matrix: d_model must be even, got " + std::to_string(d_model));
  if (chunks == 0) throw ConfigError("positional_matrix: need at least one chunk");
  std::vector<double> table(chunks * d_model);
  for (std::size_t pos = 0; pos < chunks; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) / freq;
      table[pos * d_model + 2 * i] = std::sin(angle);
      table[pos * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor::matrix(chunks, d_model, std::move(table));
}

Tensor embed(const ChunkMatrix& chunks, const Tensor& projection, const Tensor& positional) {
  if (projection.rank() != 2 || projection.rows() != chunks.chunk_length) {
    throw DimensionError("embed: projection " + shape_string(projection.shape()) +
                         " does not accept chunks of length " + std::to_string(chunks.chunk_length));
  }
  if (positional.rank() != 2 || positional.rows() != chunks.rows || positional.cols() != projection.cols()) {
    throw DimensionError("embed: positional table " + shape_string(positional.shape()) +
                         " does not match " + std::to_string(chunks.rows) + " chunks of width " +
                         std::to_string(projection.cols()));
  }
  const Tensor c = Tensor::matrix(chunks.rows, chunks.chunk_length, chunks.values);
  return add(matmul(c, projection), positional);
}

}  // namespace mgstc
