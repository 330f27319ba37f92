#pragma once

#include <cstddef>
#include <vector>

namespace mgstc {

/// One supervised window. `input` is N x T and `target` is N x tau, both
/// series-major (series n occupies a contiguous run).
struct Sample {
  std::vector<double> input;
  std::vector<double> target;

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace mgstc
