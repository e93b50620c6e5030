#pragma once

#include <cstddef>
#include <vector>

namespace chopthin {

/// Output of any resampler: one entry per offspring.
///
/// `ancestors[k]` is the 0-based index of the input particle that offspring k
/// descends from and `weights[k]` its new weight. Both vectors have the same
/// length.
struct ResampleResult {
  std::vector<std::size_t> ancestors;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const noexcept { return ancestors.size(); }

  /// Number of offspring of each of `n_inputs` input particles.
  [[nodiscard]] std::vector<std::size_t> counts(std::size_t n_inputs) const;

  bool operator==(const ResampleResult&) const = default;
};

}  // namespace chopthin
