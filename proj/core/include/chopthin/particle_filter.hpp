#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "chopthin/models.hpp"
#include "chopthin/random.hpp"
#include "chopthin/resamplers.hpp"

namespace chopthin {

struct PfConfig {
  std::size_t particles = 1000;  ///< target count N
  double beta = 1000.0;          ///< resample when ESS <= beta; in [0, N]
  Scheme scheme = Scheme::systematic;
  std::optional<double> eta;     ///< set iff scheme is chopthin
  std::uint64_t seed = 0;

  /// Throws ValidationError if the fields are inconsistent.
  void validate() const;
};

struct PfOutput {
  std::vector<double> posterior_means;
  /// log p^(y_t | y_{1:t-1}).
  std::vector<double> log_likelihoods;
  std::vector<double> ess_before;
  std::vector<double> ess_after;
  std::vector<bool> resampled;
  /// Particle count after step t (varies only for branching).
  std::vector<std::size_t> particle_counts;

  [[nodiscard]] std::size_t steps() const noexcept {
    return posterior_means.size();
  }
  /// log p^(y_{1:T}) as the sum of the per-step terms.
  [[nodiscard]] double log_marginal_likelihood() const;
};

/// Bootstrap particle filter.
///
/// Per step: propagate every particle through the transition, multiply its
/// weight by the observation likelihood, record the ESS, and if ESS <= beta
/// resample to N and rescale the weights to sum to N. The conditional
/// likelihood estimate is the ratio of the weight sums after and before the
/// update; posterior means use the weights after resampling. Weights are
/// kept at sum N between steps, so the estimate equals the mean updated
/// weight. Throws DegeneracyError naming the step if every particle gets
/// zero likelihood.
PfOutput pf_run(const ModelSpec& model, std::span<const double> observations,
                const PfConfig& cfg, Rng& rng);

/// As above with Rng(cfg.seed).
PfOutput pf_run(const ModelSpec& model, std::span<const double> observations,
                const PfConfig& cfg);

}  // namespace chopthin
