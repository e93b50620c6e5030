#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "chopthin/random.hpp"
#include "chopthin/resample_result.hpp"

/**
 * \file
 * \brief Bounded-ratio resampling.
 *
 * Particles lighter than a threshold `a` are thinned: each survives with
 * probability w / a and then carries weight a. Particles of at least
 * eta * a / 2 are chopped into roughly 2 w / (eta a) replicates that share
 * the (adjusted) original weight. Everything in between passes through
 * untouched. The threshold is chosen so that the expected number of
 * offspring is exactly N, and every output weight ends up in [a, eta a], so
 * the max/min ratio of the output never exceeds eta.
 */

namespace chopthin {

/// Smallest weight ratio for which the continuous offspring function admits
/// a valid chopping for every weight.
inline constexpr double kMinEta = 4.0;

/// Threshold parameters of the expected-offspring function.
class HParams {
 public:
  /// Throws ValidationError unless a > 0 and eta >= 4 (both finite).
  HParams(double a, double eta);

  [[nodiscard]] double a() const noexcept { return a_; }
  [[nodiscard]] double eta() const noexcept { return eta_; }
  /// Chopping onset eta * a / 2.
  [[nodiscard]] double b() const noexcept { return b_; }

 private:
  double a_;
  double eta_;
  double b_;
};

/// Expected number of offspring of a particle of weight w:
///   w / a               if w < a
///   1                   if a <= w < eta a / 2
///   2 w / (eta a)       if w >= eta a / 2
/// Continuous in w and in a. Throws ValidationError for negative w.
double h_eval(double w, const HParams& p);

/// Sum of h_eval over all weights.
double h_sum(std::span<const double> w, const HParams& p);

/// Systematic allocation of `m` points to cells with the given masses.
///
/// The masses are scaled to total m and laid end to end; cell j receives the
/// grid points k + u (k = 0..m-1) that fall into [C_{j-1}, C_j). The counts
/// always sum to exactly m. Throws ValidationError if m > 0 and all masses
/// are zero, if a mass is negative, or if u is outside [0, 1).
std::vector<std::size_t> systematic_counts(std::span<const double> values,
                                           std::size_t m, double u);

/// Bookkeeping of the randomized threshold search.
///
/// `lower` holds the weights not yet classified against the final a, `upper`
/// those not yet classified against the final b = eta a / 2. Weights already
/// classified contribute through the four running totals.
struct SolverState {
  std::vector<double> lower;
  std::vector<double> upper;
  double sum_below_a = 0.0;      ///< sum of weights known to be < a
  std::size_t count_above_a = 0; ///< count of weights known to be >= a
  double sum_above_b = 0.0;      ///< sum of weights known to be >= b
  std::size_t count_above_b = 0; ///< count of weights known to be >= b
  double eta = kMinEta;

  /// sum_i h(w_i) for a candidate threshold, computed from the partial state.
  /// Agrees with h_sum over the full weights whenever the classifications
  /// recorded so far hold for `a`.
  [[nodiscard]] double evaluate(double a) const;
};

struct ThresholdSolution {
  double a = 0.0;
  std::size_t iterations = 0;
  /// Sum over iterations of |lower| + |upper|; expected O(n).
  std::size_t work = 0;
};

using SolverObserver = std::function<void(const SolverState&, double a)>;

/// Finds a > 0 with sum_i h(w_i) = n_out in expected linear time.
///
/// Each iteration draws a pivot uniformly from the longer of the two
/// undecided lists (one call to `rng`), evaluates the offspring sum there, and
/// discards every weight whose side of the threshold the comparison settles.
/// Throws ValidationError for all-zero weights, n_out < 1 or eta < 4.
double solve_a(std::span<const double> w, double eta, std::size_t n_out,
               Rng& rng);

/// As solve_a, also reporting iteration and work counts. `observe`, if set,
/// is called once per iteration with the state and the candidate a, before
/// the state is updated.
ThresholdSolution solve_a_detailed(std::span<const double> w, double eta,
                                   std::size_t n_out, Rng& rng,
                                   const SolverObserver& observe = {});

/// Reference root finder: plain bisection on the non-increasing map
/// a -> sum_i h(w_i), used to cross-check solve_a.
double solve_a_bisection(std::span<const double> w, double eta,
                         std::size_t n_out);

/// One chopped (or passed-through) particle: adjusted weight and the number
/// of replicates it was split into.
struct ChopRecord {
  std::size_t index = 0;
  double adjusted_weight = 0.0;
  std::size_t count = 0;
};

/// Diagnostics of a single chopthin call.
struct ChopthinTrace {
  double a = 0.0;
  std::size_t thinned_survivors = 0;
  /// Correction applied to the adjusted weights so that the total is
  /// conserved after thinning.
  double zeta = 0.0;
  std::vector<ChopRecord> chopped;
};

/// Resamples to exactly `n_out` offspring whose weights have max/min ratio at
/// most eta and sum to the input total.
///
/// Offspring of thinned particles come first (ascending input index), then
/// the replicates of the remaining particles (ascending input index).
/// Zero-weight particles never survive. Throws ValidationError for invalid
/// eta/n_out/weights and DegeneracyError if rounding leaves the count
/// bookkeeping inconsistent.
ResampleResult chopthin(std::span<const double> w, double eta,
                        std::size_t n_out, Rng& rng,
                        ChopthinTrace* trace = nullptr);

}  // namespace chopthin
