#pragma once

#include <cstddef>
#include <span>
#include <vector>

/**
 * \file
 * \brief Weight-vector arithmetic: effective sample size, normalization,
 * max/min ratio, and the ESS floor implied by a bounded weight ratio.
 */

namespace chopthin {

/// Checks the weight-vector invariants: nonempty, every entry finite and
/// non-negative, positive finite total. Returns the total.
/// Throws ValidationError otherwise.
double validate_weights(std::span<const double> w);

/// Effective sample size (sum w)^2 / sum w^2. Zero entries take part in the
/// sum and contribute nothing. The result lies in [1, n].
double ess(std::span<const double> w);

/// Rescales `w` so that it sums to `total`, preserving proportions.
std::vector<double> normalize_to(std::span<const double> w, double total);

/// max(w) / min(w). Every weight must be strictly positive.
double weight_ratio(std::span<const double> w);

/// Lower bound on the ESS of any n positive weights whose max/min ratio is at
/// most eta:
///
///   4 (eta n + 1 - eta^2) / (eta + 1)^2
///
/// Decreasing in eta. Equals n at eta = 1.
double ess_lower_bound(double eta, std::size_t n);

/// The weight-ratio bound whose leading-order ESS floor is gamma * n, i.e. the
/// root eta >= 1 of 4 eta / (eta + 1)^2 = gamma. gamma must lie in (0, 1].
double eta_for_gamma(double gamma);

}  // namespace chopthin
