#include "chopthin/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chopthin/error.hpp"

namespace chopthin {

double validate_weights(std::span<const double> w) {
  if (w.empty()) throw ValidationError("weight vector is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i]) || w[i] < 0.0) {
      throw ValidationError("weight " + std::to_string(i) +
                            " is negative or not finite");
    }
    total += w[i];
  }
  if (!(total > 0.0)) throw ValidationError("weights sum to zero");
  if (!std::isfinite(total)) throw ValidationError("weight sum overflows");
  return total;
}

double ess(std::span<const double> w) {
  validate_weights(w);
  // Scale by the largest entry first so the squares cannot overflow or
  // underflow for extreme but valid inputs.
  const double top = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : w) {
    const double s = v / top;
    sum += s;
    sum_sq += s * s;
  }
  return sum * sum / sum_sq;
}

std::vector<double> normalize_to(std::span<const double> w, double total) {
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ValidationError("normalization target must be positive and finite");
  }
  const double current = validate_weights(w);
  const double scale = total / current;
  std::vector<double> out(w.begin(), w.end());
  for (double& v : out) v *= scale;
  return out;
}

double weight_ratio(std::span<const double> w) {
  validate_weights(w);
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  if (!(*lo > 0.0)) {
    throw ValidationError("weight ratio is undefined when a weight is zero");
  }
  return *hi / *lo;
}

double ess_lower_bound(double eta, std::size_t n) {
  if (!(eta >= 1.0) || !std::isfinite(eta)) {
    throw ValidationError("eta must be finite and >= 1");
  }
  if (n < 1) throw ValidationError("n must be >= 1");
  const double nn = static_cast<double>(n);
  return 4.0 * (eta * nn + 1.0 - eta * eta) / ((eta + 1.0) * (eta + 1.0));
}

double eta_for_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ValidationError("gamma must lie in (0, 1]");
  }
  return (2.0 - gamma + 2.0 * std::sqrt(1.0 - gamma)) / gamma;
}

}  // namespace chopthin
