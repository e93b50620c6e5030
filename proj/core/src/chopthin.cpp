#include "chopthin/chopthin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chopthin/error.hpp"
#include "chopthin/weights.hpp"

namespace chopthin {

namespace {

void validate_eta(double eta) {
  if (!std::isfinite(eta) || !(eta >= kMinEta)) {
    throw ValidationError("eta must be finite and >= 4, got " +
                          std::to_string(eta));
  }
}

void validate_count(std::size_t n_out) {
  if (n_out < 1) throw ValidationError("target particle count must be >= 1");
}

double frac(double x) { return x - std::floor(x); }

}  // namespace

std::vector<std::size_t> ResampleResult::counts(std::size_t n_inputs) const {
  std::vector<std::size_t> c(n_inputs, 0);
  for (std::size_t i : ancestors) ++c.at(i);
  return c;
}

HParams::HParams(double a, double eta) : a_(a), eta_(eta), b_(eta * a * 0.5) {
  if (!std::isfinite(a) || !(a > 0.0)) {
    throw ValidationError("threshold a must be positive and finite");
  }
  validate_eta(eta);
}

double h_eval(double w, const HParams& p) {
  if (!(w >= 0.0)) throw ValidationError("weight must be non-negative");
  if (w < p.a()) return w / p.a();
  if (w < p.b()) return 1.0;
  return w / p.b();
}

double h_sum(std::span<const double> w, const HParams& p) {
  double s = 0.0;
  for (double v : w) s += h_eval(v, p);
  return s;
}

std::vector<std::size_t> systematic_counts(std::span<const double> values,
                                           std::size_t m, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("u must lie in [0, 1)");
  std::vector<std::size_t> counts(values.size(), 0);
  double total = 0.0;
  std::size_t last_positive = values.size();
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!std::isfinite(values[j]) || values[j] < 0.0) {
      throw ValidationError("systematic masses must be finite and >= 0");
    }
    total += values[j];
    if (values[j] > 0.0) last_positive = j;
  }
  if (m == 0) return counts;
  if (!(total > 0.0)) {
    throw ValidationError("cannot allocate points to all-zero masses");
  }

  const double scale = static_cast<double>(m) / total;
  double cumulative = 0.0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < values.size() && k < m; ++j) {
    cumulative += values[j];
    // The last occupied cell closes the grid at exactly m.
    const double edge = j == last_positive ? static_cast<double>(m)
                                           : cumulative * scale;
    while (k < m && static_cast<double>(k) + u < edge) {
      ++counts[j];
      ++k;
    }
  }
  return counts;
}

double SolverState::evaluate(double a) const {
  const double b = eta * a * 0.5;
  double h = sum_below_a / a + static_cast<double>(count_above_a) +
             sum_above_b / b - static_cast<double>(count_above_b);
  for (double v : lower) h += std::min(v / a, 1.0);
  for (double v : upper) h += std::max(v / b - 1.0, 0.0);
  return h;
}

ThresholdSolution solve_a_detailed(std::span<const double> w, double eta,
                                   std::size_t n_out, Rng& rng,
                                   const SolverObserver& observe) {
  validate_weights(w);
  validate_eta(eta);
  validate_count(n_out);

  SolverState st;
  st.eta = eta;
  // Zero weights contribute nothing for any a and must never become pivots.
  st.lower.reserve(w.size());
  for (double v : w) {
    if (v > 0.0) st.lower.push_back(v);
  }
  st.upper = st.lower;
  const double min_weight = *std::min_element(st.lower.begin(), st.lower.end());

  const double target = static_cast<double>(n_out);
  ThresholdSolution sol;
  while (!st.lower.empty() || !st.upper.empty()) {
    double a;
    double b;
    if (st.lower.size() >= st.upper.size()) {
      a = st.lower[rng.below(st.lower.size())];
      b = eta * a * 0.5;
    } else {
      b = st.upper[rng.below(st.upper.size())];
      a = 2.0 * b / eta;
    }
    ++sol.iterations;
    sol.work += st.lower.size() + st.upper.size();
    if (observe) observe(st, a);

    const double h = st.evaluate(a);
    if (h == target) {
      sol.a = a;
      return sol;
    }
    if (h > target) {
      // a is too small: everything <= a lies below the root, everything
      // <= b below the root's b.
      for (double v : st.lower) {
        if (v <= a) st.sum_below_a += v;
      }
      std::erase_if(st.lower, [a](double v) { return v <= a; });
      std::erase_if(st.upper, [b](double v) { return v <= b; });
    } else {
      for (double v : st.lower) {
        if (v >= a) ++st.count_above_a;
      }
      for (double v : st.upper) {
        if (v >= b) {
          st.sum_above_b += v;
          ++st.count_above_b;
        }
      }
      std::erase_if(st.lower, [a](double v) { return v >= a; });
      std::erase_if(st.upper, [b](double v) { return v >= b; });
    }
  }

  const double numerator = st.sum_below_a + 2.0 * st.sum_above_b / eta;
  const double denominator = target - static_cast<double>(st.count_above_a) +
                             static_cast<double>(st.count_above_b);
  if (numerator > 0.0 && denominator > 0.0) {
    sol.a = numerator / denominator;
    return sol;
  }
  if (numerator == 0.0 && denominator == 0.0) {
    // Every weight sits in [a, eta a / 2) over a whole interval of a, so the
    // offspring sum is flat at N; the smallest weight is one valid root.
    sol.a = min_weight;
    return sol;
  }
  throw DegeneracyError("threshold search ended in an inconsistent state");
}

double solve_a(std::span<const double> w, double eta, std::size_t n_out,
               Rng& rng) {
  return solve_a_detailed(w, eta, n_out, rng).a;
}

double solve_a_bisection(std::span<const double> w, double eta,
                         std::size_t n_out) {
  validate_weights(w);
  validate_eta(eta);
  validate_count(n_out);

  double min_positive = std::numeric_limits<double>::infinity();
  double max_weight = 0.0;
  for (double v : w) {
    if (v > 0.0) min_positive = std::min(min_positive, v);
    max_weight = std::max(max_weight, v);
  }
  const double target = static_cast<double>(n_out);
  const auto residual = [&](double a) {
    return h_sum(w, HParams(a, eta)) - target;
  };

  double lo = min_positive * 2.0 / eta * 1e-6;
  double hi = max_weight * 1e6;
  double best = hi;
  double best_residual = std::abs(residual(hi));
  for (int iter = 0; iter < 400; ++iter) {
    // Geometric midpoint while the bracket spans orders of magnitude.
    const double mid =
        hi / lo > 4.0 ? std::sqrt(lo) * std::sqrt(hi) : lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    const double r = residual(mid);
    if (std::abs(r) < best_residual) {
      best = mid;
      best_residual = std::abs(r);
    }
    if (best_residual <= 1e-12 * target) break;
    if (r > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best;
}

ResampleResult chopthin(std::span<const double> w, double eta,
                        std::size_t n_out, Rng& rng, ChopthinTrace* trace) {
  const double a = solve_a(w, eta, n_out, rng);
  const HParams params(a, eta);

  ResampleResult out;
  out.ancestors.reserve(n_out);
  out.weights.reserve(n_out);

  // Thin: one running uniform across the light particles in index order.
  double u = rng.uniform();
  double light_total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] < a)) continue;
    light_total += w[i];
    u += w[i] / a;
    if (u >= 1.0) {
      out.ancestors.push_back(i);
      out.weights.push_back(a);
      u -= 1.0;
    }
  }
  const std::size_t n_light = out.size();

  std::vector<std::size_t> heavy;
  std::vector<double> heavy_h;
  std::vector<double> heavy_frac;
  long long whole_offspring = 0;
  double frac_total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < a) continue;
    const double h = h_eval(w[i], params);
    heavy.push_back(i);
    heavy_h.push_back(h);
    heavy_frac.push_back(frac(h));
    whole_offspring += static_cast<long long>(std::floor(h));
    frac_total += heavy_frac.back();
  }

  const long long extra = static_cast<long long>(n_out) -
                          static_cast<long long>(n_light) - whole_offspring;
  if (extra < 0) {
    throw DegeneracyError("thinning produced more offspring than requested");
  }
  double zeta = 0.0;
  if (frac_total > 0.0) {
    zeta = (light_total - a * static_cast<double>(n_light)) / frac_total;
  } else if (extra != 0) {
    throw DegeneracyError("no fractional offspring mass left to allocate");
  }

  std::vector<std::size_t> extra_counts(heavy.size(), 0);
  if (extra > 0) {
    extra_counts = systematic_counts(heavy_frac,
                                     static_cast<std::size_t>(extra),
                                     rng.uniform());
  }

  if (trace != nullptr) {
    trace->a = a;
    trace->thinned_survivors = n_light;
    trace->zeta = zeta;
    trace->chopped.clear();
    trace->chopped.reserve(heavy.size());
  }
  // Chop.
  for (std::size_t k = 0; k < heavy.size(); ++k) {
    const auto copies =
        static_cast<std::size_t>(std::floor(heavy_h[k])) + extra_counts[k];
    const double adjusted = w[heavy[k]] + zeta * heavy_frac[k];
    const double piece = adjusted / static_cast<double>(copies);
    out.ancestors.insert(out.ancestors.end(), copies, heavy[k]);
    out.weights.insert(out.weights.end(), copies, piece);
    if (trace != nullptr) trace->chopped.push_back({heavy[k], adjusted, copies});
  }
  return out;
}

}  // namespace chopthin
