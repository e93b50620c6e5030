#include "chopthin/resamplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "chopthin/chopthin.hpp"
#include "chopthin/error.hpp"
#include "chopthin/weights.hpp"

namespace chopthin {

namespace {

constexpr std::array<std::string_view, 8> kNames = {
    "multinomial", "multinomial-condbinom", "systematic",
    "stratified",  "residual",              "residual-stratified",
    "branching",   "chopthin",
};

void append_copies(std::vector<std::size_t>& ancestors,
                   std::span<const std::size_t> counts) {
  for (std::size_t i = 0; i < counts.size(); ++i) {
    ancestors.insert(ancestors.end(), counts[i], i);
  }
}

std::vector<double> cumulative(std::span<const double> w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  return c;
}

// Index of the cell of `target` in cumulative sums, skipping zero-mass cells.
std::size_t locate(const std::vector<double>& cum, double target) {
  auto it = std::upper_bound(cum.begin(), cum.end(), target);
  if (it == cum.end()) {
    // Rounding pushed the target onto the total; take the last occupied cell.
    it = std::lower_bound(cum.begin(), cum.end(), cum.back());
  }
  return static_cast<std::size_t>(it - cum.begin());
}

void multinomial_draws(std::span<const double> w, std::size_t m, Rng& rng,
                       std::vector<std::size_t>& ancestors) {
  if (m == 0) return;
  const auto cum = cumulative(w);
  const double total = cum.back();
  for (std::size_t k = 0; k < m; ++k) {
    ancestors.push_back(locate(cum, rng.uniform() * total));
  }
}

std::vector<std::size_t> stratified_counts(std::span<const double> w,
                                           std::size_t m, Rng& rng) {
  std::vector<std::size_t> counts(w.size(), 0);
  if (m == 0) return counts;
  const auto cum = cumulative(w);
  const double step = cum.back() / static_cast<double>(m);
  std::size_t j = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double point = (static_cast<double>(k) + rng.uniform()) * step;
    while (j + 1 < cum.size() && !(point < cum[j])) ++j;
    // Never land on a zero-mass tail cell.
    while (w[j] == 0.0 && j > 0) --j;
    ++counts[j];
  }
  return counts;
}

struct Split {
  std::vector<std::size_t> whole;
  std::vector<double> residual;
  std::size_t whole_total = 0;
};

// Integer and fractional parts of the expected counts m * w_i / sum(w).
Split split_expected(std::span<const double> w, double total, std::size_t m) {
  Split s;
  s.whole.resize(w.size());
  s.residual.resize(w.size());
  const double scale = static_cast<double>(m) / total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double expected = w[i] * scale;
    const double fl = std::floor(expected);
    s.whole[i] = static_cast<std::size_t>(fl);
    s.residual[i] = expected - fl;
    s.whole_total += s.whole[i];
  }
  if (s.whole_total > m) {
    // Only reachable through rounding of an exactly integral expectation.
    throw DegeneracyError("residual split exceeds the requested count");
  }
  return s;
}

}  // namespace

std::string_view to_string(Scheme s) {
  return kNames[static_cast<std::size_t>(s)];
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Scheme>(i);
  }
  return std::nullopt;
}

ResampleResult baseline_resample(Scheme scheme, std::span<const double> w,
                                 std::size_t n_out, Rng& rng) {
  if (scheme == Scheme::chopthin) {
    throw ValidationError("chopthin is not a baseline scheme");
  }
  if (n_out < 1) throw ValidationError("target particle count must be >= 1");
  const double total = validate_weights(w);

  ResampleResult out;
  out.ancestors.reserve(n_out);
  switch (scheme) {
    case Scheme::multinomial:
      multinomial_draws(w, n_out, rng, out.ancestors);
      break;
    case Scheme::multinomial_condbinom: {
      // Count of particle i given the counts of 0..i-1 is
      // Binomial(remaining draws, w_i / remaining mass).
      std::uint64_t remaining = n_out;
      double mass_left = total;
      std::vector<std::size_t> counts(w.size(), 0);
      std::size_t last = 0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) last = i;
      }
      for (std::size_t i = 0; i < w.size() && remaining > 0; ++i) {
        if (w[i] == 0.0) continue;
        const std::uint64_t c =
            i == last ? remaining : rng.binomial(remaining, w[i] / mass_left);
        counts[i] = static_cast<std::size_t>(c);
        remaining -= c;
        mass_left -= w[i];
      }
      append_copies(out.ancestors, counts);
      break;
    }
    case Scheme::systematic: {
      const auto counts = systematic_counts(w, n_out, rng.uniform());
      append_copies(out.ancestors, counts);
      break;
    }
    case Scheme::stratified: {
      const auto counts = stratified_counts(w, n_out, rng);
      append_copies(out.ancestors, counts);
      break;
    }
    case Scheme::residual:
    case Scheme::residual_stratified: {
      const Split s = split_expected(w, total, n_out);
      append_copies(out.ancestors, s.whole);
      const std::size_t rest = n_out - s.whole_total;
      if (rest > 0) {
        if (scheme == Scheme::residual) {
          multinomial_draws(s.residual, rest, rng, out.ancestors);
        } else {
          append_copies(out.ancestors, stratified_counts(s.residual, rest, rng));
        }
      }
      break;
    }
    case Scheme::branching: {
      const Split s = split_expected(w, total, n_out);
      std::vector<std::size_t> counts = s.whole;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (s.residual[i] > 0.0 && rng.uniform() < s.residual[i]) ++counts[i];
      }
      append_copies(out.ancestors, counts);
      if (out.ancestors.empty()) {
        throw DegeneracyError("branching resampling produced no offspring");
      }
      break;
    }
    case Scheme::chopthin:
      break;
  }

  out.weights.assign(out.ancestors.size(),
                     total / static_cast<double>(out.ancestors.size()));
  return out;
}

ResampleResult resample(Scheme scheme, std::span<const double> w,
                        std::size_t n_out, double eta, Rng& rng) {
  if (scheme == Scheme::chopthin) return chopthin(w, eta, n_out, rng);
  return baseline_resample(scheme, w, n_out, rng);
}

}  // namespace chopthin
