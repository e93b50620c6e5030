#include "chopthin/particle_filter.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "chopthin/chopthin.hpp"
#include "chopthin/error.hpp"
#include "chopthin/weights.hpp"

namespace chopthin {

void PfConfig::validate() const {
  if (particles < 1) throw ValidationError("particle count must be >= 1");
  if (!(beta >= 0.0 && beta <= static_cast<double>(particles))) {
    throw ValidationError("beta must lie in [0, N]");
  }
  if (scheme == Scheme::chopthin) {
    if (!eta) throw ValidationError("chopthin needs eta");
    if (!std::isfinite(*eta) || *eta < kMinEta) {
      throw ValidationError("eta must be finite and >= 4");
    }
  } else if (eta) {
    throw ValidationError("eta only applies to chopthin");
  }
}

double PfOutput::log_marginal_likelihood() const {
  double s = 0.0;
  for (double l : log_likelihoods) s += l;
  return s;
}

PfOutput pf_run(const ModelSpec& model, std::span<const double> observations,
                const PfConfig& cfg, Rng& rng) {
  cfg.validate();
  if (observations.empty()) throw ValidationError("no observations");

  const std::size_t N = cfg.particles;
  const double target_total = static_cast<double>(N);
  const double eta = cfg.eta.value_or(kMinEta);
  const std::size_t T = observations.size();

  PfOutput out;
  out.posterior_means.reserve(T);
  out.log_likelihoods.reserve(T);
  out.ess_before.reserve(T);
  out.ess_after.reserve(T);
  out.resampled.reserve(T);
  out.particle_counts.reserve(T);

  std::vector<double> x(N);
  for (double& xi : x) xi = model.sample_initial(rng);
  std::vector<double> w(N, 1.0);
  std::vector<double> log_lik;
  std::vector<double> next_x;

  for (std::size_t t = 0; t < T; ++t) {
    const double y = observations[t];
    const std::size_t n = x.size();
    double pre_total = 0.0;
    for (double v : w) pre_total += v;

    log_lik.resize(n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = model.sample_transition(x[i], rng);
      log_lik[i] = model.observation_log_density(x[i], y);
      if (w[i] > 0.0 && log_lik[i] > top) top = log_lik[i];
    }
    if (!std::isfinite(top)) {
      throw DegeneracyError(
          "all particles have zero likelihood at step " + std::to_string(t + 1),
          t + 1);
    }
    double post_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] *= std::exp(log_lik[i] - top);
      post_total += w[i];
    }
    if (!(post_total > 0.0)) {
      throw DegeneracyError(
          "particle weights collapsed to zero at step " + std::to_string(t + 1),
          t + 1);
    }
    out.log_likelihoods.push_back(std::log(post_total) - std::log(pre_total) +
                                  top);

    const double before = ess(w);
    out.ess_before.push_back(before);
    double after = before;
    const bool fire = before <= cfg.beta;
    if (fire) {
      ResampleResult r = resample(cfg.scheme, w, N, eta, rng);
      next_x.resize(r.size());
      for (std::size_t k = 0; k < r.size(); ++k) next_x[k] = x[r.ancestors[k]];
      x.swap(next_x);
      w = normalize_to(r.weights, target_total);
      after = ess(w);
    } else {
      w = normalize_to(w, target_total);
    }
    out.ess_after.push_back(after);
    out.resampled.push_back(fire);

    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      weighted += w[i] * x[i];
      total += w[i];
    }
    out.posterior_means.push_back(weighted / total);
    out.particle_counts.push_back(x.size());
  }
  return out;
}

PfOutput pf_run(const ModelSpec& model, std::span<const double> observations,
                const PfConfig& cfg) {
  Rng rng(cfg.seed);
  return pf_run(model, observations, cfg, rng);
}

}  // namespace chopthin
