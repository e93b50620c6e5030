#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "chopthin/error.hpp"
#include "chopthin/particle_filter.hpp"
#include "chopthin/weights.hpp"

namespace chopthin {
namespace {

const double kEtaHalf = 3.0 + std::sqrt(8.0);

PfConfig make_config(Scheme scheme, std::size_t n, double beta_fraction,
                     std::uint64_t seed) {
  PfConfig cfg;
  cfg.particles = n;
  cfg.beta = beta_fraction * static_cast<double>(n);
  cfg.scheme = scheme;
  if (scheme == Scheme::chopthin) cfg.eta = kEtaHalf;
  cfg.seed = seed;
  return cfg;
}

std::vector<double> data(std::size_t T, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  return simulate(ModelSpec::linear_gaussian(sigma), T, rng).observations;
}

TEST(PfConfig, Validation) {
  auto cfg = make_config(Scheme::systematic, 10, 0.5, 1);
  EXPECT_NO_THROW(cfg.validate());
  cfg.beta = 11.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.beta = 5.0;
  cfg.eta = 5.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  auto chop = make_config(Scheme::chopthin, 10, 1.0, 1);
  chop.eta.reset();
  EXPECT_THROW(chop.validate(), ValidationError);
  chop.eta = 3.0;
  EXPECT_THROW(chop.validate(), ValidationError);
  chop.particles = 0;
  chop.eta = 4.0;
  EXPECT_THROW(chop.validate(), ValidationError);
  const auto model = ModelSpec::linear_gaussian(1.0);
  EXPECT_THROW(pf_run(model, std::vector<double>{}, make_config(Scheme::systematic, 5, 0.5, 1)),
               ValidationError);
}

TEST(PfRun, BetaZeroIsSequentialImportanceSampling) {
  const auto model = ModelSpec::linear_gaussian(1.5);
  const auto y = data(8, 1.5, 4);
  const std::size_t n = 50;
  for (Scheme s : {Scheme::systematic, Scheme::chopthin}) {
    const auto out = pf_run(model, y, make_config(s, n, 0.0, 77));

    Rng rng(77);
    std::vector<double> x(n), logw(n, 0.0);
    for (double& v : x) v = rng.normal();
    for (std::size_t t = 0; t < y.size(); ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += rng.normal();
        logw[i] += -0.5 * std::log(2 * std::numbers::pi * 2.25) -
                   (y[t] - x[i]) * (y[t] - x[i]) / 4.5;
      }
      double top = logw[0];
      for (double v : logw) top = std::max(top, v);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double w = std::exp(logw[i] - top);
        num += w * x[i];
        den += w;
      }
      EXPECT_FALSE(out.resampled[t]);
      EXPECT_EQ(out.ess_after[t], out.ess_before[t]);
      EXPECT_NEAR(out.posterior_means[t], num / den, 1e-10);
    }
  }
}

TEST(PfRun, LargeFilterMatchesKalmanOnOneObservation) {
  const auto model = ModelSpec::linear_gaussian(1.0);
  const std::vector<double> y = {1.0};
  const double exact = -0.5 * std::log(2 * std::numbers::pi * 3.0) - 1.0 / 6.0;
  for (Scheme s : kAllSchemes) {
    const auto out = pf_run(model, y, make_config(s, 100000, 1.0, 21));
    EXPECT_NEAR(out.posterior_means[0], 2.0 / 3.0, 0.01) << to_string(s);
    EXPECT_NEAR(std::exp(out.log_likelihoods[0]) / std::exp(exact), 1.0, 0.02)
        << to_string(s);
  }
}

TEST(PfRun, ChopthinStaysAboveEssFloor) {
  const auto model = ModelSpec::linear_gaussian(1.0);
  const auto y = data(60, 1.0, 9);
  const std::size_t n = 1000;
  const auto out = pf_run(model, y, make_config(Scheme::chopthin, n, 1.0, 5));
  for (std::size_t t = 0; t < y.size(); ++t) {
    EXPECT_TRUE(out.resampled[t]);
    EXPECT_EQ(out.particle_counts[t], n);
    EXPECT_GE(out.ess_after[t], ess_lower_bound(kEtaHalf, n) - 1e-9);
    EXPECT_LE(out.ess_before[t], static_cast<double>(n) * (1 + 1e-12));
  }
}

TEST(PfRun, SystematicResetsEssOnResample) {
  const auto model = ModelSpec::stoch_vol();
  Rng rng(2);
  const auto y = simulate(model, 40, rng).observations;
  const auto out = pf_run(model, y, make_config(Scheme::systematic, 500, 0.5, 3));
  bool fired = false;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (out.resampled[t]) {
      fired = true;
      EXPECT_NEAR(out.ess_after[t], 500.0, 1e-9);
      EXPECT_LE(out.ess_before[t], 250.0);
    } else {
      EXPECT_EQ(out.ess_after[t], out.ess_before[t]);
      EXPECT_GT(out.ess_before[t], 250.0);
    }
  }
  EXPECT_TRUE(fired);
}

TEST(PfRun, LikelihoodTelescopes) {
  const auto model = ModelSpec::linear_gaussian(3.0);
  const auto y = data(30, 3.0, 1);
  const auto out = pf_run(model, y, make_config(Scheme::stratified, 200, 0.5, 8));
  double sum = 0.0;
  for (double l : out.log_likelihoods) sum += l;
  EXPECT_EQ(out.log_marginal_likelihood(), sum);
  double product = 1.0;
  for (double l : out.log_likelihoods) product *= std::exp(l);
  EXPECT_NEAR(std::log(product), sum, 1e-10 * std::abs(sum));
}

TEST(PfRun, BranchingVariesParticleCount) {
  const auto model = ModelSpec::linear_gaussian(1.0);
  const auto y = data(50, 1.0, 6);
  const auto out = pf_run(model, y, make_config(Scheme::branching, 300, 1.0, 2));
  ASSERT_EQ(out.steps(), y.size());
  bool varied = false;
  for (std::size_t c : out.particle_counts) varied = varied || c != 300;
  EXPECT_TRUE(varied);
}

TEST(PfRun, DeterministicPerSeed) {
  const auto model = ModelSpec::linear_gaussian(1.0);
  const auto y = data(20, 1.0, 6);
  for (Scheme s : kAllSchemes) {
    const auto cfg = make_config(s, 100, 0.7, 11);
    const auto a = pf_run(model, y, cfg);
    const auto b = pf_run(model, y, cfg);
    EXPECT_EQ(a.posterior_means, b.posterior_means) << to_string(s);
    EXPECT_EQ(a.log_likelihoods, b.log_likelihoods) << to_string(s);
    EXPECT_EQ(a.ess_after, b.ess_after) << to_string(s);
  }
}

TEST(PfRun, DegeneracyNamesTheStep) {
  const auto model = ModelSpec::linear_gaussian(1e-3);
  const std::vector<double> y = {0.0, 1e300};
  try {
    (void)pf_run(model, y, make_config(Scheme::systematic, 10, 0.5, 1));
    FAIL() << "expected a degeneracy";
  } catch (const DegeneracyError& e) {
    EXPECT_EQ(e.step(), 2u);
    EXPECT_NE(std::string(e.what()).find("step 2"), std::string::npos);
  }
}

}  // namespace
}  // namespace chopthin
