#include "chopthin/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chopthin/error.hpp"

namespace chopthin {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

// Rows whose mass is below this are skipped in the prediction step. With
// rows summing to 1 the total mass dropped is at most G * 1e-20.
constexpr double kNegligibleMass = 1e-20;

}  // namespace

ModelSpec ModelSpec::linear_gaussian(double sigma_y) {
  if (!std::isfinite(sigma_y) || !(sigma_y > 0.0)) {
    throw ValidationError("sigma_y must be positive and finite");
  }
  return ModelSpec(ModelKind::linear_gaussian, sigma_y, 1.0, 1.0);
}

ModelSpec ModelSpec::stoch_vol() {
  return ModelSpec(ModelKind::stoch_vol, 0.0, 0.9, 0.25);
}

std::string_view ModelSpec::name() const noexcept {
  return kind_ == ModelKind::linear_gaussian ? "linear-gaussian" : "stoch-vol";
}

double ModelSpec::observation_log_density(double x, double y) const {
  if (kind_ == ModelKind::linear_gaussian) {
    return normal_log_density(y, x, sigma_y_);
  }
  // y | x ~ N(0, 0.01 e^x): log sd = log(0.1) + x / 2.
  const double log_sd = std::log(0.1) + 0.5 * x;
  const double z = y * std::exp(-log_sd);
  return -kLogSqrt2Pi - log_sd - 0.5 * z * z;
}

double ModelSpec::observe(double x, double noise) const {
  if (kind_ == ModelKind::linear_gaussian) return x + sigma_y_ * noise;
  return 0.1 * noise * std::exp(0.5 * x);
}

Trajectory simulate_from_noise(const ModelSpec& model, double initial_noise,
                               std::span<const double> transition_noise,
                               std::span<const double> observation_noise) {
  if (transition_noise.empty() ||
      transition_noise.size() != observation_noise.size()) {
    throw ValidationError("noise sequences must be nonempty and equally long");
  }
  const std::size_t T = transition_noise.size();
  Trajectory out;
  out.states.reserve(T);
  out.observations.reserve(T);
  double x = ModelSpec::initial_mean() + ModelSpec::initial_sd() * initial_noise;
  for (std::size_t t = 0; t < T; ++t) {
    x = model.transition_coefficient() * x +
        model.transition_sd() * transition_noise[t];
    out.states.push_back(x);
    out.observations.push_back(model.observe(x, observation_noise[t]));
  }
  return out;
}

Trajectory simulate(const ModelSpec& model, std::size_t T, Rng& rng) {
  if (T < 1) throw ValidationError("T must be >= 1");
  const double initial = rng.normal();
  std::vector<double> eps(T);
  std::vector<double> xi(T);
  for (std::size_t t = 0; t < T; ++t) {
    eps[t] = rng.normal();
    xi[t] = rng.normal();
  }
  return simulate_from_noise(model, initial, eps, xi);
}

KalmanOutput kalman_filter(std::span<const double> observations,
                           double sigma_y) {
  if (!std::isfinite(sigma_y) || !(sigma_y > 0.0)) {
    throw ValidationError("sigma_y must be positive and finite");
  }
  const double obs_var = sigma_y * sigma_y;
  KalmanOutput out;
  out.means.reserve(observations.size());
  out.variances.reserve(observations.size());
  out.log_likelihoods.reserve(observations.size());

  double m = ModelSpec::initial_mean();
  double P = ModelSpec::initial_sd() * ModelSpec::initial_sd();
  for (double y : observations) {
    const double P_pred = P + 1.0;
    const double S = P_pred + obs_var;
    out.log_likelihoods.push_back(normal_log_density(y, m, std::sqrt(S)));
    const double gain = P_pred / S;
    m += gain * (y - m);
    P = (1.0 - gain) * P_pred;
    out.means.push_back(m);
    out.variances.push_back(P);
  }
  return out;
}

GridFilter::GridFilter(const ModelSpec& model, const GridConfig& config,
                       std::size_t horizon)
    : model_(model), horizon_(horizon) {
  if (config.points < 2) throw ValidationError("grid needs at least 2 points");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  const double phi = model.transition_coefficient();
  const double sx = model.transition_sd();
  const double marginal_sd =
      model.kind() == ModelKind::linear_gaussian
          ? std::sqrt(1.0 + static_cast<double>(horizon))
          : sx / std::sqrt(1.0 - phi * phi);
  const double half_width = config.range_sd_multiple * marginal_sd;
  if (!std::isfinite(half_width) || !(half_width > 0.0)) {
    throw ValidationError("grid has zero width");
  }
  if (!(config.kernel_sd_cutoff > 0.0)) {
    throw ValidationError("kernel cutoff must be positive");
  }

  const std::size_t G = config.points;
  const double step = 2.0 * half_width / static_cast<double>(G - 1);
  grid_.resize(G);
  for (std::size_t j = 0; j < G; ++j) {
    grid_[j] = -half_width + static_cast<double>(j) * step;
  }

  prior_.resize(G);
  double prior_mass = 0.0;
  for (std::size_t j = 0; j < G; ++j) {
    const double z = grid_[j] / ModelSpec::initial_sd();
    prior_[j] = std::exp(-0.5 * z * z);
    prior_mass += prior_[j];
  }
  for (double& p : prior_) p /= prior_mass;

  band_begin_.resize(G);
  band_size_.resize(G);
  offset_.resize(G);
  const double reach = config.kernel_sd_cutoff * sx;
  const auto clamp_index = [&](double pos) {
    return static_cast<long long>(std::clamp(
        pos, -1.0, static_cast<double>(G)));
  };
  for (std::size_t i = 0; i < G; ++i) {
    const double mean = phi * grid_[i];
    long long lo = clamp_index(std::ceil((mean - reach + half_width) / step));
    long long hi = clamp_index(std::floor((mean + reach + half_width) / step));
    lo = std::max(lo, 0LL);
    hi = std::min(hi, static_cast<long long>(G) - 1);
    offset_[i] = kernel_.size();
    if (lo > hi) {
      // Kernel falls off the grid: send the mass to the nearest point.
      const auto nearest = static_cast<std::size_t>(
          std::clamp(std::llround((mean + half_width) / step), 0LL,
                     static_cast<long long>(G) - 1));
      band_begin_[i] = nearest;
      band_size_[i] = 1;
      kernel_.push_back(1.0);
      continue;
    }
    band_begin_[i] = static_cast<std::size_t>(lo);
    band_size_[i] = static_cast<std::size_t>(hi - lo + 1);
    double row_mass = 0.0;
    for (long long j = lo; j <= hi; ++j) {
      const double z = (grid_[static_cast<std::size_t>(j)] - mean) / sx;
      kernel_.push_back(std::exp(-0.5 * z * z));
      row_mass += kernel_.back();
    }
    for (std::size_t k = offset_[i]; k < kernel_.size(); ++k) {
      kernel_[k] /= row_mass;
    }
  }
}

std::vector<double> GridFilter::push_forward(std::span<const double> row) const {
  std::vector<double> pred(grid_.size(), 0.0);
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const double p = row[i];
    if (p <= kNegligibleMass) continue;
    const double* k = kernel_.data() + offset_[i];
    double* out = pred.data() + band_begin_[i];
    const std::size_t n = band_size_[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += p * k[j];
  }
  return pred;
}

GridPosterior GridFilter::run(std::span<const double> observations) const {
  return run(observations, [this](double x, double y) {
    return model_.observation_log_density(x, y);
  });
}

GridPosterior GridFilter::run(std::span<const double> observations,
                              const ObservationLogDensity& log_density) const {
  if (observations.size() > horizon_) {
    throw ValidationError("observations exceed the grid filter horizon");
  }
  const std::size_t G = grid_.size();
  GridPosterior out;
  out.grid = grid_;
  out.filtered.reserve(observations.size() * G);
  out.means.reserve(observations.size());
  out.log_likelihoods.reserve(observations.size());

  std::vector<double> current = prior_;
  std::vector<double> log_lik(G);
  for (std::size_t t = 0; t < observations.size(); ++t) {
    std::vector<double> pred = push_forward(current);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < G; ++j) {
      log_lik[j] = log_density(grid_[j], observations[t]);
      if (pred[j] > 0.0) top = std::max(top, log_lik[j]);
    }
    double mass = 0.0;
    for (std::size_t j = 0; j < G; ++j) {
      pred[j] = pred[j] > 0.0 ? pred[j] * std::exp(log_lik[j] - top) : 0.0;
      mass += pred[j];
    }
    if (!(mass > 0.0) || !std::isfinite(top)) {
      throw DegeneracyError("grid filter lost all mass", t + 1);
    }
    double mean = 0.0;
    for (std::size_t j = 0; j < G; ++j) {
      pred[j] /= mass;
      mean += grid_[j] * pred[j];
    }
    out.log_likelihoods.push_back(std::log(mass) + top);
    out.means.push_back(mean);
    out.filtered.insert(out.filtered.end(), pred.begin(), pred.end());
    current = std::move(pred);
  }
  return out;
}

GridPosterior grid_filter(std::span<const double> observations,
                          const ModelSpec& model, const GridConfig& config) {
  if (observations.empty()) throw ValidationError("no observations");
  return GridFilter(model, config, observations.size()).run(observations);
}

}  // namespace chopthin
