#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "chopthin/random.hpp"

/**
 * \file
 * \brief The two benchmark state-space models and their posterior oracles.
 *
 * Both models have a Gaussian AR(1) transition
 *   X_t = phi X_{t-1} + sigma_x eps_t,  X_0 ~ N(0, 1),
 * and differ in the observation equation:
 *   linear-Gaussian:       Y_t = X_t + sigma_y xi_t          (phi = 1, sigma_x = 1)
 *   stochastic volatility: Y_t = 0.1 xi_t exp(X_t / 2)       (phi = 0.9, sigma_x = 0.25)
 */

namespace chopthin {

enum class ModelKind { linear_gaussian, stoch_vol };

class ModelSpec {
 public:
  static ModelSpec linear_gaussian(double sigma_y);
  static ModelSpec stoch_vol();

  [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::string_view name() const noexcept;
  /// Observation noise sd of the linear-Gaussian model (0 for stoch-vol).
  [[nodiscard]] double sigma_y() const noexcept { return sigma_y_; }

  [[nodiscard]] double transition_coefficient() const noexcept { return phi_; }
  [[nodiscard]] double transition_sd() const noexcept { return sigma_x_; }
  static constexpr double initial_mean() { return 0.0; }
  static constexpr double initial_sd() { return 1.0; }

  double sample_initial(Rng& rng) const { return initial_sd() * rng.normal(); }
  double sample_transition(double x, Rng& rng) const {
    return phi_ * x + sigma_x_ * rng.normal();
  }

  /// log p(y | x).
  [[nodiscard]] double observation_log_density(double x, double y) const;

  /// y as a function of the state and a standard normal draw.
  [[nodiscard]] double observe(double x, double noise) const;

 private:
  ModelSpec(ModelKind kind, double sigma_y, double phi, double sigma_x)
      : kind_(kind), sigma_y_(sigma_y), phi_(phi), sigma_x_(sigma_x) {}

  ModelKind kind_;
  double sigma_y_;
  double phi_;
  double sigma_x_;
};

struct Trajectory {
  std::vector<double> states;        ///< X_1..X_T
  std::vector<double> observations;  ///< Y_1..Y_T
};

/// Deterministic map from standard normal noise to a trajectory.
/// `transition_noise` and `observation_noise` must have equal, nonzero length.
Trajectory simulate_from_noise(const ModelSpec& model, double initial_noise,
                               std::span<const double> transition_noise,
                               std::span<const double> observation_noise);

/// Simulates T steps. Throws ValidationError for T < 1.
Trajectory simulate(const ModelSpec& model, std::size_t T, Rng& rng);

struct KalmanOutput {
  std::vector<double> means;      ///< m_{t|t}
  std::vector<double> variances;  ///< P_{t|t}
  std::vector<double> log_likelihoods;  ///< log p(y_t | y_{1:t-1})
};

/// Exact filter for the linear-Gaussian model.
KalmanOutput kalman_filter(std::span<const double> observations, double sigma_y);

struct GridConfig {
  /// Half-width of the grid in marginal standard deviations of the state.
  double range_sd_multiple = 8.0;
  std::size_t points = 4001;
  /// Transition kernels are cut off this many transition sd from their mean.
  double kernel_sd_cutoff = 10.0;
};

struct GridPosterior {
  std::vector<double> grid;
  /// T rows of G filtered probabilities, row-major.
  std::vector<double> filtered;
  std::vector<double> means;
  std::vector<double> log_likelihoods;

  [[nodiscard]] std::span<const double> row(std::size_t t) const {
    return std::span<const double>(filtered).subspan(t * grid.size(),
                                                     grid.size());
  }
};

using ObservationLogDensity = std::function<double(double x, double y)>;

/// Forward HMM recursion on a uniform grid; the numerical posterior oracle.
///
/// The grid is centred at 0. Its half-width is range_sd_multiple times the
/// largest marginal state sd over the horizon: sqrt(1 + T) for the random
/// walk, the stationary sd 0.25 / sqrt(1 - 0.81) for stoch-vol. Transition
/// rows are evaluated from the Gaussian density and renormalized; the prior
/// N(0, 1) is discretized on the same grid. Construct once and reuse for many
/// data sets of length <= horizon.
class GridFilter {
 public:
  GridFilter(const ModelSpec& model, const GridConfig& config,
             std::size_t horizon);

  /// Runs the recursion. Throws ValidationError if the data are longer than
  /// the horizon and DegeneracyError if an update leaves no mass.
  [[nodiscard]] GridPosterior run(std::span<const double> observations) const;

  /// As run, with a replacement observation density.
  [[nodiscard]] GridPosterior run(std::span<const double> observations,
                                  const ObservationLogDensity& log_density) const;

  [[nodiscard]] const std::vector<double>& grid() const noexcept {
    return grid_;
  }
  [[nodiscard]] const std::vector<double>& prior() const noexcept {
    return prior_;
  }

  /// One prediction step: the distribution of X_t given X_{t-1} ~ `row`.
  [[nodiscard]] std::vector<double> push_forward(std::span<const double> row) const;

 private:
  ModelSpec model_;
  std::size_t horizon_;
  std::vector<double> grid_;
  std::vector<double> prior_;
  // Banded transition matrix: row i has non-zeros on [band_begin_[i],
  // band_begin_[i] + band_size_[i]) stored contiguously from offset_[i].
  std::vector<std::size_t> band_begin_;
  std::vector<std::size_t> band_size_;
  std::vector<std::size_t> offset_;
  std::vector<double> kernel_;
};

/// Convenience wrapper: builds a GridFilter for this data length and runs it.
GridPosterior grid_filter(std::span<const double> observations,
                          const ModelSpec& model, const GridConfig& config = {});

}  // namespace chopthin
