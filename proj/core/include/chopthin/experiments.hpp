#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "chopthin/models.hpp"
#include "chopthin/resamplers.hpp"

/**
 * \file
 * \brief Reproducible experiment drivers and their CSV/JSON reports.
 *
 * Every random stream is derived from one master seed with mix_seed(). In the
 * MSE study, cell c (one sigma_y/N combination), iteration i uses
 *   data:     mix_seed(master, i, 1000 c)
 *   filter k: mix_seed(master, i, 1000 c + 1 + k)
 * so all filters of an iteration see the same data set, and results do not
 * depend on the number of workers.
 */

namespace chopthin {

/// One particle-filter configuration in a study. beta is given as a fraction
/// of N.
struct FilterSpec {
  Scheme scheme = Scheme::systematic;
  double beta_fraction = 0.5;
  std::optional<double> eta;

  /// e.g. "chopthin(beta=1N,eta=5.82843)".
  [[nodiscard]] std::string label() const;
  bool operator==(const FilterSpec&) const = default;
};

/// systematic with beta = 0.5 N, the reference every ratio is taken against.
FilterSpec baseline_filter();

struct ReportRow {
  std::string experiment;
  std::string model;
  std::optional<double> sigma_y;
  std::size_t particles = 0;
  std::size_t steps = 0;       ///< T (or repetitions for timing rows)
  std::size_t iterations = 0;  ///< M
  FilterSpec filter;
  std::string metric;
  double value = 0.0;
  double stderr_value = 0.0;
  double ratio_to_systematic = 0.0;
  /// Iterations whose filter run hit a degeneracy and were left out.
  std::size_t degenerate = 0;
  /// Per-iteration values (NaN for degenerate ones); not written to CSV.
  std::vector<double> per_iteration;
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t master_seed = 0;
  /// Extra provenance written to the report header (workers, overrides...).
  std::map<std::string, std::string> header;
  std::vector<ReportRow> rows;

  /// Row for (metric, filter, sigma_y, N), or nullptr.
  [[nodiscard]] const ReportRow* find(const std::string& metric,
                                      const FilterSpec& filter,
                                      std::optional<double> sigma_y,
                                      std::size_t particles) const;
};

struct MseStudyConfig {
  ModelKind model = ModelKind::linear_gaussian;
  /// Observation sd values; ignored for stoch-vol.
  std::vector<double> sigma_y = {1.0};
  std::vector<std::size_t> particles = {100, 1000};
  std::size_t steps = 200;
  std::size_t iterations = 100;
  /// The systematic beta = 0.5 N baseline is added if missing.
  std::vector<FilterSpec> filters;
  std::uint64_t master_seed = 1;
  std::size_t workers = 1;
  GridConfig grid;

  void validate() const;
};

/// For every cell and iteration: simulate data, run the exact (Kalman) or
/// grid oracle once, run every filter on the same data, and score
///   metric "mse":        (1/T) sum_t (filter mean - oracle mean)^2
///   metric "loglik-mse": (1/T) sum_t (log p^(y_t|.) - log p(y_t|.))^2
/// Rows report the mean over iterations, its standard error, and the ratio
/// to the systematic beta = 0.5 N baseline of the same cell.
ExperimentReport mse_study(const MseStudyConfig& cfg);

/// One-sided paired comparison of two rows over common iterations.
struct PairedComparison {
  std::size_t pairs = 0;
  double mean_difference = 0.0;  ///< mean of (a_i - b_i)
  double stderr_difference = 0.0;
  double t_statistic = 0.0;
  /// P(T <= t) under H0: E(a - b) = 0, Student t with pairs - 1 df. Small
  /// values support a < b.
  double p_value_less = 1.0;
};

PairedComparison compare_paired(const ReportRow& a, const ReportRow& b);

struct EffortConfig {
  std::vector<std::size_t> sizes = {1000, 10000, 100000, 1000000};
  /// systematic is added if missing (it is the ratio baseline).
  std::vector<Scheme> schemes = {Scheme::chopthin, Scheme::systematic,
                                 Scheme::multinomial,
                                 Scheme::multinomial_condbinom};
  double eta = 4.0;
  std::size_t repetitions = 1000;
  std::uint64_t master_seed = 1;

  void validate() const;
};

/// Times each resampler on N iid Exponential(1) weights.
///
/// Each repetition first times the generation of the N weights, then the
/// resampling of them. Rows per (N, scheme):
///   "normalized-cost": median over repetitions of t_resample / t_generate
///   "seconds":         median t_resample
/// stderr is the large-sample standard error of a median,
/// 1.2533 sd / sqrt(repetitions).
ExperimentReport effort_bench(const EffortConfig& cfg);

struct EssTraceConfig {
  ModelKind model = ModelKind::linear_gaussian;
  double sigma_y = 1.0;
  std::size_t particles = 10000;
  std::size_t steps = 50;
  std::vector<FilterSpec> filters;
  std::uint64_t master_seed = 1;

  void validate() const;
};

struct EssTraceRow {
  std::size_t t = 0;  ///< 1-based
  FilterSpec filter;
  double ess_before = 0.0;
  double ess_after = 0.0;
  bool resampled = false;
};

struct EssTrace {
  std::uint64_t master_seed = 0;
  std::map<std::string, std::string> header;
  std::vector<EssTraceRow> rows;
};

/// Simulates one data set of `steps` observations (stream
/// mix_seed(master, 0, 0)) and runs every filter k on it (stream
/// mix_seed(master, 0, 1 + k)), emitting per-step ESS rows.
EssTrace ess_trace(const EssTraceConfig& cfg);

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
std::string format_number(double v);

/// CSV with header
/// experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,ratio_to_systematic
/// preceded by "# key=value" provenance lines. beta is a fraction of N;
/// sigma_y and eta are empty where not applicable.
void write_csv(const ExperimentReport& report, std::ostream& out);

/// CSV with header t,scheme,beta,eta,ess_before,ess_after,resampled,
/// preceded by "# key=value" provenance lines.
void write_csv(const EssTrace& trace, std::ostream& out);

/// JSON document with the CSV fields plus master_seed, seed_mixer, version.
void write_json(const ExperimentReport& report, std::ostream& out);
void write_json(const EssTrace& trace, std::ostream& out);

}  // namespace chopthin
