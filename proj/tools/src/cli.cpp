#include "chopthin/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>

#include "chopthin/chopthin.hpp"
#include "chopthin/error.hpp"
#include "chopthin/experiments.hpp"
#include "chopthin/particle_filter.hpp"
#include "chopthin/resamplers.hpp"
#include "chopthin/version.hpp"

namespace chopthin::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 1;
const double kEtaHalf = 3.0 + std::sqrt(8.0);

const std::vector<std::string> kSchemeNames = [] {
  std::vector<std::string> names;
  for (Scheme s : kAllSchemes) names.emplace_back(to_string(s));
  return names;
}();

const std::vector<std::string> kModelNames = {"linear-gaussian", "stoch-vol"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

template <typename T>
T parse_unsigned(const std::string& text, const std::string& what) {
  T v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() ||
      text.empty()) {
    throw ValidationError(what + " must be a non-negative integer, got '" +
                          text + "'");
  }
  return v;
}

ModelKind parse_model(const std::string& name) {
  return name == "stoch-vol" ? ModelKind::stoch_vol : ModelKind::linear_gaussian;
}

Scheme scheme_from(const std::string& name) {
  const auto s = parse_scheme(name);
  if (!s) throw ValidationError("unknown scheme '" + name + "'");
  return *s;
}

// "scheme:beta_fraction[:eta]"
FilterSpec parse_filter(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() < 2 || parts.size() > 3) {
    throw ValidationError("filter '" + text +
                          "' must look like scheme:beta_fraction[:eta]");
  }
  FilterSpec f;
  f.scheme = scheme_from(parts[0]);
  const auto beta = parse_double(parts[1]);
  if (!beta) throw ValidationError("bad beta fraction in filter '" + text + "'");
  f.beta_fraction = *beta;
  if (parts.size() == 3) {
    const auto eta = parse_double(parts[2]);
    if (!eta) throw ValidationError("bad eta in filter '" + text + "'");
    f.eta = *eta;
  }
  return f;
}

struct Resolved {
  std::uint64_t value = 0;
  std::string source;
};

Resolved resolve(const std::optional<std::uint64_t>& flag,
                 const std::string& variable, std::uint64_t fallback,
                 const Environment& env) {
  if (flag) return {*flag, "flag"};
  if (const auto text = env(variable)) {
    return {parse_unsigned<std::uint64_t>(*text, variable), "env:" + variable};
  }
  return {fallback, "default"};
}

// Writes to --output if given, else to `out`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& out) : out_(&out) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ValidationError("cannot open output file '" + path + "'");
      out_ = file_.get();
    }
  }
  std::ostream& stream() { return *out_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

std::vector<double> read_input(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") return read_weights(in);
  std::ifstream file(path);
  if (!file) throw ValidationError("cannot open input file '" + path + "'");
  return read_weights(file);
}

struct Common {
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format = "csv";
};

void add_seed(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed,
                  "Master seed (default: $CHOPTHIN_SEED, else 1)");
}

void add_output(CLI::App* app, Common& c, bool with_format) {
  app->add_option("--output,-o", c.output, "Output file (default: stdout)");
  if (with_format) {
    app->add_option("--format", c.format, "Report format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
  }
}

const char* kReportSchema =
    "Output (csv): '# key=value' provenance lines (master_seed, seed_mixer,\n"
    "seed_source, version, ...) followed by\n"
    "  experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,"
    "ratio_to_systematic\n"
    "beta is a fraction of N; sigma_y and eta are empty where not applicable.\n"
    "Output (json): the same rows plus master_seed, seed_mixer and version.";

const char* kTraceSchema =
    "Output (csv): '# key=value' provenance lines followed by\n"
    "  t,scheme,beta,eta,ess_before,ess_after,resampled\n"
    "t is 1-based; beta is a fraction of N; resampled is 0 or 1.\n"
    "Output (json): the same rows plus master_seed, seed_mixer and version.";

}  // namespace

Environment process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
}

std::vector<double> read_weights(std::istream& in) {
  std::vector<double> weights;
  std::optional<std::size_t> column;
  bool first_row = true;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split_fields(body);
    if (first_row) {
      first_row = false;
      bool numeric = false;
      for (auto f : fields) numeric = numeric || parse_double(f).has_value();
      if (!numeric) {
        const auto it = std::find(fields.begin(), fields.end(), "weight");
        column = it != fields.end()
                     ? static_cast<std::size_t>(it - fields.begin())
                     : fields.size() - 1;
        continue;
      }
    }
    const std::size_t idx = column.value_or(fields.size() - 1);
    if (idx >= fields.size()) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": missing weight column");
    }
    const auto v = parse_double(fields[idx]);
    if (!v) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": cannot parse weight '" + std::string(fields[idx]) +
                            "'");
    }
    if (!std::isfinite(*v) || *v < 0.0) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": weight must be finite and non-negative");
    }
    weights.push_back(*v);
  }
  if (weights.empty()) throw ValidationError("no weights in input");
  return weights;
}

int run_cli(const std::vector<std::string>& args, std::istream& in,
            std::ostream& out, std::ostream& err, const Environment& env) {
  CLI::App app{"Bounded weight-ratio (chopthin) resampling, baseline "
               "resamplers, particle filters and benchmark experiments.",
               "chopthin"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // resample
  Common rs;
  std::string rs_scheme = "chopthin";
  std::optional<double> rs_eta;
  std::optional<std::size_t> rs_n_out;
  std::string rs_input;
  auto* resample_cmd = app.add_subcommand(
      "resample", "Resample a weight vector read from a file or stdin");
  resample_cmd->add_option("--scheme", rs_scheme, "Resampling scheme")
      ->check(CLI::IsMember(kSchemeNames))
      ->capture_default_str();
  resample_cmd->add_option("--eta", rs_eta,
                           "Maximal weight ratio, >= 4 (chopthin only)");
  resample_cmd->add_option("--n-out", rs_n_out,
                           "Number of offspring (default: number of weights)");
  resample_cmd->add_option("--input,-i", rs_input,
                           "Weight file (default: stdin)");
  add_seed(resample_cmd, rs);
  add_output(resample_cmd, rs, false);
  resample_cmd->footer(
      "Input: one weight per line, or CSV (column 'weight' if a header row is\n"
      "present, else the last column); scientific notation allowed; blank\n"
      "lines and lines starting with '#' are ignored.\n"
      "Output (csv): header 'ancestor,weight', one row per offspring;\n"
      "ancestor is the 1-based input line index among weights, weight is the\n"
      "offspring weight in shortest round-trip decimal form.\n"
      "The seed is used directly as the generator seed.");

  // pf-run
  Common pf;
  std::string pf_model = "linear-gaussian";
  double pf_sigma = 1.0;
  std::string pf_scheme = "chopthin";
  double pf_beta = 1.0;
  std::optional<double> pf_eta;
  std::size_t pf_n = 1000;
  std::size_t pf_steps = 100;
  std::string pf_obs;
  auto* pf_cmd = app.add_subcommand(
      "pf-run", "Run one bootstrap particle filter on simulated or given data");
  pf_cmd->add_option("--model", pf_model, "State-space model")
      ->check(CLI::IsMember(kModelNames))
      ->capture_default_str();
  pf_cmd->add_option("--sigma-y", pf_sigma,
                     "Observation sd (linear-gaussian)")
      ->capture_default_str();
  pf_cmd->add_option("--scheme", pf_scheme, "Resampling scheme")
      ->check(CLI::IsMember(kSchemeNames))
      ->capture_default_str();
  pf_cmd->add_option("--beta-fraction", pf_beta,
                     "Resample when ESS <= beta_fraction * N")
      ->capture_default_str();
  pf_cmd->add_option("--eta", pf_eta,
                     "Maximal weight ratio for chopthin (default 3+sqrt(8))");
  pf_cmd->add_option("--n", pf_n, "Number of particles")->capture_default_str();
  pf_cmd->add_option("--steps", pf_steps, "Number of simulated observations")
      ->capture_default_str();
  pf_cmd->add_option("--observations", pf_obs,
                     "Observation file, one per line (default: simulate)");
  add_seed(pf_cmd, pf);
  add_output(pf_cmd, pf, false);
  pf_cmd->footer(
      "Data are simulated from stream mix_seed(seed, 0, 0); the filter uses\n"
      "stream mix_seed(seed, 0, 1).\n"
      "Output (csv): '# key=value' provenance lines (including\n"
      "log_marginal_likelihood) followed by\n"
      "  t,observation,posterior_mean,log_likelihood,ess_before,ess_after,"
      "resampled,particles");

  // mse-study
  Common ms;
  std::string ms_model = "linear-gaussian";
  std::string ms_profile = "desk";
  std::vector<double> ms_sigma;
  std::vector<std::size_t> ms_n;
  std::size_t ms_steps = 0;
  std::size_t ms_iterations = 0;
  std::vector<std::string> ms_filters;
  std::optional<std::size_t> ms_workers;
  std::size_t ms_grid_points = GridConfig{}.points;
  auto* mse_cmd = app.add_subcommand(
      "mse-study",
      "Posterior-mean and log-likelihood MSE against the exact or grid oracle");
  mse_cmd->add_option("--model", ms_model, "State-space model")
      ->check(CLI::IsMember(kModelNames))
      ->capture_default_str();
  mse_cmd->add_option("--profile", ms_profile,
                      "desk: M=100, T=200, N=100,1000, sigma_y=1; full: "
                      "M=1000, T=1000, N=100,1000,10000, sigma_y=1/3,1,3,9")
      ->check(CLI::IsMember({"desk", "full"}))
      ->capture_default_str();
  mse_cmd->add_option("--sigma-y", ms_sigma, "Observation sd list")
      ->delimiter(',');
  mse_cmd->add_option("--n", ms_n, "Particle count list")->delimiter(',');
  mse_cmd->add_option("--steps", ms_steps, "Time steps T");
  mse_cmd->add_option("--iterations", ms_iterations, "Iterations M");
  mse_cmd->add_option("--filter", ms_filters,
                      "Filter as scheme:beta_fraction[:eta], repeatable "
                      "(default chopthin:1:5.828427...; systematic:0.5 is "
                      "always added)");
  mse_cmd->add_option("--workers", ms_workers,
                      "Worker threads (default: $CHOPTHIN_WORKERS, else 1)");
  mse_cmd->add_option("--grid-points", ms_grid_points,
                      "Grid oracle points (stoch-vol)")
      ->capture_default_str();
  add_seed(mse_cmd, ms);
  add_output(mse_cmd, ms, true);
  mse_cmd->footer(kReportSchema);

  // effort-bench
  Common eb;
  std::vector<std::size_t> eb_n = EffortConfig{}.sizes;
  std::vector<std::string> eb_schemes = {"chopthin", "systematic",
                                         "multinomial", "multinomial-condbinom"};
  double eb_eta = EffortConfig{}.eta;
  std::size_t eb_reps = EffortConfig{}.repetitions;
  auto* effort_cmd = app.add_subcommand(
      "effort-bench",
      "Time resamplers on Exponential(1) weights, normalized by generation cost");
  effort_cmd->add_option("--n", eb_n, "Particle count list")
      ->delimiter(',')
      ->capture_default_str();
  effort_cmd->add_option("--scheme", eb_schemes,
                         "Scheme list (systematic is always added)")
      ->delimiter(',')
      ->check(CLI::IsMember(kSchemeNames))
      ->capture_default_str();
  effort_cmd->add_option("--eta", eb_eta, "Maximal weight ratio for chopthin")
      ->capture_default_str();
  effort_cmd->add_option("--repetitions", eb_reps, "Repetitions per cell (>= 10)")
      ->capture_default_str();
  add_seed(effort_cmd, eb);
  add_output(effort_cmd, eb, true);
  effort_cmd->footer(
      std::string(kReportSchema) +
      "\nMetrics: normalized-cost (median resample/generate time ratio) and\n"
      "seconds (median resample time); stderr is 1.2533 sd/sqrt(reps).");

  // ess-trace
  Common et;
  std::string et_model = "linear-gaussian";
  double et_sigma = 1.0;
  std::optional<std::string> et_scheme;
  double et_beta = 1.0;
  std::optional<double> et_eta;
  std::size_t et_n = 10000;
  std::size_t et_steps = 50;
  std::vector<std::string> et_filters;
  auto* trace_cmd = app.add_subcommand(
      "ess-trace", "Per-step ESS before and after resampling on one data set");
  trace_cmd->add_option("--model", et_model, "State-space model")
      ->check(CLI::IsMember(kModelNames))
      ->capture_default_str();
  trace_cmd->add_option("--sigma-y", et_sigma, "Observation sd (linear-gaussian)")
      ->capture_default_str();
  trace_cmd->add_option("--scheme", et_scheme, "Scheme of a single filter")
      ->check(CLI::IsMember(kSchemeNames));
  trace_cmd->add_option("--beta-fraction", et_beta,
                        "Beta fraction of the single filter")
      ->capture_default_str();
  trace_cmd->add_option("--eta", et_eta, "Eta of the single chopthin filter");
  trace_cmd->add_option("--filter", et_filters,
                        "Filter as scheme:beta_fraction[:eta], repeatable "
                        "(default: chopthin:1:5.828427..., chopthin:1:10, "
                        "systematic:0.5)");
  trace_cmd->add_option("--n", et_n, "Number of particles")->capture_default_str();
  trace_cmd->add_option("--steps", et_steps, "Number of steps")
      ->capture_default_str();
  add_seed(trace_cmd, et);
  add_output(trace_cmd, et, true);
  trace_cmd->footer(kTraceSchema);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (resample_cmd->parsed()) {
      const Scheme scheme = scheme_from(rs_scheme);
      if (scheme == Scheme::chopthin && !rs_eta) {
        throw ValidationError("chopthin needs --eta");
      }
      if (scheme != Scheme::chopthin && rs_eta) {
        throw ValidationError("--eta only applies to chopthin");
      }
      const std::vector<double> w = read_input(rs_input, in);
      const std::size_t n_out = rs_n_out.value_or(w.size());
      const Resolved seed = resolve(rs.seed, "CHOPTHIN_SEED", kDefaultSeed, env);
      Rng rng(seed.value);
      const ResampleResult r =
          resample(scheme, w, n_out, rs_eta.value_or(kMinEta), rng);
      std::ostringstream buf;
      buf << "ancestor,weight\n";
      for (std::size_t k = 0; k < r.size(); ++k) {
        buf << r.ancestors[k] + 1 << ',' << format_number(r.weights[k]) << '\n';
      }
      Sink sink(rs.output, out);
      sink.stream() << buf.str();
    } else if (pf_cmd->parsed()) {
      PfConfig cfg;
      cfg.particles = pf_n;
      cfg.beta = pf_beta * static_cast<double>(pf_n);
      cfg.scheme = scheme_from(pf_scheme);
      if (cfg.scheme == Scheme::chopthin) cfg.eta = pf_eta.value_or(kEtaHalf);
      else if (pf_eta) throw ValidationError("--eta only applies to chopthin");
      if (!(pf_beta >= 0.0 && pf_beta <= 1.0)) {
        throw ValidationError("--beta-fraction must lie in [0, 1]");
      }
      const Resolved seed = resolve(pf.seed, "CHOPTHIN_SEED", kDefaultSeed, env);
      cfg.seed = mix_seed(seed.value, 0, 1);
      const ModelSpec model = parse_model(pf_model) == ModelKind::stoch_vol
                                  ? ModelSpec::stoch_vol()
                                  : ModelSpec::linear_gaussian(pf_sigma);
      std::vector<double> y;
      if (!pf_obs.empty()) {
        std::ifstream file(pf_obs);
        if (!file) throw ValidationError("cannot open '" + pf_obs + "'");
        std::string text((std::istreambuf_iterator<char>(file)),
                         std::istreambuf_iterator<char>());
        std::size_t line_no = 0;
        std::istringstream lines(text);
        for (std::string line; std::getline(lines, line);) {
          ++line_no;
          const auto body = trim(line);
          if (body.empty() || body.front() == '#') continue;
          const auto v = parse_double(body);
          if (!v || !std::isfinite(*v)) {
            throw ValidationError("line " + std::to_string(line_no) +
                                  ": cannot parse observation");
          }
          y.push_back(*v);
        }
      } else {
        Rng data_rng(mix_seed(seed.value, 0, 0));
        y = simulate(model, pf_steps, data_rng).observations;
      }
      const PfOutput r = pf_run(model, y, cfg);
      std::ostringstream buf;
      buf << "# master_seed=" << seed.value << '\n'
          << "# seed_source=" << seed.source << '\n'
          << "# seed_mixer=" << kSeedMixerName << '\n'
          << "# model=" << model.name() << '\n'
          << "# log_marginal_likelihood="
          << format_number(r.log_marginal_likelihood()) << '\n'
          << "# version=" << kVersion << '\n'
          << "t,observation,posterior_mean,log_likelihood,ess_before,ess_after,"
             "resampled,particles\n";
      for (std::size_t t = 0; t < r.steps(); ++t) {
        buf << t + 1 << ',' << format_number(y[t]) << ','
            << format_number(r.posterior_means[t]) << ','
            << format_number(r.log_likelihoods[t]) << ','
            << format_number(r.ess_before[t]) << ','
            << format_number(r.ess_after[t]) << ',' << (r.resampled[t] ? 1 : 0)
            << ',' << r.particle_counts[t] << '\n';
      }
      Sink sink(pf.output, out);
      sink.stream() << buf.str();
    } else if (mse_cmd->parsed()) {
      MseStudyConfig cfg;
      cfg.model = parse_model(ms_model);
      if (ms_profile == "full") {
        cfg.sigma_y = {1.0 / 3.0, 1.0, 3.0, 9.0};
        cfg.particles = {100, 1000, 10000};
        cfg.steps = 1000;
        cfg.iterations = 1000;
      }
      if (!ms_sigma.empty()) cfg.sigma_y = ms_sigma;
      if (!ms_n.empty()) cfg.particles = ms_n;
      if (mse_cmd->count("--steps") > 0) cfg.steps = ms_steps;
      if (mse_cmd->count("--iterations") > 0) cfg.iterations = ms_iterations;
      if (ms_filters.empty()) {
        cfg.filters = {FilterSpec{Scheme::chopthin, 1.0, kEtaHalf}};
      } else {
        for (const auto& f : ms_filters) cfg.filters.push_back(parse_filter(f));
      }
      cfg.grid.points = ms_grid_points;
      const Resolved seed = resolve(ms.seed, "CHOPTHIN_SEED", kDefaultSeed, env);
      const Resolved workers = resolve(ms_workers, "CHOPTHIN_WORKERS", 1, env);
      cfg.master_seed = seed.value;
      cfg.workers = workers.value;
      ExperimentReport report = mse_study(cfg);
      report.header["seed_source"] = seed.source;
      report.header["workers"] = std::to_string(workers.value);
      report.header["workers_source"] = workers.source;
      report.header["profile"] = ms_profile;
      std::ostringstream buf;
      if (ms.format == "json") write_json(report, buf);
      else write_csv(report, buf);
      Sink sink(ms.output, out);
      sink.stream() << buf.str();
    } else if (effort_cmd->parsed()) {
      EffortConfig cfg;
      cfg.sizes = eb_n;
      cfg.schemes.clear();
      for (const auto& s : eb_schemes) cfg.schemes.push_back(scheme_from(s));
      cfg.eta = eb_eta;
      cfg.repetitions = eb_reps;
      const Resolved seed = resolve(eb.seed, "CHOPTHIN_SEED", kDefaultSeed, env);
      cfg.master_seed = seed.value;
      ExperimentReport report = effort_bench(cfg);
      report.header["seed_source"] = seed.source;
      std::ostringstream buf;
      if (eb.format == "json") write_json(report, buf);
      else write_csv(report, buf);
      Sink sink(eb.output, out);
      sink.stream() << buf.str();
    } else if (trace_cmd->parsed()) {
      EssTraceConfig cfg;
      cfg.model = parse_model(et_model);
      cfg.sigma_y = et_sigma;
      cfg.particles = et_n;
      cfg.steps = et_steps;
      for (const auto& f : et_filters) cfg.filters.push_back(parse_filter(f));
      if (et_scheme) {
        FilterSpec f;
        f.scheme = scheme_from(*et_scheme);
        f.beta_fraction = et_beta;
        if (f.scheme == Scheme::chopthin) f.eta = et_eta.value_or(kEtaHalf);
        else if (et_eta) throw ValidationError("--eta only applies to chopthin");
        cfg.filters.push_back(f);
      } else if (trace_cmd->count("--eta") > 0 ||
                 trace_cmd->count("--beta-fraction") > 0) {
        throw ValidationError("--eta and --beta-fraction need --scheme");
      }
      if (cfg.filters.empty()) {
        cfg.filters = {FilterSpec{Scheme::chopthin, 1.0, kEtaHalf},
                       FilterSpec{Scheme::chopthin, 1.0, 10.0},
                       baseline_filter()};
      }
      const Resolved seed = resolve(et.seed, "CHOPTHIN_SEED", kDefaultSeed, env);
      cfg.master_seed = seed.value;
      EssTrace trace = ess_trace(cfg);
      trace.header["seed_source"] = seed.source;
      std::ostringstream buf;
      if (et.format == "json") write_json(trace, buf);
      else write_csv(trace, buf);
      Sink sink(et.output, out);
      sink.stream() << buf.str();
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DegeneracyError& e) {
    err << "degeneracy: " << e.what() << '\n';
    return kExitDegeneracy;
  }
  return kExitOk;
}

}  // namespace chopthin::cli
