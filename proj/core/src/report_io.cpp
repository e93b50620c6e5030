#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "chopthin/experiments.hpp"
#include "chopthin/random.hpp"
#include "chopthin/version.hpp"

namespace chopthin {

namespace {

std::string optional_number(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

void write_header(std::ostream& out, std::uint64_t seed,
                  const std::map<std::string, std::string>& header) {
  out << "# master_seed=" << seed << '\n';
  if (!header.contains("seed_mixer")) {
    out << "# seed_mixer=" << kSeedMixerName << '\n';
  }
  for (const auto& [key, value] : header) {
    out << "# " << key << '=' << value << '\n';
  }
  out << "# version=" << kVersion << '\n';
}

nlohmann::json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

nlohmann::json optional_or_null(const std::optional<double>& v) {
  return v ? number_or_null(*v) : nlohmann::json(nullptr);
}

nlohmann::json provenance(std::uint64_t seed,
                          const std::map<std::string, std::string>& header) {
  nlohmann::json j;
  j["master_seed"] = seed;
  j["seed_mixer"] = kSeedMixerName;
  j["version"] = kVersion;
  nlohmann::json h = nlohmann::json::object();
  for (const auto& [key, value] : header) h[key] = value;
  j["header"] = std::move(h);
  return j;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_csv(const ExperimentReport& report, std::ostream& out) {
  write_header(out, report.master_seed, report.header);
  out << "experiment,model,sigma_y,N,T,M,scheme,beta,eta,metric,value,stderr,"
         "ratio_to_systematic\n";
  for (const auto& r : report.rows) {
    out << r.experiment << ',' << r.model << ',' << optional_number(r.sigma_y)
        << ',' << r.particles << ',' << r.steps << ',' << r.iterations << ','
        << to_string(r.filter.scheme) << ','
        << format_number(r.filter.beta_fraction) << ','
        << optional_number(r.filter.eta) << ',' << r.metric << ','
        << format_number(r.value) << ',' << format_number(r.stderr_value)
        << ',' << format_number(r.ratio_to_systematic) << '\n';
  }
}

void write_csv(const EssTrace& trace, std::ostream& out) {
  write_header(out, trace.master_seed, trace.header);
  out << "t,scheme,beta,eta,ess_before,ess_after,resampled\n";
  for (const auto& r : trace.rows) {
    out << r.t << ',' << to_string(r.filter.scheme) << ','
        << format_number(r.filter.beta_fraction) << ','
        << optional_number(r.filter.eta) << ',' << format_number(r.ess_before)
        << ',' << format_number(r.ess_after) << ',' << (r.resampled ? 1 : 0)
        << '\n';
  }
}

void write_json(const ExperimentReport& report, std::ostream& out) {
  nlohmann::json j = provenance(report.master_seed, report.header);
  j["experiment"] = report.experiment;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({
        {"experiment", r.experiment},
        {"model", r.model},
        {"sigma_y", optional_or_null(r.sigma_y)},
        {"N", r.particles},
        {"T", r.steps},
        {"M", r.iterations},
        {"scheme", std::string(to_string(r.filter.scheme))},
        {"beta", r.filter.beta_fraction},
        {"eta", optional_or_null(r.filter.eta)},
        {"metric", r.metric},
        {"value", number_or_null(r.value)},
        {"stderr", number_or_null(r.stderr_value)},
        {"ratio_to_systematic", number_or_null(r.ratio_to_systematic)},
        {"degenerate_iterations", r.degenerate},
    });
  }
  j["rows"] = std::move(rows);
  out << j.dump(2) << '\n';
}

void write_json(const EssTrace& trace, std::ostream& out) {
  nlohmann::json j = provenance(trace.master_seed, trace.header);
  j["experiment"] = "ess-trace";
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : trace.rows) {
    rows.push_back({
        {"t", r.t},
        {"scheme", std::string(to_string(r.filter.scheme))},
        {"beta", r.filter.beta_fraction},
        {"eta", optional_or_null(r.filter.eta)},
        {"ess_before", r.ess_before},
        {"ess_after", r.ess_after},
        {"resampled", r.resampled},
    });
  }
  j["rows"] = std::move(rows);
  out << j.dump(2) << '\n';
}

}  // namespace chopthin
