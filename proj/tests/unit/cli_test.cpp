#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "chopthin/chopthin.hpp"
#include "chopthin/cli.hpp"
#include "chopthin/error.hpp"
#include "chopthin/resamplers.hpp"
#include "chopthin/weights.hpp"
#include "instances.hpp"

namespace chopthin::cli {
namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Environment fake_env(std::map<std::string, std::string> vars) {
  return [vars](const std::string& k) -> std::optional<std::string> {
    const auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

Result run(const std::vector<std::string>& args, const std::string& input = "",
           const Environment& env = fake_env({})) {
  std::istringstream in(input);
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(args, in, out, err, env);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> data_lines(const std::string& s) {
  std::vector<std::string> out;
  for (auto& l : lines(s)) {
    if (!l.starts_with("# ")) out.push_back(l);
  }
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  return v;
}

std::string join_lines(const std::vector<double>& w) {
  std::ostringstream ss;
  ss.precision(17);
  for (double v : w) ss << v << '\n';
  return ss.str();
}

class TempFile {
 public:
  explicit TempFile(const std::string& contents) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("chopthin_cli_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::ofstream(path_) << contents;
  }
  ~TempFile() { std::filesystem::remove(path_); }
  [[nodiscard]] std::string path() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

TEST(Resample, EqualWeightsIdentity) {
  const auto r = run({"resample", "--scheme", "chopthin", "--eta", "4", "--n-out",
                      "5", "--seed", "1"},
                     "1\n1\n1\n1\n1\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ancestor,weight\n1,1\n2,1\n3,1\n4,1\n5,1\n");
}

TEST(Resample, DegenerateMultinomial) {
  const auto r = run({"resample", "--scheme", "multinomial", "--n-out", "3",
                      "--seed", "7"},
                     "1\n0\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "ancestor,weight\n1,0.3333333333333333\n1,0.3333333333333333\n"
                   "1,0.3333333333333333\n");
}

TEST(Resample, AcceptsCsvScientificAndBlankLines) {
  const std::string csv = "index,weight\n\n1, 2.5e-1\n2,7.5E-1\n# note\n3,0\n";
  const std::string plain = "0.25\n\n0.75\n0\n";
  const auto a = run({"resample", "--scheme", "systematic", "--seed", "4"}, csv);
  const auto b = run({"resample", "--scheme", "systematic", "--seed", "4"}, plain);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(data_lines(a.out).size(), 4u);
}

TEST(Resample, ValidationErrorsExitTwoWithLineNumber) {
  const auto bad = run({"resample", "--scheme", "systematic"}, "1\n2\nabc\n");
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("line 3"), std::string::npos) << bad.err;
  const auto neg = run({"resample", "--scheme", "systematic"}, "1\n\n-2\n");
  EXPECT_EQ(neg.code, 2);
  EXPECT_NE(neg.err.find("line 3"), std::string::npos) << neg.err;
  EXPECT_EQ(run({"resample", "--scheme", "chopthin"}, "1\n").code, 2);
  EXPECT_EQ(run({"resample", "--scheme", "chopthin", "--eta", "2"}, "1\n").code, 2);
  EXPECT_EQ(run({"resample", "--scheme", "systematic", "--eta", "5"}, "1\n").code, 2);
  EXPECT_EQ(run({"resample", "--scheme", "nope"}, "1\n").code, 2);
  EXPECT_EQ(run({"resample", "--scheme", "systematic"}, "0\n0\n").code, 2);
  EXPECT_EQ(run({"resample", "--scheme", "systematic"}, "").code, 2);
  EXPECT_EQ(run({"resample", "--scheme", "systematic", "--n-out", "0"}, "1\n").code, 2);
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
}

TEST(Resample, BitExactParityWithLibrary) {
  std::uint64_t seed = 100;
  for (const auto& inst : testing::make_instances(120, 8)) {
    for (Scheme scheme : {Scheme::chopthin, Scheme::systematic, Scheme::residual}) {
      std::vector<std::string> args = {"resample", "--scheme",
                                       std::string(to_string(scheme)), "--n-out",
                                       std::to_string(inst.n_out), "--seed",
                                       std::to_string(seed)};
      std::ostringstream eta;
      eta.precision(17);
      eta << inst.eta;
      if (scheme == Scheme::chopthin) {
        args.push_back("--eta");
        args.push_back(eta.str());
      }
      const auto r = run(args, join_lines(inst.weights));
      ASSERT_EQ(r.code, 0) << r.err;
      Rng rng(seed);
      const auto expected = resample(scheme, inst.weights, inst.n_out,
                                     to_double(eta.str()), rng);
      const auto rows = data_lines(r.out);
      ASSERT_EQ(rows.size(), expected.size() + 1);
      for (std::size_t k = 0; k < expected.size(); ++k) {
        const auto f = split(rows[k + 1]);
        ASSERT_EQ(std::stoull(f[0]), expected.ancestors[k] + 1);
        ASSERT_EQ(to_double(f[1]), expected.weights[k]);
      }
      ++seed;
    }
  }
}

TEST(Resample, ReadsAndWritesFiles) {
  const TempFile input("3\n1\n");
  const TempFile output("");
  const auto r = run({"resample", "--scheme", "residual", "--n-out", "4",
                      "--input", input.path(), "--output", output.path()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(output.path());
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), "ancestor,weight\n1,1\n1,1\n1,1\n2,1\n");
}

TEST(EssTrace, ChopthinExampleStaysAboveFloor) {
  const auto r = run({"ess-trace", "--scheme", "chopthin", "--beta-fraction", "1",
                      "--eta", "5.8284", "--n", "1000", "--steps", "50", "--seed",
                      "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_lines(r.out);
  ASSERT_EQ(rows.size(), 51u);
  EXPECT_EQ(rows[0], "t,scheme,beta,eta,ess_before,ess_after,resampled");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = split(rows[i]);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f[1], "chopthin");
    EXPECT_GE(to_double(f[5]), 498.9) << rows[i];
  }
}

TEST(EssTrace, DefaultFiltersAndJson) {
  const auto r = run({"ess-trace", "--n", "200", "--steps", "5", "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("rows").size(), 15u);
  EXPECT_EQ(j.at("master_seed"), 1);
  EXPECT_EQ(j.at("header").at("seed_source"), "default");
}

TEST(EssTrace, RejectsOrphanFlags) {
  EXPECT_EQ(run({"ess-trace", "--eta", "5", "--n", "10", "--steps", "2"}).code, 2);
  EXPECT_EQ(run({"ess-trace", "--filter", "systematic", "--n", "10"}).code, 2);
}

TEST(PfRun, OutputsOneRowPerStep) {
  const auto r = run({"pf-run", "--scheme", "systematic", "--beta-fraction", "0.5",
                      "--n", "100", "--steps", "12", "--seed", "9"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_lines(r.out);
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[0],
            "t,observation,posterior_mean,log_likelihood,ess_before,ess_after,"
            "resampled,particles");
  EXPECT_NE(r.out.find("# log_marginal_likelihood="), std::string::npos);
}

TEST(PfRun, DegeneracyExitsThree) {
  const TempFile obs("0\n1e300\n");
  const auto r = run({"pf-run", "--sigma-y", "0.001", "--scheme", "systematic",
                      "--n", "10", "--observations", obs.path()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("step 2"), std::string::npos) << r.err;
}

TEST(MseStudy, RowsAndWorkerEcho) {
  const auto r = run({"mse-study", "--n", "50", "--steps", "5", "--iterations",
                      "3", "--sigma-y", "1,3", "--workers", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = data_lines(r.out);
  EXPECT_EQ(rows.size(), 1u + 2u * 2u * 2u);
  EXPECT_NE(r.out.find("# workers=2\n"), std::string::npos);
  EXPECT_NE(r.out.find("# workers_source=flag\n"), std::string::npos);
}

TEST(Environment, OverridesAreUsedAndEchoed) {
  const std::vector<std::string> args = {"mse-study", "--n", "30", "--steps", "4",
                                         "--iterations", "2"};
  const auto env = run(args, "", fake_env({{"CHOPTHIN_SEED", "42"},
                                           {"CHOPTHIN_WORKERS", "3"}}));
  ASSERT_EQ(env.code, 0) << env.err;
  EXPECT_NE(env.out.find("# master_seed=42\n"), std::string::npos);
  EXPECT_NE(env.out.find("# seed_source=env:CHOPTHIN_SEED\n"), std::string::npos);
  EXPECT_NE(env.out.find("# workers=3\n"), std::string::npos);
  EXPECT_NE(env.out.find("# workers_source=env:CHOPTHIN_WORKERS\n"),
            std::string::npos);

  auto with_flag = args;
  with_flag.insert(with_flag.end(), {"--seed", "42"});
  const auto flag = run(with_flag);
  EXPECT_EQ(data_lines(flag.out), data_lines(env.out));

  EXPECT_EQ(run(args, "", fake_env({{"CHOPTHIN_SEED", "x"}})).code, 2);
}

TEST(Determinism, SameFlagsSameBytes) {
  const std::vector<std::vector<std::string>> invocations = {
      {"pf-run", "--n", "80", "--steps", "6", "--seed", "5"},
      {"mse-study", "--n", "40", "--steps", "4", "--iterations", "3", "--seed", "5"},
      {"ess-trace", "--n", "60", "--steps", "4", "--seed", "5"},
      {"resample", "--scheme", "stratified", "--seed", "5"},
  };
  for (const auto& args : invocations) {
    const auto a = run(args, "1\n2\n3\n");
    const auto b = run(args, "1\n2\n3\n");
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out) << args[0];
  }
}

TEST(EffortBench, RunsWithSmallConfig) {
  const auto r = run({"effort-bench", "--n", "1000", "--scheme", "chopthin",
                      "--repetitions", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data_lines(r.out).size(), 1u + 2u * 2u);
  EXPECT_EQ(run({"effort-bench", "--repetitions", "3"}).code, 2);
}

TEST(Help, EverySubcommandDocumentsFlagsAndSchema) {
  const std::map<std::string, std::vector<std::string>> expected = {
      {"resample", {"--scheme", "--eta", "--n-out", "--seed", "--input",
                    "--output", "ancestor,weight"}},
      {"pf-run", {"--model", "--sigma-y", "--scheme", "--beta-fraction", "--eta",
                  "--n", "--steps", "--observations", "--seed",
                  "t,observation,posterior_mean"}},
      {"mse-study", {"--model", "--profile", "--sigma-y", "--n", "--steps",
                     "--iterations", "--filter", "--workers", "--seed",
                     "--format", "ratio_to_systematic"}},
      {"effort-bench", {"--n", "--scheme", "--eta", "--repetitions", "--seed",
                        "normalized-cost"}},
      {"ess-trace", {"--scheme", "--beta-fraction", "--eta", "--filter", "--n",
                     "--steps", "--seed", "ess_before,ess_after,resampled"}},
  };
  for (const auto& [cmd, needles] : expected) {
    const auto r = run({cmd, "--help"});
    EXPECT_EQ(r.code, 0) << cmd;
    for (const auto& needle : needles) {
      EXPECT_NE(r.out.find(needle), std::string::npos) << cmd << ": " << needle;
    }
  }
  EXPECT_EQ(run({"--help"}).code, 0);
}

}  // namespace
}  // namespace chopthin::cli
