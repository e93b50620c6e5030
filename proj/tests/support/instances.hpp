#pragma once

// Random resampling problems shared by the unit and acceptance suites.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace chopthin::testing {

struct Instance {
  std::vector<double> weights;
  double eta = 4.0;
  std::size_t n_out = 1;
  std::string kind;
};

inline const double kEtaHalf = 3.0 + std::sqrt(8.0);

/// n in 1..200; weights iid Exponential(1), Pareto(1.5), or Exponential with
/// roughly 30% zeros; N in {1, n/2, n, 2n}; eta in {4, 3 + sqrt 8, 10}.
inline std::vector<Instance> make_instances(std::size_t count,
                                            std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> size(1, 200);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double etas[] = {4.0, kEtaHalf, 10.0};
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Instance inst;
    const std::size_t n = size(gen);
    inst.weights.resize(n);
    switch (k % 3) {
      case 0:
        inst.kind = "exponential";
        for (double& v : inst.weights) v = expo(gen);
        break;
      case 1:
        inst.kind = "pareto";
        for (double& v : inst.weights) v = std::pow(1.0 - unif(gen), -1.0 / 1.5);
        break;
      default:
        inst.kind = "with-zeros";
        for (double& v : inst.weights) v = unif(gen) < 0.3 ? 0.0 : expo(gen);
        inst.weights[n / 2] = expo(gen) + 1e-3;
        break;
    }
    const std::size_t choices[] = {1, std::max<std::size_t>(1, n / 2), n, 2 * n};
    inst.n_out = choices[(k / 3) % 4];
    inst.eta = etas[(k / 12) % 3];
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace chopthin::testing
