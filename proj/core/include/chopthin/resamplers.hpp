#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "chopthin/random.hpp"
#include "chopthin/resample_result.hpp"

namespace chopthin {

enum class Scheme {
  multinomial,
  multinomial_condbinom,
  systematic,
  stratified,
  residual,
  residual_stratified,
  branching,
  chopthin,
};

inline constexpr std::array<Scheme, 8> kAllSchemes = {
    Scheme::multinomial,         Scheme::multinomial_condbinom,
    Scheme::systematic,          Scheme::stratified,
    Scheme::residual,            Scheme::residual_stratified,
    Scheme::branching,           Scheme::chopthin,
};

/// Command-line / report name, e.g. "residual-stratified".
std::string_view to_string(Scheme s);

/// Inverse of to_string; std::nullopt for an unknown name.
std::optional<Scheme> parse_scheme(std::string_view name);

/// Whether the scheme always returns exactly the requested count.
constexpr bool is_fixed_size(Scheme s) { return s != Scheme::branching; }

/// Equal-weight resampling with one of the classical schemes.
///
/// Every offspring gets weight sum(w) / N', where N' is the number of
/// offspring (N' = n_out except for branching, whose size is random with
/// mean n_out). Residual schemes list the deterministic copies first.
/// Throws ValidationError for chopthin, n_out < 1 or invalid weights, and
/// DegeneracyError if branching happens to produce no offspring.
ResampleResult baseline_resample(Scheme scheme, std::span<const double> w,
                                 std::size_t n_out, Rng& rng);

/// Dispatches to chopthin (using eta) or to baseline_resample.
ResampleResult resample(Scheme scheme, std::span<const double> w,
                        std::size_t n_out, double eta, Rng& rng);

}  // namespace chopthin
