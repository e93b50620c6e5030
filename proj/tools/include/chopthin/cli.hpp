#pragma once

#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace chopthin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDegeneracy = 3;

/// Environment lookup; returns nullopt for unset variables.
using Environment = std::function<std::optional<std::string>(const std::string&)>;

/// The process environment.
Environment process_environment();

/// Runs one invocation. `args` excludes the program name. `in` feeds weight
/// input for `resample` when no --input file is given. Returns the exit code:
/// 0 on success, 2 on validation errors, 3 on numerical degeneracy.
int run_cli(const std::vector<std::string>& args, std::istream& in,
            std::ostream& out, std::ostream& err,
            const Environment& env = process_environment());

/// Parses weights, one per line or as CSV. Blank lines and lines starting
/// with '#' are skipped; a non-numeric first row is taken as a CSV header,
/// and the column named "weight" is used if present, otherwise the last
/// column. Throws ValidationError naming the 1-based line of a bad value.
std::vector<double> read_weights(std::istream& in);

}  // namespace chopthin::cli
