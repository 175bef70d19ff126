#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ridgepred/config.hpp"
#include "ridgepred/estimators.hpp"
#include "ridgepred/figures.hpp"
#include "ridgepred/limits.hpp"

namespace ridgepred {

enum class Command { Limits, Simulate, Estimate, Meta, Spectrum };

Command parse_command(const std::string& text);
std::string to_string(Command c);

// Command-line inputs before merging.  Precedence, lowest first: preset,
// config file, --set overrides, then the dedicated flags.
struct CliOptions {
  Command command = Command::Limits;
  std::optional<std::filesystem::path> config;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  bool svg = false;
  bool full_scale = false;
  std::vector<std::string> overrides;  // "section.key=value"
};

struct RunConfig {
  Command command = Command::Limits;
  IniDocument doc;  // merged, schema-checked, with input paths made absolute
  std::filesystem::path output_dir = "ridgepred_out";
  bool emit_svg = false;
  std::uint64_t seed = 1;
  bool full_scale = false;
  std::optional<FigureId> preset;
};

// Parses, merges and validates.  Throws ConfigError naming the offending key.
RunConfig make_run_config(const CliOptions& opts);

// Executes the command and writes its artifacts under output_dir.
void run(const RunConfig& cfg, std::ostream& log);

// Simulation estimator token:
//   marginal | meta | ridgeless | blupless | ols
//   ridge:<lambda> | ridge:opt[*n|*n2|/n|/n2]
//   blup:<tau>     | blup:opt[*n|*n2|/n|/n2]
// "opt" is the optimal penalty for tm; the suffix scales it by n^{+-1} or n^{+-2}.
struct EstimatorToken {
  std::string token;
  bool meta = false;
  EstimatorKind kind;
};
EstimatorToken parse_estimator_token(const std::string& token, Eigen::Index n,
                                     const TraitModel& tm);

// Full command-line entry point.  Returns the process exit code: 0 success,
// 2 configuration error, 3 numerical or I/O error, 4 too many failed replicates.
// Failures print a one-line JSON error record to err.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ridgepred
