#pragma once

#include "sdid/io.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace sdid::cli {

enum class Command { Generate, Update, Identify, Compare, Full };

enum ExitCode : int { kOk = 0, kUsage = 2, kNotConverged = 3 };

/// Everything a command needs. Unset optionals fall back to the scenario or
/// library defaults.
struct RunConfig {
  Command command = Command::Full;
  std::string scenario = "shear10";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "run";
  /// Where inputs are read from; defaults to `out`.
  std::optional<std::filesystem::path> in;
  std::optional<std::filesystem::path> intact_file;
  std::optional<std::filesystem::path> damaged_file;
  std::optional<std::filesystem::path> baseline_file;

  std::optional<double> noise;
  std::optional<Index> n_obs;
  std::optional<double> beta_lambda;
  std::optional<double> beta_phi;
  HyperPriors hyper;
  double lambda_min = OptBudget{}.lambda_min;
  double lambda_max = OptBudget{}.lambda_max;
  double tol = 1e-6;
  Index trials = 1;
  Index n_samples = 100000;
};

/// Hash of the settings that determine results; paths are excluded.
std::string config_hash(const RunConfig& cfg);

// Each command returns an ExitCode and reports problems on `err`.
int cmd_generate(const RunConfig& cfg, std::ostream& err);
int cmd_update(const RunConfig& cfg, std::ostream& err);
int cmd_identify(const RunConfig& cfg, std::ostream& err);
int cmd_compare(const RunConfig& cfg, std::ostream& err);
/// generate -> update -> identify -> compare in one directory, or per trial in
/// out/trial_NNN with seeds seed, seed+1, ... plus out/trials.csv.
int cmd_full(const RunConfig& cfg, std::ostream& err);

int run(const RunConfig& cfg, std::ostream& err);

/// Parses arguments and dispatches. Usage errors exit 2.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdid::cli
