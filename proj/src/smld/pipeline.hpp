#pragma once

#include "smld/linalg.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace smld {

using Json = nlohmann::json;

/// Process exit codes shared by the library API and the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitDiverged = 2,
  kExitCorrectionFailed = 3,
};

struct RunOptions {
  std::optional<std::uint64_t> seed;  ///< overrides the config seed
  double max_seconds = 0.0;           ///< wall-clock cap for chains; <= 0 disables
};

struct RunOutcome {
  int exit_code = kExitOk;
  std::string status;  ///< "completed", "diverged", "correction_failed", ...
  Json report;         ///< the main JSON document the command wrote
};

/// Runs one of simulate | fit | gibbs | oracle | demo-divergence. Throws
/// ConfigError / IoError (and other library errors) on invalid input.
RunOutcome run_command(const std::string& command, const Json& config, const std::string& out_dir,
                       const RunOptions& options = {});

/// eps = S / n^{1 + delta}, delta = (log S / log n + 1) / 2.
double auto_step_size(std::size_t S, std::size_t n);

/// Posterior summary of one scalar sample path.
struct ScalarSummary {
  double mean = 0.0;
  double var = 0.0;
  double lo = 0.0;    ///< 2.5% quantile
  double hi = 0.0;    ///< 97.5% quantile
  double mcse = 0.0;  ///< batch-means Monte Carlo standard error of the mean
};

/// Quantiles use linear interpolation between order statistics; the MCSE uses
/// floor(sqrt(N)) batches.
ScalarSummary summarize(const Eigen::Ref<const Vec>& samples);

Json to_json(const ScalarSummary& s);

/// Column labels for the flat parameter layout of a model kind.
std::vector<std::string> parameter_names(const std::string& model, std::size_t p, std::size_t q);

}  // namespace smld
