#ifndef RESADAPT_EXPERIMENT_HPP_
#define RESADAPT_EXPERIMENT_HPP_

// Command implementations behind the `resadapt` executable. Each returns the
// process exit code and reports to the given streams.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "resadapt/config.hpp"
#include "resadapt/report.hpp"
#include "resadapt/synthbench.hpp"

namespace resadapt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitTrainingAborted = 3;

/// Source and target batches named by the config (CSV files or generator).
std::pair<DomainBatch, DomainBatch> load_data(const ExperimentConfig& cfg);

struct RunArtifacts {
  MethodResult result;
  RunSummary summary;
};

/// Trains cfg.method and writes metrics.csv, ranks.json and summary.json into
/// cfg.output_dir (created if missing). Throws on failure.
RunArtifacts run_experiment(const ExperimentConfig& cfg);

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err);
int cmd_run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

int cmd_report_ranks(const std::string& ranks_path, std::ostream& out, std::ostream& err);

struct SweepOptions {
  std::string param;  // lambda_s or lambda_r
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;  // empty: the base config's train.seed
};

/// One run per (value, seed) in <output_dir>/<param>-<value>/seed-<seed>/,
/// then <output_dir>/sweep.csv. Duplicate values or seeds are rejected.
int cmd_sweep(const ExperimentConfig& base, const SweepOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::string& config_path, const SweepOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace resadapt

#endif  // RESADAPT_EXPERIMENT_HPP_
