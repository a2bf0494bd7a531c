#ifndef RESADAPT_CHECK_HPP_
#define RESADAPT_CHECK_HPP_

// Fast self-verification suite run by `resadapt check`: finite-difference
// gradient checks of the autodiff ops and losses, optimality of the block
// shrinkage steps against a subgradient search, least-squares recovery
// stationarity and bit-exact round trips.

#include <iosfwd>
#include <string>
#include <vector>

namespace resadapt {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  /// Name of a gradient probe whose backward pass is corrupted (doubled);
  /// empty for a clean run.
  std::string inject_fault;
  unsigned long long seed = 7;
};

/// Names of the gradient probes, valid values for CheckOptions::inject_fault.
std::vector<std::string> gradient_probe_names();

/// Throws ConfigurationError for an unknown inject_fault name.
std::vector<CheckResult> run_checks(const CheckOptions& opts);

/// Prints one line per check; 0 when all pass, 1 otherwise, 2 for bad options.
int cmd_check(const CheckOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace resadapt

#endif  // RESADAPT_CHECK_HPP_
