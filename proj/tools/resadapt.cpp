// resadapt: train two-stream domain adaptation models on synthetic or CSV
// data, print rank tables, sweep regularization weights and self-check.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "resadapt/check.hpp"
#include "resadapt/errors.hpp"
#include "resadapt/experiment.hpp"

namespace {

resadapt::ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  resadapt::ExperimentConfig cfg = resadapt::load_config(path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw resadapt::ConfigurationError("--set expects key=value, got '" + s + "'");
    resadapt::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  resadapt::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual parameter-transfer domain adaptation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "Train one configuration and write metrics.csv, ranks.json, summary.json");
  run->add_option("config", config_path, "Config file (key = value lines or JSON)")->required();
  run->add_option("--set", sets, "Override a config key, e.g. --set train.lambda_r=10");

  std::string ranks_path;
  auto* report = app.add_subcommand("report-ranks", "Print the before/after rank table of a ranks.json");
  report->add_option("ranks", ranks_path, "ranks.json file")->required();

  resadapt::SweepOptions sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Run a configuration over lambda_s or lambda_r values");
  sweep->add_option("config", config_path, "Base config file")->required();
  sweep->add_option("--param", sweep_opts.param, "lambda_s or lambda_r")->required();
  sweep->add_option("--values", sweep_opts.values, "Parameter values")->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_opts.seeds, "Seeds (default: train.seed)")->delimiter(',');
  sweep->add_option("--set", sets, "Override a base config key");

  resadapt::CheckOptions check_opts;
  bool list_probes = false;
  auto* check = app.add_subcommand("check", "Run the fast verification suite");
  check->add_option("--inject-fault", check_opts.inject_fault, "Corrupt the backward pass of the named op");
  check->add_flag("--list-ops", list_probes, "List op names accepted by --inject-fault");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : resadapt::kExitConfigError;
  }

  try {
    if (*run) return resadapt::cmd_run(load_with_overrides(config_path, sets), std::cout, std::cerr);
    if (*report) return resadapt::cmd_report_ranks(ranks_path, std::cout, std::cerr);
    if (*sweep) {
      return resadapt::cmd_sweep(load_with_overrides(config_path, sets), sweep_opts, std::cout, std::cerr);
    }
    if (*check) {
      if (list_probes) {
        for (const auto& name : resadapt::gradient_probe_names()) std::cout << name << "\n";
        return 0;
      }
      return resadapt::cmd_check(check_opts, std::cout, std::cerr);
    }
  } catch (const resadapt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return resadapt::kExitConfigError;
  }
  return resadapt::kExitConfigError;
}
