#include "resadapt/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace fs = std::filesystem;

namespace {

void prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigurationError("output directory '" + dir + "' cannot be created: " + ec.message());
  }
  const fs::path probe = fs::path(dir) / ".write-probe";
  {
    std::ofstream test(probe);
    if (!test) throw ConfigurationError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const TrainingError& e) {
    err << "training aborted: " << e.what() << "\n";
    return kExitTrainingAborted;
  } catch (const BarrierDomainError& e) {
    err << "training aborted: " << e.what() << "\n";
    return kExitTrainingAborted;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

std::string value_label(double v) { return format_number(v); }

}  // namespace

std::pair<DomainBatch, DomainBatch> load_data(const ExperimentConfig& cfg) {
  if (!cfg.uses_files()) return generate(cfg.shift());
  DomainBatch source = load_csv(cfg.source_csv);
  DomainBatch target = load_csv(cfg.target_csv);
  if (source.features() != target.features()) {
    throw ConfigurationError("source and target files have different feature counts");
  }
  return {std::move(source), std::move(target)};
}

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  prepare_dir(cfg.output_dir);
  const auto [source, target] = load_data(cfg);
  RunArtifacts art;
  art.result = run_method(cfg.method, source, target, cfg.train, cfg.model);

  const auto& history = art.result.training.ranks.history;
  art.summary.method = std::string(to_string(cfg.method));
  art.summary.seed = cfg.train.seed;
  art.summary.config_hash = config_hash(cfg);
  art.summary.source_accuracy = art.result.source_eval.accuracy;
  art.summary.target_accuracy = art.result.target_eval.accuracy;
  art.summary.rank_sum_before = history.empty() ? 0 : static_cast<long>(history.front().rank_sum);
  art.summary.rank_sum_after = static_cast<long>(art.result.model.rank_sum());

  const fs::path dir(cfg.output_dir);
  write_text((dir / "metrics.csv").string(), metrics_to_csv(art.result.training.metrics));
  write_text((dir / "ranks.json").string(), ranks_to_json(art.result.training.ranks));
  write_text((dir / "summary.json").string(), summary_to_json(art.summary));
  return art;
}

int cmd_run(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunArtifacts art = run_experiment(cfg);
    out << "method " << art.summary.method << ", seed " << art.summary.seed << "\n";
    out << "source accuracy " << format_number(art.summary.source_accuracy) << "\n";
    out << "target accuracy " << format_number(art.summary.target_accuracy) << "\n";
    out << format_rank_table(art.result.training.ranks);
    out << "wrote " << (fs::path(cfg.output_dir) / "metrics.csv").string() << ", ranks.json, summary.json\n";
    return kExitOk;
  });
}

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] { return cmd_run(load_config(config_path), out, err); });
}

int cmd_report_ranks(const std::string& ranks_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    out << format_rank_table(load_ranks(ranks_path));
    return kExitOk;
  });
}

int cmd_sweep(const ExperimentConfig& base, const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string key = opts.param;
    if (key == "lambda_s" || key == "lambda_r") key = "train." + key;
    if (key != "train.lambda_s" && key != "train.lambda_r") {
      throw ConfigurationError("sweep parameter must be lambda_s or lambda_r, got '" + opts.param + "'");
    }
    const std::string name = key.substr(6);
    if (opts.values.empty()) throw ConfigurationError("sweep needs at least one value");
    if (std::set<double>(opts.values.begin(), opts.values.end()).size() != opts.values.size()) {
      throw ConfigurationError("sweep values must be distinct");
    }
    std::vector<std::uint64_t> seeds = opts.seeds;
    if (seeds.empty()) seeds.push_back(base.train.seed);
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
      throw ConfigurationError("sweep seeds must be distinct");
    }
    validate(base);
    prepare_dir(base.output_dir);

    std::vector<SweepRow> rows;
    for (double value : opts.values) {
      for (std::uint64_t seed : seeds) {
        ExperimentConfig cfg = base;
        apply_setting(cfg, key, format_number(value));
        cfg.train.seed = seed;
        cfg.output_dir = (fs::path(base.output_dir) / (name + "-" + value_label(value)) /
                          ("seed-" + std::to_string(seed))).string();
        const RunArtifacts art = run_experiment(cfg);
        rows.push_back({name, value, seed, art.summary.target_accuracy, art.summary.rank_sum_after});
        out << name << " = " << value_label(value) << ", seed " << seed << ": target accuracy "
            << format_number(art.summary.target_accuracy) << ", rank sum " << art.summary.rank_sum_after << "\n";
      }
    }
    write_text((fs::path(base.output_dir) / "sweep.csv").string(), sweep_to_csv(rows));
    return kExitOk;
  });
}

int cmd_sweep(const std::string& config_path, const SweepOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] { return cmd_sweep(load_config(config_path), opts, out, err); });
}

}  // namespace resadapt
