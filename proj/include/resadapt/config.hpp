#ifndef RESADAPT_CONFIG_HPP_
#define RESADAPT_CONFIG_HPP_

// Experiment configuration. The text format is one `dotted.key = value` per
// line with `#` comments; a document starting with `{` is read as JSON whose
// nested objects map onto the same dotted keys.
//
//   method = ours
//   output_dir = runs/moons
//   data.generator = two-moons
//   data.rotation_deg = 35
//   train.lambda_r = 1.0
//   train.seed = 3

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "resadapt/model.hpp"
#include "resadapt/synthbench.hpp"
#include "resadapt/trainer.hpp"

namespace resadapt {

struct ExperimentConfig {
  Method method = Method::kOurs;
  std::string output_dir = "out";
  ShiftSpec data;
  std::optional<std::uint64_t> data_seed;  // unset: the generator follows train.seed
  std::string source_csv;  // set together with target_csv to replace the generator
  std::string target_csv;
  ModelShape model;
  TrainConfig train;

  bool uses_files() const { return !source_csv.empty(); }
  ShiftSpec shift() const;
};

/// Throws ConfigurationError on unknown keys, bad values and data-source conflicts.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Sets a single dotted key on cfg.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Every effective setting as key -> canonical value text, sorted by key.
std::map<std::string, std::string> to_settings(const ExperimentConfig& cfg);
std::string to_config_text(const ExperimentConfig& cfg);

/// Input data and training settings must be mutually consistent.
void validate(const ExperimentConfig& cfg);

/// FNV-1a over the canonical settings, excluding output_dir; 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace resadapt

#endif  // RESADAPT_CONFIG_HPP_
