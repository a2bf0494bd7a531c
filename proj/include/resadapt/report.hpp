#ifndef RESADAPT_REPORT_HPP_
#define RESADAPT_REPORT_HPP_

// Run artifacts: ranks.json, metrics.csv, summary.json, sweep.csv and the
// before/after rank table.
//
// metrics.csv columns, in order:
//   step,l_class,l_disc,l_stream,reg,src_acc,tgt_acc
// Losses are averages over the steps since the previous row; reg and the
// accuracies are taken at the logged step. tgt_acc is `nan` when the target
// set carries no labels. Numbers use the shortest round-trip representation.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "resadapt/trainer.hpp"

namespace resadapt {

/// Validates before writing.
std::string ranks_to_json(const RankReport& report);

/// Throws ParseError on malformed JSON or missing fields and ValidationError
/// when the report breaks its invariants.
RankReport ranks_from_json(std::string_view text);
RankReport load_ranks(const std::string& path);

/// Layout:
///   Transformation ranks: [l, r]
///   layer  before    after
///   conv1  [32, 32]  [31, 31]
std::string format_rank_table(const RankReport& report);

inline constexpr std::string_view kMetricsHeader = "step,l_class,l_disc,l_stream,reg,src_acc,tgt_acc";

std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

struct RunSummary {
  std::string method;
  std::uint64_t seed = 0;
  std::string config_hash;
  double source_accuracy = 0.0;
  double target_accuracy = 0.0;  // NaN without target labels
  long rank_sum_before = 0;
  long rank_sum_after = 0;
};

std::string summary_to_json(const RunSummary& summary);

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::uint64_t seed = 0;
  double target_accuracy = 0.0;
  long rank_sum = 0;
};

inline constexpr std::string_view kSweepHeader = "param,value,seed,tgt_acc,rank_sum";

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Shortest round-trip decimal, `nan` and `inf`/`-inf` for non-finite values.
std::string format_number(double v);

/// Writes text to path, replacing the file. Throws Error on I/O failure.
void write_text(const std::string& path, std::string_view text);

}  // namespace resadapt

#endif  // RESADAPT_REPORT_HPP_
