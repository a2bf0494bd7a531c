#include "resadapt/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

using nlohmann::json;

std::size_t line_of(std::string_view text, std::size_t byte) {
  const auto end = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(end), '\n'));
}

RankPair read_pair(const json& node, const std::string& what) {
  if (!node.is_array() || node.size() != 2 || !node[0].is_number_integer() || !node[1].is_number_integer()) {
    throw ValidationError(what + " must be an [l, r] pair of integers");
  }
  return {node[0].get<Eigen::Index>(), node[1].get<Eigen::Index>()};
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

std::string bracket(const RankPair& p) {
  return "[" + std::to_string(p.l) + ", " + std::to_string(p.r) + "]";
}

std::string pad(const std::string& s, std::size_t width) {
  return s + std::string(width > s.size() ? width - s.size() : 0, ' ');
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string ranks_to_json(const RankReport& report) {
  validate(report);
  json doc;
  doc["layers"] = json::array();
  for (const auto& layer : report.layers) {
    doc["layers"].push_back({{"name", layer.name},
                             {"before", {layer.before.l, layer.before.r}},
                             {"after", {layer.after.l, layer.after.r}}});
  }
  doc["history"] = json::array();
  for (const auto& point : report.history) {
    doc["history"].push_back({{"step", point.step}, {"rank_sum", point.rank_sum}});
  }
  return doc.dump(2) + "\n";
}

RankReport ranks_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed ranks file: ") + e.what(), line_of(text, e.byte));
  }
  RankReport report;
  const json& layers = field(doc, "layers", "ranks file");
  if (!layers.is_array()) throw ValidationError("ranks file: 'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layer " + std::to_string(i);
    const json& name = field(layers[i], "name", where);
    if (!name.is_string()) throw ValidationError(where + ": name must be a string");
    report.layers.push_back({name.get<std::string>(), read_pair(field(layers[i], "before", where), where + " before"),
                             read_pair(field(layers[i], "after", where), where + " after")});
  }
  if (doc.contains("history")) {
    const json& history = doc.at("history");
    if (!history.is_array()) throw ValidationError("ranks file: 'history' must be an array");
    for (std::size_t i = 0; i < history.size(); ++i) {
      const std::string where = "history entry " + std::to_string(i);
      const json& step = field(history[i], "step", where);
      const json& sum = field(history[i], "rank_sum", where);
      if (!step.is_number_integer() || !sum.is_number_integer()) {
        throw ValidationError(where + ": step and rank_sum must be integers");
      }
      report.history.push_back({step.get<long>(), sum.get<Eigen::Index>()});
    }
  }
  validate(report);
  return report;
}

RankReport load_ranks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read ranks file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ranks_from_json(buf.str());
}

std::string format_rank_table(const RankReport& report) {
  validate(report);
  std::size_t name_w = std::string("layer").size();
  std::size_t before_w = std::string("before").size();
  for (const auto& layer : report.layers) {
    name_w = std::max(name_w, layer.name.size());
    before_w = std::max(before_w, bracket(layer.before).size());
  }
  std::string out = "Transformation ranks: [l, r]\n";
  out += pad("layer", name_w + 2) + pad("before", before_w + 2) + "after\n";
  for (const auto& layer : report.layers) {
    out += pad(layer.name, name_w + 2) + pad(bracket(layer.before), before_w + 2) + bracket(layer.after) + "\n";
  }
  return out;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + "," + format_number(r.l_class) + "," + format_number(r.l_disc) + "," +
           format_number(r.l_stream) + "," + format_number(r.reg) + "," + format_number(r.src_acc) + "," +
           format_number(r.tgt_acc) + "\n";
  }
  return out;
}

std::string summary_to_json(const RunSummary& s) {
  json doc;
  doc["method"] = s.method;
  doc["seed"] = s.seed;
  doc["config_hash"] = s.config_hash;
  doc["source_accuracy"] = s.source_accuracy;
  doc["target_accuracy"] = std::isnan(s.target_accuracy) ? json(nullptr) : json(s.target_accuracy);
  doc["rank_sum_before"] = s.rank_sum_before;
  doc["rank_sum_after"] = s.rank_sum_after;
  return doc.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out(kSweepHeader);
  out += "\n";
  for (const auto& r : rows) {
    out += r.param + "," + format_number(r.value) + "," + std::to_string(r.seed) + "," +
           format_number(r.target_accuracy) + "," + std::to_string(r.rank_sum) + "\n";
  }
  return out;
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace resadapt
