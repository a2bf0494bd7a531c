#include "resadapt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "resadapt/errors.hpp"

namespace resadapt {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigurationError(std::string(key) + ": expected " + std::string(expected) + ", got '" +
                           std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int to_integer(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::vector<double> to_list(std::string_view key, std::string_view v, std::size_t expected) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto cell = trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(to_double(key, cell));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (expected != 0 && out.size() != expected) {
    bad_value(key, v, std::to_string(expected) + " comma-separated numbers");
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename Int>
std::string fmt_int(Int v) {
  return std::to_string(v);
}

std::string fmt_bool(bool v) { return v ? "true" : "false"; }

template <typename Derived>
std::string fmt_list(const Eigen::DenseBase<Derived>& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (i) out += ",";
    out += fmt(m(i));
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::optional<std::string>(const ExperimentConfig&)>;

struct Entry {
  Setter set;
  Getter get;
  bool generator = false;  // only meaningful when the generator supplies the data
};

const std::map<std::string, Entry, std::less<>>& entries() {
  static const std::map<std::string, Entry, std::less<>> table = [] {
    std::map<std::string, Entry, std::less<>> t;
    t["method"] = {[](ExperimentConfig& c, auto, auto v) { c.method = parse_method(v); },
                   [](const ExperimentConfig& c) { return std::string(to_string(c.method)); }};
    t["output_dir"] = {[](ExperimentConfig& c, auto, auto v) { c.output_dir = std::string(v); },
                       [](const ExperimentConfig& c) { return c.output_dir; }};

    t["data.generator"] = {[](ExperimentConfig& c, auto, auto v) { c.data.generator = parse_generator(v); },
                           [](const ExperimentConfig& c) { return std::string(to_string(c.data.generator)); },
                           true};
    t["data.rotation_deg"] = {[](ExperimentConfig& c, auto k, auto v) { c.data.rotation_deg = to_double(k, v); },
                              [](const ExperimentConfig& c) { return fmt(c.data.rotation_deg); }, true};
    t["data.noise"] = {[](ExperimentConfig& c, auto k, auto v) { c.data.noise = to_double(k, v); },
                       [](const ExperimentConfig& c) { return fmt(c.data.noise); }, true};
    t["data.n_source"] = {[](ExperimentConfig& c, auto k, auto v) { c.data.n_source = to_integer<int>(k, v); },
                          [](const ExperimentConfig& c) { return fmt_int(c.data.n_source); }, true};
    t["data.n_target"] = {[](ExperimentConfig& c, auto k, auto v) { c.data.n_target = to_integer<int>(k, v); },
                          [](const ExperimentConfig& c) { return fmt_int(c.data.n_target); }, true};
    t["data.seed"] = {[](ExperimentConfig& c, auto k, auto v) { c.data_seed = to_integer<std::uint64_t>(k, v); },
                      [](const ExperimentConfig& c) -> std::optional<std::string> {
                        if (!c.data_seed) return std::nullopt;
                        return fmt_int(*c.data_seed);
                      },
                      true};
    t["data.affine"] = {[](ExperimentConfig& c, auto k, auto v) {
                          const auto a = to_list(k, v, 4);
                          c.data.affine << a[0], a[1], a[2], a[3];
                        },
                        [](const ExperimentConfig& c) {
                          const auto& a = c.data.affine;
                          return fmt(a(0, 0)) + "," + fmt(a(0, 1)) + "," + fmt(a(1, 0)) + "," + fmt(a(1, 1));
                        },
                        true};
    t["data.translation"] = {[](ExperimentConfig& c, auto k, auto v) {
                               const auto a = to_list(k, v, 2);
                               c.data.translation << a[0], a[1];
                             },
                             [](const ExperimentConfig& c) { return fmt_list(c.data.translation); }, true};
    t["data.source_csv"] = {[](ExperimentConfig& c, auto, auto v) { c.source_csv = std::string(v); },
                            [](const ExperimentConfig& c) -> std::optional<std::string> {
                              if (c.source_csv.empty()) return std::nullopt;
                              return c.source_csv;
                            }};
    t["data.target_csv"] = {[](ExperimentConfig& c, auto, auto v) { c.target_csv = std::string(v); },
                            [](const ExperimentConfig& c) -> std::optional<std::string> {
                              if (c.target_csv.empty()) return std::nullopt;
                              return c.target_csv;
                            }};

    t["model.hidden"] = {[](ExperimentConfig& c, auto k, auto v) {
                           c.model.hidden.clear();
                           for (double h : to_list(k, v, 0)) {
                             if (h != static_cast<double>(static_cast<Eigen::Index>(h))) bad_value(k, v, "integers");
                             c.model.hidden.push_back(static_cast<Eigen::Index>(h));
                           }
                         },
                         [](const ExperimentConfig& c) {
                           std::string out;
                           for (std::size_t i = 0; i < c.model.hidden.size(); ++i) {
                             if (i) out += ",";
                             out += std::to_string(c.model.hidden[i]);
                           }
                           return out;
                         }};
    t["model.dc_hidden"] = {[](ExperimentConfig& c, auto k, auto v) { c.model.dc_hidden = to_integer<Eigen::Index>(k, v); },
                            [](const ExperimentConfig& c) { return fmt_int(c.model.dc_hidden); }};
    t["model.activation"] = {[](ExperimentConfig& c, auto, auto v) { c.model.activation = ad::parse_nonlinearity(v); },
                             [](const ExperimentConfig& c) { return std::string(ad::to_string(c.model.activation)); }};
    t["model.dc_activation"] = {
        [](ExperimentConfig& c, auto, auto v) { c.model.dc_activation = ad::parse_nonlinearity(v); },
        [](const ExperimentConfig& c) { return std::string(ad::to_string(c.model.dc_activation)); }};

    auto real = [&t](const std::string& key, double TrainConfig::*field) {
      t[key] = {[field](ExperimentConfig& c, auto k, auto v) { c.train.*field = to_double(k, v); },
                [field](const ExperimentConfig& c) { return fmt(c.train.*field); }};
    };
    auto integer = [&t](const std::string& key, int TrainConfig::*field) {
      t[key] = {[field](ExperimentConfig& c, auto k, auto v) { c.train.*field = to_integer<int>(k, v); },
                [field](const ExperimentConfig& c) { return fmt_int(c.train.*field); }};
    };
    auto flag = [&t](const std::string& key, bool TrainConfig::*field) {
      t[key] = {[field](ExperimentConfig& c, auto k, auto v) { c.train.*field = to_bool(k, v); },
                [field](const ExperimentConfig& c) { return fmt_bool(c.train.*field); }};
    };
    real("train.lambda_s", &TrainConfig::lambda_s);
    real("train.lambda_r", &TrainConfig::lambda_r);
    real("train.lr", &TrainConfig::lr);
    real("train.prox_step", &TrainConfig::prox_step);
    real("train.eps", &TrainConfig::eps);
    real("train.init_scale", &TrainConfig::init_scale);
    integer("train.prox_interval", &TrainConfig::prox_interval);
    integer("train.epochs", &TrainConfig::epochs);
    integer("train.batch_size", &TrainConfig::batch_size);
    integer("train.pretrain_steps", &TrainConfig::pretrain_steps);
    integer("train.initial_rank", &TrainConfig::initial_rank);
    integer("train.dc_updates_per_step", &TrainConfig::dc_updates_per_step);
    integer("train.log_interval", &TrainConfig::log_interval);
    flag("train.supervised", &TrainConfig::supervised);
    flag("train.block_diagonal", &TrainConfig::block_diagonal);
    t["train.layer_lambda"] = {[](ExperimentConfig& c, auto k, auto v) {
                                 c.train.layer_lambda = v.empty() ? std::vector<double>{} : to_list(k, v, 0);
                               },
                               [](const ExperimentConfig& c) -> std::optional<std::string> {
                                 if (c.train.layer_lambda.empty()) return std::nullopt;
                                 std::string out;
                                 for (std::size_t i = 0; i < c.train.layer_lambda.size(); ++i) {
                                   if (i) out += ",";
                                   out += fmt(c.train.layer_lambda[i]);
                                 }
                                 return out;
                               }};
    t["train.seed"] = {[](ExperimentConfig& c, auto k, auto v) { c.train.seed = to_integer<std::uint64_t>(k, v); },
                       [](const ExperimentConfig& c) { return fmt_int(c.train.seed); }};
    t["train.group_weight"] = {
        [](ExperimentConfig& c, auto, auto v) { c.train.group_weight = parse_group_weight(v); },
        [](const ExperimentConfig& c) { return std::string(to_string(c.train.group_weight)); }};
    t["train.sigma"] = {[](ExperimentConfig& c, auto, auto v) { c.train.sigma = ad::parse_nonlinearity(v); },
                        [](const ExperimentConfig& c) { return std::string(ad::to_string(c.train.sigma)); }};
    t["train.adam.beta1"] = {[](ExperimentConfig& c, auto k, auto v) { c.train.adam.beta1 = to_double(k, v); },
                             [](const ExperimentConfig& c) { return fmt(c.train.adam.beta1); }};
    t["train.adam.beta2"] = {[](ExperimentConfig& c, auto k, auto v) { c.train.adam.beta2 = to_double(k, v); },
                             [](const ExperimentConfig& c) { return fmt(c.train.adam.beta2); }};
    t["train.adam.eps"] = {[](ExperimentConfig& c, auto k, auto v) { c.train.adam.epsilon = to_double(k, v); },
                           [](const ExperimentConfig& c) { return fmt(c.train.adam.epsilon); }};
    return t;
  }();
  return table;
}

using Pairs = std::vector<std::pair<std::string, std::string>>;

void flatten(const nlohmann::json& node, const std::string& prefix, Pairs& out) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    }
    return;
  }
  auto scalar = [&prefix](const nlohmann::json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return fmt(v.get<double>());
    throw ConfigurationError(prefix + ": unsupported JSON value " + v.dump());
  };
  if (node.is_array()) {
    std::string joined;
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (i) joined += ",";
      joined += scalar(node[i]);
    }
    out.emplace_back(prefix, joined);
    return;
  }
  out.emplace_back(prefix, scalar(node));
}

Pairs read_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigurationError(std::string("malformed JSON config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigurationError("JSON config must be an object");
  Pairs out;
  flatten(doc, "", out);
  return out;
}

Pairs read_key_values(std::string_view text) {
  Pairs out;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const auto raw = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigurationError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigurationError("line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

}  // namespace

ShiftSpec ExperimentConfig::shift() const {
  ShiftSpec s = data;
  s.seed = data_seed ? *data_seed : train.seed;
  return s;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = entries().find(key);
  if (it == entries().end()) throw ConfigurationError("unknown config key '" + std::string(key) + "'");
  it->second.set(cfg, key, value);
}

ExperimentConfig parse_config(std::string_view text) {
  const auto body = trim(text);
  const Pairs pairs = !body.empty() && body.front() == '{' ? read_json(body) : read_key_values(text);
  ExperimentConfig cfg;
  std::set<std::string, std::less<>> seen;
  bool generator_keys = false;
  for (const auto& [key, value] : pairs) {
    if (!seen.insert(key).second) throw ConfigurationError("duplicate config key '" + key + "'");
    apply_setting(cfg, key, value);
    if (entries().find(key)->second.generator) generator_keys = true;
  }
  if (cfg.uses_files() && generator_keys) {
    throw ConfigurationError("config names both data files and generator settings; choose one data source");
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::map<std::string, std::string> to_settings(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [key, entry] : entries()) {
    if (cfg.uses_files() && entry.generator) continue;
    if (auto v = entry.get(cfg)) out.emplace(key, *v);
  }
  return out;
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [key, value] : to_settings(cfg)) out += key + " = " + value + "\n";
  return out;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.source_csv.empty() != cfg.target_csv.empty()) {
    throw ConfigurationError("data.source_csv and data.target_csv must be given together");
  }
  if (cfg.output_dir.empty()) throw ConfigurationError("output_dir must not be empty");
  if (cfg.model.hidden.empty()) throw ConfigurationError("model.hidden needs at least one layer");
  for (Eigen::Index h : cfg.model.hidden) {
    if (h < 1) throw ConfigurationError("model.hidden widths must be >= 1");
  }
  if (cfg.model.dc_hidden < 1) throw ConfigurationError("model.dc_hidden must be >= 1");
  if (!cfg.train.layer_lambda.empty() && cfg.train.layer_lambda.size() != cfg.model.hidden.size()) {
    throw ConfigurationError("train.layer_lambda needs one entry per hidden layer");
  }
  try {
    validate(cfg.train);
    if (!cfg.uses_files()) validate(cfg.shift());
  } catch (const ValidationError& e) {
    throw ConfigurationError(e.what());
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : to_settings(cfg)) {
    if (key == "output_dir") continue;
    for (char ch : key + "=" + value + "\n") {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace resadapt
