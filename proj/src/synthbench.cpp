#include "resadapt/synthbench.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "resadapt/errors.hpp"

namespace resadapt {

Generator parse_generator(std::string_view name) {
  if (name == "two-moons") return Generator::kTwoMoons;
  if (name == "gaussian-blobs") return Generator::kGaussianBlobs;
  throw ConfigurationError("unknown generator '" + std::string(name) + "'");
}

std::string_view to_string(Generator g) {
  return g == Generator::kTwoMoons ? "two-moons" : "gaussian-blobs";
}

void validate(const ShiftSpec& spec) {
  if (!(spec.rotation_deg >= 0.0 && spec.rotation_deg < 180.0)) {
    throw ValidationError("rotation angle must lie in [0, 180)");
  }
  if (spec.n_source < 10 || spec.n_target < 10) throw ValidationError("sample counts must be >= 10");
  if (!(spec.noise >= 0.0)) throw ValidationError("noise must be >= 0");
  if (!spec.affine.allFinite() || !spec.translation.allFinite()) throw ValidationError("non-finite shift");
}

DomainBatch sample_distribution(Generator g, int n, double noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, 1.0);
  DomainBatch b;
  b.inputs.resize(n, 2);
  b.labels.resize(static_cast<std::size_t>(n));
  b.domains.assign(static_cast<std::size_t>(n), kSourceDomain);
  const int half = n / 2;
  for (int i = 0; i < n; ++i) {
    const int label = i < half ? 0 : 1;
    double x = 0.0;
    double y = 0.0;
    if (g == Generator::kTwoMoons) {
      const double a = angle(rng);
      // Moons centered on the origin so rotations act about the data center.
      x = label == 0 ? std::cos(a) - 0.5 : 0.5 - std::cos(a);
      y = label == 0 ? std::sin(a) - 0.25 : 0.25 - std::sin(a);
    } else {
      x = label == 0 ? -1.0 : 1.0;
    }
    b.inputs(i, 0) = x + noise * jitter(rng);
    b.inputs(i, 1) = y + noise * jitter(rng);
    b.labels[static_cast<std::size_t>(i)] = label;
  }
  return b;
}

std::pair<DomainBatch, DomainBatch> generate(const ShiftSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  DomainBatch source = sample_distribution(spec.generator, spec.n_source, spec.noise, rng);
  DomainBatch target = sample_distribution(spec.generator, spec.n_target, spec.noise, rng);
  const double rad = spec.rotation_deg * std::numbers::pi / 180.0;
  Eigen::Matrix2d rot;
  rot << std::cos(rad), -std::sin(rad), std::sin(rad), std::cos(rad);
  const Eigen::Matrix2d map = spec.affine * rot;
  target.inputs = (target.inputs * map.transpose()).rowwise() + spec.translation.transpose();
  std::fill(target.domains.begin(), target.domains.end(), kTargetDomain);
  return {std::move(source), std::move(target)};
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view cell, T& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && !cell.empty();
}

}  // namespace

DomainBatch parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError("missing header", 1);

  const auto header = split(trim(lines[0]));
  if (header.size() < 3 || trim(header[header.size() - 2]) != "label" || trim(header.back()) != "domain") {
    throw ParseError("header must be f0,...,fk,label,domain", 1);
  }
  const std::size_t n_features = header.size() - 2;
  for (std::size_t k = 0; k < n_features; ++k) {
    if (trim(header[k]) != "f" + std::to_string(k)) {
      throw ParseError("expected column f" + std::to_string(k) + ", got '" + std::string(trim(header[k])) + "'", 1);
    }
  }

  std::vector<double> values;
  DomainBatch b;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()),
                       ln + 1);
    }
    for (std::size_t k = 0; k < n_features; ++k) {
      double v = 0.0;
      if (!parse_number(cells[k], v) || !std::isfinite(v)) {
        throw ParseError("bad feature value '" + std::string(cells[k]) + "'", ln + 1);
      }
      values.push_back(v);
    }
    int label = kUnlabeled;
    if (!trim(cells[n_features]).empty() && (!parse_number(cells[n_features], label) || label < 0)) {
      throw ParseError("bad label '" + std::string(cells[n_features]) + "'", ln + 1);
    }
    int domain = 0;
    if (!parse_number(cells.back(), domain) || (domain != kSourceDomain && domain != kTargetDomain)) {
      throw ParseError("domain must be 0 or 1", ln + 1);
    }
    b.labels.push_back(label);
    b.domains.push_back(domain);
  }
  const auto rows = static_cast<Eigen::Index>(b.labels.size());
  b.inputs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), rows, static_cast<Eigen::Index>(n_features));
  return b;
}

DomainBatch load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path, 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

std::string to_csv(const DomainBatch& batch) {
  validate(batch);
  std::ostringstream out;
  out.precision(17);
  for (Eigen::Index k = 0; k < batch.features(); ++k) out << 'f' << k << ',';
  out << "label,domain\n";
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    for (Eigen::Index k = 0; k < batch.features(); ++k) out << batch.inputs(i, k) << ',';
    const int y = batch.labels[static_cast<std::size_t>(i)];
    if (y != kUnlabeled) out << y;
    out << ',' << batch.domains[static_cast<std::size_t>(i)] << '\n';
  }
  return out.str();
}

Method parse_method(std::string_view name) {
  if (name == "ours") return Method::kOurs;
  if (name == "source-only") return Method::kSourceOnly;
  if (name == "shared-adversarial") return Method::kSharedAdversarial;
  if (name == "fixed-rank") return Method::kFixedRank;
  throw ConfigurationError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kOurs: return "ours";
    case Method::kSourceOnly: return "source-only";
    case Method::kSharedAdversarial: return "shared-adversarial";
    case Method::kFixedRank: return "fixed-rank";
  }
  throw ConfigurationError("invalid method value");
}

namespace {

EvalResult target_accuracy(const TwoStreamModel& model, const DomainBatch& target, Stream stream) {
  if (target.labeled_count() > 0) return evaluate(model, target, stream);
  EvalResult none;
  none.accuracy = std::numeric_limits<double>::quiet_NaN();
  return none;
}

}  // namespace

MethodResult run_method(Method method, const DomainBatch& source, const DomainBatch& target,
                        const TrainConfig& cfg, ModelShape shape) {
  validate(cfg);
  validate(source);
  validate(target);
  shape.input_dim = source.features();
  shape.num_classes = std::max(2, std::max(source.num_classes(), target.num_classes()));

  std::mt19937_64 rng(cfg.seed);
  MethodResult out;
  out.model = make_model(shape, rng);
  const double pretrain_loss = pretrain_source(out.model, source, cfg);

  TrainConfig run_cfg = cfg;
  switch (method) {
    case Method::kSourceOnly: {
      MetricsRow row;
      row.step = cfg.pretrain_steps;
      row.l_class = pretrain_loss;
      row.src_acc = evaluate(out.model, source, Stream::kSource).accuracy;
      row.tgt_acc = target_accuracy(out.model, target, Stream::kSource).accuracy;
      out.training.metrics.push_back(row);
      for (std::size_t i = 0; i < out.model.depth(); ++i) {
        out.training.ranks.layers.push_back({out.model.layer_names[i], {0, 0}, {0, 0}});
      }
      out.training.ranks.history.push_back({0, 0});
      out.source_eval = evaluate(out.model, source, Stream::kSource);
      out.target_eval = target_accuracy(out.model, target, Stream::kTarget);
      return out;
    }
    case Method::kSharedAdversarial: run_cfg.initial_rank = 0; break;
    case Method::kFixedRank: run_cfg.lambda_r = 0.0; break;
    case Method::kOurs: break;
  }
  init_transforms(out.model, run_cfg);
  out.training = run_training(out.model, source, target, run_cfg);
  out.source_eval = evaluate(out.model, source, Stream::kSource);
  out.target_eval = target_accuracy(out.model, target, Stream::kTarget);
  return out;
}

}  // namespace resadapt
