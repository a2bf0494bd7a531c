#include "resadapt/domain_batch.hpp"

#include <algorithm>
#include <string>

#include "resadapt/errors.hpp"

namespace resadapt {

Eigen::Index DomainBatch::labeled_count() const {
  return std::count_if(labels.begin(), labels.end(), [](int y) { return y != kUnlabeled; });
}

int DomainBatch::num_classes() const {
  int top = kUnlabeled;
  for (int y : labels) top = std::max(top, y);
  return top + 1;
}

void validate(const DomainBatch& batch) {
  const auto n = static_cast<std::size_t>(batch.size());
  if (batch.labels.size() != n || batch.domains.size() != n) {
    throw ValidationError("batch has " + std::to_string(n) + " rows but " +
                          std::to_string(batch.labels.size()) + " labels and " +
                          std::to_string(batch.domains.size()) + " domain labels");
  }
  for (int d : batch.domains) {
    if (d != kSourceDomain && d != kTargetDomain) throw ValidationError("domain label must be 0 or 1");
  }
  for (int y : batch.labels) {
    if (y < kUnlabeled) throw ValidationError("negative class label");
  }
  if (!batch.inputs.allFinite()) throw ValidationError("batch inputs contain non-finite values");
}

DomainBatch select(const DomainBatch& batch, const std::vector<Eigen::Index>& rows) {
  DomainBatch out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), batch.features());
  out.labels.reserve(rows.size());
  out.domains.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = batch.inputs.row(rows[i]);
    out.labels.push_back(batch.labels[static_cast<std::size_t>(rows[i])]);
    out.domains.push_back(batch.domains[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

DomainBatch concat(const DomainBatch& a, const DomainBatch& b) {
  if (a.size() > 0 && b.size() > 0 && a.features() != b.features()) {
    throw DimensionError("cannot concatenate batches with different feature counts");
  }
  DomainBatch out;
  out.inputs.resize(a.size() + b.size(), a.size() > 0 ? a.features() : b.features());
  out.inputs << a.inputs, b.inputs;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.domains = a.domains;
  out.domains.insert(out.domains.end(), b.domains.begin(), b.domains.end());
  return out;
}

DomainBatch filter_domain(const DomainBatch& batch, int domain) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < batch.domains.size(); ++i) {
    if (batch.domains[i] == domain) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return select(batch, rows);
}

DomainBatch strip_labels(const DomainBatch& batch) {
  DomainBatch out = batch;
  std::fill(out.labels.begin(), out.labels.end(), kUnlabeled);
  return out;
}

DenseMatrix one_hot(const std::vector<int>& labels, int num_classes) {
  DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
    out(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace resadapt
