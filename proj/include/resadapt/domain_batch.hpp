#ifndef RESADAPT_DOMAIN_BATCH_HPP_
#define RESADAPT_DOMAIN_BATCH_HPP_

#include <vector>

#include "resadapt/types.hpp"

namespace resadapt {

inline constexpr int kUnlabeled = -1;
inline constexpr int kSourceDomain = 0;
inline constexpr int kTargetDomain = 1;

/// Rows of samples with optional class labels (kUnlabeled when absent) and a
/// domain label per row.
struct DomainBatch {
  DenseMatrix inputs;        // rows x features
  std::vector<int> labels;   // class index or kUnlabeled
  std::vector<int> domains;  // kSourceDomain / kTargetDomain

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index features() const { return inputs.cols(); }
  Eigen::Index labeled_count() const;
  /// Largest label + 1, 0 when nothing is labeled.
  int num_classes() const;
};

/// Throws ValidationError unless row counts agree and domain labels are 0/1.
void validate(const DomainBatch& batch);

DomainBatch select(const DomainBatch& batch, const std::vector<Eigen::Index>& rows);
DomainBatch concat(const DomainBatch& a, const DomainBatch& b);
/// Rows whose domain label equals `domain`.
DomainBatch filter_domain(const DomainBatch& batch, int domain);
/// Copy with every class label removed.
DomainBatch strip_labels(const DomainBatch& batch);

/// One-hot rows for the given labels; every label must be in [0, num_classes).
DenseMatrix one_hot(const std::vector<int>& labels, int num_classes);

}  // namespace resadapt

#endif  // RESADAPT_DOMAIN_BATCH_HPP_
