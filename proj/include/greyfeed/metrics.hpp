#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "greyfeed/descriptors.hpp"

namespace greyfeed {

struct PRPoint {
  double threshold;
  double recall;
  double precision;
};

// Points at descending unique thresholds; recall is nondecreasing.
struct PRCurve {
  std::vector<PRPoint> points;
};

PRCurve pr_curve(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& labels);

// Average precision: Σ (Rᵢ − Rᵢ₋₁)·Pᵢ over descending unique thresholds with
// R₀ = 0 and tied scores grouped. Throws when no label is positive.
double prauc(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& labels);

struct MacroPrauc {
  double macro = 0.0;
  Eigen::ArrayXd per_class;   // NaN where excluded
  std::vector<int> excluded;  // classes with no positive labels
};

// scores/labels are flat row-major [N, n_classes]. Classes without positives
// are excluded from the unweighted mean and reported, not imputed.
MacroPrauc macro_prauc(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& labels,
                       Eigen::Index n_classes);

// Fractional confusion matrix: rows are true descriptors, columns the
// predicted descriptor they were confused with. A true descriptor outranked
// by no false positive earns +1 on the diagonal; a false positive exceeding
// k true descriptors spreads 1/k over those k rows in its column. Strict
// inequality throughout: ties create nothing.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(Eigen::Index n_classes = kNumDescriptors);

  void update(const Eigen::ArrayXd& labels, const Eigen::ArrayXd& scores);
  void merge(const ConfusionMatrix& other);

  const Eigen::ArrayXXd& matrix() const { return m_; }
  Eigen::Index classes() const { return m_.rows(); }
  // samples skipped because they carried no true label
  long skipped() const { return skipped_; }

  // Descriptor-code headers for the 17-class task, C<i> otherwise.
  std::string to_csv() const;

 private:
  Eigen::ArrayXXd m_;
  long skipped_ = 0;
};

}  // namespace greyfeed
