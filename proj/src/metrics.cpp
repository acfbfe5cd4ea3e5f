#include "greyfeed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "greyfeed/csv.hpp"
#include "greyfeed/error.hpp"

namespace greyfeed {

PRCurve pr_curve(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& labels) {
  if (scores.size() != labels.size())
    throw DimensionError("pr_curve: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  const auto n = scores.size();
  long positives = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (labels(i) != 0.0) ++positives;
  if (positives == 0) throw MetricError("pr_curve: no positive labels, metric undefined");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });

  PRCurve curve;
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double thr = scores(order[i]);
    // consume the whole tied group before emitting a point
    while (i < order.size() && scores(order[i]) == thr) {
      if (labels(order[i]) != 0.0)
        ++tp;
      else
        ++fp;
      ++i;
    }
    curve.points.push_back({thr, static_cast<double>(tp) / static_cast<double>(positives),
                            static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

double prauc(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& labels) {
  const PRCurve curve = pr_curve(scores, labels);
  double ap = 0.0, prev_recall = 0.0;
  for (const PRPoint& p : curve.points) {
    ap += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return ap;
}

MacroPrauc macro_prauc(const Eigen::ArrayXd& scores, const Eigen::ArrayXd& labels,
                       Eigen::Index n_classes) {
  if (n_classes < 1) throw ParamError("macro_prauc: need at least one class");
  if (scores.size() != labels.size() || scores.size() % n_classes != 0)
    throw DimensionError("macro_prauc: flat [N," + std::to_string(n_classes) +
                         "] arrays expected, got " + std::to_string(scores.size()) + " and " +
                         std::to_string(labels.size()));
  const Eigen::Index n = scores.size() / n_classes;

  MacroPrauc out;
  out.per_class = Eigen::ArrayXd::Constant(n_classes, std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  Eigen::Index included = 0;
  Eigen::ArrayXd s(n), y(n);
  for (Eigen::Index c = 0; c < n_classes; ++c) {
    bool any = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      s(i) = scores(i * n_classes + c);
      y(i) = labels(i * n_classes + c);
      any = any || y(i) != 0.0;
    }
    if (!any) {
      out.excluded.push_back(static_cast<int>(c));
      continue;
    }
    out.per_class(c) = prauc(s, y);
    total += out.per_class(c);
    ++included;
  }
  if (included == 0) throw MetricError("macro_prauc: no class has positive labels");
  out.macro = total / static_cast<double>(included);
  return out;
}

ConfusionMatrix::ConfusionMatrix(Eigen::Index n_classes)
    : m_(Eigen::ArrayXXd::Zero(n_classes, n_classes)) {
  if (n_classes < 1) throw ParamError("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::update(const Eigen::ArrayXd& labels, const Eigen::ArrayXd& scores) {
  const Eigen::Index n = m_.rows();
  if (labels.size() != n || scores.size() != n)
    throw DimensionError("ConfusionMatrix::update: want " + std::to_string(n) +
                         " labels and scores, got " + std::to_string(labels.size()) + "/" +
                         std::to_string(scores.size()));
  std::vector<Eigen::Index> trues, falses;
  for (Eigen::Index c = 0; c < n; ++c)
    (labels(c) != 0.0 ? trues : falses).push_back(c);
  if (trues.empty()) {
    ++skipped_;
    return;
  }

  double max_false = -std::numeric_limits<double>::infinity();
  for (Eigen::Index f : falses) max_false = std::max(max_false, scores(f));
  for (Eigen::Index t : trues)
    if (scores(t) > max_false) m_(t, t) += 1.0;

  for (Eigen::Index f : falses) {
    std::vector<Eigen::Index> exceeded;
    for (Eigen::Index t : trues)
      if (scores(f) > scores(t)) exceeded.push_back(t);
    if (exceeded.empty()) continue;
    const double share = 1.0 / static_cast<double>(exceeded.size());
    for (Eigen::Index t : exceeded) m_(t, f) += share;
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.m_.rows() != m_.rows())
    throw DimensionError("ConfusionMatrix::merge: class count mismatch");
  m_ += other.m_;
  skipped_ += other.skipped_;
}

std::string ConfusionMatrix::to_csv() const {
  const Eigen::Index n = m_.rows();
  auto header = [&](Eigen::Index c) {
    return n == kNumDescriptors ? std::string(descriptor_code(static_cast<int>(c)))
                                : "C" + std::to_string(c);
  };
  std::string csv = "true";
  for (Eigen::Index c = 0; c < n; ++c) csv += "," + header(c);
  csv += "\n";
  for (Eigen::Index r = 0; r < n; ++r) {
    csv += header(r);
    for (Eigen::Index c = 0; c < n; ++c) csv += "," + format_double(m_(r, c));
    csv += "\n";
  }
  return csv;
}

}  // namespace greyfeed
