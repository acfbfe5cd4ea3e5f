#include "greyfeed/losses.hpp"

#include <cmath>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

constexpr double kBceClamp = 1e-7;

void check_pair(const Tensor& scores, const Eigen::ArrayXd& labels, const char* op) {
  if (scores.ndim() != 2)
    throw DimensionError(std::string(op) + ": want scores [B,C], got " +
                         shape_str(scores.shape()));
  if (labels.size() != scores.numel())
    throw DimensionError(std::string(op) + ": labels hold " + std::to_string(labels.size()) +
                         " entries for " + std::to_string(scores.numel()) + " scores");
}

}  // namespace

ClassWeights weights_from_counts(const std::vector<long>& counts) {
  if (counts.empty()) throw DataError("weights_from_counts: no classes");
  ClassWeights w(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 1)
      throw DataError("weights_from_counts: class " + std::to_string(c) +
                      " has no training examples");
    w(static_cast<Eigen::Index>(c)) = 1.0 / static_cast<double>(counts[c]);
  }
  return w / w.mean();
}

Tensor weighted_bce(const Tensor& scores, const Eigen::ArrayXd& labels,
                    const ClassWeights& weights) {
  check_pair(scores, labels, "weighted_bce");
  const Eigen::Index B = scores.dim(0), C = scores.dim(1);
  if (weights.size() != C)
    throw DimensionError("weighted_bce: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(C) + " classes");
  double total = 0.0;
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index c = 0; c < C; ++c) {
      const double y = labels(b * C + c);
      const double p = std::clamp(scores.data()(b * C + c), kBceClamp, 1.0 - kBceClamp);
      total -= weights(c) * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
  Eigen::ArrayXd out(1);
  out(0) = total / static_cast<double>(B * C);

  Eigen::ArrayXd y = labels;
  Eigen::ArrayXd w = weights;
  return make_op({1}, std::move(out), {scores}, [B, C, y, w](TensorNode& n) {
    auto& S = *n.inputs[0];
    if (!S.requires_grad) return;
    S.ensure_grad();
    const double g = n.grad(0) / static_cast<double>(B * C);
    for (Eigen::Index b = 0; b < B; ++b)
      for (Eigen::Index c = 0; c < C; ++c) {
        const Eigen::Index i = b * C + c;
        const double p = S.data(i);
        if (p <= kBceClamp || p >= 1.0 - kBceClamp) continue;  // clamped flat
        S.grad(i) -= g * w(c) * (y(i) / p - (1.0 - y(i)) / (1.0 - p));
      }
  });
}

Tensor soft_f1_loss(const Tensor& scores, const Eigen::ArrayXd& labels, double eps) {
  check_pair(scores, labels, "soft_f1_loss");
  if (eps <= 0.0) throw ParamError("soft_f1_loss: eps must be positive");
  const Eigen::Index B = scores.dim(0), C = scores.dim(1);

  Eigen::ArrayXd tp = Eigen::ArrayXd::Zero(C), denom(C);
  Eigen::ArrayXd label_mass = Eigen::ArrayXd::Zero(C), score_mass = Eigen::ArrayXd::Zero(C);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index c = 0; c < C; ++c) {
      const double y = labels(b * C + c);
      const double p = scores.data()(b * C + c);
      tp(c) += y * p;
      label_mass(c) += y;
      score_mass(c) += p;
    }
  // With FP = Σŷ−TP and FN = Σy−TP, the denominator 2TP+FP+FN collapses to
  // Σŷ + Σy, which also makes its derivative w.r.t. every score exactly 1.
  std::vector<char> included(static_cast<std::size_t>(C));
  Eigen::Index n_included = 0;
  double f1_sum = 0.0;
  for (Eigen::Index c = 0; c < C; ++c) {
    denom(c) = score_mass(c) + label_mass(c) + eps;
    const bool keep = label_mass(c) > 0.0 || score_mass(c) > 0.0;
    included[static_cast<std::size_t>(c)] = keep;
    if (keep) {
      ++n_included;
      f1_sum += 2.0 * tp(c) / denom(c);
    }
  }
  Eigen::ArrayXd out(1);
  out(0) = n_included == 0 ? 0.0 : 1.0 - f1_sum / static_cast<double>(n_included);

  Eigen::ArrayXd y = labels;
  return make_op({1}, std::move(out), {scores},
                 [B, C, y, tp, denom, included, n_included](TensorNode& n) {
                   auto& S = *n.inputs[0];
                   if (!S.requires_grad || n_included == 0) return;
                   S.ensure_grad();
                   const double g = n.grad(0) / static_cast<double>(n_included);
                   for (Eigen::Index c = 0; c < C; ++c) {
                     if (!included[static_cast<std::size_t>(c)]) continue;
                     const double d = denom(c);
                     for (Eigen::Index b = 0; b < B; ++b) {
                       const Eigen::Index i = b * C + c;
                       // d(2TP/D)/dŷ = (2yD − 2TP)/D²  (dD/dŷ = 1)
                       S.grad(i) -= g * (2.0 * y(i) * d - 2.0 * tp(c)) / (d * d);
                     }
                   }
                 });
}

}  // namespace greyfeed
