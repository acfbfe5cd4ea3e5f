#pragma once

#include <vector>

#include "greyfeed/tensor.hpp"

namespace greyfeed {

enum class LossKind { bce, soft_f1 };

// Per-class weights, mean 1 under the default inverse-frequency scheme.
using ClassWeights = Eigen::ArrayXd;

// w_c ∝ 1/counts_c, rescaled to mean 1. Zero counts are rejected: a class
// that never occurs has no defensible weight.
ClassWeights weights_from_counts(const std::vector<long>& counts);

// Mean over batch×classes of −w_c·[y·log(ŷ) + (1−y)·log(1−ŷ)], scores
// clamped to [1e-7, 1−1e-7]. labels is the flat row-major [B,C] target in
// {0,1}; only `scores` takes gradients.
Tensor weighted_bce(const Tensor& scores, const Eigen::ArrayXd& labels,
                    const ClassWeights& weights);

// 1 − macro-averaged soft F1 with per-class probabilistic counts over the
// batch: TP=Σyŷ, FP=Σ(1−y)ŷ, FN=Σy(1−ŷ), F1=2TP/(2TP+FP+FN+eps).
// Classes with neither positive labels nor positive score mass are excluded
// from the macro mean; with every class excluded the loss is 0.
Tensor soft_f1_loss(const Tensor& scores, const Eigen::ArrayXd& labels, double eps = 1e-9);

}  // namespace greyfeed
