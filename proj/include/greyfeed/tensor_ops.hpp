#pragma once

#include "greyfeed/rng.hpp"
#include "greyfeed/tensor.hpp"

namespace greyfeed {

// Elementwise (shapes must match exactly; no broadcasting).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// 2-d linear algebra; matrices are row-major like everything else here.
Tensor matmul(const Tensor& a, const Tensor& b);
// y = x·wᵀ + bias for x:[B,I], w:[O,I], bias:[O].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Cross-correlation with square kernels and zero padding.
// x:[B,C,H,W], w:[O,C,k,k], bias:[O] → [B,O,H',W'] with
// H' = floor((H + 2·pad − k)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

enum class BnMode { train, eval };

struct BnStats {
  Eigen::ArrayXd mean;
  Eigen::ArrayXd var;
  explicit BnStats(Eigen::Index channels = 0)
      : mean(Eigen::ArrayXd::Zero(channels)), var(Eigen::ArrayXd::Ones(channels)) {}
};

// Train mode normalizes by batch statistics (biased variance) and folds them
// into `stats` with the given momentum (unbiased variance when count > 1);
// eval mode normalizes by `stats` untouched.
Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats& stats,
                   BnMode mode, double momentum, double eps);
Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats& stats,
                   BnMode mode, double momentum, double eps);

// Train mode zeroes with probability p and scales survivors by 1/(1−p);
// eval mode is the identity.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// [B,C,H,W] → [B,C,1,1] by spatial mean.
Tensor adaptive_avg_pool2d(const Tensor& x);

// Stacks along the channel axis; all other extents must agree.
Tensor concat_channels(const std::vector<Tensor>& parts);

// [B, d1, d2, ...] → [B, d1·d2·...]; same storage order.
Tensor flatten(const Tensor& x);

}  // namespace greyfeed
