#include "greyfeed/tensor_ops.hpp"

#include <algorithm>
#include <cmath>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a.shape(), b.shape()))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

TensorNode& in(TensorNode& node, std::size_t i) { return *node.inputs[i]; }

// col is (C·k·k) × (Ho·Wo), row-major, gathered with zero padding.
void im2col(const double* x, Eigen::Index C, Eigen::Index H, Eigen::Index W, Eigen::Index k,
            Eigen::Index stride, Eigen::Index pad, Eigen::Index Ho, Eigen::Index Wo,
            double* col) {
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index ki = 0; ki < k; ++ki)
      for (Eigen::Index kj = 0; kj < k; ++kj) {
        double* row = col + ((c * k + ki) * k + kj) * (Ho * Wo);
        for (Eigen::Index ho = 0; ho < Ho; ++ho) {
          Eigen::Index h = ho * stride - pad + ki;
          double* dst = row + ho * Wo;
          if (h < 0 || h >= H) {
            std::fill(dst, dst + Wo, 0.0);
            continue;
          }
          const double* src = x + (c * H + h) * W;
          for (Eigen::Index wo = 0; wo < Wo; ++wo) {
            Eigen::Index wc = wo * stride - pad + kj;
            dst[wo] = (wc >= 0 && wc < W) ? src[wc] : 0.0;
          }
        }
      }
}

void col2im_acc(const double* col, Eigen::Index C, Eigen::Index H, Eigen::Index W, Eigen::Index k,
                Eigen::Index stride, Eigen::Index pad, Eigen::Index Ho, Eigen::Index Wo,
                double* dx) {
  for (Eigen::Index c = 0; c < C; ++c)
    for (Eigen::Index ki = 0; ki < k; ++ki)
      for (Eigen::Index kj = 0; kj < k; ++kj) {
        const double* row = col + ((c * k + ki) * k + kj) * (Ho * Wo);
        for (Eigen::Index ho = 0; ho < Ho; ++ho) {
          Eigen::Index h = ho * stride - pad + ki;
          if (h < 0 || h >= H) continue;
          double* dst = dx + (c * H + h) * W;
          const double* src = row + ho * Wo;
          for (Eigen::Index wo = 0; wo < Wo; ++wo) {
            Eigen::Index wc = wo * stride - pad + kj;
            if (wc >= 0 && wc < W) dst[wc] += src[wo];
          }
        }
      }
}

// Shared normalization core over layout (batch, channel, position) with the
// position block contiguous; 1-d batchnorm is the position==1 case.
Tensor batchnorm_core(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats& stats,
                      BnMode mode, double momentum, double eps, Eigen::Index B, Eigen::Index C,
                      Eigen::Index HW, const char* op) {
  if (eps <= 0.0) throw ParamError(std::string(op) + ": eps must be positive");
  if (gamma.numel() != C || beta.numel() != C)
    throw DimensionError(std::string(op) + ": affine parameters sized " +
                         std::to_string(gamma.numel()) + "/" + std::to_string(beta.numel()) +
                         " for " + std::to_string(C) + " channels");
  if (stats.mean.size() != C || stats.var.size() != C)
    throw DimensionError(std::string(op) + ": running stats track " +
                         std::to_string(stats.mean.size()) + " channels, input has " +
                         std::to_string(C));
  const Eigen::Index N = B * HW;
  if (N < 1) throw DimensionError(std::string(op) + ": empty batch");

  Eigen::ArrayXd mu(C), inv_std(C);
  if (mode == BnMode::train) {
    Eigen::ArrayXd var(C);
    for (Eigen::Index c = 0; c < C; ++c) {
      double s = 0.0;
      for (Eigen::Index b = 0; b < B; ++b)
        s += Eigen::Map<const Eigen::ArrayXd>(x.data().data() + (b * C + c) * HW, HW).sum();
      mu(c) = s / static_cast<double>(N);
      double sq = 0.0;
      for (Eigen::Index b = 0; b < B; ++b)
        sq += (Eigen::Map<const Eigen::ArrayXd>(x.data().data() + (b * C + c) * HW, HW) - mu(c))
                  .square()
                  .sum();
      var(c) = sq / static_cast<double>(N);
    }
    inv_std = (var + eps).sqrt().inverse();
    const double unbias = N > 1 ? static_cast<double>(N) / static_cast<double>(N - 1) : 1.0;
    stats.mean = (1.0 - momentum) * stats.mean + momentum * mu;
    stats.var = (1.0 - momentum) * stats.var + momentum * (var * unbias);
  } else {
    mu = stats.mean;
    inv_std = (stats.var + eps).sqrt().inverse();
  }

  Eigen::ArrayXd out(x.numel());
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index c = 0; c < C; ++c) {
      auto xs = Eigen::Map<const Eigen::ArrayXd>(x.data().data() + (b * C + c) * HW, HW);
      Eigen::Map<Eigen::ArrayXd>(out.data() + (b * C + c) * HW, HW) =
          (xs - mu(c)) * inv_std(c) * gamma.data()(c) + beta.data()(c);
    }

  const bool train = mode == BnMode::train;
  return make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [B, C, HW, N, train, mu, inv_std](TensorNode& n) {
        auto& X = in(n, 0);
        auto& G = in(n, 1);
        auto& Bt = in(n, 2);
        for (Eigen::Index c = 0; c < C; ++c) {
          const double g = G.data(c);
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (Eigen::Index b = 0; b < B; ++b) {
            auto dy = Eigen::Map<const Eigen::ArrayXd>(n.grad.data() + (b * C + c) * HW, HW);
            auto xs = Eigen::Map<const Eigen::ArrayXd>(X.data.data() + (b * C + c) * HW, HW);
            sum_dy += dy.sum();
            sum_dy_xhat += (dy * (xs - mu(c)) * inv_std(c)).sum();
          }
          if (G.requires_grad) {
            G.ensure_grad();
            G.grad(c) += sum_dy_xhat;
          }
          if (Bt.requires_grad) {
            Bt.ensure_grad();
            Bt.grad(c) += sum_dy;
          }
          if (X.requires_grad) {
            X.ensure_grad();
            for (Eigen::Index b = 0; b < B; ++b) {
              auto dy = Eigen::Map<const Eigen::ArrayXd>(n.grad.data() + (b * C + c) * HW, HW);
              auto xs = Eigen::Map<const Eigen::ArrayXd>(X.data.data() + (b * C + c) * HW, HW);
              auto dx = Eigen::Map<Eigen::ArrayXd>(X.grad.data() + (b * C + c) * HW, HW);
              if (train) {
                dx += (g * inv_std(c) / static_cast<double>(N)) *
                      (static_cast<double>(N) * dy - sum_dy -
                       (xs - mu(c)) * inv_std(c) * sum_dy_xhat);
              } else {
                dx += dy * g * inv_std(c);
              }
            }
          }
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  return make_op(a.shape(), a.data() + b.data(), {a, b}, [](TensorNode& n) {
    for (std::size_t i = 0; i < 2; ++i)
      if (in(n, i).requires_grad) in(n, i).accumulate(n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  return make_op(a.shape(), a.data() - b.data(), {a, b}, [](TensorNode& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    if (in(n, 1).requires_grad) {
      in(n, 1).ensure_grad();
      in(n, 1).grad -= n.grad;
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  return make_op(a.shape(), a.data() * b.data(), {a, b}, [](TensorNode& n) {
    auto& A = in(n, 0);
    auto& B = in(n, 1);
    if (A.requires_grad) {
      A.ensure_grad();
      A.grad += n.grad * B.data;
    }
    if (B.requires_grad) {
      B.ensure_grad();
      B.grad += n.grad * A.data;
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_op(a.shape(), a.data() * s, {a}, [s](TensorNode& n) {
    auto& A = in(n, 0);
    if (!A.requires_grad) return;
    A.ensure_grad();
    A.grad += n.grad * s;
  });
}

Tensor relu(const Tensor& x) {
  return make_op(x.shape(), x.data().max(0.0), {x}, [](TensorNode& n) {
    auto& X = in(n, 0);
    if (!X.requires_grad) return;
    X.ensure_grad();
    X.grad += n.grad * (X.data > 0.0).cast<double>();
  });
}

Tensor sigmoid(const Tensor& x) {
  Eigen::ArrayXd s = 1.0 / (1.0 + (-x.data()).exp());
  return make_op(x.shape(), std::move(s), {x}, [](TensorNode& n) {
    auto& X = in(n, 0);
    if (!X.requires_grad) return;
    X.ensure_grad();
    X.grad += n.grad * n.data * (1.0 - n.data);
  });
}

Tensor sum(const Tensor& x) {
  Eigen::ArrayXd d(1);
  d(0) = x.data().sum();
  return make_op({1}, std::move(d), {x}, [](TensorNode& n) {
    auto& X = in(n, 0);
    if (!X.requires_grad) return;
    X.ensure_grad();
    X.grad += n.grad(0);
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() < 1) throw DimensionError("mean of an empty tensor");
  Eigen::ArrayXd d(1);
  d(0) = x.data().mean();
  return make_op({1}, std::move(d), {x}, [](TensorNode& n) {
    auto& X = in(n, 0);
    if (!X.requires_grad) return;
    X.ensure_grad();
    X.grad += n.grad(0) / static_cast<double>(X.data.size());
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const Eigen::Index M = a.dim(0), K = a.dim(1), N = b.dim(1);
  Eigen::ArrayXd out(M * N);
  MapRow(out.data(), M, N).noalias() =
      MapRowC(a.data().data(), M, K) * MapRowC(b.data().data(), K, N);
  return make_op({M, N}, std::move(out), {a, b}, [M, K, N](TensorNode& n) {
    auto& A = in(n, 0);
    auto& B = in(n, 1);
    MapRowC G(n.grad.data(), M, N);
    if (A.requires_grad) {
      A.ensure_grad();
      MapRow(A.grad.data(), M, K).noalias() += G * MapRowC(B.data.data(), K, N).transpose();
    }
    if (B.requires_grad) {
      B.ensure_grad();
      MapRow(B.grad.data(), K, N).noalias() += MapRowC(A.data.data(), M, K).transpose() * G;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.ndim() != 2 || w.ndim() != 2 || bias.ndim() != 1 || x.dim(1) != w.dim(1) ||
      w.dim(0) != bias.dim(0))
    throw DimensionError("linear: incompatible shapes x=" + shape_str(x.shape()) +
                         " w=" + shape_str(w.shape()) + " bias=" + shape_str(bias.shape()));
  const Eigen::Index B = x.dim(0), I = x.dim(1), O = w.dim(0);
  Eigen::ArrayXd out(B * O);
  MapRow Y(out.data(), B, O);
  Y.noalias() = MapRowC(x.data().data(), B, I) * MapRowC(w.data().data(), O, I).transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), O);
  return make_op({B, O}, std::move(out), {x, w, bias}, [B, I, O](TensorNode& n) {
    auto& X = in(n, 0);
    auto& W = in(n, 1);
    auto& Bs = in(n, 2);
    MapRowC G(n.grad.data(), B, O);
    if (X.requires_grad) {
      X.ensure_grad();
      MapRow(X.grad.data(), B, I).noalias() += G * MapRowC(W.data.data(), O, I);
    }
    if (W.requires_grad) {
      W.ensure_grad();
      MapRow(W.grad.data(), O, I).noalias() += G.transpose() * MapRowC(X.data.data(), B, I);
    }
    if (Bs.requires_grad) {
      Bs.ensure_grad();
      Eigen::Map<Eigen::RowVectorXd>(Bs.grad.data(), O) += G.colwise().sum();
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (stride < 1) throw ParamError("conv2d: stride must be >= 1");
  if (pad < 0) throw ParamError("conv2d: pad must be >= 0");
  if (x.ndim() != 4 || w.ndim() != 4 || bias.ndim() != 1)
    throw DimensionError("conv2d: want x=[B,C,H,W] w=[O,C,k,k] bias=[O], got x=" +
                         shape_str(x.shape()) + " w=" + shape_str(w.shape()) +
                         " bias=" + shape_str(bias.shape()));
  const Eigen::Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const Eigen::Index O = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C || w.dim(3) != k || bias.dim(0) != O)
    throw DimensionError("conv2d: kernel " + shape_str(w.shape()) + " does not fit input " +
                         shape_str(x.shape()));
  if (k > H + 2 * pad || k > W + 2 * pad)
    throw DimensionError("conv2d: kernel " + std::to_string(k) + " exceeds padded input " +
                         std::to_string(H + 2 * pad) + "x" + std::to_string(W + 2 * pad));
  const Eigen::Index Ho = (H + 2 * pad - k) / stride + 1;
  const Eigen::Index Wo = (W + 2 * pad - k) / stride + 1;
  const Eigen::Index CKK = C * k * k, P = Ho * Wo;

  Eigen::ArrayXd out(B * O * P);
  {
    RowMat col(CKK, P);
    MapRowC Wm(w.data().data(), O, CKK);
    Eigen::Map<const Eigen::VectorXd> bv(bias.data().data(), O);
    for (Eigen::Index b = 0; b < B; ++b) {
      im2col(x.data().data() + b * C * H * W, C, H, W, k, stride, pad, Ho, Wo, col.data());
      MapRow Om(out.data() + b * O * P, O, P);
      Om.noalias() = Wm * col;
      Om.colwise() += bv;
    }
  }

  const Eigen::Index es = stride, ep = pad;
  return make_op(
      {B, O, Ho, Wo}, std::move(out), {x, w, bias},
      [B, C, H, W, O, k, es, ep, Ho, Wo, CKK, P](TensorNode& n) {
        auto& X = in(n, 0);
        auto& Kn = in(n, 1);
        auto& Bn = in(n, 2);
        if (X.requires_grad) X.ensure_grad();
        if (Kn.requires_grad) Kn.ensure_grad();
        if (Bn.requires_grad) Bn.ensure_grad();
        RowMat col(CKK, P), dcol(CKK, P);
        MapRowC Wm(Kn.data.data(), O, CKK);
        for (Eigen::Index b = 0; b < B; ++b) {
          MapRowC G(n.grad.data() + b * O * P, O, P);
          if (Kn.requires_grad) {
            im2col(X.data.data() + b * C * H * W, C, H, W, k, es, ep, Ho, Wo, col.data());
            MapRow(Kn.grad.data(), O, CKK).noalias() += G * col.transpose();
          }
          if (Bn.requires_grad)
            Eigen::Map<Eigen::VectorXd>(Bn.grad.data(), O) += G.rowwise().sum();
          if (X.requires_grad) {
            dcol.noalias() = Wm.transpose() * G;
            col2im_acc(dcol.data(), C, H, W, k, es, ep, Ho, Wo, X.grad.data() + b * C * H * W);
          }
        }
      });
}

Tensor batchnorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats& stats,
                   BnMode mode, double momentum, double eps) {
  if (x.ndim() != 4)
    throw DimensionError("batchnorm2d: want [B,C,H,W], got " + shape_str(x.shape()));
  return batchnorm_core(x, gamma, beta, stats, mode, momentum, eps, x.dim(0), x.dim(1),
                        x.dim(2) * x.dim(3), "batchnorm2d");
}

Tensor batchnorm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta, BnStats& stats,
                   BnMode mode, double momentum, double eps) {
  if (x.ndim() != 2)
    throw DimensionError("batchnorm1d: want [B,F], got " + shape_str(x.shape()));
  // Row-major [B,F] is the (batch, channel, position) layout with one
  // position per channel, so the 2-d core applies unchanged.
  return batchnorm_core(x, gamma, beta, stats, mode, momentum, eps, x.dim(0), x.dim(1), 1,
                        "batchnorm1d");
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) throw ParamError("dropout: rate must lie in [0, 1)");
  if (!training || p == 0.0)
    return make_op(x.shape(), x.data(), {x}, [](TensorNode& n) {
      if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
    });
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<Eigen::ArrayXd>(x.numel());
  for (Eigen::Index i = 0; i < x.numel(); ++i)
    (*mask)(i) = rng.uniform() < p ? 0.0 : keep_scale;
  return make_op(x.shape(), x.data() * (*mask), {x}, [mask](TensorNode& n) {
    auto& X = in(n, 0);
    if (!X.requires_grad) return;
    X.ensure_grad();
    X.grad += n.grad * (*mask);
  });
}

Tensor adaptive_avg_pool2d(const Tensor& x) {
  if (x.ndim() != 4)
    throw DimensionError("adaptive_avg_pool2d: want [B,C,H,W], got " + shape_str(x.shape()));
  const Eigen::Index BC = x.dim(0) * x.dim(1), HW = x.dim(2) * x.dim(3);
  if (HW < 1) throw DimensionError("adaptive_avg_pool2d: empty spatial extent");
  Eigen::ArrayXd out(BC);
  for (Eigen::Index i = 0; i < BC; ++i)
    out(i) = Eigen::Map<const Eigen::ArrayXd>(x.data().data() + i * HW, HW).mean();
  return make_op({x.dim(0), x.dim(1), 1, 1}, std::move(out), {x}, [BC, HW](TensorNode& n) {
    auto& X = in(n, 0);
    if (!X.requires_grad) return;
    X.ensure_grad();
    for (Eigen::Index i = 0; i < BC; ++i)
      Eigen::Map<Eigen::ArrayXd>(X.grad.data() + i * HW, HW) +=
          n.grad(i) / static_cast<double>(HW);
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  const Eigen::Index B = parts[0].dim(0), H = parts[0].dim(2), W = parts[0].dim(3);
  std::vector<Eigen::Index> channels;
  Eigen::Index Ctot = 0;
  for (const Tensor& t : parts) {
    if (t.ndim() != 4 || t.dim(0) != B || t.dim(2) != H || t.dim(3) != W)
      throw DimensionError("concat_channels: extent mismatch " + shape_str(t.shape()) + " vs " +
                           shape_str(parts[0].shape()));
    channels.push_back(t.dim(1));
    Ctot += t.dim(1);
  }
  const Eigen::Index HW = H * W;
  Eigen::ArrayXd out(B * Ctot * HW);
  for (Eigen::Index b = 0; b < B; ++b) {
    Eigen::Index off = b * Ctot * HW;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const Eigen::Index len = channels[i] * HW;
      out.segment(off, len) = parts[i].data().segment(b * len, len);
      off += len;
    }
  }
  return make_op({B, Ctot, H, W}, std::move(out), parts,
                 [B, Ctot, HW, channels](TensorNode& n) {
                   for (Eigen::Index b = 0; b < B; ++b) {
                     Eigen::Index off = b * Ctot * HW;
                     for (std::size_t i = 0; i < channels.size(); ++i) {
                       const Eigen::Index len = channels[i] * HW;
                       auto& P = in(n, i);
                       if (P.requires_grad) {
                         P.ensure_grad();
                         P.grad.segment(b * len, len) += n.grad.segment(off, len);
                       }
                       off += len;
                     }
                   }
                 });
}

Tensor flatten(const Tensor& x) {
  if (x.ndim() < 2) throw DimensionError("flatten: want a batch dimension, got " + shape_str(x.shape()));
  const Eigen::Index B = x.dim(0);
  return make_op({B, x.numel() / B}, x.data(), {x}, [](TensorNode& n) {
    if (in(n, 0).requires_grad) in(n, 0).accumulate(n.grad);
  });
}

}  // namespace greyfeed
