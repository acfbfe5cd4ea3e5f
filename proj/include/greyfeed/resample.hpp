#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "greyfeed/error.hpp"
#include "greyfeed/image.hpp"

namespace greyfeed {

enum class InterpMethod { nearest, bilinear, hamming };
enum class BilinearMode { point, antialiased };
enum class ResizeMode { squish, aspect_pad };

struct ResizePolicy {
  Eigen::Index target_h = 0;
  Eigen::Index target_w = 0;
  ResizeMode mode = ResizeMode::squish;
  double pad_value = 1.0;  // white: dark marks on a light ground
};

template <class Scalar>
Scalar sinc(Scalar x) {
  if (x == Scalar(0)) return Scalar(1);
  const Scalar px = std::numbers::pi_v<Scalar> * x;
  return std::sin(px) / px;
}

template <class Scalar>
Scalar hamming_window(Scalar x, Scalar m) {
  if (m <= Scalar(0)) throw ParamError("hamming_window: half-width must be positive");
  if (std::abs(x) > m) return Scalar(0);
  return Scalar(0.54) + Scalar(0.46) * std::cos(std::numbers::pi_v<Scalar> * x / m);
}

template <class Scalar>
Scalar interp_linear_1d(Scalar x1, Scalar y1, Scalar x2, Scalar y2, Scalar x) {
  if (x1 == x2) throw ParamError("interp_linear_1d: degenerate interval");
  return y1 * (x2 - x) / (x2 - x1) + y2 * (x - x1) / (x2 - x1);
}

// Corner values q_rc sit at x_r horizontally and y_c vertically:
// q11=(x1,y1), q21=(x2,y1), q12=(x1,y2), q22=(x2,y2).
template <class Scalar>
Scalar interp_bilinear_point(Scalar q11, Scalar q12, Scalar q21, Scalar q22, Scalar x1, Scalar x2,
                             Scalar y1, Scalar y2, Scalar x, Scalar y) {
  if (x1 == x2 || y1 == y2) throw ParamError("interp_bilinear_point: degenerate cell");
  const Scalar fy1 = interp_linear_1d(x1, q11, x2, q21, x);
  const Scalar fy2 = interp_linear_1d(x1, q12, x2, q22, x);
  return interp_linear_1d(y1, fy1, y2, fy2, y);
}

namespace detail {

inline void check_resize_args(Eigen::Index h, Eigen::Index w, Eigen::Index oh, Eigen::Index ow) {
  if (h < 1 || w < 1) throw DimensionError("resize: empty source image");
  if (oh < 1 || ow < 1)
    throw ParamError("resize: target extents must be >= 1, got " + std::to_string(oh) + "x" +
                     std::to_string(ow));
}

// Source taps and normalized weights for one output coordinate along one
// axis; indices are pre-clamped to the edge.
struct Taps {
  std::vector<Eigen::Index> idx;
  std::vector<double> w;
};

template <class Kernel>
std::vector<Taps> make_taps(Eigen::Index in_n, Eigen::Index out_n, double radius, Kernel k) {
  const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
  const double fscale = std::max(1.0, scale);
  const double support = radius * fscale;
  std::vector<Taps> taps(static_cast<std::size_t>(out_n));
  for (Eigen::Index j = 0; j < out_n; ++j) {
    const double center = (static_cast<double>(j) + 0.5) * scale - 0.5;
    const auto lo = static_cast<Eigen::Index>(std::ceil(center - support));
    const auto hi = static_cast<Eigen::Index>(std::floor(center + support));
    Taps& t = taps[static_cast<std::size_t>(j)];
    double total = 0.0;
    for (Eigen::Index s = lo; s <= hi; ++s) {
      const double wv = k((static_cast<double>(s) - center) / fscale);
      t.idx.push_back(std::clamp<Eigen::Index>(s, 0, in_n - 1));
      t.w.push_back(wv);
      total += wv;
    }
    if (total != 0.0)
      for (double& wv : t.w) wv /= total;
  }
  return taps;
}

// Separable resample: horizontal pass, then vertical.
template <class Scalar, class Kernel>
BasicImage<Scalar> resize_filtered(const BasicImage<Scalar>& img, Eigen::Index out_h,
                                   Eigen::Index out_w, double radius, Kernel k, bool clamp01) {
  check_resize_args(img.height(), img.width(), out_h, out_w);
  const auto tx = make_taps(img.width(), out_w, radius, k);
  BasicImage<Scalar> mid(img.height(), out_w);
  for (Eigen::Index y = 0; y < img.height(); ++y)
    for (Eigen::Index j = 0; j < out_w; ++j) {
      const Taps& t = tx[static_cast<std::size_t>(j)];
      double acc = 0.0;
      for (std::size_t s = 0; s < t.idx.size(); ++s)
        acc += t.w[s] * static_cast<double>(img(y, t.idx[s]));
      mid(y, j) = static_cast<Scalar>(acc);
    }
  const auto ty = make_taps(img.height(), out_h, radius, k);
  BasicImage<Scalar> out(out_h, out_w);
  for (Eigen::Index i = 0; i < out_h; ++i) {
    const Taps& t = ty[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < out_w; ++j) {
      double acc = 0.0;
      for (std::size_t s = 0; s < t.idx.size(); ++s)
        acc += t.w[s] * static_cast<double>(mid(t.idx[s], j));
      if (clamp01) acc = std::clamp(acc, 0.0, 1.0);
      out(i, j) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

}  // namespace detail

template <class Scalar>
BasicImage<Scalar> resize_nearest(const BasicImage<Scalar>& img, Eigen::Index out_h,
                                  Eigen::Index out_w) {
  detail::check_resize_args(img.height(), img.width(), out_h, out_w);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_w);
  std::vector<Eigen::Index> xs(static_cast<std::size_t>(out_w));
  for (Eigen::Index j = 0; j < out_w; ++j)
    xs[static_cast<std::size_t>(j)] = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::floor((static_cast<double>(j) + 0.5) * sx)), 0,
        img.width() - 1);
  BasicImage<Scalar> out(out_h, out_w);
  for (Eigen::Index i = 0; i < out_h; ++i) {
    const auto y = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::floor((static_cast<double>(i) + 0.5) * sy)), 0,
        img.height() - 1);
    for (Eigen::Index j = 0; j < out_w; ++j) out(i, j) = img(y, xs[static_cast<std::size_t>(j)]);
  }
  return out;
}

template <class Scalar>
BasicImage<Scalar> resize_bilinear(const BasicImage<Scalar>& img, Eigen::Index out_h,
                                   Eigen::Index out_w,
                                   BilinearMode submode = BilinearMode::antialiased) {
  if (submode == BilinearMode::antialiased)
    return detail::resize_filtered(
        img, out_h, out_w, 1.0, [](double t) { return std::max(0.0, 1.0 - std::abs(t)); }, false);
  detail::check_resize_args(img.height(), img.width(), out_h, out_w);
  const double sy = static_cast<double>(img.height()) / static_cast<double>(out_h);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(out_w);
  BasicImage<Scalar> out(out_h, out_w);
  for (Eigen::Index i = 0; i < out_h; ++i) {
    const double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
    const double y0 = std::floor(fy);
    const double ty = fy - y0;
    const auto y1 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(y0), 0, img.height() - 1);
    const auto y2 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(y0) + 1, 0, img.height() - 1);
    for (Eigen::Index j = 0; j < out_w; ++j) {
      const double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
      const double x0 = std::floor(fx);
      const double tax = fx - x0;
      const auto x1 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(x0), 0, img.width() - 1);
      const auto x2 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(x0) + 1, 0, img.width() - 1);
      const double top = (1.0 - tax) * static_cast<double>(img(y1, x1)) +
                         tax * static_cast<double>(img(y1, x2));
      const double bot = (1.0 - tax) * static_cast<double>(img(y2, x1)) +
                         tax * static_cast<double>(img(y2, x2));
      out(i, j) = static_cast<Scalar>((1.0 - ty) * top + ty * bot);
    }
  }
  return out;
}

// window is the half-width m of the windowed-sinc kernel; the default 1
// matches the compact imaging-library filter (no negative lobes). Larger
// windows admit sinc side lobes and can overshoot before the final clamp.
template <class Scalar>
BasicImage<Scalar> resize_hamming(const BasicImage<Scalar>& img, Eigen::Index out_h,
                                  Eigen::Index out_w, double window = 1.0) {
  if (window <= 0.0) throw ParamError("resize_hamming: window must be positive");
  return detail::resize_filtered(
      img, out_h, out_w, window,
      [window](double t) { return sinc(t) * hamming_window(t, window); }, true);
}

template <class Scalar>
BasicImage<Scalar> resize(const BasicImage<Scalar>& img, Eigen::Index out_h, Eigen::Index out_w,
                          InterpMethod method, BilinearMode submode = BilinearMode::antialiased) {
  switch (method) {
    case InterpMethod::nearest: return resize_nearest(img, out_h, out_w);
    case InterpMethod::bilinear: return resize_bilinear(img, out_h, out_w, submode);
    case InterpMethod::hamming: return resize_hamming(img, out_h, out_w);
  }
  throw ParamError("resize: unknown interpolation method");
}

template <class Scalar>
BasicImage<Scalar> apply_policy(const BasicImage<Scalar>& img, const ResizePolicy& policy,
                                InterpMethod method,
                                BilinearMode submode = BilinearMode::antialiased) {
  if (policy.target_h < 1 || policy.target_w < 1)
    throw ParamError("apply_policy: target extents must be >= 1");
  if (policy.mode == ResizeMode::squish)
    return resize(img, policy.target_h, policy.target_w, method, submode);

  const double s = std::min(
      static_cast<double>(policy.target_h) / static_cast<double>(img.height()),
      static_cast<double>(policy.target_w) / static_cast<double>(img.width()));
  Eigen::Index ch = std::max<Eigen::Index>(1, std::llround(static_cast<double>(img.height()) * s));
  Eigen::Index cw = std::max<Eigen::Index>(1, std::llround(static_cast<double>(img.width()) * s));
  ch = std::min(ch, policy.target_h);
  cw = std::min(cw, policy.target_w);
  BasicImage<Scalar> content = resize(img, ch, cw, method, submode);
  BasicImage<Scalar> out(policy.target_h, policy.target_w, static_cast<Scalar>(policy.pad_value));
  out.pixels.block((policy.target_h - ch) / 2, (policy.target_w - cw) / 2, ch, cw) =
      content.pixels;
  return out;
}

}  // namespace greyfeed
