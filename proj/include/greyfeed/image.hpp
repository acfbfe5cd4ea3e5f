#pragma once

#include <Eigen/Dense>

namespace greyfeed {

// Single-channel raster, height x width, values in [0, 1].
template <class Scalar>
struct BasicImage {
  using Pixels = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Pixels pixels;

  BasicImage() = default;
  BasicImage(Eigen::Index height, Eigen::Index width, Scalar fill = Scalar(0))
      : pixels(Pixels::Constant(height, width, fill)) {}
  explicit BasicImage(Pixels p) : pixels(std::move(p)) {}

  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index width() const { return pixels.cols(); }

  Scalar& operator()(Eigen::Index y, Eigen::Index x) { return pixels(y, x); }
  Scalar operator()(Eigen::Index y, Eigen::Index x) const { return pixels(y, x); }
};

using Image = BasicImage<double>;

}  // namespace greyfeed
