#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "greyfeed/error.hpp"
#include "greyfeed/resample.hpp"
#include "greyfeed/rng.hpp"
#include "naive_resample.hpp"

using namespace greyfeed;

namespace {

Image rand_image(Eigen::Index h, Eigen::Index w, Rng& rng) {
  Image img(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) img(y, x) = rng.uniform();
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  REQUIRE(a.height() == b.height());
  REQUIRE(a.width() == b.width());
  return (a.pixels - b.pixels).abs().maxCoeff();
}

}  // namespace

TEST_CASE("window and sinc analytic values") {
  for (double m : {0.5, 1.0, 2.0, 7.0}) {
    CHECK(hamming_window(0.0, m) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hamming_window(m, m) == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(hamming_window(-m, m) == doctest::Approx(0.08).epsilon(1e-12));
    CHECK(hamming_window(m * 1.0001, m) == 0.0);
    CHECK(hamming_window(-m * 3, m) == 0.0);
  }
  CHECK_THROWS_AS(hamming_window(0.0, 0.0), ParamError);
  CHECK_THROWS_AS(hamming_window(0.0, -1.0), ParamError);

  CHECK(sinc(0.0) == 1.0);
  CHECK(std::abs(sinc(1.0)) < 1e-12);
  CHECK(std::abs(sinc(-2.0)) < 1e-12);
  CHECK(sinc(0.5) == doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-12));
}

TEST_CASE("linear interpolation") {
  CHECK(interp_linear_1d(0.0, 5.0, 1.0, 5.0, 0.3) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(interp_linear_1d(0.0, 0.0, 1.0, 1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(interp_linear_1d(1.0, 2.0, 3.0, 10.0, 2.0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK_THROWS_AS(interp_linear_1d(2.0, 1.0, 2.0, 3.0, 2.0), ParamError);
}

TEST_CASE("bilinear cell interpolation") {
  for (double x : {0.1, 0.5, 0.9})
    for (double y : {0.2, 0.7})
      CHECK(interp_bilinear_point(3.0, 3.0, 3.0, 3.0, 0.0, 1.0, 0.0, 1.0, x, y) ==
            doctest::Approx(3.0).epsilon(1e-12));
  // corners so the value depends only on x
  CHECK(interp_bilinear_point(0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.5, 0.8) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(interp_bilinear_point(1.0, 3.0, 2.0, 4.0, 0.0, 1.0, 0.0, 1.0, 0.25, 0.75) ==
        doctest::Approx(2.75).epsilon(1e-12));
  CHECK_THROWS_AS(interp_bilinear_point(1.0, 2.0, 3.0, 4.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.5),
                  ParamError);
}

TEST_CASE("nearest resize mapping") {
  Rng rng(5);
  Image img = rand_image(6, 9, rng);
  Image same = resize_nearest(img, 6, 9);
  CHECK(max_abs_diff(img, same) == 0.0);

  Image quad(2, 2);
  quad(0, 0) = 0.0;
  quad(0, 1) = 1.0 / 3.0;
  quad(1, 0) = 2.0 / 3.0;
  quad(1, 1) = 1.0;
  Image one = resize_nearest(quad, 1, 1);
  CHECK(one(0, 0) == 1.0);  // floor(0.5·2) = 1 on both axes

  for (int trial = 0; trial < 50; ++trial) {
    Image src = rand_image(rng.uniform_int(1, 10), rng.uniform_int(1, 10), rng);
    Image dst = resize_nearest(src, rng.uniform_int(1, 12), rng.uniform_int(1, 12));
    std::set<double> values(src.pixels.data(), src.pixels.data() + src.pixels.size());
    for (Eigen::Index i = 0; i < dst.pixels.size(); ++i)
      CHECK(values.count(dst.pixels.data()[i]) == 1);
  }
}

TEST_CASE("bilinear resize point submode") {
  Rng rng(13);
  Image img = rand_image(5, 7, rng);
  CHECK(max_abs_diff(img, resize_bilinear(img, 5, 7, BilinearMode::point)) < 1e-12);
  CHECK(max_abs_diff(img, resize_bilinear(img, 5, 7, BilinearMode::antialiased)) < 1e-12);

  Image step(2, 2);
  step(0, 0) = 0.0;
  step(0, 1) = 0.0;
  step(1, 0) = 1.0;
  step(1, 1) = 1.0;
  Image up = resize_bilinear(step, 3, 3, BilinearMode::point);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(up(1, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("filtered resizes preserve constants") {
  Image flat(8, 6, 0.37);
  CHECK(max_abs_diff(flat, Image(flat.pixels)) == 0.0);
  Image half_b = resize_bilinear(flat, 4, 3, BilinearMode::antialiased);
  Image half_h = resize_hamming(flat, 4, 3);
  for (Eigen::Index i = 0; i < half_b.pixels.size(); ++i) {
    CHECK(std::abs(half_b.pixels.data()[i] - 0.37) < 1e-12);
    CHECK(std::abs(half_h.pixels.data()[i] - 0.37) < 1e-9);
  }
  Image id = resize_hamming(flat, 8, 6);
  CHECK(max_abs_diff(flat, id) < 1e-9);
}

TEST_CASE("bilinear output stays within the input range") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    Image src = rand_image(rng.uniform_int(2, 9), rng.uniform_int(2, 9), rng);
    const double lo = src.pixels.minCoeff(), hi = src.pixels.maxCoeff();
    for (BilinearMode mode : {BilinearMode::point, BilinearMode::antialiased}) {
      Image dst = resize_bilinear(src, rng.uniform_int(1, 11), rng.uniform_int(1, 11), mode);
      CHECK(dst.pixels.minCoeff() >= lo - 1e-12);
      CHECK(dst.pixels.maxCoeff() <= hi + 1e-12);
    }
  }
}

TEST_CASE("compact hamming kernel has no negative lobes") {
  // With half-width 1 the sinc factor is nonnegative on the whole support,
  // so the resample is a convex combination and can never leave [0,1].
  for (double t = -1.0; t <= 1.0; t += 1.0 / 64.0)
    CHECK(sinc(t) * hamming_window(t, 1.0) >= 0.0);

  Image edge(8, 32);
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 32; ++x) edge(y, x) = x % 2 ? 1.0 : 0.0;
  std::vector<double> pre;
  naive::filtered(edge, 8, 8, [](double t) { return naive::windowed_sinc(t, 1.0); }, 1.0, true,
                  &pre);
  for (double v : pre) {
    CHECK(v >= -1e-12);
    CHECK(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("wide hamming kernel overshoots a hard edge before clamping") {
  Image edge(8, 32);
  for (Eigen::Index y = 0; y < 8; ++y)
    for (Eigen::Index x = 0; x < 32; ++x) edge(y, x) = x < 16 ? 0.0 : 1.0;
  std::vector<double> pre;
  Image out = naive::filtered(edge, 8, 8, [](double t) { return naive::windowed_sinc(t, 2.0); },
                              2.0, true, &pre);
  bool outside = false;
  for (double v : pre) outside = outside || v < 0.0 || v > 1.0;
  CHECK(outside);
  CHECK(out.pixels.minCoeff() >= 0.0);
  CHECK(out.pixels.maxCoeff() <= 1.0);

  Image prod = resize_hamming(edge, 8, 8, 2.0);
  CHECK(max_abs_diff(prod, out) < 1e-9);
  CHECK(prod.pixels.minCoeff() >= 0.0);
  CHECK(prod.pixels.maxCoeff() <= 1.0);
}

TEST_CASE("all methods match the naive references on small images") {
  Rng rng(29);
  for (Eigen::Index h = 1; h <= 8; ++h)
    for (Eigen::Index w = 1; w <= 8; ++w) {
      Image src = rand_image(h, w, rng);
      for (Eigen::Index oh = 1; oh <= 8; ++oh)
        for (Eigen::Index ow = 1; ow <= 8; ++ow) {
          CHECK(max_abs_diff(resize_nearest(src, oh, ow), naive::nearest(src, oh, ow)) == 0.0);
          CHECK(max_abs_diff(resize_bilinear(src, oh, ow, BilinearMode::point),
                             naive::bilinear_point(src, oh, ow)) < 1e-9);
          CHECK(max_abs_diff(resize_bilinear(src, oh, ow, BilinearMode::antialiased),
                             naive::filtered(src, oh, ow, naive::triangle, 1.0, false)) < 1e-9);
          CHECK(max_abs_diff(
                    resize_hamming(src, oh, ow),
                    naive::filtered(src, oh, ow,
                                    [](double t) { return naive::windowed_sinc(t, 1.0); }, 1.0,
                                    true)) < 1e-9);
        }
    }
}

TEST_CASE("squish policy resizes both axes independently") {
  Rng rng(31);
  Image img = rand_image(10, 4, rng);
  ResizePolicy p{6, 6, ResizeMode::squish, 1.0};
  for (InterpMethod m : {InterpMethod::nearest, InterpMethod::bilinear, InterpMethod::hamming})
    CHECK(max_abs_diff(apply_policy(img, p, m), resize(img, 6, 6, m)) == 0.0);

  ResizePolicy same{10, 4, ResizeMode::aspect_pad, 1.0};
  CHECK(max_abs_diff(apply_policy(img, same, InterpMethod::bilinear), img) < 1e-12);
}

TEST_CASE("aspect padding centers the scaled content") {
  Rng rng(37);
  Image img = rand_image(200, 524, rng);
  ResizePolicy p{352, 144, ResizeMode::aspect_pad, 1.0};
  Image out = apply_policy(img, p, InterpMethod::bilinear);
  REQUIRE(out.height() == 352);
  REQUIRE(out.width() == 144);

  // uniform scale 144/524 → content 55x144, top offset (352-55)/2 = 148
  Image content = resize_bilinear(img, 55, 144);
  CHECK((out.pixels.block(148, 0, 55, 144) - content.pixels).abs().maxCoeff() == 0.0);
  for (Eigen::Index y = 0; y < 148; ++y)
    for (Eigen::Index x = 0; x < 144; ++x) CHECK(out(y, x) == 1.0);
  for (Eigen::Index y = 203; y < 352; ++y)
    for (Eigen::Index x = 0; x < 144; ++x) CHECK(out(y, x) == 1.0);

  ResizePolicy grey = p;
  grey.pad_value = 0.25;
  CHECK(apply_policy(img, grey, InterpMethod::nearest)(0, 0) == 0.25);
}

TEST_CASE("square and elongated targets hold similar pixel budgets") {
  const double square = 224.0 * 224.0;
  const double tall = 352.0 * 144.0;
  CHECK(std::abs(tall - square) / square < 0.011);
}
