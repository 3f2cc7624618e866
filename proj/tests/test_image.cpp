#include <random>

#include "doctest.h"
#include "salsketch/image.hpp"

using namespace salsketch;

namespace {

Matrix random_gray(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) m(i, j) = u(rng);
  return m;
}

Image random_image(std::mt19937_64& rng, int h, int w, int c) {
  Image img = Image::zeros(h, w, c);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < h * w; ++i) img.data(k, i) = u(rng);
  return img;
}

// Clamped bilinear sample at fractional source coordinates, written straight
// from the half-pixel definition.
double ref_bilinear(const Matrix& src, double y, double x) {
  const int h = static_cast<int>(src.rows()), w = static_cast<int>(src.cols());
  y = std::min(std::max(y, 0.0), h - 1.0);
  x = std::min(std::max(x, 0.0), w - 1.0);
  const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  return (1 - fy) * ((1 - fx) * src(y0, x0) + fx * src(y0, x1)) +
         fy * ((1 - fx) * src(y1, x0) + fx * src(y1, x1));
}

Matrix grid_from_row(const Matrix& row, int h, int w) {
  Matrix g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) g(i, j) = row(0, i * w + j);
  return g;
}

Matrix row_from_grid(const Matrix& g) {
  Matrix row(1, g.size());
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) row(0, i * g.cols() + j) = g(i, j);
  return row;
}

}  // namespace

TEST_CASE("bilinear resize matches the half-pixel reference") {
  std::mt19937_64 rng(7);
  const int cases[][4] = {{2, 2, 4, 4}, {3, 5, 7, 4}, {8, 8, 3, 3}, {4, 6, 4, 6}};
  for (const auto& c : cases) {
    const Matrix src = random_gray(rng, c[0], c[1]);
    const SparseMap plan = bilinear_plan(c[0], c[1], c[2], c[3]);
    const Matrix out = grid_from_row(apply_plan(row_from_grid(src), plan), c[2], c[3]);
    for (int i = 0; i < c[2]; ++i)
      for (int j = 0; j < c[3]; ++j) {
        const double sy = (i + 0.5) * c[0] / static_cast<double>(c[2]) - 0.5;
        const double sx = (j + 0.5) * c[1] / static_cast<double>(c[3]) - 0.5;
        CHECK(out(i, j) == doctest::Approx(ref_bilinear(src, sy, sx)).epsilon(1e-12));
      }
  }
}

TEST_CASE("hand-checked 2x2 to 4x4 upsample") {
  Matrix src(2, 2);
  src << 0, 1, 2, 3;
  const SparseMap plan = bilinear_plan(2, 2, 4, 4);
  const Matrix out = grid_from_row(apply_plan(row_from_grid(src), plan), 4, 4);
  // Source coords for out column j: j/2 - 0.25 clamped to [0, 1].
  CHECK(out(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(out(0, 2) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(out(0, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out(3, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out(1, 1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(out(2, 2) == doctest::Approx(2.25).epsilon(1e-12));
}

TEST_CASE("resampling plans satisfy the adjoint identity") {
  std::mt19937_64 rng(9);
  const SparseMap plan = bilinear_plan(3, 5, 7, 4);
  const Matrix x = random_gray(rng, 1, 15);
  const Matrix y = random_gray(rng, 1, 28);
  const double lhs = (apply_plan(x, plan) * y.transpose())(0, 0);
  const double rhs = (x * (plan.transpose() * y.transpose()))(0, 0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("identity affine plan reproduces the input") {
  std::mt19937_64 rng(13);
  const Matrix src = random_gray(rng, 6, 6);
  const SparseMap plan = affine_plan(6, 6, AffineTransform::identity(6, 6));
  const Matrix out = grid_from_row(apply_plan(row_from_grid(src), plan), 6, 6);
  CHECK((out - src).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("hflip image equals manual column reversal") {
  std::mt19937_64 rng(17);
  const Image img = random_image(rng, 5, 8, 3);
  const Image flipped = apply_affine_image(img, AffineTransform::hflip(5, 8));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 8; ++x)
        CHECK(flipped.at(c, y, x) == doctest::Approx(img.at(c, y, 7 - x)).epsilon(1e-12));
}

TEST_CASE("rotating a square image by +90 then -90 returns the original") {
  std::mt19937_64 rng(19);
  const Image img = random_image(rng, 8, 8, 1);
  const Image once = apply_affine_image(img, AffineTransform::rotate(90, 8, 8));
  const Image back = apply_affine_image(once, AffineTransform::rotate(-90, 8, 8));
  CHECK((back.data - img.data).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("affine plan at coarse resolution tracks the canvas-space transform") {
  // A 4x4 grid over a 64px canvas: the flip of cell centers must match the
  // flip computed in canvas coordinates and mapped back.
  const SparseMap plan = affine_plan(4, 4, AffineTransform::hflip(64, 64), 16.0);
  Matrix src(4, 4);
  src.setZero();
  src(1, 0) = 1.0;  // grid cell x=0 -> canvas x=7.5 -> flipped 55.5 -> grid 3
  const Matrix out = grid_from_row(apply_plan(row_from_grid(src), plan), 4, 4);
  CHECK(out(1, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(out.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("png round trip is exact at 8-bit resolution") {
  std::mt19937_64 rng(23);
  const Image img = random_image(rng, 9, 7, 3);
  const std::string path = "/tmp/salsketch_test_rt.png";
  save_png(path, img);
  const Image back = load_png(path);
  REQUIRE(back.h == 9);
  REQUIRE(back.w == 7);
  REQUIRE(back.c == 3);
  CHECK((back.data - img.data).cwiseAbs().maxCoeff() <= 0.5 / 255 + 1e-12);

  const Matrix gray = random_gray(rng, 6, 11);
  save_png_gray(path, gray);
  const Matrix gback = load_png_gray(path);
  CHECK((gback - gray).cwiseAbs().maxCoeff() <= 0.5 / 255 + 1e-12);
}

TEST_CASE("f32 sidecar round trips at float precision") {
  std::mt19937_64 rng(29);
  const Matrix gray = random_gray(rng, 5, 5);
  const std::string path = "/tmp/salsketch_test_rt.f32";
  save_f32(path, gray);
  const Matrix back = load_f32(path);
  CHECK((back - gray).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("resize_bilinear agrees with the plan-based path per channel") {
  std::mt19937_64 rng(31);
  const Image img = random_image(rng, 6, 6, 3);
  const Image out = resize_bilinear(img, 10, 4);
  const SparseMap plan = bilinear_plan(6, 6, 10, 4);
  const Matrix direct = apply_plan(img.data, plan);
  CHECK((out.data - direct).cwiseAbs().maxCoeff() <= 1e-12);
}
