#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "salsketch/sketch.hpp"

using namespace salsketch;

namespace {

std::vector<AbsPoint> random_sketch(std::mt19937_64& rng, int n, int side) {
  std::uniform_real_distribution<double> coord(0.0, side - 1.0);
  std::bernoulli_distribution lift(0.2);
  std::vector<AbsPoint> pts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pts[static_cast<std::size_t>(i)] = {coord(rng), coord(rng), i == 0 ? 1 : (lift(rng) ? 1 : 0)};
  }
  return pts;
}

}  // namespace

TEST_CASE("stroke-5 round trip is exact to 1e-9") {
  std::mt19937_64 rng(11);
  for (int it = 0; it < 50; ++it) {
    const int n = 2 + static_cast<int>(rng() % 30);
    const auto pts = random_sketch(rng, n, 64);
    const double scale = 0.5 + (it % 7) * 0.9;
    const SketchSequence seq = absolute_to_offsets(pts, 64, 64, scale);
    CHECK(seq.length() == n);  // n-1 offsets plus the end marker
    CHECK(seq.points.back().p3 == 1.0);
    const auto back = offsets_to_absolute(seq, {pts[0].x, pts[0].y});
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(std::abs(back[i].x - pts[i].x) <= 1e-9);
      CHECK(std::abs(back[i].y - pts[i].y) <= 1e-9);
      if (i > 0) CHECK(back[i].b == pts[i].b);
    }
  }
}

TEST_CASE("offset encoding rejects degenerate inputs") {
  CHECK_THROWS_AS(absolute_to_offsets({{1, 1, 1}}, 8, 8, 1.0), InvalidSketch);
  CHECK_THROWS_AS(absolute_to_offsets({{1, 1, 1}, {2, 2, 0}}, 8, 8, 0.0), InvalidSketch);
  std::vector<AbsPoint> bad = {{1, 1, 1}, {std::nan(""), 2, 0}};
  CHECK_THROWS_AS(absolute_to_offsets(bad, 8, 8, 1.0), InvalidSketch);
}

TEST_CASE("rdp matches the recursive reference on random polylines") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> coord(0.0, 20.0);
  for (int it = 0; it < 100; ++it) {
    const int n = 2 + static_cast<int>(rng() % 40);
    std::vector<std::pair<double, double>> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = {coord(rng), coord(rng)};
    const double eps = 0.05 + 0.4 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto got = rdp_simplify(pts, eps);
    const auto want = oracle::rdp_recursive(pts, eps);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].first == want[i].first);
      CHECK(got[i].second == want[i].second);
    }
  }
}

TEST_CASE("rdp keeps collinear endpoints only") {
  std::vector<std::pair<double, double>> line;
  for (int i = 0; i <= 10; ++i) line.emplace_back(i, 2.0 * i);
  const auto out = rdp_simplify(line, 0.01);
  CHECK(out.size() == 2);
  CHECK(out.front() == line.front());
  CHECK(out.back() == line.back());
}

TEST_CASE("rasterize draws connected segments and honors pen lifts") {
  const RasterResult horiz = rasterize({{1, 3, 1}, {6, 3, 0}}, 8, 8);
  CHECK_FALSE(horiz.clamped);
  for (int x = 1; x <= 6; ++x) CHECK(horiz.pixels(3, x) == 1.0);
  CHECK(horiz.pixels.sum() == 6.0);

  // b = 1 starts a new stroke: nothing drawn between the two dots.
  const RasterResult dots = rasterize({{0, 0, 1}, {7, 7, 1}}, 8, 8);
  CHECK(dots.pixels.sum() == 2.0);
  CHECK(dots.pixels(0, 0) == 1.0);
  CHECK(dots.pixels(7, 7) == 1.0);

  const RasterResult outside = rasterize({{-5, 3, 1}, {3, 3, 0}}, 8, 8);
  CHECK(outside.clamped);
}

TEST_CASE("hflip twice and rotate +/-90 are identities within 1e-9") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> coord(0.0, 63.0);
  const auto hf = AffineTransform::hflip(64, 64);
  const auto rp = AffineTransform::rotate(90.0, 64, 64);
  const auto rm = AffineTransform::rotate(-90.0, 64, 64);
  for (int it = 0; it < 200; ++it) {
    const double x = coord(rng), y = coord(rng);
    auto [x1, y1] = affine_apply_point(hf, x, y);
    auto [x2, y2] = affine_apply_point(hf, x1, y1);
    CHECK(std::abs(x2 - x) <= 1e-9);
    CHECK(std::abs(y2 - y) <= 1e-9);
    auto [xr, yr] = affine_apply_point(rm, x, y);
    auto [xb, yb] = affine_apply_point(rp, xr, yr);
    CHECK(std::abs(xb - x) <= 1e-9);
    CHECK(std::abs(yb - y) <= 1e-9);
  }
}

TEST_CASE("every transform kind composes with its inverse to the identity") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> coord(0.0, 63.0);
  const AffineTransform ts[] = {
      AffineTransform::identity(64, 64), AffineTransform::hflip(64, 64),
      AffineTransform::vflip(64, 64),    AffineTransform::rotate(37.5, 64, 64),
      AffineTransform::scale(1.17, 64, 64)};
  for (const auto& t : ts) {
    const auto inv = t.inverse();
    for (int it = 0; it < 50; ++it) {
      const double x = coord(rng), y = coord(rng);
      auto [xf, yf] = affine_apply_point(t, x, y);
      auto [xb, yb] = affine_apply_point(inv, xf, yf);
      CHECK(std::abs(xb - x) <= 1e-9);
      CHECK(std::abs(yb - y) <= 1e-9);
    }
  }
}

TEST_CASE("apply_affine_sketch moves coordinates and keeps pen flags") {
  const std::vector<AbsPoint> pts = {{10, 20, 1}, {30, 40, 0}, {5, 5, 1}};
  const auto out = apply_affine_sketch(pts, AffineTransform::hflip(64, 64));
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].b == pts[i].b);
    CHECK(out[i].x == doctest::Approx(63.0 - pts[i].x).epsilon(1e-12));
    CHECK(out[i].y == doctest::Approx(pts[i].y).epsilon(1e-12));
  }
}

TEST_CASE("pad_and_mask pads to t_max and flags valid steps") {
  const std::vector<AbsPoint> pts = {{0, 0, 1}, {3, 4, 0}, {6, 2, 0}};
  const SketchSequence seq = absolute_to_offsets(pts, 8, 8, 1.0);
  const PaddedSketch p = pad_and_mask(seq, 6);
  CHECK(p.valid_len == 3);
  CHECK(p.points.rows() == 6);
  CHECK(p.points.cols() == 5);
  CHECK(p.mask.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(p.mask(i) == (i < 3 ? 1.0 : 0.0));
  CHECK(p.points(0, 0) == 3.0);
  CHECK(p.points(0, 1) == 4.0);
  CHECK(p.points(2, 4) == 1.0);  // end marker
  CHECK(p.points.row(4).isZero());
  CHECK_THROWS_AS(pad_and_mask(seq, 2), SequenceTooLong);
}

TEST_CASE("offset scale pools the population std over all offsets") {
  std::vector<SketchSequence> seqs;
  seqs.push_back(absolute_to_offsets({{0, 0, 1}, {1, 0, 0}, {3, 0, 0}}, 8, 8, 1.0));
  seqs.push_back(absolute_to_offsets({{0, 0, 1}, {0, 5, 0}}, 8, 8, 1.0));
  // Pooled over every stored dx/dy, end marker included.
  std::vector<double> vals;
  for (const auto& s : seqs)
    for (const auto& p : s.points) {
      vals.push_back(p.dx);
      vals.push_back(p.dy);
    }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(vals.size());
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(vals.size());
  CHECK(compute_offset_scale(seqs) == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("sketch ndjson round trips exactly") {
  SketchRecord a;
  a.canvas_h = 64;
  a.canvas_w = 48;
  a.strokes = {{{1.5, 2.25}, {3.0, 4.125}}, {{10.0, 20.0}}};
  SketchRecord b;
  b.canvas_h = 8;
  b.canvas_w = 8;
  b.strokes = {{{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}}};
  const std::string path = "/tmp/salsketch_test_sketches.ndjson";
  write_sketch_ndjson(path, {a, b});
  const auto back = read_sketch_ndjson(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].canvas_h == 64);
  CHECK(back[0].canvas_w == 48);
  REQUIRE(back[0].strokes.size() == 2);
  CHECK(back[0].strokes[0][1].second == 4.125);
  CHECK(back[1].strokes[0][2].first == 0.5);
}

TEST_CASE("record/abs conversions preserve stroke structure") {
  SketchRecord rec;
  rec.canvas_h = rec.canvas_w = 32;
  rec.strokes = {{{1, 2}, {3, 4}}, {{5, 6}, {7, 8}, {9, 10}}};
  const auto abs = record_to_abs(rec);
  REQUIRE(abs.size() == 5);
  CHECK(abs[0].b == 1);
  CHECK(abs[1].b == 0);
  CHECK(abs[2].b == 1);  // second stroke start
  const auto rec2 = abs_to_record(abs, 32, 32);
  REQUIRE(rec2.strokes.size() == 2);
  CHECK(rec2.strokes[1].size() == 3);
  CHECK(rec2.strokes[1][2].first == 9.0);
}
