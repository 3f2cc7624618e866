#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "salsketch/metrics.hpp"

using namespace salsketch;

namespace {

Matrix quantized_pred(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) p(i, j) = std::round(255.0 * u(rng)) / 255.0;
  return p;
}

Matrix smooth_pred(std::mt19937_64& rng, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix p(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) p(i, j) = u(rng);
  return p;
}

Matrix random_mask(std::mt19937_64& rng, int h, int w, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix g(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) g(i, j) = u(rng) < density ? 1.0 : 0.0;
  return g;
}

Matrix mixed_mask(std::mt19937_64& rng, int h, int w) {
  for (;;) {
    Matrix g = random_mask(rng, h, w, 0.35);
    const double s = g.sum();
    if (s > 0.5 && s < g.size() - 0.5) return g;
  }
}

void check_distance_matches_brute(const Matrix& bin) {
  const DistanceField df = distance_to_foreground(bin);
  Matrix d2;
  std::vector<int> nearest;
  oracle::brute_nearest_foreground(bin, &d2, &nearest);
  REQUIRE(df.nearest.size() == nearest.size());
  for (int i = 0; i < bin.rows(); ++i)
    for (int j = 0; j < bin.cols(); ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * bin.cols() + j;
      CHECK(df.nearest[idx] == nearest[idx]);
      if (nearest[idx] < 0) {
        CHECK(std::isinf(df.dist(i, j)));
      } else {
        CHECK(df.dist(i, j) == std::sqrt(d2(i, j)));
      }
    }
}

}  // namespace

TEST_CASE("mean absolute error matches hand-computed values") {
  Matrix pred(2, 2), gt(2, 2);
  pred << 0.25, 0.75, 1.0, 0.0;
  gt << 0.0, 1.0, 1.0, 0.5;
  CHECK(mae(pred, gt) == (0.25 + 0.25 + 0.0 + 0.5) / 4.0);

  std::mt19937_64 rng(501);
  const Matrix p = smooth_pred(rng, 7, 9);
  const Matrix g = random_mask(rng, 7, 9, 0.4);
  CHECK(mae(p, g) == doctest::Approx(oracle::brute_mae(p, g)).epsilon(1e-15));
}

TEST_CASE("fbeta combiner handles the zero denominator") {
  CHECK(fbeta_from_pr(0.0, 0.0, 0.3) == 0.0);
  CHECK(fbeta_from_pr(1.0, 1.0, 0.3) == doctest::Approx(1.0).epsilon(1e-12));
  const double f = fbeta_from_pr(0.5, 0.25, 0.3);
  CHECK(f == doctest::Approx(1.3 * 0.5 * 0.25 / (0.3 * 0.5 + 0.25)).epsilon(1e-12));
}

TEST_CASE("distance field matches the exhaustive search on tie patterns") {
  Matrix row = Matrix::Zero(1, 5);
  row(0, 0) = 1.0;
  row(0, 4) = 1.0;  // center pixel ties; smaller index wins
  check_distance_matches_brute(row);

  Matrix col = Matrix::Zero(5, 1);
  col(0, 0) = 1.0;
  col(4, 0) = 1.0;
  check_distance_matches_brute(col);

  Matrix diag = Matrix::Zero(4, 4);
  diag(0, 3) = 1.0;
  diag(3, 0) = 1.0;  // equidistant from (1,1)
  check_distance_matches_brute(diag);

  check_distance_matches_brute(Matrix::Zero(3, 4));  // no foreground anywhere
  check_distance_matches_brute(Matrix::Ones(3, 4));
}

TEST_CASE("distance field matches the exhaustive search on random maps") {
  std::mt19937_64 rng(503);
  std::uniform_real_distribution<double> dens(0.0, 0.6);
  for (int it = 0; it < 100; ++it) {
    const int h = 1 + static_cast<int>(rng() % 9);
    const int w = 1 + static_cast<int>(rng() % 9);
    check_distance_matches_brute(random_mask(rng, h, w, dens(rng)));
  }
}

TEST_CASE("threshold sweep finds the exact maximum F on quantized maps") {
  std::mt19937_64 rng(505);
  MetricConfig cfg;  // 256 thresholds aligned with the 255-step quantization
  for (int it = 0; it < 200; ++it) {
    const Matrix pred = quantized_pred(rng, 8, 8);
    const Matrix gt = mixed_mask(rng, 8, 8);
    const auto got = max_fbeta(pred, gt, cfg);
    const auto want = oracle::exhaustive_max_fbeta(pred, gt, cfg.beta_sq);
    CHECK(got.first == want.first);
  }
  CHECK_THROWS_AS(max_fbeta(Matrix::Ones(4, 4) * 0.5, Matrix::Zero(4, 4)), UndefinedMetric);
}

TEST_CASE("pr curve covers the threshold grid and saturates recall at zero") {
  std::mt19937_64 rng(507);
  const Matrix pred = smooth_pred(rng, 6, 6);
  const Matrix gt = mixed_mask(rng, 6, 6);
  MetricConfig cfg;
  cfg.thresholds = 64;
  const std::vector<PrPoint> curve = pr_curve(pred, gt, cfg);
  REQUIRE(static_cast<int>(curve.size()) == cfg.thresholds);
  CHECK(curve.front().threshold == 0.0);
  CHECK(curve.back().threshold == 1.0);
  CHECK(curve.front().recall == 1.0);
  CHECK(curve.front().precision == doctest::Approx(gt.sum() / gt.size()).epsilon(1e-12));
  for (const PrPoint& pt : curve) {
    CHECK(pt.precision >= 0.0);
    CHECK(pt.precision <= 1.0);
    CHECK(pt.recall >= 0.0);
    CHECK(pt.recall <= 1.0);
  }
  CHECK_THROWS_AS(pr_curve(pred, Matrix::Zero(6, 6), cfg), UndefinedMetric);
}

TEST_CASE("weighted F matches the definition oracle") {
  std::mt19937_64 rng(509);
  MetricConfig cfg;
  for (int it = 0; it < 50; ++it) {
    const Matrix pred = smooth_pred(rng, 10, 12);
    const Matrix gt = mixed_mask(rng, 10, 12);
    CHECK(weighted_fbeta(pred, gt, cfg) ==
          doctest::Approx(oracle::brute_weighted_fbeta(pred, gt, cfg.beta_sq)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(weighted_fbeta(Matrix::Ones(4, 4), Matrix::Zero(4, 4)), UndefinedMetric);
}

TEST_CASE("structure measure matches the definition oracle") {
  std::mt19937_64 rng(511);
  for (int it = 0; it < 50; ++it) {
    const Matrix pred = smooth_pred(rng, 9, 11);
    const Matrix gt = mixed_mask(rng, 9, 11);
    MetricConfig cfg;
    cfg.s_alpha = it % 2 == 0 ? 0.5 : 0.3;
    CHECK(s_measure(pred, gt, cfg) ==
          doctest::Approx(oracle::brute_s_measure(pred, gt, cfg.s_alpha)).epsilon(1e-6));
  }

  std::mt19937_64 rng2(512);
  const Matrix pred = smooth_pred(rng2, 5, 5);
  CHECK(s_measure(pred, Matrix::Zero(5, 5)) == doctest::Approx(1.0 - pred.mean()).epsilon(1e-12));
  CHECK(s_measure(pred, Matrix::Ones(5, 5)) == doctest::Approx(pred.mean()).epsilon(1e-12));
}

TEST_CASE("a perfect prediction earns perfect scores") {
  std::mt19937_64 rng(513);
  const Matrix gt = mixed_mask(rng, 8, 8);
  CHECK(mae(gt, gt) == 0.0);
  CHECK(max_fbeta(gt, gt).first == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(weighted_fbeta(gt, gt) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s_measure(gt, gt) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("dataset evaluation pools correctly and counts empty ground truth") {
  std::mt19937_64 rng(515);
  MetricConfig cfg;
  cfg.thresholds = 32;
  std::vector<Matrix> preds, gts;
  for (int i = 0; i < 2; ++i) {
    preds.push_back(smooth_pred(rng, 6, 6));
    gts.push_back(mixed_mask(rng, 6, 6));
  }
  preds.push_back(smooth_pred(rng, 6, 6));
  gts.push_back(Matrix::Zero(6, 6));

  const EvalReport rep = evaluate_images(preds, gts, cfg);
  CHECK(rep.images == 3);
  CHECK(rep.skipped_empty_gt == 1);

  double want_mae = 0.0, want_s = 0.0;
  for (int i = 0; i < 3; ++i) {
    want_mae += mae(preds[std::size_t(i)], gts[std::size_t(i)]);
    want_s += s_measure(preds[std::size_t(i)], gts[std::size_t(i)], cfg);
  }
  CHECK(rep.mae == doctest::Approx(want_mae / 3.0).epsilon(1e-12));
  CHECK(rep.s_measure == doctest::Approx(want_s / 3.0).epsilon(1e-12));
  CHECK(rep.weighted_fbeta ==
        doctest::Approx((weighted_fbeta(preds[0], gts[0], cfg) +
                         weighted_fbeta(preds[1], gts[1], cfg)) /
                        2.0)
            .epsilon(1e-12));

  const auto c0 = pr_curve(preds[0], gts[0], cfg);
  const auto c1 = pr_curve(preds[1], gts[1], cfg);
  REQUIRE(static_cast<int>(rep.pr_curve.size()) == cfg.thresholds);
  double best_f = -1.0, best_t = 0.0;
  for (int k = 0; k < cfg.thresholds; ++k) {
    const double p = (c0[std::size_t(k)].precision + c1[std::size_t(k)].precision) / 2.0;
    const double r = (c0[std::size_t(k)].recall + c1[std::size_t(k)].recall) / 2.0;
    CHECK(rep.pr_curve[std::size_t(k)].precision == doctest::Approx(p).epsilon(1e-12));
    CHECK(rep.pr_curve[std::size_t(k)].recall == doctest::Approx(r).epsilon(1e-12));
    const double f = fbeta_from_pr(p, r, cfg.beta_sq);
    if (f > best_f) {
      best_f = f;
      best_t = rep.pr_curve[std::size_t(k)].threshold;
    }
  }
  CHECK(rep.max_fbeta == doctest::Approx(best_f).epsilon(1e-12));
  CHECK(rep.best_threshold == best_t);

  MetricConfig per_img = cfg;
  per_img.per_image_fbeta = true;
  const EvalReport rep2 = evaluate_images(preds, gts, per_img);
  const auto m0 = max_fbeta(preds[0], gts[0], cfg);
  const auto m1 = max_fbeta(preds[1], gts[1], cfg);
  CHECK(rep2.max_fbeta == doctest::Approx((m0.first + m1.first) / 2.0).epsilon(1e-12));
  CHECK(rep2.best_threshold == doctest::Approx((m0.second + m1.second) / 2.0).epsilon(1e-12));
}

TEST_CASE("dataset evaluation rejects degenerate inputs") {
  MetricConfig cfg;
  cfg.thresholds = 8;
  CHECK_THROWS_AS(evaluate_images({}, {}, cfg), DegenerateDataset);
  CHECK_THROWS_AS(evaluate_images({Matrix::Ones(3, 3)}, {}, cfg), ShapeError);
  CHECK_THROWS_AS(evaluate_images({Matrix::Ones(3, 3) * 0.5}, {Matrix::Zero(3, 3)}, cfg),
                  UndefinedMetric);
  MetricConfig bad;
  bad.thresholds = 1;
  CHECK_THROWS_AS(evaluate_images({Matrix::Ones(3, 3)}, {Matrix::Ones(3, 3)}, bad), ConfigError);
}
