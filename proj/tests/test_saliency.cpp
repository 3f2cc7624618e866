#include <random>

#include "doctest.h"
#include "salsketch/losses.hpp"

using namespace salsketch;

namespace {

ModelConfig small_cfg() {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.c_l = 8;
  cfg.c_lm1 = 8;
  cfg.c_lm2 = 4;
  cfg.d_h = 8;
  cfg.d = 8;
  cfg.m = 2;
  cfg.t_max = 10;
  return cfg;
}

Image random_photo(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img = Image::zeros(side, side, 3);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) img.data(i / img.data.cols(), i % img.data.cols()) = u(rng);
  return img;
}

std::vector<AbsPoint> demo_sketch(int side) {
  const double s = side;
  return {{0.2 * s, 0.2 * s, 1}, {0.7 * s, 0.25 * s, 0}, {0.6 * s, 0.6 * s, 0},
          {0.3 * s, 0.65 * s, 1}, {0.4 * s, 0.4 * s, 0}};
}

Matrix random_distribution_row(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix r(1, n);
  for (int i = 0; i < n; ++i) r(0, i) = u(rng);
  r /= r.sum();
  return r;
}

}  // namespace

TEST_CASE("attention averages keep unit mass and normalize to a unit max") {
  std::mt19937_64 rng(401);
  std::vector<Matrix> alphas;
  std::vector<double> mask;
  Matrix mean = Matrix::Zero(1, 16);
  int valid = 0;
  for (int i = 0; i < 7; ++i) {
    alphas.push_back(random_distribution_row(rng, 16));
    mask.push_back(i % 3 == 2 ? 0.0 : 1.0);
    if (mask.back() >= 0.5) {
      mean += alphas.back();
      ++valid;
    }
  }
  mean /= valid;

  const Accumulated acc = accumulate(alphas, mask);
  CHECK(acc.steps == valid);
  CHECK_FALSE(acc.degenerate);
  CHECK(std::abs(acc.pre.sum() - 1.0) <= 1e-12);
  CHECK((acc.pre - mean).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(acc.norm.maxCoeff() == 1.0);
  CHECK(acc.norm.minCoeff() >= 0.0);
}

TEST_CASE("accumulate rejects empty input and flags all-zero maps") {
  CHECK_THROWS_AS(accumulate({}, {}), EmptyAccumulation);
  CHECK_THROWS_AS(accumulate({Matrix::Ones(1, 4)}, {0.0}), EmptyAccumulation);
  CHECK_THROWS_AS(accumulate({Matrix::Ones(1, 4)}, {}), Error);
  CHECK_THROWS_AS(accumulate({Matrix::Ones(1, 4), Matrix::Ones(1, 5)}, {1.0, 1.0}), ShapeError);

  const Accumulated acc = accumulate({Matrix::Zero(1, 4), Matrix::Zero(1, 4)}, {1.0, 1.0});
  CHECK(acc.degenerate);
  CHECK(acc.norm.cwiseAbs().maxCoeff() == 0.0);
  CHECK(acc.steps == 2);
}

TEST_CASE("row and grid views round trip exactly") {
  std::mt19937_64 rng(403);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix g(3, 5);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i / 5, i % 5) = u(rng);
  const Matrix row = grid_to_row(g);
  CHECK(row.rows() == 1);
  CHECK(row.cols() == 15);
  CHECK(row(0, 7) == g(1, 2));
  CHECK((row_to_grid(row, 3, 5) - g).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(row_to_grid(row, 5, 5), ShapeError);
}

TEST_CASE("upsampling restores a unit maximum") {
  Matrix g(2, 2);
  g << 0.1, 0.4, 0.2, 0.3;
  const SaliencyMap up = upsample_saliency(g, 9, 7);
  CHECK(up.values.rows() == 9);
  CHECK(up.values.cols() == 7);
  CHECK_FALSE(up.degenerate);
  CHECK(up.values.maxCoeff() == 1.0);
  CHECK(up.values.minCoeff() >= 0.0);

  const SaliencyMap same = upsample_saliency(g, 2, 2);
  CHECK((same.values - g / g.maxCoeff()).cwiseAbs().maxCoeff() <= 1e-15);

  CHECK_THROWS_AS(upsample_saliency(g, 1, 4), ShapeError);
  CHECK(upsample_saliency(Matrix::Zero(2, 2), 4, 4).degenerate);
}

TEST_CASE("both saliency modes produce normalized photo-sized maps") {
  const ModelConfig cfg = small_cfg();
  const SketchModel model(cfg, 11);
  const Image photo = random_photo(cfg.image_side, 42);
  const PaddedSketch gt = pad_label(model, demo_sketch(cfg.image_side), photo.h, photo.w);

  for (const SaliencyMode mode : {SaliencyMode::TeacherForced, SaliencyMode::FreeRunning}) {
    const SaliencyMap map = predict_saliency(model, photo, mode, &gt);
    CHECK(map.values.rows() == photo.h);
    CHECK(map.values.cols() == photo.w);
    CHECK_FALSE(map.degenerate);
    CHECK(map.values.maxCoeff() == 1.0);
    CHECK(map.values.minCoeff() >= 0.0);
    CHECK(map.source_steps >= 1);
  }
  CHECK(predict_saliency(model, photo, SaliencyMode::TeacherForced, &gt).source_steps ==
        gt.valid_len);
  CHECK_THROWS_AS(predict_saliency(model, photo, SaliencyMode::TeacherForced, nullptr), Error);
}

TEST_CASE("free-running prediction is deterministic") {
  const ModelConfig cfg = small_cfg();
  const SketchModel model(cfg, 13);
  const Image photo = random_photo(cfg.image_side, 43);
  const SaliencyMap a = predict_saliency(model, photo, SaliencyMode::FreeRunning);
  const SaliencyMap b = predict_saliency(model, photo, SaliencyMode::FreeRunning);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.source_steps == b.source_steps);
}

TEST_CASE("teacher-forced unroll ignores the padded tail") {
  const ModelConfig cfg = small_cfg();
  const SketchModel model(cfg, 17);
  const Image photo = random_photo(cfg.image_side, 44);
  SketchSequence seq =
      absolute_to_offsets(demo_sketch(cfg.image_side), photo.h, photo.w, model.offset_scale());
  const PaddedSketch a = pad_and_mask(seq, 6);
  const PaddedSketch b = pad_and_mask(seq, 10);
  REQUIRE(a.valid_len == b.valid_len);

  ad::Tape ta(false), tb(false);
  const BoundParams pa = bind_params(ta, model.params());
  const BoundParams pb = bind_params(tb, model.params());
  const SketchModel::Unroll ua = model.unroll_teacher_forced(ta, pa, photo, a);
  const SketchModel::Unroll ub = model.unroll_teacher_forced(tb, pb, photo, b);
  REQUIRE(ua.ys.size() == ub.ys.size());
  for (std::size_t i = 0; i < ua.ys.size(); ++i) {
    CHECK((ua.ys[i].v() - ub.ys[i].v()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ua.alphas[i].v() - ub.alphas[i].v()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("identity transform has exactly zero equivariance penalty") {
  const ModelConfig cfg = small_cfg();
  const SketchModel model(cfg, 19);
  const Image photo = random_photo(cfg.image_side, 45);
  const AffineTransform id = AffineTransform::identity(photo.h, photo.w);
  CHECK(equivariance_loss(model, photo, demo_sketch(cfg.image_side), id) == 0.0);
}

TEST_CASE("total objective is the weighted sum of its parts and has gradients") {
  ModelConfig cfg = small_cfg();
  SketchModel model(cfg, 23);
  const Image photo = random_photo(cfg.image_side, 46);
  const std::vector<AbsPoint> sk = demo_sketch(cfg.image_side);
  const AffineTransform tr = AffineTransform::hflip(photo.h, photo.w);
  LossWeights w;
  w.coord = 0.7;
  w.stroke = 1.3;
  w.eqv = 0.4;

  ad::Tape t(true);
  const BoundParams p = bind_params(t, model.params());
  GraphLosses gl = total_loss_graph(t, p, model, photo, sk, &tr, w);
  const LossReport rep = gl.report();
  CHECK(rep.total ==
        doctest::Approx(w.coord * rep.coord + w.stroke * rep.stroke + w.eqv * rep.eqv)
            .epsilon(1e-12));
  CHECK(rep.stroke > 0.0);
  CHECK(rep.coord > 0.0);

  t.backward(gl.total);
  model.params().zero_grads();
  harvest_grads(t, p, model.params());
  CHECK(model.params().grad_sq_norm() > 0.0);
  CHECK(model.params().all_finite());
}

TEST_CASE("equivariance term drops out when ablated or untransformed") {
  ModelConfig cfg = small_cfg();
  const Image photo = random_photo(cfg.image_side, 47);
  const std::vector<AbsPoint> sk = demo_sketch(cfg.image_side);
  const AffineTransform tr = AffineTransform::hflip(photo.h, photo.w);

  cfg.ablations.no_eqv = true;
  const SketchModel ablated(cfg, 29);
  ad::Tape t1(false);
  const BoundParams p1 = bind_params(t1, ablated.params());
  GraphLosses g1 = total_loss_graph(t1, p1, ablated, photo, sk, &tr);
  CHECK_FALSE(g1.eqv.valid());
  LossReport r1 = g1.report();
  CHECK(r1.eqv == 0.0);
  CHECK(r1.total == doctest::Approx(r1.coord + r1.stroke).epsilon(1e-12));

  cfg.ablations.no_eqv = false;
  const SketchModel full(cfg, 29);
  ad::Tape t2(false);
  const BoundParams p2 = bind_params(t2, full.params());
  GraphLosses g2 = total_loss_graph(t2, p2, full, photo, sk, nullptr);
  CHECK_FALSE(g2.eqv.valid());
}

TEST_CASE("graph and direct teacher-forced saliency agree") {
  const ModelConfig cfg = small_cfg();
  const SketchModel model(cfg, 31);
  const Image photo = random_photo(cfg.image_side, 48);
  const PaddedSketch gt = pad_label(model, demo_sketch(cfg.image_side), photo.h, photo.w);

  ad::Tape t(false);
  const BoundParams p = bind_params(t, model.params());
  int side = 0;
  const ad::Var low = predict_saliency_graph(model, t, p, photo, gt, &side);
  REQUIRE(side >= 1);
  const SaliencyMap up = upsample_saliency(row_to_grid(low.v(), side, side), photo.h, photo.w);
  const SaliencyMap direct = predict_saliency(model, photo, SaliencyMode::TeacherForced, &gt);
  CHECK((up.values - direct.values).cwiseAbs().maxCoeff() <= 1e-12);
}
