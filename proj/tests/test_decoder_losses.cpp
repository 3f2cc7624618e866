#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "salsketch/losses.hpp"

using namespace salsketch;

namespace {

GmmParams random_gmm(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GmmParams g;
  Vector logits(m);
  for (int k = 0; k < m; ++k) logits(k) = 2.0 * u(rng);
  const double mx = logits.maxCoeff();
  g.pi = (logits.array() - mx).exp();
  g.pi /= g.pi.sum();
  g.mu_x = Vector(m);
  g.mu_y = Vector(m);
  g.sigma_x = Vector(m);
  g.sigma_y = Vector(m);
  g.rho = Vector(m);
  for (int k = 0; k < m; ++k) {
    g.mu_x(k) = 2.0 * u(rng);
    g.mu_y(k) = 2.0 * u(rng);
    g.sigma_x(k) = std::exp(1.2 * u(rng));
    g.sigma_y(k) = std::exp(1.2 * u(rng));
    g.rho(k) = 0.9 * u(rng);
  }
  return g;
}

Vector unit_gaussian_head(int m) {
  // Raw head vector that activates to a single standard component at 0.
  Vector y = Vector::Zero(6 * m + 3);
  return y;
}

}  // namespace

TEST_CASE("single standard component scores log(2pi) at its mean") {
  GmmParams g;
  g.pi = Vector::Ones(1);
  g.mu_x = Vector::Zero(1);
  g.mu_y = Vector::Zero(1);
  g.sigma_x = Vector::Ones(1);
  g.sigma_y = Vector::Ones(1);
  g.rho = Vector::Zero(1);
  CHECK(std::abs(-gmm_log_density(0.0, 0.0, g) - std::log(2.0 * M_PI)) <= 1e-9);
}

TEST_CASE("mixture log density matches the direct probability-domain sum") {
  std::mt19937_64 rng(301);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int it = 0; it < 100; ++it) {
    const int m = 1 + static_cast<int>(rng() % 8);
    const GmmParams g = random_gmm(rng, m);
    const double dx = u(rng), dy = u(rng);
    const double got = gmm_log_density(dx, dy, g);
    const double want = oracle::gmm_log_density_direct(dx, dy, g);
    CHECK(std::abs(got - want) <= 1e-9 * std::max({std::abs(got), std::abs(want), 1.0}));
  }
}

TEST_CASE("split_output follows the documented layout and activations") {
  std::mt19937_64 rng(305);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const int m = 4;
  Vector y(6 * m + 3);
  for (int i = 0; i < y.size(); ++i) y(i) = u(rng);
  const GmmParams g = split_output(y, m);

  Vector pi_ref(m);
  double denom = 0.0;
  const double mx = y.segment(0, m).maxCoeff();
  for (int k = 0; k < m; ++k) denom += std::exp(y(k) - mx);
  for (int k = 0; k < m; ++k) pi_ref(k) = std::exp(y(k) - mx) / denom;
  CHECK((g.pi - pi_ref).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((g.mu_x - y.segment(m, m)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((g.mu_y - y.segment(2 * m, m)).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < m; ++k) {
    CHECK(g.sigma_x(k) ==
          doctest::Approx(std::exp(std::clamp(y(3 * m + k), -kSigmaRawClamp, kSigmaRawClamp)))
              .epsilon(1e-12));
    CHECK(g.sigma_y(k) ==
          doctest::Approx(std::exp(std::clamp(y(4 * m + k), -kSigmaRawClamp, kSigmaRawClamp)))
              .epsilon(1e-12));
    CHECK(g.rho(k) ==
          doctest::Approx(std::clamp(std::tanh(y(5 * m + k)), -kRhoLimit, kRhoLimit))
              .epsilon(1e-12));
  }
  CHECK(g.pen_logits(0) == y(6 * m));
  CHECK(g.pen_logits(2) == y(6 * m + 2));
  g.validate();

  GmmParams bad = g;
  bad.pi(0) = -0.1;
  CHECK_THROWS_AS(bad.validate(), InvalidParams);
}

TEST_CASE("uniform pen logits cost ln 3 per step") {
  std::vector<Eigen::Vector3d> logits(4, Eigen::Vector3d::Constant(0.7));
  Matrix gt = Matrix::Zero(4, 3);
  gt(0, 0) = 1;
  gt(1, 1) = 1;
  gt(2, 2) = 1;
  gt(3, 0) = 1;
  Vector mask = Vector::Ones(4);
  CHECK(pen_state_loss(logits, gt, mask) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  mask(3) = 0.0;  // masked steps do not contribute
  CHECK(pen_state_loss(logits, gt, mask) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(pen_state_loss(logits, gt, Vector::Zero(4)) == 0.0);
}

TEST_CASE("plain stroke loss equals the capped per-step oracle mean") {
  std::mt19937_64 rng(307);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const int steps = 6;
  std::vector<GmmParams> gs;
  Matrix pts = Matrix::Zero(steps, 5);
  Vector mask(steps);
  for (int i = 0; i < steps; ++i) {
    gs.push_back(random_gmm(rng, 3));
    pts(i, 0) = u(rng);
    pts(i, 1) = u(rng);
    mask(i) = i < 4 ? 1.0 : 0.0;
  }
  double want = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double nll = -oracle::gmm_log_density_direct(pts(i, 0), pts(i, 1), gs[std::size_t(i)]);
    want += std::min(nll, -std::log(1e-12));
  }
  want /= 4.0;
  CHECK(stroke_loss(gs, pts, mask) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("loss values are invariant to extending the padding") {
  std::mt19937_64 rng(309);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<GmmParams> gs;
  Matrix pts = Matrix::Zero(3, 5);
  std::vector<Eigen::Vector3d> logits;
  Matrix pen = Matrix::Zero(3, 3);
  Vector mask = Vector::Ones(3);
  for (int i = 0; i < 3; ++i) {
    gs.push_back(random_gmm(rng, 2));
    pts(i, 0) = u(rng);
    pts(i, 1) = u(rng);
    logits.emplace_back(u(rng), u(rng), u(rng));
    pen(i, i % 3) = 1.0;
  }
  const double s0 = stroke_loss(gs, pts, mask);
  const double p0 = pen_state_loss(logits, pen, mask);

  Matrix pts2 = Matrix::Zero(8, 5);
  pts2.topRows(3) = pts;
  Matrix pen2 = Matrix::Zero(8, 3);
  pen2.topRows(3) = pen;
  Vector mask2 = Vector::Zero(8);
  mask2.head(3).setOnes();
  CHECK(stroke_loss(gs, pts2, mask2) == s0);
  CHECK(pen_state_loss(logits, pen2, mask2) == p0);
}

TEST_CASE("graph losses agree with the plain evaluations") {
  std::mt19937_64 rng(311);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  ModelConfig cfg = ModelConfig::tiny();
  cfg.m = 3;
  const int head = cfg.head_dim();
  const int steps = 4;

  ad::Tape t(false);
  std::vector<ad::Var> ys;
  std::vector<GmmParams> gs;
  std::vector<Eigen::Vector3d> logits;
  for (int i = 0; i < steps; ++i) {
    Matrix y(head, 1);
    for (int r = 0; r < head; ++r) y(r, 0) = u(rng);
    ys.push_back(t.leaf(y, false));
    const GmmParams g = split_output(y.col(0), cfg.m);
    gs.push_back(g);
    logits.push_back(g.pen_logits);
  }

  PaddedSketch gt;
  gt.points = Matrix::Zero(steps, 5);
  gt.mask = Vector::Ones(steps);
  gt.valid_len = steps;
  for (int i = 0; i < steps; ++i) {
    gt.points(i, 0) = u(rng);
    gt.points(i, 1) = u(rng);
    gt.points(i, 2 + (i % 3)) = 1.0;
  }

  const double stroke_graph = stroke_loss_graph(t, cfg, ys, gt).scalar();
  const double pen_graph = pen_state_loss_graph(t, cfg, ys, gt).scalar();
  CHECK(stroke_graph ==
        doctest::Approx(stroke_loss(gs, gt.points, gt.mask)).epsilon(1e-9));
  CHECK(pen_graph ==
        doctest::Approx(pen_state_loss(logits, gt.points.middleCols(2, 3), gt.mask))
            .epsilon(1e-12));
}

TEST_CASE("l1 head uses absolute offsets and a 2+3 layout") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.ablations.l1_regression = true;
  CHECK(cfg.head_dim() == 5);

  ad::Tape t(false);
  Matrix y(5, 1);
  y << 0.25, -0.5, 0.1, 0.2, 0.3;
  PaddedSketch gt;
  gt.points = Matrix::Zero(1, 5);
  gt.points(0, 0) = 1.0;
  gt.points(0, 1) = 1.0;
  gt.points(0, 2) = 1.0;
  gt.mask = Vector::Ones(1);
  gt.valid_len = 1;
  const double loss = stroke_loss_graph(t, cfg, {t.leaf(y, false)}, gt).scalar();
  CHECK(loss == doctest::Approx(std::abs(0.25 - 1.0) + std::abs(-0.5 - 1.0)).epsilon(1e-12));
}

TEST_CASE("greedy sampling is deterministic and one-hot") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.m = 2;
  std::mt19937_64 rng(313);
  Vector y = unit_gaussian_head(cfg.m);
  y(6 * cfg.m + 1) = 3.0;  // lift wins
  std::mt19937_64 r1(1), r2(99);
  const Stroke5Point a = sample_step(y, cfg, r1, 0.7, /*greedy=*/true);
  const Stroke5Point b = sample_step(y, cfg, r2, 1.3, /*greedy=*/true);
  CHECK(a.dx == b.dx);
  CHECK(a.dy == b.dy);
  CHECK(a.p1 + a.p2 + a.p3 == 1.0);
  CHECK(a.p2 == 1.0);

  // Non-greedy draws move with the rng but stay finite.
  const Stroke5Point c = sample_step(y, cfg, rng, 1.0, false);
  CHECK(std::isfinite(c.dx));
  CHECK(std::isfinite(c.dy));
}
