#include "salsketch/losses.hpp"

#include <cmath>

namespace salsketch {

namespace {

ad::Var per_step_pen_ce(ad::Tape& t, const ModelConfig& cfg, ad::Var y, const Matrix& gt_row) {
  const int pen_off = cfg.ablations.l1_regression ? 2 : 6 * cfg.m;
  ad::Var lsm = ad::log_softmax_all(ad::slice_rows(y, pen_off, 3));
  Matrix onehot = gt_row.block(0, 2, 1, 3).transpose();
  return neg(ad::sum_all(lsm * t.constant(std::move(onehot))));
}

ad::Var per_step_stroke_nll(ad::Tape& t, const ModelConfig& cfg, ad::Var y, double dx, double dy) {
  const int m = cfg.m;
  if (cfg.ablations.l1_regression) {
    Matrix target(2, 1);
    target << dx, dy;
    return ad::sum_all(abs_(ad::slice_rows(y, 0, 2) - t.constant(std::move(target))));
  }
  ad::Var logpi = ad::log_softmax_all(ad::slice_rows(y, 0, m));
  ad::Var mu_x = ad::slice_rows(y, m, m);
  ad::Var mu_y = ad::slice_rows(y, 2 * m, m);
  ad::Var sx = exp_(clamp_(ad::slice_rows(y, 3 * m, m), -kSigmaRawClamp, kSigmaRawClamp));
  ad::Var sy = exp_(clamp_(ad::slice_rows(y, 4 * m, m), -kSigmaRawClamp, kSigmaRawClamp));
  ad::Var rho = clamp_(tanh_(ad::slice_rows(y, 5 * m, m)), -kRhoLimit, kRhoLimit);

  ad::Var cx = t.constant(Matrix::Constant(m, 1, dx));
  ad::Var cy = t.constant(Matrix::Constant(m, 1, dy));
  ad::Var u = ad::div(cx - mu_x, sx);
  ad::Var v = ad::div(cy - mu_y, sy);
  ad::Var one_m_r2 = ad::add_scalar(neg(ad::square(rho)), 1.0);
  ad::Var z = ad::square(u) + ad::square(v) - ad::scale(rho * u * v, 2.0);

  ad::Var log_n = neg(log_(sx)) - log_(sy) - ad::scale(log_(one_m_r2), 0.5) -
                  ad::div(z, ad::scale(one_m_r2, 2.0));
  log_n = ad::add_scalar(log_n, -std::log(2.0 * M_PI));
  ad::Var lse = ad::logsumexp_all(logpi + log_n);
  return neg(clamp_(lse, std::log(kProbFloor), 1e30));
}

}  // namespace

double pen_state_loss(const std::vector<Eigen::Vector3d>& logits, const Matrix& gt_pen,
                      const Vector& mask) {
  if (gt_pen.cols() != 3) throw ShapeError("pen_state_loss: gt must be T x 3");
  double sum = 0.0;
  int count = 0;
  const std::size_t steps = std::min<std::size_t>(logits.size(), static_cast<std::size_t>(
                                                                      std::min<Eigen::Index>(
                                                                          gt_pen.rows(),
                                                                          mask.size())));
  for (std::size_t i = 0; i < steps; ++i) {
    if (mask(static_cast<Eigen::Index>(i)) < 0.5) continue;
    const Eigen::Vector3d& l = logits[i];
    const double mx = l.maxCoeff();
    const double lse = mx + std::log((l.array() - mx).exp().sum());
    double ce = 0.0;
    for (int c = 0; c < 3; ++c) ce -= gt_pen(static_cast<Eigen::Index>(i), c) * (l(c) - lse);
    sum += ce;
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

double stroke_loss(const std::vector<GmmParams>& gmm, const Matrix& gt_points,
                   const Vector& mask) {
  if (gt_points.cols() < 2) throw ShapeError("stroke_loss: gt must carry offsets");
  double sum = 0.0;
  int count = 0;
  const std::size_t steps = std::min<std::size_t>(gmm.size(), static_cast<std::size_t>(
                                                                  std::min<Eigen::Index>(
                                                                      gt_points.rows(),
                                                                      mask.size())));
  const double cap = -std::log(kProbFloor);
  for (std::size_t i = 0; i < steps; ++i) {
    if (mask(static_cast<Eigen::Index>(i)) < 0.5) continue;
    const auto r = static_cast<Eigen::Index>(i);
    const double ld = gmm_log_density(gt_points(r, 0), gt_points(r, 1), gmm[i]);
    sum += std::min(-ld, cap);
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

ad::Var pen_state_loss_graph(ad::Tape& t, const ModelConfig& cfg, const std::vector<ad::Var>& ys,
                             const PaddedSketch& gt) {
  if (cfg.ablations.no_pen_state || ys.empty()) return t.constant_scalar(0.0);
  ad::Var sum = per_step_pen_ce(t, cfg, ys[0], gt.points.row(0));
  for (std::size_t i = 1; i < ys.size(); ++i) {
    sum = sum + per_step_pen_ce(t, cfg, ys[i], gt.points.row(static_cast<Eigen::Index>(i)));
  }
  return ad::scale(sum, 1.0 / static_cast<double>(ys.size()));
}

ad::Var stroke_loss_graph(ad::Tape& t, const ModelConfig& cfg, const std::vector<ad::Var>& ys,
                          const PaddedSketch& gt) {
  if (ys.empty()) return t.constant_scalar(0.0);
  ad::Var sum = per_step_stroke_nll(t, cfg, ys[0], gt.points(0, 0), gt.points(0, 1));
  for (std::size_t i = 1; i < ys.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    sum = sum + per_step_stroke_nll(t, cfg, ys[i], gt.points(r, 0), gt.points(r, 1));
  }
  return ad::scale(sum, 1.0 / static_cast<double>(ys.size()));
}

PaddedSketch pad_label(const SketchModel& model, const std::vector<AbsPoint>& sketch_abs,
                       int canvas_h, int canvas_w) {
  SketchSequence seq =
      absolute_to_offsets(sketch_abs, canvas_h, canvas_w, model.offset_scale());
  return pad_and_mask(seq, model.config().t_max);
}

namespace {

ad::Var eqv_from_branch_a(ad::Tape& t, const BoundParams& p, const SketchModel& model,
                          const Image& photo, const std::vector<AbsPoint>& sketch_abs,
                          const AffineTransform& tr, ad::Var s_a, int grid) {
  Image photo_t = apply_affine_image(photo, tr);
  std::vector<AbsPoint> abs_t = apply_affine_sketch(sketch_abs, tr);
  PaddedSketch gt_t = pad_label(model, abs_t, photo.h, photo.w);
  ad::Var s_b = predict_saliency_graph(model, t, p, photo_t, gt_t);

  ad::Var t_a = s_a;
  if (tr.kind != AffineTransform::Kind::Identity) {
    const double coord_scale = static_cast<double>(photo.h) / grid;
    auto plan = std::make_shared<const SparseMap>(affine_plan(grid, grid, tr, coord_scale));
    t_a = ad::linmap(s_a, plan);
  }
  return ad::mean_all(abs_(s_b - t_a));
}

}  // namespace

ad::Var equivariance_loss_graph(ad::Tape& t, const BoundParams& p, const SketchModel& model,
                                const Image& photo, const std::vector<AbsPoint>& sketch_abs,
                                const AffineTransform& tr) {
  PaddedSketch gt = pad_label(model, sketch_abs, photo.h, photo.w);
  int grid = 0;
  ad::Var s_a = predict_saliency_graph(model, t, p, photo, gt, &grid);
  return eqv_from_branch_a(t, p, model, photo, sketch_abs, tr, s_a, grid);
}

double equivariance_loss(const SketchModel& model, const Image& photo,
                         const std::vector<AbsPoint>& sketch_abs, const AffineTransform& tr) {
  ad::Tape t(/*grad_enabled=*/false);
  BoundParams p = bind_params(t, model.params());
  return equivariance_loss_graph(t, p, model, photo, sketch_abs, tr).scalar();
}

LossReport GraphLosses::report() const {
  LossReport r;
  r.coord = coord.valid() ? coord.scalar() : 0.0;
  r.stroke = stroke.valid() ? stroke.scalar() : 0.0;
  r.eqv = eqv.valid() ? eqv.scalar() : 0.0;
  r.total = total.valid() ? total.scalar() : r.coord + r.stroke + r.eqv;
  return r;
}

GraphLosses total_loss_graph(ad::Tape& t, const BoundParams& p, const SketchModel& model,
                             const Image& photo, const std::vector<AbsPoint>& sketch_abs,
                             const AffineTransform* tr, const LossWeights& w) {
  const ModelConfig& cfg = model.config();
  PaddedSketch gt = pad_label(model, sketch_abs, photo.h, photo.w);
  SketchModel::Unroll u = model.unroll_teacher_forced(t, p, photo, gt);

  GraphLosses gl;
  gl.coord = pen_state_loss_graph(t, cfg, u.ys, gt);
  gl.stroke = stroke_loss_graph(t, cfg, u.ys, gt);

  const bool use_eqv = tr != nullptr && !cfg.ablations.no_eqv && w.eqv > 0.0;
  if (use_eqv) {
    ad::Var s_a = accumulate_graph(t, u.alphas);
    gl.eqv = eqv_from_branch_a(t, p, model, photo, sketch_abs, *tr, s_a, u.grid_side);
  }

  ad::Var total = ad::scale(gl.coord, w.coord) + ad::scale(gl.stroke, w.stroke);
  if (use_eqv) total = total + ad::scale(gl.eqv, w.eqv);
  gl.total = total;
  return gl;
}

}  // namespace salsketch
