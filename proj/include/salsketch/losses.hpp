#pragma once

#include <vector>

#include "salsketch/saliency.hpp"

namespace salsketch {

struct LossReport {
  double coord = 0.0;
  double stroke = 0.0;
  double eqv = 0.0;
  double total = 0.0;
};

inline constexpr double kProbFloor = 1e-12;

// Plain evaluations for tests and diagnostics. gt_pen is T x 3 one-hots,
// gt_points is the padded T x 5 matrix; mask marks the valid steps.
double pen_state_loss(const std::vector<Eigen::Vector3d>& logits, const Matrix& gt_pen,
                      const Vector& mask);
double stroke_loss(const std::vector<GmmParams>& gmm, const Matrix& gt_points, const Vector& mask);

// Graph builders over the raw head outputs of a teacher-forced unroll; the
// unroll computes valid steps only, so every y participates.
ad::Var pen_state_loss_graph(ad::Tape& t, const ModelConfig& cfg, const std::vector<ad::Var>& ys,
                             const PaddedSketch& gt);
ad::Var stroke_loss_graph(ad::Tape& t, const ModelConfig& cfg, const std::vector<ad::Var>& ys,
                          const PaddedSketch& gt);

// | X(A(P)) - A(X(P)) | at the attention grid resolution, teacher-forced.
// The transformed branch consumes the transformed sketch label.
ad::Var equivariance_loss_graph(ad::Tape& t, const BoundParams& p, const SketchModel& model,
                                const Image& photo, const std::vector<AbsPoint>& sketch_abs,
                                const AffineTransform& tr);
double equivariance_loss(const SketchModel& model, const Image& photo,
                         const std::vector<AbsPoint>& sketch_abs, const AffineTransform& tr);

struct LossWeights {
  double coord = 1.0;
  double stroke = 1.0;
  double eqv = 1.0;
};

struct GraphLosses {
  ad::Var coord;
  ad::Var stroke;
  ad::Var eqv;  // invalid when the equivariance term is disabled
  ad::Var total;
  LossReport report() const;
};

// One sample's full objective. The photo branch is unrolled once and shared
// between the stroke/pen terms and the equivariance comparison. Passing
// tr == nullptr (or no_eqv) drops the equivariance term.
GraphLosses total_loss_graph(ad::Tape& t, const BoundParams& p, const SketchModel& model,
                             const Image& photo, const std::vector<AbsPoint>& sketch_abs,
                             const AffineTransform* tr, const LossWeights& w = {});

PaddedSketch pad_label(const SketchModel& model, const std::vector<AbsPoint>& sketch_abs,
                       int canvas_h, int canvas_w);

}  // namespace salsketch
