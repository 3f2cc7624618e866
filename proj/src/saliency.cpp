#include "salsketch/saliency.hpp"

namespace salsketch {

Accumulated accumulate(const std::vector<Matrix>& alphas, const std::vector<double>& mask) {
  if (mask.size() < alphas.size()) throw Error("accumulate: mask shorter than map list");
  Accumulated out;
  Matrix sum;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (mask[i] < 0.5) continue;
    if (out.steps == 0) {
      sum = alphas[i];
    } else {
      if (alphas[i].rows() != sum.rows() || alphas[i].cols() != sum.cols()) {
        throw ShapeError("accumulate: map shapes disagree");
      }
      sum += alphas[i];
    }
    ++out.steps;
  }
  if (out.steps == 0) throw EmptyAccumulation("accumulate: no valid steps");
  out.pre = sum / static_cast<double>(out.steps);
  const double mx = out.pre.maxCoeff();
  if (mx <= 0.0) {
    out.degenerate = true;
    out.norm = Matrix::Zero(out.pre.rows(), out.pre.cols());
  } else {
    out.norm = out.pre / mx;
  }
  return out;
}

ad::Var accumulate_graph(ad::Tape& t, const std::vector<ad::Var>& alphas) {
  (void)t;
  if (alphas.empty()) throw EmptyAccumulation("accumulate_graph: no steps");
  ad::Var sum = alphas[0];
  for (std::size_t i = 1; i < alphas.size(); ++i) sum = sum + alphas[i];
  ad::Var pre = ad::scale(sum, 1.0 / static_cast<double>(alphas.size()));
  if (pre.v().maxCoeff() <= 0.0) {
    throw EmptyAccumulation("accumulate_graph: all-zero accumulation");
  }
  return ad::div_by_scalar(pre, ad::max_all(pre));
}

Matrix row_to_grid(const Matrix& row, int h, int w) {
  if (row.rows() != 1 || row.cols() != static_cast<Eigen::Index>(h) * w) {
    throw ShapeError("row_to_grid: size mismatch");
  }
  Matrix g(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) g(y, x) = row(0, static_cast<Eigen::Index>(y) * w + x);
  }
  return g;
}

Matrix grid_to_row(const Matrix& grid) {
  Matrix r(1, grid.size());
  for (Eigen::Index y = 0; y < grid.rows(); ++y) {
    for (Eigen::Index x = 0; x < grid.cols(); ++x) r(0, y * grid.cols() + x) = grid(y, x);
  }
  return r;
}

SaliencyMap upsample_saliency(const Matrix& grid, int out_h, int out_w) {
  if (out_h < grid.rows() || out_w < grid.cols()) {
    throw ShapeError("upsample_saliency: target smaller than source");
  }
  SaliencyMap out;
  if (out_h == grid.rows() && out_w == grid.cols()) {
    out.values = grid;
  } else {
    const SparseMap plan = bilinear_plan(static_cast<int>(grid.rows()),
                                         static_cast<int>(grid.cols()), out_h, out_w);
    out.values = row_to_grid(apply_plan(grid_to_row(grid), plan), out_h, out_w);
  }
  const double mx = out.values.maxCoeff();
  if (mx <= 0.0) {
    out.degenerate = true;
  } else {
    out.values /= mx;
  }
  return out;
}

SaliencyMap predict_saliency(const SketchModel& model, const Image& photo, SaliencyMode mode,
                             const PaddedSketch* gt) {
  Accumulated acc;
  if (mode == SaliencyMode::TeacherForced) {
    if (gt == nullptr) throw Error("predict_saliency: teacher-forced mode needs a sequence");
    ad::Tape t(/*grad_enabled=*/false);
    BoundParams p = bind_params(t, model.params());
    SketchModel::Unroll u = model.unroll_teacher_forced(t, p, photo, *gt);
    std::vector<Matrix> rows;
    rows.reserve(u.alphas.size());
    for (const auto& a : u.alphas) rows.push_back(a.v());
    acc = accumulate(rows, std::vector<double>(rows.size(), 1.0));
  } else {
    std::mt19937_64 rng(0);  // greedy path draws nothing
    SketchModel::Generated gen = model.generate(photo, rng, 1.0, /*greedy=*/true);
    acc = accumulate(gen.alphas, std::vector<double>(gen.alphas.size(), 1.0));
  }
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(acc.norm.cols()))));
  SaliencyMap map;
  if (acc.degenerate) {
    map.values = Matrix::Zero(photo.h, photo.w);
    map.degenerate = true;
  } else {
    map = upsample_saliency(row_to_grid(acc.norm, side, side), photo.h, photo.w);
  }
  map.source_steps = acc.steps;
  return map;
}

ad::Var predict_saliency_graph(const SketchModel& model, ad::Tape& t, const BoundParams& p,
                               const Image& photo, const PaddedSketch& gt, int* grid_side) {
  SketchModel::Unroll u = model.unroll_teacher_forced(t, p, photo, gt);
  if (grid_side != nullptr) *grid_side = u.grid_side;
  return accumulate_graph(t, u.alphas);
}

}  // namespace salsketch
