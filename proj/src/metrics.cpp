#include "salsketch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace salsketch {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require_same_shape(const Matrix& a, const Matrix& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(where) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> binarize_gt(const Matrix& gt) {
  return gt.array() > 0.5;
}

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

Counts count_at(const Matrix& pred, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& gtb,
                double threshold) {
  Counts c;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const bool pos = pred(i, j) >= threshold;
      if (pos && gtb(i, j)) ++c.tp;
      else if (pos) ++c.fp;
      else if (gtb(i, j)) ++c.fn;
    }
  }
  return c;
}

// Precision is 0 when nothing is predicted positive.
void pr_at(const Counts& c, double* p, double* r) {
  *p = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  *r = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
}

Matrix gauss7x7(double sigma) {
  Matrix k(7, 7);
  for (int u = -3; u <= 3; ++u)
    for (int v = -3; v <= 3; ++v) k(u + 3, v + 3) = std::exp(-(u * u + v * v) / (2 * sigma * sigma));
  k /= k.sum();
  return k;
}

Matrix filter_zero_pad(const Matrix& x, const Matrix& k) {
  const int kh = static_cast<int>(k.rows()), kw = static_cast<int>(k.cols());
  const int ch = kh / 2, cw = kw / 2;
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double s = 0.0;
      for (int u = 0; u < kh; ++u) {
        const Eigen::Index ii = i + u - ch;
        if (ii < 0 || ii >= x.rows()) continue;
        for (int v = 0; v < kw; ++v) {
          const Eigen::Index jj = j + v - cw;
          if (jj < 0 || jj >= x.cols()) continue;
          s += k(u, v) * x(ii, jj);
        }
      }
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

DistanceField distance_to_foreground(const Matrix& binary) {
  const int h = static_cast<int>(binary.rows()), w = static_cast<int>(binary.cols());
  const long big = std::numeric_limits<long>::max() / 4;
  DistanceField out;
  out.dist = Matrix::Zero(h, w);
  out.nearest.assign(static_cast<std::size_t>(h) * w, -1);

  // Per column: nearest foreground row (ties to the smaller row).
  Matrix colsq(h, w);
  std::vector<int> colsrc(static_cast<std::size_t>(h) * w, -1);
  for (int j = 0; j < w; ++j) {
    int above = -1;
    std::vector<int> up(h), down(h);
    for (int i = 0; i < h; ++i) {
      if (binary(i, j) > 0.5) above = i;
      up[i] = above;
    }
    int below = -1;
    for (int i = h - 1; i >= 0; --i) {
      if (binary(i, j) > 0.5) below = i;
      down[i] = below;
    }
    for (int i = 0; i < h; ++i) {
      const long da = up[i] >= 0 ? static_cast<long>(i - up[i]) : big;
      const long db = down[i] >= 0 ? static_cast<long>(down[i] - i) : big;
      int src = -1;
      long d = big;
      if (da <= db && up[i] >= 0) {
        src = up[i];
        d = da;
      } else if (down[i] >= 0) {
        src = down[i];
        d = db;
      }
      colsq(i, j) = src < 0 ? static_cast<double>(big) : static_cast<double>(d * d);
      colsrc[static_cast<std::size_t>(i) * w + j] = src;
    }
  }

  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      long best = big;
      int best_idx = -1;
      for (int jj = 0; jj < w; ++jj) {
        const int src = colsrc[static_cast<std::size_t>(i) * w + jj];
        if (src < 0) continue;
        const long dj = j - jj;
        const long total = dj * dj + static_cast<long>(colsq(i, jj));
        const int idx = src * w + jj;
        if (total < best || (total == best && idx < best_idx)) {
          best = total;
          best_idx = idx;
        }
      }
      out.dist(i, j) = best_idx < 0 ? std::numeric_limits<double>::infinity()
                                    : std::sqrt(static_cast<double>(best));
      out.nearest[static_cast<std::size_t>(i) * w + j] = best_idx;
    }
  }
  return out;
}

double fbeta_from_pr(double precision, double recall, double beta_sq) {
  const double denom = beta_sq * precision + recall;
  if (denom <= 0.0) return 0.0;
  return (1.0 + beta_sq) * precision * recall / denom;
}

double mae(const Matrix& pred, const Matrix& gt) {
  require_same_shape(pred, gt, "mae");
  return (pred - gt).cwiseAbs().mean();
}

std::pair<double, double> max_fbeta(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "max_fbeta");
  auto gtb = binarize_gt(gt);
  if (!gtb.any()) throw UndefinedMetric("max_fbeta: ground truth has no positive pixel");
  double best = -1.0, best_t = 0.0;
  for (int k = 0; k < cfg.thresholds; ++k) {
    const double t = static_cast<double>(k) / (cfg.thresholds - 1);
    double p, r;
    pr_at(count_at(pred, gtb, t), &p, &r);
    const double f = fbeta_from_pr(p, r, cfg.beta_sq);
    if (f > best) {
      best = f;
      best_t = t;
    }
  }
  return {best, best_t};
}

std::vector<PrPoint> pr_curve(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "pr_curve");
  auto gtb = binarize_gt(gt);
  if (!gtb.any()) throw UndefinedMetric("pr_curve: ground truth has no positive pixel");
  std::vector<PrPoint> out;
  out.reserve(cfg.thresholds);
  for (int k = 0; k < cfg.thresholds; ++k) {
    PrPoint pt;
    pt.threshold = static_cast<double>(k) / (cfg.thresholds - 1);
    pr_at(count_at(pred, gtb, pt.threshold), &pt.precision, &pt.recall);
    out.push_back(pt);
  }
  return out;
}

double weighted_fbeta(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "weighted_fbeta");
  const int h = static_cast<int>(gt.rows()), w = static_cast<int>(gt.cols());
  auto gtb = binarize_gt(gt);
  if (!gtb.any()) throw UndefinedMetric("weighted_fbeta: ground truth has no positive pixel");

  Matrix gtd = gtb.cast<double>();
  Matrix err = (pred - gtd).cwiseAbs();
  DistanceField df = distance_to_foreground(gtd);

  // Background errors take the value at the nearest foreground pixel before
  // smoothing, so the Gaussian neighborhood never mixes in far-off background.
  Matrix et = err;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (!gtb(i, j)) {
        const int idx = df.nearest[static_cast<std::size_t>(i) * w + j];
        et(i, j) = err(idx / w, idx % w);
      }
  Matrix ea = filter_zero_pad(et, gauss7x7(5.0));

  Matrix min_e = err;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (gtb(i, j) && ea(i, j) < err(i, j)) min_e(i, j) = ea(i, j);

  // Distance-decayed importance of background mistakes.
  Matrix b = Matrix::Ones(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (!gtb(i, j)) b(i, j) = 2.0 - std::pow(0.5, df.dist(i, j) / 5.0);

  Matrix ew = min_e.cwiseProduct(b);
  double n_fg = 0.0, ew_fg = 0.0, ew_bg = 0.0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      if (gtb(i, j)) {
        n_fg += 1.0;
        ew_fg += ew(i, j);
      } else {
        ew_bg += ew(i, j);
      }
    }

  const double tpw = n_fg - ew_fg;
  const double recall = 1.0 - ew_fg / n_fg;
  const double precision = tpw / (kEps + tpw + ew_bg);
  return (1.0 + cfg.beta_sq) * recall * precision / (kEps + recall + cfg.beta_sq * precision);
}

namespace {

double object_score(const std::vector<double>& vals) {
  if (vals.empty()) return 0.0;
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(vals.size());
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  const double sd = vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) - 1)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

double s_object(const Matrix& pred, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& gtb) {
  std::vector<double> fg, bg;
  for (Eigen::Index j = 0; j < pred.cols(); ++j)
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      if (gtb(i, j)) fg.push_back(pred(i, j));
      else bg.push_back(1.0 - pred(i, j));
    }
  const double u = static_cast<double>(fg.size()) / (fg.size() + bg.size());
  return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

double region_ssim(const Matrix& p, const Matrix& g) {
  const double n = static_cast<double>(p.size());
  if (n < 1.0) return 0.0;
  const double x = p.mean(), y = g.mean();
  const double denom = n - 1.0 + kEps;
  const double sx2 = (p.array() - x).square().sum() / denom;
  const double sy2 = (g.array() - y).square().sum() / denom;
  const double sxy = ((p.array() - x) * (g.array() - y)).sum() / denom;
  const double alpha = 4.0 * x * y * sxy;
  const double beta = (x * x + y * y) * (sx2 + sy2);
  if (alpha != 0.0) return alpha / (beta + kEps);
  return beta == 0.0 ? 1.0 : 0.0;
}

double s_region(const Matrix& pred, const Matrix& gtd) {
  const int h = static_cast<int>(gtd.rows()), w = static_cast<int>(gtd.cols());
  const double total = gtd.sum();
  // 1-based rounded centroid, deciding the quadrant split.
  int cx, cy;
  if (total <= 0.0) {
    cx = static_cast<int>(std::round(w / 2.0));
    cy = static_cast<int>(std::round(h / 2.0));
  } else {
    double sx = 0.0, sy = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        sx += gtd(i, j) * (j + 1);
        sy += gtd(i, j) * (i + 1);
      }
    cx = static_cast<int>(std::round(sx / total));
    cy = static_cast<int>(std::round(sy / total));
  }
  cx = std::clamp(cx, 1, w);
  cy = std::clamp(cy, 1, h);

  const double area = static_cast<double>(h) * w;
  struct Quad {
    int r0, c0, rows, cols;
  };
  const Quad quads[4] = {{0, 0, cy, cx},
                         {0, cx, cy, w - cx},
                         {cy, 0, h - cy, cx},
                         {cy, cx, h - cy, w - cx}};
  double score = 0.0;
  for (const Quad& q : quads) {
    if (q.rows <= 0 || q.cols <= 0) continue;
    const double wq = static_cast<double>(q.rows) * q.cols / area;
    score += wq * region_ssim(pred.block(q.r0, q.c0, q.rows, q.cols),
                              gtd.block(q.r0, q.c0, q.rows, q.cols));
  }
  return score;
}

}  // namespace

double s_measure(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg) {
  cfg.validate();
  require_same_shape(pred, gt, "s_measure");
  auto gtb = binarize_gt(gt);
  const double y = gtb.cast<double>().mean();
  double q;
  if (y == 0.0) {
    q = 1.0 - pred.mean();
  } else if (y == 1.0) {
    q = pred.mean();
  } else {
    Matrix gtd = gtb.cast<double>();
    q = cfg.s_alpha * s_object(pred, gtb) + (1.0 - cfg.s_alpha) * s_region(pred, gtd);
  }
  return std::clamp(q, 0.0, 1.0);
}

EvalReport evaluate_images(const std::vector<Matrix>& preds, const std::vector<Matrix>& gts,
                           const MetricConfig& cfg) {
  cfg.validate();
  if (preds.size() != gts.size()) throw ShapeError("evaluate_images: pred/gt count mismatch");
  if (preds.empty()) throw DegenerateDataset("evaluate_images: empty image set");

  EvalReport r;
  r.images = static_cast<int>(preds.size());
  std::vector<double> sum_p(cfg.thresholds, 0.0), sum_r(cfg.thresholds, 0.0);
  double per_image_f = 0.0, per_image_t = 0.0, wf = 0.0;
  int valid = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require_same_shape(preds[i], gts[i], "evaluate_images");
    r.mae += mae(preds[i], gts[i]);
    r.s_measure += s_measure(preds[i], gts[i], cfg);
    auto gtb = binarize_gt(gts[i]);
    if (!gtb.any()) {
      ++r.skipped_empty_gt;
      continue;
    }
    ++valid;
    wf += weighted_fbeta(preds[i], gts[i], cfg);
    double best_f = -1.0, best_t = 0.0;
    for (int k = 0; k < cfg.thresholds; ++k) {
      const double t = static_cast<double>(k) / (cfg.thresholds - 1);
      double p, rr;
      pr_at(count_at(preds[i], gtb, t), &p, &rr);
      sum_p[k] += p;
      sum_r[k] += rr;
      const double f = fbeta_from_pr(p, rr, cfg.beta_sq);
      if (f > best_f) {
        best_f = f;
        best_t = t;
      }
    }
    per_image_f += best_f;
    per_image_t += best_t;
  }
  r.mae /= r.images;
  r.s_measure /= r.images;
  if (valid == 0) throw UndefinedMetric("evaluate_images: every ground truth is empty");
  r.weighted_fbeta = wf / valid;

  r.pr_curve.reserve(cfg.thresholds);
  double best_f = -1.0, best_t = 0.0;
  for (int k = 0; k < cfg.thresholds; ++k) {
    PrPoint pt;
    pt.threshold = static_cast<double>(k) / (cfg.thresholds - 1);
    pt.precision = sum_p[k] / valid;
    pt.recall = sum_r[k] / valid;
    r.pr_curve.push_back(pt);
    const double f = fbeta_from_pr(pt.precision, pt.recall, cfg.beta_sq);
    if (f > best_f) {
      best_f = f;
      best_t = pt.threshold;
    }
  }
  if (cfg.per_image_fbeta) {
    r.max_fbeta = per_image_f / valid;
    r.best_threshold = per_image_t / valid;
  } else {
    r.max_fbeta = best_f;
    r.best_threshold = best_t;
  }
  return r;
}

double sketch_log_loss(const SketchModel& model, const std::vector<Image>& photos,
                       const std::vector<std::vector<AbsPoint>>& sketches) {
  if (photos.size() != sketches.size()) throw ShapeError("sketch_log_loss: count mismatch");
  if (photos.empty()) throw DegenerateDataset("sketch_log_loss: empty set");
  double sum = 0.0;
  for (std::size_t i = 0; i < photos.size(); ++i) {
    ad::Tape t(/*grad_enabled=*/false);
    BoundParams p = bind_params(t, model.params());
    PaddedSketch gt = pad_label(model, sketches[i], photos[i].h, photos[i].w);
    SketchModel::Unroll u = model.unroll_teacher_forced(t, p, photos[i], gt);
    sum += stroke_loss_graph(t, model.config(), u.ys, gt).scalar();
  }
  return sum / static_cast<double>(photos.size());
}

void write_eval_report_json(const EvalReport& r, const std::string& path) {
  nlohmann::json j;
  j["mae"] = r.mae;
  j["max_fbeta"] = r.max_fbeta;
  j["best_threshold"] = r.best_threshold;
  j["weighted_fbeta"] = r.weighted_fbeta;
  j["s_measure"] = r.s_measure;
  j["images"] = r.images;
  j["skipped_empty_gt"] = r.skipped_empty_gt;
  auto curve = nlohmann::json::array();
  for (const PrPoint& p : r.pr_curve)
    curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  j["pr_curve"] = std::move(curve);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_pr_csv(const std::vector<PrPoint>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  std::ostringstream ss;
  ss.precision(17);
  ss << "threshold,precision,recall\n";
  for (const PrPoint& p : curve) ss << p.threshold << "," << p.precision << "," << p.recall << "\n";
  out << ss.str();
}

}  // namespace salsketch
