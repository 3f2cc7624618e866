#pragma once

#include <utility>
#include <vector>

#include "salsketch/losses.hpp"

namespace salsketch {

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  double mae = 0.0;
  double max_fbeta = 0.0;
  double best_threshold = 0.0;
  double weighted_fbeta = 0.0;
  double s_measure = 0.0;
  std::vector<PrPoint> pr_curve;
  int images = 0;
  int skipped_empty_gt = 0;
};

// Distance from every pixel to its nearest foreground pixel (binary > 0.5),
// plus that pixel's row-major index. Ties resolve to the smallest index;
// nearest = -1 everywhere when there is no foreground.
struct DistanceField {
  Matrix dist;
  std::vector<int> nearest;
};
DistanceField distance_to_foreground(const Matrix& binary);

double fbeta_from_pr(double precision, double recall, double beta_sq);

double mae(const Matrix& pred, const Matrix& gt);
std::pair<double, double> max_fbeta(const Matrix& pred, const Matrix& gt,
                                    const MetricConfig& cfg = {});
double weighted_fbeta(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg = {});
double s_measure(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg = {});
std::vector<PrPoint> pr_curve(const Matrix& pred, const Matrix& gt, const MetricConfig& cfg = {});

// Dataset aggregation: MAE / weighted F / S averaged per image; the F-beta
// sweep pools mean precision and recall per threshold (or averages per-image
// maxima under the flag). Images with empty ground truth are skipped for the
// threshold metrics and counted.
EvalReport evaluate_images(const std::vector<Matrix>& preds, const std::vector<Matrix>& gts,
                           const MetricConfig& cfg = {});

// Teacher-forced dataset mean of the offset negative log-likelihood, in nats.
double sketch_log_loss(const SketchModel& model, const std::vector<Image>& photos,
                       const std::vector<std::vector<AbsPoint>>& sketches);

void write_eval_report_json(const EvalReport& r, const std::string& path);
void write_pr_csv(const std::vector<PrPoint>& curve, const std::string& path);

}  // namespace salsketch
