#pragma once

#include <vector>

#include "salsketch/model.hpp"

namespace salsketch {

struct SaliencyMap {
  Matrix values;  // h x w grid in [0,1], max 1 unless degenerate
  int source_steps = 0;
  bool degenerate = false;
};

struct Accumulated {
  Matrix pre;   // 1 x hw mean of the attention rows (sums to 1)
  Matrix norm;  // 1 x hw max-normalized
  int steps = 0;
  bool degenerate = false;
};

// Mean over valid steps, then division by the maximum. mask entries < 0.5 are
// skipped; an all-zero mean yields the degenerate flag instead of a division.
Accumulated accumulate(const std::vector<Matrix>& alphas, const std::vector<double>& mask);

// Graph path over vars; every entry is treated as valid.
ad::Var accumulate_graph(ad::Tape& t, const std::vector<ad::Var>& alphas);

Matrix row_to_grid(const Matrix& row, int h, int w);
Matrix grid_to_row(const Matrix& grid);

// Bilinear upsampling to the photo resolution; renormalized so the maximum is
// exactly 1 again (interpolation can only shrink it).
SaliencyMap upsample_saliency(const Matrix& grid, int out_h, int out_w);

enum class SaliencyMode { TeacherForced, FreeRunning };

// encode -> unroll (per mode) -> accumulate -> upsample. Free-running mode
// decodes greedily, so both modes are deterministic.
SaliencyMap predict_saliency(const SketchModel& model, const Image& photo, SaliencyMode mode,
                             const PaddedSketch* gt = nullptr);

// Teacher-forced low-resolution map on a caller tape (the equivariance path).
ad::Var predict_saliency_graph(const SketchModel& model, ad::Tape& t, const BoundParams& p,
                               const Image& photo, const PaddedSketch& gt,
                               int* grid_side = nullptr);

}  // namespace salsketch
