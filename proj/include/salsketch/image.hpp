#pragma once

#include <Eigen/Sparse>
#include <string>

#include "salsketch/common.hpp"
#include "salsketch/sketch.hpp"

namespace salsketch {

using SparseMap = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Planar image: `data` holds one row per channel, spatial index y * w + x.
// Values are kept in [0, 1] for photos and masks.
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  Matrix data;  // c x (h * w)

  static Image zeros(int h, int w, int c) { return {h, w, c, Matrix::Zero(c, h * w)}; }
  double& at(int ch, int y, int x) { return data(ch, y * w + x); }
  double at(int ch, int y, int x) const { return data(ch, y * w + x); }
};

// All resampling in the project goes through these plans so the half-pixel
// center convention is fixed once. A plan maps a flat h_in*w_in grid to a flat
// h_out*w_out grid; applying it is a sparse matrix product, which also gives
// the exact adjoint for backpropagation.

// Bilinear resize with coordinates clamped to the source grid.
SparseMap bilinear_plan(int h_in, int w_in, int h_out, int w_out);

// Resampling plan for an affine transform of an h x w grid. Grid pixels are
// related to canvas coordinates by x_canvas = (x_grid + 0.5) * coord_scale - 0.5,
// so the same canvas-space transform is applied consistently at any pyramid
// level. Samples outside the source grid contribute zero.
SparseMap affine_plan(int h, int w, const AffineTransform& t, double coord_scale = 1.0);

Matrix apply_plan(const Matrix& channels, const SparseMap& plan);  // (c, n_in) -> (c, n_out)

Image resize_bilinear(const Image& img, int h_out, int w_out);
Image apply_affine_image(const Image& img, const AffineTransform& t);

Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& img);

// Grayscale helpers used for masks and saliency maps (h x w matrices).
Matrix load_png_gray(const std::string& path);
void save_png_gray(const std::string& path, const Matrix& gray);

// Lossless float32 sidecar for metric-exact saliency pipelines.
void save_f32(const std::string& path, const Matrix& gray);
Matrix load_f32(const std::string& path);

}  // namespace salsketch
