#include "salsketch/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace salsketch {

namespace {

struct Tap {
  int idx;
  double weight;
};

// Bilinear taps at a (possibly out-of-grid) source coordinate. `clamp` selects
// between edge-clamped resizing and zero-outside affine sampling.
void bilinear_taps(double sx, double sy, int h, int w, bool clamp, std::vector<Tap>& out) {
  out.clear();
  if (clamp) {
    sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  } else if (sx <= -1.0 || sx >= static_cast<double>(w) || sy <= -1.0 ||
             sy >= static_cast<double>(h)) {
    return;
  }
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double wts[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int i = 0; i < 4; ++i) {
    if (wts[i] == 0.0) continue;
    if (xs[i] < 0 || xs[i] >= w || ys[i] < 0 || ys[i] >= h) continue;  // zero outside
    out.push_back({ys[i] * w + xs[i], wts[i]});
  }
}

}  // namespace

SparseMap bilinear_plan(int h_in, int w_in, int h_out, int w_out) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(h_out) * w_out * 4);
  const double sy_ratio = static_cast<double>(h_in) / h_out;
  const double sx_ratio = static_cast<double>(w_in) / w_out;
  std::vector<Tap> taps;
  for (int y = 0; y < h_out; ++y) {
    const double sy = (y + 0.5) * sy_ratio - 0.5;
    for (int x = 0; x < w_out; ++x) {
      const double sx = (x + 0.5) * sx_ratio - 0.5;
      bilinear_taps(sx, sy, h_in, w_in, /*clamp=*/true, taps);
      const int row = y * w_out + x;
      for (const Tap& t : taps) trips.emplace_back(row, t.idx, t.weight);
    }
  }
  SparseMap plan(h_out * w_out, h_in * w_in);
  plan.setFromTriplets(trips.begin(), trips.end());
  return plan;
}

SparseMap affine_plan(int h, int w, const AffineTransform& t, double coord_scale) {
  const AffineTransform inv = t.inverse();
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<Tap> taps;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Grid pixel -> canvas coordinate -> inverse transform -> back to grid.
      const double cx = (x + 0.5) * coord_scale - 0.5;
      const double cy = (y + 0.5) * coord_scale - 0.5;
      auto [sx_c, sy_c] = affine_apply_point(inv, cx, cy);
      const double sx = (sx_c + 0.5) / coord_scale - 0.5;
      const double sy = (sy_c + 0.5) / coord_scale - 0.5;
      bilinear_taps(sx, sy, h, w, /*clamp=*/false, taps);
      const int row = y * w + x;
      for (const Tap& tap : taps) trips.emplace_back(row, tap.idx, tap.weight);
    }
  }
  SparseMap plan(h * w, h * w);
  plan.setFromTriplets(trips.begin(), trips.end());
  return plan;
}

Matrix apply_plan(const Matrix& channels, const SparseMap& plan) {
  return (plan * channels.transpose()).transpose();
}

Image resize_bilinear(const Image& img, int h_out, int w_out) {
  if (img.h == h_out && img.w == w_out) return img;
  Image out;
  out.h = h_out;
  out.w = w_out;
  out.c = img.c;
  out.data = apply_plan(img.data, bilinear_plan(img.h, img.w, h_out, w_out));
  return out;
}

Image apply_affine_image(const Image& img, const AffineTransform& t) {
  if (t.kind == AffineTransform::Kind::Identity) return img;
  Image out = img;
  AffineTransform tt = t;
  tt.canvas_h = img.h;
  tt.canvas_w = img.w;
  out.data = apply_plan(img.data, affine_plan(img.h, img.w, tt, 1.0));
  return out;
}

// --- PNG --------------------------------------------------------------------

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ManifestError("cannot open PNG: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ManifestError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  color = png_get_color_type(png, info);
  const int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  std::vector<png_byte> rowbuf(static_cast<std::size_t>(w) * channels);

  Image img = Image::zeros(static_cast<int>(h), static_cast<int>(w), channels);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, rowbuf.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int ch = 0; ch < channels; ++ch) {
        img.data(ch, y * w + x) = rowbuf[x * channels + ch] / 255.0;
      }
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void save_png(const std::string& path, const Image& img) {
  if (img.c != 1 && img.c != 3) throw ShapeError("save_png expects 1 or 3 channels");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw ManifestError("cannot write PNG: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ManifestError("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.w, img.h, 8,
               img.c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> rowbuf(static_cast<std::size_t>(img.w) * img.c);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      for (int ch = 0; ch < img.c; ++ch) {
        const double v = std::clamp(img.data(ch, y * img.w + x), 0.0, 1.0);
        rowbuf[x * img.c + ch] = static_cast<png_byte>(std::lround(v * 255.0));
      }
    }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Matrix load_png_gray(const std::string& path) {
  Image img = load_png(path);
  Matrix gray(img.h, img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      double v = 0.0;
      for (int ch = 0; ch < img.c; ++ch) v += img.data(ch, y * img.w + x);
      gray(y, x) = v / img.c;
    }
  }
  return gray;
}

void save_png_gray(const std::string& path, const Matrix& gray) {
  Image img;
  img.h = static_cast<int>(gray.rows());
  img.w = static_cast<int>(gray.cols());
  img.c = 1;
  img.data.resize(1, img.h * img.w);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) img.data(0, y * img.w + x) = gray(y, x);
  }
  save_png(path, img);
}

void save_f32(const std::string& path, const Matrix& gray) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ManifestError("cannot write: " + path);
  const char magic[8] = {'S', 'A', 'L', 'F', '3', '2', '\n', 0};
  out.write(magic, 8);
  const std::int32_t h = static_cast<std::int32_t>(gray.rows());
  const std::int32_t w = static_cast<std::int32_t>(gray.cols());
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = static_cast<float>(gray(y, x));
      out.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
}

Matrix load_f32(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, "SALF32\n", 7) != 0) throw ManifestError("bad f32 header: " + path);
  std::int32_t h = 0, w = 0;
  in.read(reinterpret_cast<char*>(&h), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  Matrix gray(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float v = 0;
      in.read(reinterpret_cast<char*>(&v), 4);
      gray(y, x) = v;
    }
  }
  return gray;
}

}  // namespace salsketch
