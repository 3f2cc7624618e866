#include "salsketch/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace salsketch {

namespace {

// 5x7 glyphs, one byte per column, bit 0 = top row.
struct Glyph {
  char ch;
  std::uint8_t col[5];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'%', {0x23, 0x13, 0x08, 0x64, 0x62}},
    {'(', {0x00, 0x1C, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1C, 0x00}},
    {'+', {0x08, 0x08, 0x3E, 0x08, 0x08}}, {',', {0x00, 0x50, 0x30, 0x00, 0x00}},
    {'-', {0x08, 0x08, 0x08, 0x08, 0x08}}, {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
    {'/', {0x20, 0x10, 0x08, 0x04, 0x02}}, {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
    {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}}, {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
    {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}}, {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
    {'5', {0x27, 0x45, 0x45, 0x45, 0x39}}, {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
    {'7', {0x01, 0x71, 0x09, 0x05, 0x03}}, {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
    {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}}, {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
    {'=', {0x14, 0x14, 0x14, 0x14, 0x14}}, {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
    {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}}, {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
    {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}}, {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
    {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}}, {'G', {0x3E, 0x41, 0x49, 0x49, 0x3A}},
    {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}}, {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
    {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}}, {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
    {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}}, {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
    {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}}, {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
    {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}}, {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
    {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}}, {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
    {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}}, {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
    {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}}, {'W', {0x7F, 0x20, 0x18, 0x20, 0x7F}},
    {'X', {0x63, 0x14, 0x08, 0x14, 0x63}}, {'Y', {0x03, 0x04, 0x78, 0x04, 0x03}},
    {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}}, {'_', {0x40, 0x40, 0x40, 0x40, 0x40}},
};

const std::uint8_t* glyph_for(char c) {
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  for (const Glyph& g : kFont)
    if (g.ch == c) return g.col;
  return kFont[0].col;  // unknown -> blank
}

const Rgb kPalette[] = {
    {0.84, 0.15, 0.16}, {0.12, 0.47, 0.71}, {0.17, 0.63, 0.17}, {0.58, 0.40, 0.74},
    {1.00, 0.50, 0.05}, {0.55, 0.34, 0.29}, {0.89, 0.47, 0.76}, {0.50, 0.50, 0.50},
};

}  // namespace

Canvas::Canvas(int w, int h, Rgb background) : img_(Image::zeros(h, w, 3)) {
  for (int k = 0; k < w * h; ++k) {
    img_.data(0, k) = background.r;
    img_.data(1, k) = background.g;
    img_.data(2, k) = background.b;
  }
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= img_.w || y >= img_.h) return;
  img_.at(0, y, x) = c.r;
  img_.at(1, y, x) = c.g;
  img_.at(2, y, x) = c.b;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  if (x1 < x0) std::swap(x0, x1);
  if (y1 < y0) std::swap(y0, y1);
  for (int y = std::max(0, y0); y <= std::min(img_.h - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(img_.w - 1, x1); ++x) set(x, y, c);
}

void Canvas::line(double x0, double y0, double x1, double y1, Rgb c) {
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    set(static_cast<int>(std::lround(x0 + t * dx)), static_cast<int>(std::lround(y0 + t * dy)), c);
  }
}

void Canvas::text(int x, int y, const std::string& s, Rgb c, int scale) {
  int cx = x;
  for (char ch : s) {
    const std::uint8_t* g = glyph_for(ch);
    for (int col = 0; col < 5; ++col)
      for (int row = 0; row < 7; ++row)
        if (g[col] & (1u << row))
          fill_rect(cx + col * scale, y + row * scale, cx + col * scale + scale - 1,
                    y + row * scale + scale - 1, c);
    cx += 6 * scale;
  }
}

int Canvas::text_width(const std::string& s, int scale) {
  return static_cast<int>(s.size()) * 6 * scale;
}

void Canvas::save(const std::string& path) const { save_png(path, img_); }

void plot_pr_curves(const std::vector<std::pair<std::string, std::vector<PrPoint>>>& curves,
                    const std::string& path) {
  const int w = 560, h = 480, ml = 56, mr = 20, mt = 28, mb = 44;
  const int pw = w - ml - mr, ph = h - mt - mb;
  Canvas cv(w, h);
  const Rgb black{0, 0, 0}, gray{0.82, 0.82, 0.82};

  for (int k = 0; k <= 10; ++k) {
    const int gx = ml + k * pw / 10, gy = mt + k * ph / 10;
    cv.line(gx, mt, gx, mt + ph, gray);
    cv.line(ml, gy, ml + pw, gy, gray);
  }
  cv.line(ml, mt, ml, mt + ph, black);
  cv.line(ml, mt + ph, ml + pw, mt + ph, black);
  for (int k = 0; k <= 10; k += 2) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%.1f", k / 10.0);
    cv.text(ml + k * pw / 10 - 8, mt + ph + 6, buf, black);
    cv.text(ml - 26, mt + (10 - k) * ph / 10 - 3, buf, black);
  }
  cv.text(ml + pw / 2 - Canvas::text_width("RECALL") / 2, h - 14, "RECALL", black);
  cv.text(4, mt - 14, "PRECISION", black);

  int li = 0;
  for (const auto& [label, pts] : curves) {
    const Rgb col = kPalette[li % (sizeof(kPalette) / sizeof(kPalette[0]))];
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const auto px = [&](const PrPoint& p) { return ml + p.recall * pw; };
      const auto py = [&](const PrPoint& p) { return mt + (1.0 - p.precision) * ph; };
      cv.line(px(pts[i - 1]), py(pts[i - 1]), px(pts[i]), py(pts[i]), col);
    }
    const int ly = mt + 8 + 12 * li;
    cv.fill_rect(ml + 8, ly, ml + 24, ly + 2, col);
    cv.text(ml + 30, ly - 2, label, black);
    ++li;
  }
  cv.save(path);
}

void plot_bars(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
               const std::string& path) {
  const int n = std::max<int>(1, static_cast<int>(bars.size()));
  const int bw = 46, gap = 18, ml = 52, mr = 20, mt = 34, mb = 72;
  const int w = ml + mr + n * bw + (n + 1) * gap, h = 360;
  const int ph = h - mt - mb;
  Canvas cv(w, h);
  const Rgb black{0, 0, 0}, gray{0.82, 0.82, 0.82};

  for (int k = 0; k <= 10; ++k) cv.line(ml, mt + k * ph / 10, w - mr, mt + k * ph / 10, gray);
  cv.line(ml, mt, ml, mt + ph, black);
  cv.line(ml, mt + ph, w - mr, mt + ph, black);
  for (int k = 0; k <= 10; k += 2) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%.1f", k / 10.0);
    cv.text(ml - 26, mt + (10 - k) * ph / 10 - 3, buf, black);
  }
  cv.text(ml, 10, title, black);

  int i = 0;
  for (const auto& [label, value] : bars) {
    const double v = std::clamp(value, 0.0, 1.0);
    const int x0 = ml + gap + i * (bw + gap);
    const int top = mt + static_cast<int>(std::lround((1.0 - v) * ph));
    cv.fill_rect(x0, top, x0 + bw - 1, mt + ph - 1, kPalette[i % 8]);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", value);
    cv.text(x0 + bw / 2 - Canvas::text_width(buf) / 2, top - 10, buf, black);
    // Vertical label below the bar, one character per row.
    int ty = mt + ph + 6;
    for (char ch : label) {
      cv.text(x0 + bw / 2 - 3, ty, std::string(1, ch), black);
      ty += 8;
      if (ty > h - 10) break;
    }
    ++i;
  }
  cv.save(path);
}

Image overlay_attention(const Image& photo, const Matrix& grid, double strength) {
  const double mx = grid.maxCoeff();
  Matrix norm = mx > 0 ? Matrix(grid / mx) : Matrix(Matrix::Zero(grid.rows(), grid.cols()));
  Matrix row(1, norm.size());
  for (Eigen::Index i = 0; i < norm.rows(); ++i)
    for (Eigen::Index j = 0; j < norm.cols(); ++j) row(0, i * norm.cols() + j) = norm(i, j);
  Matrix up = apply_plan(row, bilinear_plan(static_cast<int>(norm.rows()),
                                            static_cast<int>(norm.cols()), photo.h, photo.w));
  Image out = photo;
  for (int k = 0; k < photo.h * photo.w; ++k) {
    const double a = strength * up(0, k);
    out.data(0, k) = (1.0 - a) * photo.data(0, k) + a * 1.0;
    out.data(1, k) = (1.0 - a) * photo.data(1, k);
    out.data(2, k) = (1.0 - a) * photo.data(2, k);
  }
  return out;
}

}  // namespace salsketch
