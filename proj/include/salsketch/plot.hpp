#pragma once

#include <string>
#include <vector>

#include "salsketch/image.hpp"
#include "salsketch/metrics.hpp"

namespace salsketch {

struct Rgb {
  double r = 0.0, g = 0.0, b = 0.0;
};

// Minimal raster canvas: filled shapes, 1px lines and a 5x7 bitmap font.
// Coordinates are (x, y) pixels with y pointing down.
class Canvas {
 public:
  Canvas(int w, int h, Rgb background = {1, 1, 1});

  int width() const { return img_.w; }
  int height() const { return img_.h; }
  const Image& image() const { return img_; }

  void set(int x, int y, Rgb c);
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  void line(double x0, double y0, double x1, double y1, Rgb c);
  void text(int x, int y, const std::string& s, Rgb c, int scale = 1);
  static int text_width(const std::string& s, int scale = 1);

  void save(const std::string& path) const;

 private:
  Image img_;
};

// One curve per label, recall on x and precision on y, with axes and legend.
void plot_pr_curves(const std::vector<std::pair<std::string, std::vector<PrPoint>>>& curves,
                    const std::string& path);

// Labeled vertical bars for score comparisons, y in [0, 1].
void plot_bars(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
               const std::string& path);

// Red heat overlay of a (renormalized) attention grid on the photo.
Image overlay_attention(const Image& photo, const Matrix& grid, double strength = 0.6);

}  // namespace salsketch
