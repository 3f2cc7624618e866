#pragma once

#include <utility>
#include <vector>

#include "salsketch/common.hpp"

namespace salsketch {

// One point of an absolute-coordinate sketch. `b == 1` marks the start of a
// new stroke; coordinates live on an H x W pixel canvas.
struct AbsPoint {
  double x = 0.0;
  double y = 0.0;
  int b = 0;
};

// One point of the offset (stroke-5) encoding: offsets to the next point plus
// a 3-way pen state. As a label the pen state is one-hot: p1 = pen down,
// p2 = pen lift (next point starts a new stroke), p3 = end of drawing.
struct Stroke5Point {
  double dx = 0.0;
  double dy = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double p3 = 0.0;
};

struct SketchSequence {
  std::vector<Stroke5Point> points;
  int canvas_h = 0;
  int canvas_w = 0;
  double scale_factor = 1.0;  // divisor already applied to the offsets

  int length() const { return static_cast<int>(points.size()); }
};

struct AffineTransform {
  enum class Kind { Identity, HFlip, VFlip, Rotate, Scale };

  Kind kind = Kind::Identity;
  double angle_deg = 0.0;  // Rotate only
  double factor = 1.0;     // Scale only, > 0
  int canvas_h = 0;
  int canvas_w = 0;

  AffineTransform inverse() const;

  static AffineTransform identity(int h, int w) { return {Kind::Identity, 0, 1, h, w}; }
  static AffineTransform hflip(int h, int w) { return {Kind::HFlip, 0, 1, h, w}; }
  static AffineTransform vflip(int h, int w) { return {Kind::VFlip, 0, 1, h, w}; }
  static AffineTransform rotate(double deg, int h, int w) { return {Kind::Rotate, deg, 1, h, w}; }
  static AffineTransform scale(double f, int h, int w) { return {Kind::Scale, 0, f, h, w}; }
};

// Maps a single (x, y) canvas coordinate through the transform. Flips and
// rotation act about the canvas center ((w-1)/2, (h-1)/2); scaling acts about
// the canvas origin. Positive angles rotate x-towards-y (clockwise on screen
// with y pointing down).
std::pair<double, double> affine_apply_point(const AffineTransform& t, double x, double y);

// Converts an absolute-coordinate sketch into the stroke-5 offset encoding.
// Output has points.size() - 1 offset points followed by one end-of-drawing
// marker; offsets are divided by scale_factor. Throws InvalidSketch for fewer
// than two points or non-finite coordinates.
SketchSequence absolute_to_offsets(const std::vector<AbsPoint>& sketch, int canvas_h, int canvas_w,
                                   double scale_factor);

// Inverse of absolute_to_offsets: cumulative sum of de-normalized offsets
// starting at `origin`. Stroke tokens are rebuilt from pen states.
std::vector<AbsPoint> offsets_to_absolute(const SketchSequence& seq,
                                          std::pair<double, double> origin);

// Ramer-Douglas-Peucker simplification. Keeps both endpoints; every removed
// point lies within epsilon of the simplified chain.
std::vector<std::pair<double, double>> rdp_simplify(
    const std::vector<std::pair<double, double>>& polyline, double epsilon);

struct RasterResult {
  Matrix pixels;         // h x w, values 0 or 1
  bool clamped = false;  // true if any input point fell outside the canvas
};

// Draws width-`line_width` digital line segments between consecutive points of
// the same stroke. Points separated by a b=1 token are not connected.
RasterResult rasterize(const std::vector<AbsPoint>& sketch, int canvas_h, int canvas_w,
                       int line_width = 1);

// Applies `t` to every coordinate; stroke tokens are unchanged. Transformed
// points may leave the canvas (rasterize clamps and flags them).
std::vector<AbsPoint> apply_affine_sketch(const std::vector<AbsPoint>& sketch,
                                          const AffineTransform& t);

struct PaddedSketch {
  Matrix points;  // t_max x 5 rows of (dx, dy, p1, p2, p3); zero past the end
  Vector mask;    // t_max entries, 1 for valid steps
  int valid_len = 0;
};

// Zero-pads to t_max and returns the validity mask. Valid-step values are
// copied verbatim. Throws SequenceTooLong when the sequence does not fit.
PaddedSketch pad_and_mask(const SketchSequence& seq, int t_max);

// Population standard deviation of all dx and dy values pooled across the
// dataset; the divisor used to make offsets scale-agnostic. Throws
// DegenerateDataset when every offset is zero.
double compute_offset_scale(const std::vector<SketchSequence>& dataset);

// --- NDJSON interchange -----------------------------------------------------
// One record per line: {"canvas": [H, W], "strokes": [[[x, y], ...], ...]}.

struct SketchRecord {
  int canvas_h = 0;
  int canvas_w = 0;
  std::vector<std::vector<std::pair<double, double>>> strokes;
};

std::vector<AbsPoint> record_to_abs(const SketchRecord& rec);
SketchRecord abs_to_record(const std::vector<AbsPoint>& sketch, int canvas_h, int canvas_w);

std::vector<SketchRecord> read_sketch_ndjson(const std::string& path);
void write_sketch_ndjson(const std::string& path, const std::vector<SketchRecord>& records);

}  // namespace salsketch
