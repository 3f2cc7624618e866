#include "salsketch/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace salsketch {

using json = nlohmann::json;

AffineTransform AffineTransform::inverse() const {
  AffineTransform r = *this;
  switch (kind) {
    case Kind::Identity:
    case Kind::HFlip:
    case Kind::VFlip:
      break;  // involutions
    case Kind::Rotate:
      r.angle_deg = -angle_deg;
      break;
    case Kind::Scale:
      r.factor = 1.0 / factor;
      break;
  }
  return r;
}

std::pair<double, double> affine_apply_point(const AffineTransform& t, double x, double y) {
  const double cx = (t.canvas_w - 1) / 2.0;
  const double cy = (t.canvas_h - 1) / 2.0;
  switch (t.kind) {
    case AffineTransform::Kind::Identity:
      return {x, y};
    case AffineTransform::Kind::HFlip:
      return {(t.canvas_w - 1) - x, y};
    case AffineTransform::Kind::VFlip:
      return {x, (t.canvas_h - 1) - y};
    case AffineTransform::Kind::Rotate: {
      const double a = t.angle_deg * std::numbers::pi / 180.0;
      const double c = std::cos(a), s = std::sin(a);
      const double rx = x - cx, ry = y - cy;
      return {cx + c * rx - s * ry, cy + s * rx + c * ry};
    }
    case AffineTransform::Kind::Scale:
      return {t.factor * x, t.factor * y};
  }
  throw UnsupportedTransform("unknown transform kind");
}

SketchSequence absolute_to_offsets(const std::vector<AbsPoint>& sketch, int canvas_h, int canvas_w,
                                   double scale_factor) {
  if (sketch.size() < 2) throw InvalidSketch("need at least two absolute points");
  if (!(scale_factor > 0.0)) throw InvalidSketch("scale factor must be positive");
  for (const AbsPoint& p : sketch) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidSketch("non-finite coordinate");
  }

  SketchSequence seq;
  seq.canvas_h = canvas_h;
  seq.canvas_w = canvas_w;
  seq.scale_factor = scale_factor;
  seq.points.reserve(sketch.size());
  for (std::size_t i = 0; i + 1 < sketch.size(); ++i) {
    Stroke5Point p;
    p.dx = (sketch[i + 1].x - sketch[i].x) / scale_factor;
    p.dy = (sketch[i + 1].y - sketch[i].y) / scale_factor;
    if (sketch[i + 1].b == 1) {
      p.p2 = 1.0;  // next point opens a new stroke
    } else {
      p.p1 = 1.0;
    }
    seq.points.push_back(p);
  }
  Stroke5Point end;
  end.p3 = 1.0;
  seq.points.push_back(end);
  return seq;
}

std::vector<AbsPoint> offsets_to_absolute(const SketchSequence& seq,
                                          std::pair<double, double> origin) {
  std::vector<AbsPoint> out;
  out.reserve(seq.points.size());
  AbsPoint cur{origin.first, origin.second, 1};
  out.push_back(cur);
  for (const Stroke5Point& p : seq.points) {
    if (p.p3 >= 0.5) break;  // end of drawing; no further points
    AbsPoint next;
    next.x = cur.x + p.dx * seq.scale_factor;
    next.y = cur.y + p.dy * seq.scale_factor;
    next.b = (p.p2 >= 0.5) ? 1 : 0;
    out.push_back(next);
    cur = next;
  }
  return out;
}

namespace {

double point_segment_distance(const std::pair<double, double>& p,
                              const std::pair<double, double>& a,
                              const std::pair<double, double>& b) {
  const double vx = b.first - a.first, vy = b.second - a.second;
  const double len2 = vx * vx + vy * vy;
  if (len2 == 0.0) return std::hypot(p.first - a.first, p.second - a.second);
  // Perpendicular distance to the infinite chord, as in the classic algorithm.
  return std::abs(vy * (p.first - a.first) - vx * (p.second - a.second)) / std::sqrt(len2);
}

}  // namespace

std::vector<std::pair<double, double>> rdp_simplify(
    const std::vector<std::pair<double, double>>& polyline, double epsilon) {
  if (polyline.size() < 2) throw InvalidSketch("polyline needs at least two points");
  const std::size_t n = polyline.size();
  std::vector<char> keep(n, 0);
  keep[0] = 1;
  keep[n - 1] = 1;

  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n - 1}};
  while (!stack.empty()) {
    auto [lo, hi] = stack.back();
    stack.pop_back();
    if (hi <= lo + 1) continue;
    double best = -1.0;
    std::size_t best_i = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double d = point_segment_distance(polyline[i], polyline[lo], polyline[hi]);
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    if (best > epsilon) {
      keep[best_i] = 1;
      stack.push_back({lo, best_i});
      stack.push_back({best_i, hi});
    }
  }

  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(polyline[i]);
  }
  return out;
}

namespace {

void stamp(Matrix& img, int x, int y, int width) {
  const int lo = -(width - 1) / 2;
  const int hi = width / 2;
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) {
      const int px = x + dx, py = y + dy;
      if (px >= 0 && px < img.cols() && py >= 0 && py < img.rows()) img(py, px) = 1.0;
    }
  }
}

void draw_segment(Matrix& img, int x0, int y0, int x1, int y1, int width) {
  // Bresenham digital line.
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    stamp(img, x0, y0, width);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

RasterResult rasterize(const std::vector<AbsPoint>& sketch, int canvas_h, int canvas_w,
                       int line_width) {
  RasterResult res;
  res.pixels = Matrix::Zero(canvas_h, canvas_w);
  if (sketch.empty()) return res;

  std::vector<std::pair<int, int>> px(sketch.size());
  for (std::size_t i = 0; i < sketch.size(); ++i) {
    int x = static_cast<int>(std::lround(sketch[i].x));
    int y = static_cast<int>(std::lround(sketch[i].y));
    if (x < 0 || x >= canvas_w || y < 0 || y >= canvas_h) {
      res.clamped = true;
      x = std::clamp(x, 0, canvas_w - 1);
      y = std::clamp(y, 0, canvas_h - 1);
    }
    px[i] = {x, y};
  }

  stamp(res.pixels, px[0].first, px[0].second, line_width);
  for (std::size_t i = 0; i + 1 < sketch.size(); ++i) {
    if (sketch[i + 1].b == 1) {
      stamp(res.pixels, px[i + 1].first, px[i + 1].second, line_width);
      continue;  // new stroke, no connecting segment
    }
    draw_segment(res.pixels, px[i].first, px[i].second, px[i + 1].first, px[i + 1].second,
                 line_width);
  }
  return res;
}

std::vector<AbsPoint> apply_affine_sketch(const std::vector<AbsPoint>& sketch,
                                          const AffineTransform& t) {
  std::vector<AbsPoint> out;
  out.reserve(sketch.size());
  for (const AbsPoint& p : sketch) {
    auto [x, y] = affine_apply_point(t, p.x, p.y);
    out.push_back({x, y, p.b});
  }
  return out;
}

PaddedSketch pad_and_mask(const SketchSequence& seq, int t_max) {
  if (seq.length() > t_max) throw SequenceTooLong("sequence longer than t_max");
  PaddedSketch out;
  out.points = Matrix::Zero(t_max, 5);
  out.mask = Vector::Zero(t_max);
  out.valid_len = seq.length();
  for (int i = 0; i < seq.length(); ++i) {
    const Stroke5Point& p = seq.points[i];
    out.points.row(i) << p.dx, p.dy, p.p1, p.p2, p.p3;
    out.mask(i) = 1.0;
  }
  return out;
}

double compute_offset_scale(const std::vector<SketchSequence>& dataset) {
  if (dataset.empty()) throw DegenerateDataset("empty dataset");
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  for (const SketchSequence& seq : dataset) {
    for (const Stroke5Point& p : seq.points) {
      sum += p.dx + p.dy;
      sum2 += p.dx * p.dx + p.dy * p.dy;
      n += 2;
    }
  }
  if (n == 0) throw DegenerateDataset("dataset has no offsets");
  const double mean = sum / static_cast<double>(n);
  const double var = sum2 / static_cast<double>(n) - mean * mean;
  const double sd = std::sqrt(std::max(var, 0.0));
  if (sd <= 0.0) throw DegenerateDataset("all offsets are zero");
  return sd;
}

std::vector<AbsPoint> record_to_abs(const SketchRecord& rec) {
  std::vector<AbsPoint> out;
  for (const auto& stroke : rec.strokes) {
    bool first = true;
    for (const auto& [x, y] : stroke) {
      out.push_back({x, y, first ? 1 : 0});
      first = false;
    }
  }
  return out;
}

SketchRecord abs_to_record(const std::vector<AbsPoint>& sketch, int canvas_h, int canvas_w) {
  SketchRecord rec;
  rec.canvas_h = canvas_h;
  rec.canvas_w = canvas_w;
  for (const AbsPoint& p : sketch) {
    if (p.b == 1 || rec.strokes.empty()) rec.strokes.emplace_back();
    rec.strokes.back().push_back({p.x, p.y});
  }
  return rec;
}

std::vector<SketchRecord> read_sketch_ndjson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open sketch file: " + path);
  std::vector<SketchRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    SketchRecord rec;
    rec.canvas_h = j.at("canvas").at(0).get<int>();
    rec.canvas_w = j.at("canvas").at(1).get<int>();
    for (const auto& stroke : j.at("strokes")) {
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : stroke) {
        pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      rec.strokes.push_back(std::move(pts));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_sketch_ndjson(const std::string& path, const std::vector<SketchRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ManifestError("cannot write sketch file: " + path);
  for (const SketchRecord& rec : records) {
    json strokes = json::array();
    for (const auto& stroke : rec.strokes) {
      json pts = json::array();
      for (const auto& [x, y] : stroke) pts.push_back({x, y});
      strokes.push_back(pts);
    }
    json j{{"canvas", {rec.canvas_h, rec.canvas_w}}, {"strokes", strokes}};
    out << j.dump() << "\n";
  }
}

}  // namespace salsketch
