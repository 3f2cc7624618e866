#include "salsketch/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace salsketch {

namespace {

using Pt = std::pair<double, double>;

double shoelace_area(const std::vector<Pt>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Pt& p = v[i];
    const Pt& q = v[(i + 1) % v.size()];
    a += p.first * q.second - q.first * p.second;
  }
  return std::abs(a) * 0.5;
}

std::vector<Pt> base_shape(const std::string& name, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Pt> v;
  if (name == "circle") {
    for (int k = 0; k < 24; ++k) {
      const double a = 2.0 * M_PI * k / 24;
      v.emplace_back(std::cos(a), std::sin(a));
    }
  } else if (name == "rectangle") {
    const double aspect = std::exp(unit(rng) * (std::log(2.0) - std::log(0.5)) + std::log(0.5));
    const double hw = std::sqrt(aspect) * 0.5, hh = 0.5 / std::sqrt(aspect);
    v = {{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}};
  } else if (name == "triangle") {
    for (int k = 0; k < 3; ++k) {
      const double a = M_PI / 2 + 2.0 * M_PI * k / 3 + (unit(rng) - 0.5) * (M_PI / 6);
      const double r = 0.8 + 0.4 * unit(rng);
      v.emplace_back(r * std::cos(a), r * std::sin(a));
    }
  } else if (name == "star") {
    for (int k = 0; k < 10; ++k) {
      const double a = M_PI / 2 + M_PI * k / 5;
      const double r = (k % 2 == 0) ? 1.0 : 0.45;
      v.emplace_back(r * std::cos(a), r * std::sin(a));
    }
  } else {
    throw ConfigError("unknown shape '" + name + "'");
  }
  return v;
}

bool point_in_polygon(const std::vector<Pt>& v, double px, double py) {
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    const double xi = v[i].first, yi = v[i].second;
    const double xj = v[j].first, yj = v[j].second;
    if ((yi > py) != (yj > py)) {
      const double xint = xi + (py - yi) * (xj - xi) / (yj - yi);
      if (px < xint) inside = !inside;
    }
  }
  return inside;
}

std::string join(const std::string& base, const std::string& rel) {
  if (rel.empty()) return rel;
  fs::path p(rel);
  if (p.is_absolute() || base.empty()) return rel;
  return (fs::path(base) / p).string();
}

}  // namespace

std::string DatasetManifest::resolve_photo(const ManifestEntry& e) const {
  return (fs::path(join(base_dir, photos_dir)) / e.photo).string();
}

std::string DatasetManifest::resolve_mask(const ManifestEntry& e) const {
  if (masks_dir.empty()) return {};
  return (fs::path(join(base_dir, masks_dir)) / e.photo).string();
}

std::string DatasetManifest::resolve_sketches() const { return join(base_dir, sketches_ndjson); }

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("manifest " + path + " does not parse: " + e.what());
  }
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  try {
    m.photos_dir = j.at("photos_dir").get<std::string>();
    m.sketches_ndjson = j.at("sketches_ndjson").get<std::string>();
    if (j.contains("masks_dir")) m.masks_dir = j.at("masks_dir").get<std::string>();
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.photo = je.at("photo").get<std::string>();
      e.sketch_idx = je.at("sketch_idx").get<int>();
      e.split = je.at("split").get<std::string>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("manifest " + path + " is missing fields: " + e.what());
  }
  if (!fs::exists(m.resolve_sketches()))
    throw ManifestError("manifest references absent sketch file " + m.resolve_sketches());
  for (const ManifestEntry& e : m.entries) {
    if (!fs::exists(m.resolve_photo(e)))
      throw ManifestError("manifest references absent photo " + m.resolve_photo(e));
    if (m.has_masks() && !fs::exists(m.resolve_mask(e)))
      throw ManifestError("manifest references absent mask " + m.resolve_mask(e));
  }
  return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["photos_dir"] = m.photos_dir;
  j["sketches_ndjson"] = m.sketches_ndjson;
  if (!m.masks_dir.empty()) j["masks_dir"] = m.masks_dir;
  auto entries = nlohmann::json::array();
  for (const ManifestEntry& e : m.entries)
    entries.push_back({{"photo", e.photo}, {"sketch_idx", e.sketch_idx}, {"split", e.split}});
  j["entries"] = std::move(entries);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

PairedSample generate_synthetic_pair(std::uint64_t seed, const SynthConfig& cfg) {
  cfg.validate();
  const int side = cfg.side;
  if (side < 16) throw ConfigError("canvas side too small for minimum shape size");
  if (cfg.shapes.empty()) throw ConfigError("empty shape vocabulary");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Background: base color + smooth low-frequency field + fine grain.
  Eigen::Vector3d base;
  for (int ch = 0; ch < 3; ++ch) base(ch) = 0.15 + 0.7 * unit(rng);
  Matrix coarse(3, 25);
  for (int ch = 0; ch < 3; ++ch)
    for (int k = 0; k < 25; ++k) coarse(ch, k) = (unit(rng) - 0.5) * cfg.texture_level;
  Matrix field = apply_plan(coarse, bilinear_plan(5, 5, side, side));

  Image photo = Image::zeros(side, side, 3);
  for (int ch = 0; ch < 3; ++ch)
    for (int k = 0; k < side * side; ++k) {
      const double grain = (unit(rng) - 0.5) * cfg.texture_level * 0.2;
      photo.data(ch, k) = std::clamp(base(ch) + field(ch, k) + grain, 0.0, 1.0);
    }

  // Shape placement: sampled area fraction (kept off the bounds so the
  // rasterized count stays inside them), rejected until the bbox fits.
  const double margin = 0.15 * (cfg.area_max - cfg.area_min);
  std::vector<Pt> poly;
  bool placed = false;
  for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
    const std::string& name =
        cfg.shapes[std::min<std::size_t>(static_cast<std::size_t>(unit(rng) * cfg.shapes.size()),
                                         cfg.shapes.size() - 1)];
    const double frac = cfg.area_min + margin + unit(rng) * (cfg.area_max - cfg.area_min - 2 * margin);
    std::vector<Pt> v = base_shape(name, rng);
    const double theta = 2.0 * M_PI * unit(rng);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (Pt& p : v) p = {p.first * ct - p.second * st, p.first * st + p.second * ct};
    const double s = std::sqrt(frac * side * side / shoelace_area(v));
    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (Pt& p : v) {
      p = {p.first * s, p.second * s};
      xmin = std::min(xmin, p.first);
      xmax = std::max(xmax, p.first);
      ymin = std::min(ymin, p.second);
      ymax = std::max(ymax, p.second);
    }
    const double bw = xmax - xmin, bh = ymax - ymin;
    if (bw > side - 5 || bh > side - 5) continue;
    const double cx = 2.0 + unit(rng) * (side - 5 - bw) - xmin;
    const double cy = 2.0 + unit(rng) * (side - 5 - bh) - ymin;
    for (Pt& p : v) p = {p.first + cx, p.second + cy};
    poly = std::move(v);
    placed = true;
  }
  if (!placed) throw ConfigError("canvas too small for the configured shape areas");

  // Fill color with enough contrast against the background base.
  Eigen::Vector3d col;
  bool found = false;
  for (int attempt = 0; attempt < 50 && !found; ++attempt) {
    for (int ch = 0; ch < 3; ++ch) col(ch) = 0.05 + 0.9 * unit(rng);
    found = (col - base).cwiseAbs().mean() >= cfg.min_contrast;
  }
  if (!found) col = Eigen::Vector3d::Ones() - base;

  PairedSample out;
  out.gt_mask = Matrix::Zero(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      if (!point_in_polygon(poly, x, y)) continue;
      out.gt_mask(y, x) = 1.0;
      const double grain = (unit(rng) - 0.5) * cfg.texture_level * 0.1;
      for (int ch = 0; ch < 3; ++ch)
        photo.data(ch, y * side + x) = std::clamp(col(ch) + grain, 0.0, 1.0);
    }
  out.photo.pixels = std::move(photo);

  // Outline: closed polyline from the topmost vertex, then simplified.
  std::size_t start = 0;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    if (poly[i].second < poly[start].second ||
        (poly[i].second == poly[start].second && poly[i].first < poly[start].first))
      start = i;
  }
  std::vector<Pt> chain;
  chain.reserve(poly.size() + 1);
  for (std::size_t i = 0; i <= poly.size(); ++i) chain.push_back(poly[(start + i) % poly.size()]);
  chain = rdp_simplify(chain, cfg.effective_rdp_epsilon());

  out.sketch_abs.reserve(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i)
    out.sketch_abs.push_back({chain[i].first, chain[i].second, i == 0 ? 1 : 0});
  out.sketch = absolute_to_offsets(out.sketch_abs, side, side, 1.0);
  return out;
}

DatasetManifest write_synthetic_dataset(const SynthConfig& cfg, std::uint64_t seed,
                                        const std::string& out_dir) {
  cfg.validate();
  fs::create_directories(fs::path(out_dir) / "photos");
  fs::create_directories(fs::path(out_dir) / "masks");

  DatasetManifest m;
  m.base_dir = out_dir;
  m.photos_dir = "photos";
  m.masks_dir = "masks";
  m.sketches_ndjson = "sketches.ndjson";

  const int total = cfg.n_train + cfg.n_val + cfg.n_test;
  std::vector<SketchRecord> records;
  records.reserve(total);
  for (int i = 0; i < total; ++i) {
    PairedSample s = generate_synthetic_pair(derive_seed(seed, static_cast<std::uint64_t>(i)), cfg);
    char name[32];
    std::snprintf(name, sizeof(name), "pair_%05d.png", i);
    ManifestEntry e;
    e.photo = name;
    e.sketch_idx = i;
    e.split = i < cfg.n_train ? "train" : (i < cfg.n_train + cfg.n_val ? "val" : "test");
    save_png((fs::path(out_dir) / "photos" / name).string(), s.photo.pixels);
    save_png_gray((fs::path(out_dir) / "masks" / name).string(), s.gt_mask);
    records.push_back(abs_to_record(s.sketch_abs, cfg.side, cfg.side));
    m.entries.push_back(std::move(e));
  }
  write_sketch_ndjson((fs::path(out_dir) / m.sketches_ndjson).string(), records);
  save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
  return m;
}

std::vector<PairedSample> load_pairs(const DatasetManifest& m, const std::string& split) {
  std::vector<SketchRecord> records = read_sketch_ndjson(m.resolve_sketches());
  std::vector<PairedSample> out;
  for (const ManifestEntry& e : m.entries) {
    if (e.split != split) continue;
    if (e.sketch_idx < 0 || e.sketch_idx >= static_cast<int>(records.size()))
      throw ManifestError("sketch_idx " + std::to_string(e.sketch_idx) + " out of range for " +
                          e.photo);
    PairedSample s;
    s.photo.pixels = load_png(m.resolve_photo(e));
    s.photo.id = fs::path(e.photo).stem().string();
    s.sketch_abs = record_to_abs(records[static_cast<std::size_t>(e.sketch_idx)]);
    s.sketch = absolute_to_offsets(s.sketch_abs, s.photo.pixels.h, s.photo.pixels.w, 1.0);
    if (m.has_masks()) {
      Matrix gray = load_png_gray(m.resolve_mask(e));
      s.gt_mask = (gray.array() > 0.5).cast<double>();
    }
    out.push_back(std::move(s));
  }
  return out;
}

PhotoSample resize_photo(const PhotoSample& photo, int side) {
  if (side <= 0) throw ConfigError("resize_photo: side must be positive");
  PhotoSample out;
  out.id = photo.id;
  out.pixels = resize_bilinear(photo.pixels, side, side);
  return out;
}

AffineTransform sample_affine(std::mt19937_64& rng, const AffineConfig& cfg, int canvas_h,
                              int canvas_w) {
  cfg.validate();
  const double total =
      cfg.hflip_weight + cfg.vflip_weight + cfg.rotate_weight + cfg.scale_weight;
  if (total <= 0.0) throw ConfigError("sample_affine: every transform weight is zero");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng) * total;
  const double param = unit(rng);  // consumed by every kind to keep the stream aligned
  if (u < cfg.hflip_weight) return AffineTransform::hflip(canvas_h, canvas_w);
  if (u < cfg.hflip_weight + cfg.vflip_weight) return AffineTransform::vflip(canvas_h, canvas_w);
  if (u < cfg.hflip_weight + cfg.vflip_weight + cfg.rotate_weight) {
    const double deg = cfg.rot_min_deg + param * (cfg.rot_max_deg - cfg.rot_min_deg);
    return AffineTransform::rotate(deg, canvas_h, canvas_w);
  }
  const double f = cfg.scale_min + param * (cfg.scale_max - cfg.scale_min);
  return AffineTransform::scale(f, canvas_h, canvas_w);
}

}  // namespace salsketch
