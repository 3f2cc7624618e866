#pragma once

#include <random>
#include <string>
#include <vector>

#include "salsketch/config.hpp"
#include "salsketch/image.hpp"

namespace salsketch {

struct PhotoSample {
  Image pixels;  // 3 x (h*w), values in [0,1]
  std::string id;
};

struct PairedSample {
  PhotoSample photo;
  SketchSequence sketch;            // raw pixel offsets, scale_factor 1
  std::vector<AbsPoint> sketch_abs;
  Matrix gt_mask;                   // h x w of {0,1}; empty when unavailable
  bool has_mask() const { return gt_mask.size() > 0; }
};

struct ManifestEntry {
  std::string photo;  // file name under photos_dir
  int sketch_idx = 0;
  std::string split;  // "train", "val" or "test"
};

struct DatasetManifest {
  std::string photos_dir;
  std::string sketches_ndjson;
  std::string masks_dir;  // optional; same file names as the photos
  std::vector<ManifestEntry> entries;
  std::string base_dir;  // directory the manifest was loaded from (not serialized)

  std::string resolve_photo(const ManifestEntry& e) const;
  std::string resolve_mask(const ManifestEntry& e) const;
  std::string resolve_sketches() const;
  bool has_masks() const { return !masks_dir.empty(); }
};

// Verifies every referenced file exists; entry order is file order.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

// One filled colored shape over a textured background, its outline as a
// single-stroke sketch (simplified polyline), and the filled region as mask.
// Bit-deterministic in (seed, cfg).
PairedSample generate_synthetic_pair(std::uint64_t seed, const SynthConfig& cfg);

// Generates the full train/val/test corpus under out_dir: photos/, masks/,
// sketches.ndjson and manifest.json. Per-sample seeds derive from `seed`.
DatasetManifest write_synthetic_dataset(const SynthConfig& cfg, std::uint64_t seed,
                                        const std::string& out_dir);

std::vector<PairedSample> load_pairs(const DatasetManifest& m, const std::string& split);

PhotoSample resize_photo(const PhotoSample& photo, int side);

// Draws one transform kind by weight, then its parameter. Every call consumes
// the same number of rng draws regardless of the kind picked.
AffineTransform sample_affine(std::mt19937_64& rng, const AffineConfig& cfg, int canvas_h,
                              int canvas_w);

}  // namespace salsketch
