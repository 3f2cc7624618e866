#pragma once

#include <string>
#include <vector>

#include "salsketch/model.hpp"

namespace salsketch {

// Adam moment buffers, aligned with the parameter registration order.
struct AdamState {
  long t = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState zeros_like(const ParamStore& ps);
};

struct CheckpointMeta {
  TrainConfig config;
  int epoch = 0;
  long global_step = 0;
  double offset_scale = 1.0;
  std::string rng_state;  // serialized mt19937_64
};

// Single binary archive: JSON header (config, fingerprint, counters, rng,
// parameter directory) followed by the raw parameter and optimizer arrays.
// Same-platform round-trips are bit-exact.
void save_checkpoint(const std::string& path, const SketchModel& model, const CheckpointMeta& meta,
                     const AdamState* opt = nullptr);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  SketchModel model;
  AdamState opt;
  bool has_opt = false;
};

// Rebuilds the model from the stored config; verifies the fingerprint and
// every array shape.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace salsketch
