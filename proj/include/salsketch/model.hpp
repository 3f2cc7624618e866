#pragma once

#include <random>
#include <vector>

#include "salsketch/attention.hpp"
#include "salsketch/decoder.hpp"

namespace salsketch {

class SketchModel {
 public:
  explicit SketchModel(const ModelConfig& cfg, std::uint64_t init_seed = 1);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Divisor used when converting generated offsets back to canvas pixels;
  // a dataset statistic carried alongside the weights.
  double offset_scale() const { return offset_scale_; }
  void set_offset_scale(double s);

  struct Unroll {
    std::vector<ad::Var> ys;      // raw head outputs, one per computed step
    std::vector<ad::Var> alphas;  // attention rows, 1 x hw
    int grid_side = 0;
  };

  // Teacher forcing: step t consumes the ground-truth point t-1 (start token
  // at t=1). Computes the valid steps only unless `steps` overrides.
  Unroll unroll_teacher_forced(ad::Tape& t, const BoundParams& p, const Image& photo,
                               const PaddedSketch& gt, int steps = -1) const;

  struct Generated {
    SketchSequence seq;
    std::vector<Matrix> alphas;  // 1 x hw rows
    int grid_side = 0;
  };

  // Free-running sampling; stops at the first sampled end state or at t_max.
  Generated generate(const Image& photo, std::mt19937_64& rng, double temperature, bool greedy,
                     int t_max = -1) const;

 private:
  ModelConfig cfg_;
  ParamStore params_;
  double offset_scale_ = 1.0;
};

}  // namespace salsketch
