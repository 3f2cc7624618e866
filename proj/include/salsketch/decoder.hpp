#pragma once

#include <random>

#include "salsketch/encoder.hpp"
#include "salsketch/sketch.hpp"

namespace salsketch {

// Activated mixture parameters for one step.
struct GmmParams {
  Vector pi;
  Vector mu_x;
  Vector mu_y;
  Vector sigma_x;
  Vector sigma_y;
  Vector rho;
  Eigen::Vector3d pen_logits = Eigen::Vector3d::Zero();

  int components() const { return static_cast<int>(pi.size()); }
  void validate() const;  // throws InvalidParams
};

inline constexpr double kSigmaRawClamp = 10.0;
inline constexpr double kRhoLimit = 1.0 - 1e-6;

void register_decoder_params(ParamStore& ps, const ModelConfig& cfg);

struct StepOut {
  DecoderState state;
  ad::Var y;  // raw head output, head_dim x 1
};

// One recurrent update with input [g_t; v_prev] followed by the linear head.
StepOut decoder_step(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                     const DecoderState& state, ad::Var g, ad::Var v_prev);

// Raw head vector -> activated parameters. Layout for the full head:
// [pi logits | mu_x | mu_y | sigma_x raw | sigma_y raw | rho raw | pen(3)].
GmmParams split_output(const Vector& y, int m, const Ablations& abl = {});

double gmm_log_density(double dx, double dy, const GmmParams& g);

Stroke5Point sample_step(const Vector& y, const ModelConfig& cfg, std::mt19937_64& rng,
                         double temperature, bool greedy);

inline Stroke5Point start_token() { return Stroke5Point{0.0, 0.0, 1.0, 0.0, 0.0}; }

}  // namespace salsketch
