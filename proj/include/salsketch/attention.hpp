#pragma once

#include <memory>
#include <utility>

#include "salsketch/encoder.hpp"

namespace salsketch {

// State-independent pieces reused across decoding steps: the 3x3 projections
// of each pyramid level and the downscale plans onto the coarsest grid.
struct AttentionBase {
  ad::Var conv_l;
  ad::Var conv_lm1;
  ad::Var conv_lm2;
  int side_l = 0;
  int side_lm1 = 0;
  int side_lm2 = 0;
  std::shared_ptr<const SparseMap> down2;
  std::shared_ptr<const SparseMap> down4;
};

// B^k_t for one step: base conv plus the projected state broadcast spatially.
struct InformedMaps {
  ad::Var b_l;
  ad::Var b_lm1;
  ad::Var b_lm2;
};

void register_attention_params(ParamStore& ps, const ModelConfig& cfg);

AttentionBase attention_base(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                             const Pyramid& pyr);

InformedMaps inform_from_base(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                              const AttentionBase& base, ad::Var h_prev);

// Convenience composition of the two stages above.
InformedMaps inform_feature_maps(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                 const Pyramid& pyr, ad::Var h_prev);

// Downscale the finer maps onto the coarsest grid and sum. Spatial sides must
// be in ratio 1:2:4.
ad::Var fuse_multiscale(ad::Tape& t, const ModelConfig& cfg, const AttentionBase& base,
                        const InformedMaps& maps);

// Returns (alpha: 1 x hw attention row, g: d x 1 context vector).
std::pair<ad::Var, ad::Var> attend(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                   ad::Var fused, int grid_side, ad::Var h_prev);

}  // namespace salsketch
