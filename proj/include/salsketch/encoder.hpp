#pragma once

#include "salsketch/ad.hpp"
#include "salsketch/config.hpp"
#include "salsketch/image.hpp"
#include "salsketch/params.hpp"

namespace salsketch {

// Feature maps as channel-row matrices (c x side^2), coarsest first.
struct Pyramid {
  ad::Var f_l;    // /32
  ad::Var f_lm1;  // /16
  ad::Var f_lm2;  // /8
  int side_l = 0;
  int side_lm1 = 0;
  int side_lm2 = 0;
};

struct DecoderState {
  ad::Var h;
  ad::Var c;
};

void register_encoder_params(ParamStore& ps, const ModelConfig& cfg);

// Backbone forward pass; accepts any RGB input with side divisible by 32.
Pyramid encode(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg, const Image& photo);

// Per-channel spatial mean of the coarsest map: the global descriptor f_g.
ad::Var global_pool(ad::Tape& t, const Pyramid& pyr);

// h_0 = tanh(W_k f_g + b_k), c_0 = tanh(W_c f_g + b_c).
DecoderState init_decoder_state(ad::Tape& t, const BoundParams& p, ad::Var f_g);

// Copies matching backbone entries (enc.conv*) from another store; returns the
// number of arrays imported. Shape mismatches throw InvalidParams.
int import_backbone(ParamStore& dst, const ParamStore& src);

}  // namespace salsketch
