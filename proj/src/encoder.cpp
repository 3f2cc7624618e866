#include "salsketch/encoder.hpp"

#include <algorithm>
#include <vector>

namespace salsketch {

namespace {

struct ConvPlanStep {
  std::string name;
  int c_out = 0;
  int stride = 1;
  bool pool_after = false;
  int tap_after = -1;  // 0 = f_lm2, 1 = f_lm1, 2 = f_l
};

// Backbone layouts. tiny: six 3x3 convs (two strided stem convs, then three
// pooled stages). full: the 13-conv arrangement with taps at the last three
// pooling outputs.
std::vector<ConvPlanStep> backbone_plan(const ModelConfig& cfg) {
  std::vector<ConvPlanStep> plan;
  auto conv = [&](int c_out, int stride = 1, bool pool = false, int tap = -1) {
    ConvPlanStep s;
    s.name = "enc.conv" + std::to_string(plan.size());
    s.c_out = c_out;
    s.stride = stride;
    s.pool_after = pool;
    s.tap_after = tap;
    plan.push_back(s);
  };
  if (cfg.backbone == "tiny") {
    conv(cfg.c_lm2, 2);
    conv(cfg.c_lm2, 2);
    conv(cfg.c_lm2, 1, true, 0);
    conv(cfg.c_lm1, 1, true, 1);
    conv(cfg.c_l);
    conv(cfg.c_l, 1, true, 2);
  } else {
    const int b1 = std::max(1, cfg.c_lm2 / 4);
    const int b2 = std::max(1, cfg.c_lm2 / 2);
    conv(b1);
    conv(b1, 1, true);
    conv(b2);
    conv(b2, 1, true);
    conv(cfg.c_lm2);
    conv(cfg.c_lm2);
    conv(cfg.c_lm2, 1, true, 0);
    conv(cfg.c_lm1);
    conv(cfg.c_lm1);
    conv(cfg.c_lm1, 1, true, 1);
    conv(cfg.c_l);
    conv(cfg.c_l);
    conv(cfg.c_l, 1, true, 2);
  }
  return plan;
}

}  // namespace

void register_encoder_params(ParamStore& ps, const ModelConfig& cfg) {
  int c_in = 3;
  for (const auto& s : backbone_plan(cfg)) {
    ps.add(s.name + ".w", s.c_out, static_cast<Eigen::Index>(c_in) * 9);
    ps.add(s.name + ".b", s.c_out, 1, ParamInit::Zero);
    c_in = s.c_out;
  }
  ps.add("enc.wk", cfg.d_h, cfg.c_l);
  ps.add("enc.bk", cfg.d_h, 1, ParamInit::Zero);
  ps.add("enc.wc", cfg.d_h, cfg.c_l);
  ps.add("enc.bc", cfg.d_h, 1, ParamInit::Zero);
}

Pyramid encode(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg, const Image& photo) {
  if (photo.c != 3) throw ShapeError("encode: photo must have 3 channels");
  if (photo.h != photo.w || photo.h % 32 != 0) {
    throw ShapeError("encode: side must be square and divisible by 32, got " +
                     std::to_string(photo.h) + "x" + std::to_string(photo.w));
  }
  Pyramid pyr;
  ad::Var x = t.constant(photo.data);
  int side = photo.h;
  int c_in = 3;
  for (const auto& s : backbone_plan(cfg)) {
    ad::ConvSpec spec;
    spec.c_in = c_in;
    spec.h = side;
    spec.w = side;
    spec.stride = s.stride;
    x = relu_(ad::conv2d(x, p.at(s.name + ".w"), p.at(s.name + ".b"), spec));
    side = spec.out_h();
    c_in = s.c_out;
    if (s.pool_after) {
      x = ad::maxpool2(x, side, side);
      side /= 2;
    }
    if (s.tap_after == 0) {
      pyr.f_lm2 = x;
      pyr.side_lm2 = side;
    } else if (s.tap_after == 1) {
      pyr.f_lm1 = x;
      pyr.side_lm1 = side;
    } else if (s.tap_after == 2) {
      pyr.f_l = x;
      pyr.side_l = side;
    }
  }
  return pyr;
}

ad::Var global_pool(ad::Tape& t, const Pyramid& pyr) {
  const Eigen::Index n = pyr.f_l.cols();
  Matrix ones = Matrix::Constant(n, 1, 1.0 / static_cast<double>(n));
  return ad::matmul(pyr.f_l, t.constant(std::move(ones)));
}

DecoderState init_decoder_state(ad::Tape& t, const BoundParams& p, ad::Var f_g) {
  (void)t;
  DecoderState s;
  s.h = tanh_(ad::matmul(p.at("enc.wk"), f_g) + p.at("enc.bk"));
  s.c = tanh_(ad::matmul(p.at("enc.wc"), f_g) + p.at("enc.bc"));
  return s;
}

int import_backbone(ParamStore& dst, const ParamStore& src) {
  int n = 0;
  for (const auto& name : dst.order()) {
    if (name.rfind("enc.conv", 0) != 0 || !src.has(name)) continue;
    const Matrix& from = src.at(name);
    Matrix& to = dst.at(name);
    if (from.rows() != to.rows() || from.cols() != to.cols()) {
      throw InvalidParams("import_backbone: shape mismatch for \"" + name + "\"");
    }
    to = from;
    ++n;
  }
  return n;
}

}  // namespace salsketch
