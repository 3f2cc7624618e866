#include "salsketch/attention.hpp"

namespace salsketch {

void register_attention_params(ParamStore& ps, const ModelConfig& cfg) {
  ps.add("att.wm0.w", cfg.d, static_cast<Eigen::Index>(cfg.c_l) * 9);
  ps.add("att.wm0.b", cfg.d, 1, ParamInit::Zero);
  if (!cfg.ablations.single_scale) {
    ps.add("att.wm1.w", cfg.d, static_cast<Eigen::Index>(cfg.c_lm1) * 9);
    ps.add("att.wm1.b", cfg.d, 1, ParamInit::Zero);
    ps.add("att.wm2.w", cfg.d, static_cast<Eigen::Index>(cfg.c_lm2) * 9);
    ps.add("att.wm2.b", cfg.d, 1, ParamInit::Zero);
  }
  ps.add("att.ws_hat", cfg.d, cfg.d_h);
  ps.add("att.wf.w", cfg.d, cfg.d);
  ps.add("att.wf.b", cfg.d, 1, ParamInit::Zero);
  if (!cfg.ablations.attention_1d) {
    ps.add("att.wb.w", cfg.d, static_cast<Eigen::Index>(cfg.d) * 9);
    ps.add("att.wb.b", cfg.d, 1, ParamInit::Zero);
  }
  ps.add("att.ws", cfg.d, cfg.d_h);
  ps.add("att.wa", cfg.d, 1);
}

AttentionBase attention_base(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                             const Pyramid& pyr) {
  (void)t;
  AttentionBase base;
  base.side_l = pyr.side_l;
  base.side_lm1 = pyr.side_lm1;
  base.side_lm2 = pyr.side_lm2;
  auto proj = [&](ad::Var f, int side, int c_in, const std::string& name) {
    ad::ConvSpec spec;
    spec.c_in = c_in;
    spec.h = side;
    spec.w = side;
    return ad::conv2d(f, p.at(name + ".w"), p.at(name + ".b"), spec);
  };
  base.conv_l = proj(pyr.f_l, pyr.side_l, cfg.c_l, "att.wm0");
  if (!cfg.ablations.single_scale) {
    base.conv_lm1 = proj(pyr.f_lm1, pyr.side_lm1, cfg.c_lm1, "att.wm1");
    base.conv_lm2 = proj(pyr.f_lm2, pyr.side_lm2, cfg.c_lm2, "att.wm2");
    base.down2 = std::make_shared<const SparseMap>(
        bilinear_plan(pyr.side_lm1, pyr.side_lm1, pyr.side_l, pyr.side_l));
    base.down4 = std::make_shared<const SparseMap>(
        bilinear_plan(pyr.side_lm2, pyr.side_lm2, pyr.side_l, pyr.side_l));
  }
  return base;
}

InformedMaps inform_from_base(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                              const AttentionBase& base, ad::Var h_prev) {
  (void)t;
  InformedMaps maps;
  ad::Var proj = ad::matmul(p.at("att.ws_hat"), h_prev);
  maps.b_l = ad::broadcast_add_col(base.conv_l, proj);
  if (!cfg.ablations.single_scale) {
    maps.b_lm1 = ad::broadcast_add_col(base.conv_lm1, proj);
    maps.b_lm2 = ad::broadcast_add_col(base.conv_lm2, proj);
  }
  return maps;
}

InformedMaps inform_feature_maps(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                 const Pyramid& pyr, ad::Var h_prev) {
  return inform_from_base(t, p, cfg, attention_base(t, p, cfg, pyr), h_prev);
}

ad::Var fuse_multiscale(ad::Tape& t, const ModelConfig& cfg, const AttentionBase& base,
                        const InformedMaps& maps) {
  (void)t;
  if (cfg.ablations.single_scale) return maps.b_l;
  if (base.side_lm1 != 2 * base.side_l || base.side_lm2 != 4 * base.side_l) {
    throw ShapeError("fuse_multiscale: sides " + std::to_string(base.side_l) + "/" +
                     std::to_string(base.side_lm1) + "/" + std::to_string(base.side_lm2) +
                     " not in 1:2:4 ratio");
  }
  return maps.b_l + ad::linmap(maps.b_lm1, base.down2) + ad::linmap(maps.b_lm2, base.down4);
}

std::pair<ad::Var, ad::Var> attend(ad::Tape& t, const BoundParams& p, const ModelConfig& cfg,
                                   ad::Var fused, int grid_side, ad::Var h_prev) {
  (void)t;
  if (fused.cols() != static_cast<Eigen::Index>(grid_side) * grid_side) {
    throw ShapeError("attend: fused map does not match grid side");
  }
  ad::Var pre = ad::broadcast_add_col(ad::matmul(p.at("att.wf.w"), fused), p.at("att.wf.b"));
  if (!cfg.ablations.attention_1d) {
    ad::ConvSpec spec;
    spec.c_in = cfg.d;
    spec.h = grid_side;
    spec.w = grid_side;
    pre = pre + ad::conv2d(fused, p.at("att.wb.w"), p.at("att.wb.b"), spec);
  }
  pre = ad::broadcast_add_col(pre, ad::matmul(p.at("att.ws"), h_prev));
  ad::Var j = tanh_(pre);
  ad::Var logits = ad::matmul(ad::transpose(p.at("att.wa")), j);
  ad::Var alpha = ad::softmax_all(logits);
  ad::Var g = ad::matmul(fused, ad::transpose(alpha));
  return {alpha, g};
}

}  // namespace salsketch
