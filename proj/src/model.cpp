#include "salsketch/model.hpp"

namespace salsketch {

SketchModel::SketchModel(const ModelConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  register_encoder_params(params_, cfg_);
  register_attention_params(params_, cfg_);
  register_decoder_params(params_, cfg_);
  params_.init(init_seed);
  // Forget-gate bias starts at 1 so early training does not flush the cell.
  params_.at("dec.b").middleRows(cfg_.d_h, cfg_.d_h).setConstant(1.0);
}

void SketchModel::set_offset_scale(double s) {
  if (!(s > 0) || !std::isfinite(s)) throw InvalidParams("offset scale must be finite positive");
  offset_scale_ = s;
}

SketchModel::Unroll SketchModel::unroll_teacher_forced(ad::Tape& t, const BoundParams& p,
                                                       const Image& photo, const PaddedSketch& gt,
                                                       int steps) const {
  if (steps < 0) steps = gt.valid_len;
  if (steps <= 0) throw InvalidSketch("unroll: no valid steps");
  if (steps > gt.points.rows()) throw SequenceTooLong("unroll: steps exceed padded length");

  Pyramid pyr = encode(t, p, cfg_, photo);
  DecoderState state = init_decoder_state(t, p, global_pool(t, pyr));
  AttentionBase base = attention_base(t, p, cfg_, pyr);

  Unroll out;
  out.grid_side = pyr.side_l;
  out.ys.reserve(static_cast<std::size_t>(steps));
  out.alphas.reserve(static_cast<std::size_t>(steps));
  for (int step = 0; step < steps; ++step) {
    InformedMaps maps = inform_from_base(t, p, cfg_, base, state.h);
    ad::Var fused = fuse_multiscale(t, cfg_, base, maps);
    auto [alpha, g] = attend(t, p, cfg_, fused, pyr.side_l, state.h);

    Matrix v(5, 1);
    if (step == 0) {
      const Stroke5Point s0 = start_token();
      v << s0.dx, s0.dy, s0.p1, s0.p2, s0.p3;
    } else {
      v = gt.points.row(step - 1).transpose();
    }
    StepOut so = decoder_step(t, p, cfg_, state, g, t.constant(std::move(v)));
    state = so.state;
    out.ys.push_back(so.y);
    out.alphas.push_back(alpha);
  }
  return out;
}

SketchModel::Generated SketchModel::generate(const Image& photo, std::mt19937_64& rng,
                                             double temperature, bool greedy, int t_max) const {
  if (t_max < 0) t_max = cfg_.t_max;
  if (t_max <= 0) throw Error("generate: t_max must be positive");

  ad::Tape t(/*grad_enabled=*/false);
  BoundParams p = bind_params(t, params_);
  Pyramid pyr = encode(t, p, cfg_, photo);
  DecoderState state = init_decoder_state(t, p, global_pool(t, pyr));
  AttentionBase base = attention_base(t, p, cfg_, pyr);

  Generated out;
  out.grid_side = pyr.side_l;
  out.seq.canvas_h = photo.h;
  out.seq.canvas_w = photo.w;
  out.seq.scale_factor = offset_scale_;

  Stroke5Point prev = start_token();
  for (int step = 0; step < t_max; ++step) {
    InformedMaps maps = inform_from_base(t, p, cfg_, base, state.h);
    ad::Var fused = fuse_multiscale(t, cfg_, base, maps);
    auto [alpha, g] = attend(t, p, cfg_, fused, pyr.side_l, state.h);
    out.alphas.push_back(alpha.v());

    Matrix v(5, 1);
    v << prev.dx, prev.dy, prev.p1, prev.p2, prev.p3;
    StepOut so = decoder_step(t, p, cfg_, state, g, t.constant(std::move(v)));
    state = so.state;

    const Stroke5Point pt = sample_step(so.y.v().col(0), cfg_, rng, temperature, greedy);
    out.seq.points.push_back(pt);
    prev = pt;
    if (pt.p3 >= 0.5) break;
  }
  return out;
}

}  // namespace salsketch
