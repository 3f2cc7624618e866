#include "salsketch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "salsketch/plot.hpp"

namespace fs = std::filesystem;

namespace salsketch {

namespace {

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& s) {
  std::istringstream ss(s);
  ss >> rng;
  if (ss.fail()) throw Error("corrupt rng state in checkpoint");
}

void adam_step(ParamStore& ps, AdamState& st, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  st.t += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  std::size_t i = 0;
  for (const std::string& name : ps.order()) {
    Matrix& p = ps.at(name);
    const Matrix& g = ps.grad_at(name);
    st.m[i] = b1 * st.m[i] + (1.0 - b1) * g;
    st.v[i] = Matrix(b2 * st.v[i].array() + (1.0 - b2) * g.array().square());
    p.array() -= lr * (st.m[i].array() / c1) / ((st.v[i].array() / c2).sqrt() + eps);
    ++i;
  }
}

double mean_stroke_nll(const SketchModel& model, const std::vector<PairedSample>& pairs) {
  double sum = 0.0;
  int n = 0;
  for (const PairedSample& s : pairs) {
    ad::Tape t(/*grad_enabled=*/false);
    BoundParams p = bind_params(t, model.params());
    PaddedSketch gt = pad_label(model, s.sketch_abs, s.photo.pixels.h, s.photo.pixels.w);
    SketchModel::Unroll u = model.unroll_teacher_forced(t, p, s.photo.pixels, gt);
    sum += stroke_loss_graph(t, model.config(), u.ys, gt).scalar();
    ++n;
  }
  if (n == 0) throw DegenerateDataset("stroke NLL over an empty split");
  return sum / n;
}

std::string epoch_ckpt_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_epoch_%03d.bin", epoch);
  return buf;
}

Matrix mask_row(const Matrix& mask) {
  Matrix row(1, mask.size());
  for (Eigen::Index y = 0; y < mask.rows(); ++y)
    for (Eigen::Index x = 0; x < mask.cols(); ++x) row(0, y * mask.cols() + x) = mask(y, x);
  return row;
}

}  // namespace

std::vector<PairedSample> preprocess_pairs(std::vector<PairedSample> pairs, int side) {
  for (PairedSample& s : pairs) {
    const int h = s.photo.pixels.h, w = s.photo.pixels.w;
    if (h == side && w == side) continue;
    if (h <= 0 || w <= 0) throw ShapeError("preprocess_pairs: empty photo");
    const double fx = static_cast<double>(side) / w, fy = static_cast<double>(side) / h;
    s.photo.pixels = resize_bilinear(s.photo.pixels, side, side);
    for (AbsPoint& p : s.sketch_abs) {
      p.x = (p.x + 0.5) * fx - 0.5;
      p.y = (p.y + 0.5) * fy - 0.5;
    }
    s.sketch = absolute_to_offsets(s.sketch_abs, side, side, 1.0);
    if (s.has_mask()) {
      Image m = Image::zeros(h, w, 1);
      m.data.row(0) = mask_row(s.gt_mask);
      Image r = resize_bilinear(m, side, side);
      Matrix out(side, side);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) out(y, x) = r.data(0, y * side + x) > 0.5 ? 1.0 : 0.0;
      s.gt_mask = std::move(out);
    }
  }
  return pairs;
}

TrainResult train(const TrainConfig& cfg, const DatasetManifest& data, const std::string& out_dir,
                  const std::string& resume_from, std::ostream* progress) {
  cfg.validate();
  fs::create_directories(out_dir);
  const int side = cfg.model.image_side;
  std::vector<PairedSample> pairs = preprocess_pairs(load_pairs(data, "train"), side);
  if (pairs.empty()) throw DegenerateDataset("train: empty train split");

  std::vector<SketchSequence> seqs;
  seqs.reserve(pairs.size());
  for (const PairedSample& s : pairs) seqs.push_back(s.sketch);
  const double offset_scale = compute_offset_scale(seqs);

  SketchModel model(cfg.model, derive_seed(cfg.seed, 101));
  model.set_offset_scale(offset_scale);
  AdamState adam = AdamState::zeros_like(model.params());
  std::mt19937_64 rng(derive_seed(cfg.seed, 202));
  int start_epoch = 0;
  long gstep = 0;

  const bool resuming = !resume_from.empty();
  if (resuming) {
    LoadedCheckpoint lc = load_checkpoint(resume_from);
    // The epoch horizon may grow across resumes; everything else must match.
    TrainConfig stored = lc.meta.config;
    TrainConfig wanted = cfg;
    stored.epochs = wanted.epochs = 0;
    if (config_fingerprint(stored) != config_fingerprint(wanted))
      throw ConfigError("resume checkpoint was written by a different config");
    model = std::move(lc.model);
    if (lc.has_opt) adam = std::move(lc.opt);
    rng_from_string(rng, lc.meta.rng_state);
    start_epoch = lc.meta.epoch;
    gstep = lc.meta.global_step;
  }

  TrainResult res;
  res.initial_stroke_nll = mean_stroke_nll(model, pairs);

  std::ofstream log(out_dir + "/train_log.ndjson",
                    resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw Error("cannot write " + out_dir + "/train_log.ndjson");

  const LossWeights weights{cfg.w_coord, cfg.w_stroke, cfg.w_eqv};
  const bool use_eqv = !cfg.model.ablations.no_eqv && cfg.w_eqv > 0.0;

  std::vector<int> order(pairs.size());

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    // Identity before every shuffle so the permutation is a pure function of
    // the (checkpointed) rng state.
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    LossReport epoch_sum;
    int batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t b1 =
          std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      // Drawn every batch so the stream stays aligned across ablation flags.
      const AffineTransform tr = sample_affine(rng, cfg.affine, side, side);

      model.params().zero_grads();
      LossReport rep;
      for (std::size_t i = b0; i < b1; ++i) {
        const PairedSample& s = pairs[static_cast<std::size_t>(order[i])];
        ad::Tape t(/*grad_enabled=*/true);
        BoundParams p = bind_params(t, model.params());
        GraphLosses gl = total_loss_graph(t, p, model, s.photo.pixels, s.sketch_abs,
                                          use_eqv ? &tr : nullptr, weights);
        t.backward(gl.total);
        harvest_grads(t, p, model.params());
        const LossReport r = gl.report();
        rep.coord += r.coord;
        rep.stroke += r.stroke;
        rep.eqv += r.eqv;
        rep.total += r.total;
      }
      const double n = static_cast<double>(b1 - b0);
      rep.coord /= n;
      rep.stroke /= n;
      rep.eqv /= n;
      rep.total /= n;
      model.params().scale_grads(1.0 / n);

      if (!std::isfinite(rep.total) || !model.params().all_finite()) {
        nlohmann::json diag;
        diag["epoch"] = epoch;
        diag["step"] = gstep + 1;
        auto ids = nlohmann::json::array();
        for (std::size_t i = b0; i < b1; ++i)
          ids.push_back(pairs[static_cast<std::size_t>(order[i])].photo.id);
        diag["batch"] = std::move(ids);
        diag["coord"] = rep.coord;
        diag["stroke"] = rep.stroke;
        diag["eqv"] = rep.eqv;
        diag["total"] = rep.total;
        std::ofstream d(out_dir + "/diagnostic.json");
        d << diag.dump(2) << "\n";
        throw Error("non-finite loss at step " + std::to_string(gstep + 1) +
                    "; diagnostic written to " + out_dir + "/diagnostic.json");
      }

      const double gnorm = std::sqrt(model.params().grad_sq_norm());
      if (cfg.grad_clip > 0.0 && gnorm > cfg.grad_clip)
        model.params().scale_grads(cfg.grad_clip / gnorm);

      ++gstep;
      adam_step(model.params(), adam, cfg.lr);

      nlohmann::json jl;
      jl["step"] = gstep;
      jl["coord"] = rep.coord;
      jl["stroke"] = rep.stroke;
      jl["eqv"] = rep.eqv;
      jl["total"] = rep.total;
      log << jl.dump() << "\n";

      epoch_sum.coord += rep.coord;
      epoch_sum.stroke += rep.stroke;
      epoch_sum.eqv += rep.eqv;
      epoch_sum.total += rep.total;
      ++batches;
    }
    log.flush();

    CheckpointMeta meta;
    meta.config = cfg;
    meta.epoch = epoch + 1;
    meta.global_step = gstep;
    meta.offset_scale = model.offset_scale();
    meta.rng_state = rng_to_string(rng);
    save_checkpoint(out_dir + "/" + epoch_ckpt_name(epoch + 1), model, meta, &adam);

    if (progress != nullptr && batches > 0) {
      (*progress) << "epoch " << (epoch + 1) << "/" << cfg.epochs
                  << " coord " << epoch_sum.coord / batches
                  << " stroke " << epoch_sum.stroke / batches
                  << " eqv " << epoch_sum.eqv / batches
                  << " total " << epoch_sum.total / batches << "\n";
    }
  }

  CheckpointMeta meta;
  meta.config = cfg;
  meta.epoch = cfg.epochs;
  meta.global_step = gstep;
  meta.offset_scale = model.offset_scale();
  meta.rng_state = rng_to_string(rng);
  save_checkpoint(out_dir + "/ckpt_final.bin", model, meta, &adam);

  res.final_checkpoint = out_dir + "/ckpt_final.bin";
  res.final_stroke_nll = mean_stroke_nll(model, pairs);
  res.steps = gstep;
  res.epochs_run = cfg.epochs - start_epoch;

  nlohmann::json summary;
  summary["initial_stroke_nll"] = res.initial_stroke_nll;
  summary["final_stroke_nll"] = res.final_stroke_nll;
  summary["steps"] = res.steps;
  summary["epochs"] = cfg.epochs;
  std::ofstream sf(out_dir + "/train_summary.json");
  sf << summary.dump(2) << "\n";
  return res;
}

EvalReport evaluate_split(const SketchModel& model, const std::vector<PairedSample>& pairs,
                          SaliencyMode mode, const MetricConfig& mcfg,
                          std::vector<PerImageRow>* per_image) {
  std::vector<Matrix> preds, gts;
  std::vector<std::string> ids;
  for (const PairedSample& s : pairs) {
    if (!s.has_mask()) continue;
    SaliencyMap sal;
    if (mode == SaliencyMode::TeacherForced) {
      PaddedSketch gt = pad_label(model, s.sketch_abs, s.photo.pixels.h, s.photo.pixels.w);
      sal = predict_saliency(model, s.photo.pixels, mode, &gt);
    } else {
      sal = predict_saliency(model, s.photo.pixels, mode);
    }
    preds.push_back(sal.values);
    gts.push_back(s.gt_mask);
    ids.push_back(s.photo.id);
  }
  if (preds.empty()) throw DegenerateDataset("evaluate_split: no labeled pairs");
  EvalReport rep = evaluate_images(preds, gts, mcfg);
  if (per_image != nullptr) {
    per_image->clear();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!(gts[i].array() > 0.5).any()) continue;
      PerImageRow row;
      row.id = ids[i];
      row.mae = mae(preds[i], gts[i]);
      std::tie(row.max_fbeta, row.best_threshold) = max_fbeta(preds[i], gts[i], mcfg);
      row.weighted_fbeta = weighted_fbeta(preds[i], gts[i], mcfg);
      row.s_measure = s_measure(preds[i], gts[i], mcfg);
      per_image->push_back(std::move(row));
    }
  }
  return rep;
}

void write_per_image_csv(const std::vector<PerImageRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  std::ostringstream ss;
  ss.precision(17);
  ss << "id,mae,max_fbeta,best_threshold,weighted_fbeta,s_measure\n";
  for (const PerImageRow& r : rows)
    ss << r.id << "," << r.mae << "," << r.max_fbeta << "," << r.best_threshold << ","
       << r.weighted_fbeta << "," << r.s_measure << "\n";
  out << ss.str();
}

MassStats attention_mass_in_mask(const SketchModel& model, const PairedSample& sample) {
  if (!sample.has_mask()) throw DegenerateDataset("attention_mass_in_mask: sample has no mask");
  ad::Tape t(/*grad_enabled=*/false);
  BoundParams p = bind_params(t, model.params());
  const Image& photo = sample.photo.pixels;
  PaddedSketch gt = pad_label(model, sample.sketch_abs, photo.h, photo.w);
  SketchModel::Unroll u = model.unroll_teacher_forced(t, p, photo, gt);
  std::vector<Matrix> alphas;
  alphas.reserve(u.alphas.size());
  for (const ad::Var& a : u.alphas) alphas.push_back(a.v());
  Accumulated acc = accumulate(alphas, std::vector<double>(alphas.size(), 1.0));

  const int g = u.grid_side;
  const int block = photo.h / g;
  MassStats ms;
  ms.area_fraction = sample.gt_mask.mean();
  for (int gy = 0; gy < g; ++gy)
    for (int gx = 0; gx < g; ++gx) {
      const double frac = sample.gt_mask.block(gy * block, gx * block, block, block).mean();
      ms.mass_in_mask += acc.pre(0, gy * g + gx) * frac;
    }
  ms.ratio = ms.area_fraction > 0.0 ? ms.mass_in_mask / ms.area_fraction : 0.0;
  return ms;
}

MassStats mean_attention_mass(const SketchModel& model, const std::vector<PairedSample>& pairs) {
  MassStats mean;
  int n = 0;
  for (const PairedSample& s : pairs) {
    if (!s.has_mask()) continue;
    MassStats ms = attention_mass_in_mask(model, s);
    mean.mass_in_mask += ms.mass_in_mask;
    mean.area_fraction += ms.area_fraction;
    ++n;
  }
  if (n == 0) throw DegenerateDataset("mean_attention_mass: no labeled pairs");
  mean.mass_in_mask /= n;
  mean.area_fraction /= n;
  mean.ratio = mean.area_fraction > 0.0 ? mean.mass_in_mask / mean.area_fraction : 0.0;
  return mean;
}

namespace {

struct ProbeData {
  std::vector<Matrix> feats;  // cached coarsest feature maps, c_l x gs^2
  std::vector<Matrix> labels;  // 1 x side^2 rows
  std::vector<Matrix> masks;   // side x side
};

ProbeData collect_probe_data(const SketchModel& model, const std::vector<PairedSample>& pairs,
                             int side) {
  ProbeData d;
  for (const PairedSample& s : pairs) {
    if (!s.has_mask()) continue;
    if (s.photo.pixels.h != side || s.photo.pixels.w != side)
      throw ShapeError("probe: pair not preprocessed to the model side");
    ad::Tape t(/*grad_enabled=*/false);
    BoundParams p = bind_params(t, model.params());
    Pyramid py = encode(t, p, model.config(), s.photo.pixels);
    d.feats.push_back(py.f_l.v());
    d.labels.push_back(mask_row(s.gt_mask));
    d.masks.push_back(s.gt_mask);
  }
  return d;
}

double bce_and_grad(const Matrix& z, const Matrix& y, Matrix* dz) {
  const double n = static_cast<double>(z.size());
  double loss = 0.0;
  if (dz != nullptr) *dz = Matrix::Zero(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zv = z(i), yv = y(i);
    loss += std::max(zv, 0.0) - zv * yv + std::log1p(std::exp(-std::abs(zv)));
    if (dz != nullptr) (*dz)(i) = (1.0 / (1.0 + std::exp(-zv)) - yv) / n;
  }
  return loss / n;
}

}  // namespace

ProbeResult linear_probe(const SketchModel& model, const std::vector<PairedSample>& train_pairs,
                         const std::vector<PairedSample>& eval_pairs, const ProbeOptions& opt) {
  if (opt.kernel != 1 && opt.kernel != 3) throw ConfigError("probe kernel must be 1 or 3");
  if (opt.epochs < 1 || opt.batch_size < 1 || opt.lr <= 0)
    throw ConfigError("probe: bad training options");
  const ModelConfig& cfg = model.config();
  const int side = cfg.image_side;
  const int gs = side / 32;

  std::vector<Matrix> before;
  for (const std::string& name : model.params().order()) before.push_back(model.params().at(name));

  ProbeData train = collect_probe_data(model, train_pairs, side);
  if (train.feats.empty()) throw DegenerateDataset("probe: no labeled training pairs");
  const SparseMap plan = bilinear_plan(gs, gs, side, side);
  const ad::ConvSpec spec{cfg.c_l, side, side, opt.kernel, opt.kernel, 1, opt.kernel / 2};

  ParamStore ps;
  ps.add("probe.w", 1, cfg.c_l * opt.kernel * opt.kernel);
  ps.add("probe.b", 1, 1, ParamInit::Zero);
  ps.init(opt.seed);
  AdamState ast = AdamState::zeros_like(ps);
  std::mt19937_64 rng(derive_seed(opt.seed, 303));

  std::vector<int> order(train.feats.size());
  std::iota(order.begin(), order.end(), 0);
  double last_epoch_bce = 0.0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_bce = 0.0;
    int batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t b1 =
          std::min(order.size(), b0 + static_cast<std::size_t>(opt.batch_size));
      ps.zero_grads();
      double bce = 0.0;
      for (std::size_t i = b0; i < b1; ++i) {
        const int k = order[i];
        Matrix up = apply_plan(train.feats[static_cast<std::size_t>(k)], plan);
        Matrix cols = ad::im2col(up, spec);
        Matrix z = ps.at("probe.w") * cols;
        z.array() += ps.at("probe.b")(0, 0);
        Matrix dz;
        bce += bce_and_grad(z, train.labels[static_cast<std::size_t>(k)], &dz);
        ps.grad_at("probe.w") += dz * cols.transpose();
        ps.grad_at("probe.b")(0, 0) += dz.sum();
      }
      const double n = static_cast<double>(b1 - b0);
      ps.scale_grads(1.0 / n);
      adam_step(ps, ast, opt.lr);
      epoch_bce += bce / n;
      ++batches;
    }
    last_epoch_bce = epoch_bce / std::max(1, batches);
  }

  ProbeData eval = collect_probe_data(model, eval_pairs, side);
  if (eval.feats.empty()) throw DegenerateDataset("probe: no labeled eval pairs");
  std::vector<Matrix> preds, gts;
  for (std::size_t i = 0; i < eval.feats.size(); ++i) {
    Matrix up = apply_plan(eval.feats[i], plan);
    Matrix cols = ad::im2col(up, spec);
    Matrix z = ps.at("probe.w") * cols;
    z.array() += ps.at("probe.b")(0, 0);
    Matrix sig = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    preds.push_back(row_to_grid(sig, side, side));
    gts.push_back(eval.masks[i]);
  }

  ProbeResult out;
  out.report = evaluate_images(preds, gts);
  out.final_bce = last_epoch_bce;
  out.backbone_unchanged = true;
  std::size_t bi = 0;
  for (const std::string& name : model.params().order()) {
    if (model.params().at(name) != before[bi++]) out.backbone_unchanged = false;
  }
  return out;
}

FinetuneResult finetune_fraction(SketchModel model, const std::vector<PairedSample>& train_pairs,
                                 const std::vector<PairedSample>& eval_pairs,
                                 const FinetuneOptions& opt) {
  if (opt.fraction <= 0.0 || opt.fraction > 1.0)
    throw ConfigError("finetune: fraction must lie in (0, 1]");
  if (opt.epochs < 1 || opt.batch_size < 1 || opt.lr <= 0 || opt.head_lr <= 0)
    throw ConfigError("finetune: bad training options");
  const ModelConfig& cfg = model.config();
  const int side = cfg.image_side;
  const int gs = side / 32;

  std::vector<int> labeled;
  for (std::size_t i = 0; i < train_pairs.size(); ++i)
    if (train_pairs[i].has_mask()) labeled.push_back(static_cast<int>(i));
  const int n_sub = static_cast<int>(std::floor(opt.fraction * static_cast<double>(labeled.size())));
  if (n_sub < 1) throw ConfigError("finetune: subset smaller than 1 sample");
  std::mt19937_64 rng(derive_seed(opt.seed, 404));
  std::shuffle(labeled.begin(), labeled.end(), rng);
  labeled.resize(static_cast<std::size_t>(n_sub));

  ParamStore head;
  head.add("head.w", 1, cfg.c_l * 9);
  head.add("head.b", 1, 1, ParamInit::Zero);
  head.init(derive_seed(opt.seed, 405));
  AdamState am = AdamState::zeros_like(model.params());
  AdamState ah = AdamState::zeros_like(head);
  auto plan = std::make_shared<const SparseMap>(bilinear_plan(gs, gs, side, side));
  const ad::ConvSpec head_spec{cfg.c_l, side, side, 3, 3, 1, 1};

  double last_epoch_bce = 0.0;
  std::vector<int> order = labeled;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_bce = 0.0;
    int batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t b1 =
          std::min(order.size(), b0 + static_cast<std::size_t>(opt.batch_size));
      model.params().zero_grads();
      head.zero_grads();
      double bce = 0.0;
      for (std::size_t i = b0; i < b1; ++i) {
        const PairedSample& s = train_pairs[static_cast<std::size_t>(order[i])];
        ad::Tape t(/*grad_enabled=*/true);
        BoundParams bp = bind_params(t, model.params());
        BoundParams hp = bind_params(t, head);
        Pyramid py = encode(t, bp, cfg, s.photo.pixels);
        ad::Var up = ad::linmap(py.f_l, plan);
        ad::Var z = ad::conv2d(up, hp.at("head.w"), hp.at("head.b"), head_spec);
        ad::Var y = t.constant(mask_row(s.gt_mask));
        ad::Var loss = ad::mean_all(relu_(z) - z * y +
                                    log_(ad::add_scalar(exp_(neg(abs_(z))), 1.0)));
        t.backward(loss);
        harvest_grads(t, bp, model.params());
        harvest_grads(t, hp, head);
        bce += loss.scalar();
      }
      const double n = static_cast<double>(b1 - b0);
      model.params().scale_grads(1.0 / n);
      head.scale_grads(1.0 / n);
      const double gnorm =
          std::sqrt(model.params().grad_sq_norm() + head.grad_sq_norm());
      if (gnorm > 1.0) {
        model.params().scale_grads(1.0 / gnorm);
        head.scale_grads(1.0 / gnorm);
      }
      adam_step(model.params(), am, opt.lr);
      adam_step(head, ah, opt.head_lr);
      epoch_bce += bce / n;
      ++batches;
    }
    last_epoch_bce = epoch_bce / std::max(1, batches);
  }

  std::vector<Matrix> preds, gts;
  for (const PairedSample& s : eval_pairs) {
    if (!s.has_mask()) continue;
    ad::Tape t(/*grad_enabled=*/false);
    BoundParams bp = bind_params(t, model.params());
    BoundParams hp = bind_params(t, head);
    Pyramid py = encode(t, bp, cfg, s.photo.pixels);
    ad::Var up = ad::linmap(py.f_l, plan);
    ad::Var z = ad::conv2d(up, hp.at("head.w"), hp.at("head.b"), head_spec);
    Matrix sig = (1.0 / (1.0 + (-z.v().array()).exp())).matrix();
    preds.push_back(row_to_grid(sig, side, side));
    gts.push_back(s.gt_mask);
  }
  if (preds.empty()) throw DegenerateDataset("finetune: no labeled eval pairs");

  FinetuneResult out;
  out.report = evaluate_images(preds, gts);
  out.subset_size = n_sub;
  out.final_bce = last_epoch_bce;
  return out;
}

namespace {

void apply_variant(TrainConfig& cfg, const std::string& variant) {
  Ablations& a = cfg.model.ablations;
  if (variant == "full") return;
  if (variant == "no_eqv") {
    a.no_eqv = true;
  } else if (variant == "attention_1d") {
    a.attention_1d = true;
  } else if (variant == "single_scale") {
    a.single_scale = true;
  } else if (variant == "no_pen_state") {
    a.no_pen_state = true;
  } else if (variant == "l1_regression") {
    a.l1_regression = true;
  } else if (variant.rfind("m=", 0) == 0) {
    const int m = std::stoi(variant.substr(2));
    if (m < 1) throw ConfigError("ablation m must be >= 1");
    cfg.model.m = m;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
}

std::string sanitize(const std::string& v) {
  std::string s = v;
  std::replace(s.begin(), s.end(), '=', '_');
  return s;
}

}  // namespace

std::vector<AblationRow> run_ablation_suite(const TrainConfig& base, const DatasetManifest& data,
                                            const std::vector<std::string>& variants,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::string& out_dir, std::ostream* progress) {
  if (variants.empty() || seeds.empty())
    throw ConfigError("ablation suite needs at least one variant and one seed");
  fs::create_directories(out_dir);
  std::vector<AblationRow> rows;
  for (const std::string& variant : variants) {
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      apply_variant(cfg, variant);
      cfg.validate();
      const std::string run_dir =
          out_dir + "/run_" + sanitize(variant) + "_s" + std::to_string(seed);
      if (progress != nullptr)
        (*progress) << "[ablate] " << variant << " seed " << seed << "\n";
      TrainResult tr = train(cfg, data, run_dir, {}, progress);
      LoadedCheckpoint lc = load_checkpoint(tr.final_checkpoint);
      std::vector<PairedSample> test =
          preprocess_pairs(load_pairs(data, "test"), cfg.model.image_side);
      EvalReport rep = evaluate_split(lc.model, test, SaliencyMode::TeacherForced);

      AblationRow row;
      row.variant = variant;
      row.seed = seed;
      row.max_fbeta = rep.max_fbeta;
      row.mae = rep.mae;
      row.s_measure = rep.s_measure;
      row.stroke_nll = mean_stroke_nll(lc.model, test);
      rows.push_back(std::move(row));
    }
  }
  write_ablation_outputs(rows, out_dir);
  return rows;
}

void write_ablation_outputs(const std::vector<AblationRow>& rows, const std::string& out_dir) {
  std::ofstream csv(out_dir + "/ablations.csv");
  if (!csv) throw Error("cannot write " + out_dir + "/ablations.csv");
  std::ostringstream ss;
  ss.precision(17);
  ss << "variant,seed,max_fbeta,mae,s_measure,stroke_nll\n";
  for (const AblationRow& r : rows)
    ss << r.variant << "," << r.seed << "," << r.max_fbeta << "," << r.mae << "," << r.s_measure
       << "," << r.stroke_nll << "\n";
  csv << ss.str();

  nlohmann::json j = nlohmann::json::array();
  for (const AblationRow& r : rows)
    j.push_back({{"variant", r.variant},
                 {"seed", r.seed},
                 {"max_fbeta", r.max_fbeta},
                 {"mae", r.mae},
                 {"s_measure", r.s_measure},
                 {"stroke_nll", r.stroke_nll}});
  std::ofstream js(out_dir + "/ablations.json");
  js << j.dump(2) << "\n";

  std::vector<std::string> seen;
  std::vector<std::pair<std::string, double>> bars;
  for (const AblationRow& r : rows) {
    if (std::find(seen.begin(), seen.end(), r.variant) != seen.end()) continue;
    seen.push_back(r.variant);
    bars.emplace_back(r.variant, median_fbeta(rows, r.variant));
  }
  plot_bars("MEDIAN MAX F-BETA", bars, out_dir + "/ablations.png");
}

double median_fbeta(const std::vector<AblationRow>& rows, const std::string& variant) {
  std::vector<double> vals;
  for (const AblationRow& r : rows)
    if (r.variant == variant) vals.push_back(r.max_fbeta);
  if (vals.empty()) throw ConfigError("no rows for variant '" + variant + "'");
  std::sort(vals.begin(), vals.end());
  const std::size_t n = vals.size();
  return n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
}

}  // namespace salsketch
