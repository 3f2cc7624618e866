#include "salsketch/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "salsketch/plot.hpp"

namespace fs = std::filesystem;

namespace salsketch {
namespace {

void ensure_out_dir(const std::string& out, bool force) {
  const fs::path p(out);
  if (fs::exists(p)) {
    if (!fs::is_directory(p)) throw UsageError("output path is not a directory: " + out);
    if (!force && !fs::is_empty(p))
      throw UsageError("output directory is not empty (pass --force to reuse): " + out);
  } else {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error("cannot create " + out + ": " + ec.message());
  }
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

std::string step_tag(int step) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%03d", step);
  return buf;
}

// Resizes a saliency grid to the requested canvas and restores max 1.
Matrix resample_map(const Matrix& grid, int out_h, int out_w) {
  if (grid.rows() == out_h && grid.cols() == out_w) return grid;
  const SparseMap plan =
      bilinear_plan(static_cast<int>(grid.rows()), static_cast<int>(grid.cols()), out_h, out_w);
  Matrix out = row_to_grid(apply_plan(grid_to_row(grid), plan), out_h, out_w);
  const double mx = out.maxCoeff();
  if (mx > 0.0) out /= mx;
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

struct NamedPhoto {
  std::string id;
  Image resized;           // model input
  int orig_h = 0;          // output canvas for saved maps
  int orig_w = 0;
  const PairedSample* pair = nullptr;  // manifest mode only
};

// Gathers photos from --photos paths or from a manifest split. Manifest
// photos keep their paired sketch/mask for teacher-forced modes.
std::vector<NamedPhoto> gather_photos(const std::vector<std::string>& photo_paths,
                                      const std::string& manifest_path, const std::string& split,
                                      int side, int limit,
                                      std::vector<PairedSample>* pair_storage) {
  if (photo_paths.empty() == manifest_path.empty())
    throw UsageError("pass exactly one of --photos and --data");
  std::vector<NamedPhoto> out;
  if (!photo_paths.empty()) {
    for (const std::string& path : photo_paths) {
      Image img = load_png(path);
      NamedPhoto np;
      np.id = stem_of(path);
      np.orig_h = img.h;
      np.orig_w = img.w;
      np.resized = (img.h == side && img.w == side) ? img : resize_bilinear(img, side, side);
      out.push_back(std::move(np));
    }
  } else {
    const DatasetManifest m = load_manifest(manifest_path);
    *pair_storage = preprocess_pairs(load_pairs(m, split), side);
    for (const PairedSample& pr : *pair_storage) {
      NamedPhoto np;
      np.id = pr.photo.id;
      np.orig_h = side;
      np.orig_w = side;
      np.resized = pr.photo.pixels;
      np.pair = &pr;
      out.push_back(std::move(np));
    }
  }
  if (limit >= 0 && static_cast<int>(out.size()) > limit) out.resize(limit);
  return out;
}

Json eval_report_json(const EvalReport& r) {
  return Json{{"mae", r.mae},
              {"max_fbeta", r.max_fbeta},
              {"best_threshold", r.best_threshold},
              {"weighted_fbeta", r.weighted_fbeta},
              {"s_measure", r.s_measure},
              {"images", r.images},
              {"skipped_empty_gt", r.skipped_empty_gt}};
}

void write_json(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_csv(s)) {
    try {
      out.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw UsageError("bad seed list entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace

CommandResult cmd_synth(const SynthConfig& cfg, std::uint64_t seed, const std::string& out_dir,
                        bool force) {
  cfg.validate();
  ensure_out_dir(out_dir, force);
  const DatasetManifest m = write_synthetic_dataset(cfg, seed, out_dir);
  CommandResult r;
  r.artifacts = {join_path(out_dir, "manifest.json"), join_path(out_dir, "sketches.ndjson")};
  std::ostringstream s;
  s << "wrote " << m.entries.size() << " pairs (" << cfg.n_train << " train / " << cfg.n_val
    << " val / " << cfg.n_test << " test) to " << out_dir;
  r.summary = s.str();
  return r;
}

CommandResult cmd_train(const TrainConfig& cfg, const std::string& manifest_path,
                        const std::string& out_dir, bool force, const std::string& resume,
                        std::ostream* progress) {
  cfg.validate();
  ensure_out_dir(out_dir, force || !resume.empty());
  const DatasetManifest data = load_manifest(manifest_path);
  const TrainResult tr = train(cfg, data, out_dir, resume, progress);
  save_train_config(cfg, join_path(out_dir, "train_config.json"));
  CommandResult r;
  r.artifacts = {tr.final_checkpoint, join_path(out_dir, "train_log.ndjson"),
                 join_path(out_dir, "train_config.json")};
  std::ostringstream s;
  s << "trained " << tr.epochs_run << " epochs (" << tr.steps << " steps); stroke nll "
    << tr.initial_stroke_nll << " -> " << tr.final_stroke_nll;
  r.summary = s.str();
  return r;
}

CommandResult cmd_generate(const std::string& ckpt, const std::vector<std::string>& photo_paths,
                           const std::string& manifest_path, const std::string& split,
                           const std::string& out_dir, const GenerateOptions& opt, bool force) {
  if (opt.overlay_every < 1) throw UsageError("--overlay-every must be >= 1");
  ensure_out_dir(out_dir, force);
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const int side = lc.model.config().image_side;
  std::vector<PairedSample> storage;
  const std::vector<NamedPhoto> photos =
      gather_photos(photo_paths, manifest_path, split, side, opt.limit, &storage);

  std::mt19937_64 rng(derive_seed(opt.seed, 0x67656E65));
  std::vector<SketchRecord> records;
  CommandResult r;
  double total_len = 0.0;
  for (const NamedPhoto& np : photos) {
    const SketchModel::Generated gen =
        lc.model.generate(np.resized, rng, opt.temperature, opt.greedy);
    std::vector<AbsPoint> abs = offsets_to_absolute(gen.seq, {0.0, 0.0});
    if (!abs.empty()) {
      double min_x = abs[0].x, max_x = abs[0].x, min_y = abs[0].y, max_y = abs[0].y;
      for (const AbsPoint& p : abs) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
      }
      const double sx = 0.5 * (side - 1) - 0.5 * (min_x + max_x);
      const double sy = 0.5 * (side - 1) - 0.5 * (min_y + max_y);
      for (AbsPoint& p : abs) {
        p.x += sx;
        p.y += sy;
      }
    }
    records.push_back(abs_to_record(abs, side, side));
    total_len += static_cast<double>(abs.size());

    const std::string raster_path = join_path(out_dir, np.id + "_gen.png");
    save_png_gray(raster_path, rasterize(abs, side, side).pixels);
    r.artifacts.push_back(raster_path);

    const int steps = static_cast<int>(gen.alphas.size());
    Matrix cum;
    for (int t = 0; t < steps; ++t) {
      cum = (t == 0) ? gen.alphas[0] : Matrix(cum + gen.alphas[t]);
      if ((t + 1) % opt.overlay_every == 0 || t + 1 == steps) {
        const Matrix grid = row_to_grid(cum / double(t + 1), gen.grid_side, gen.grid_side);
        const std::string path = join_path(out_dir, np.id + "_att_" + step_tag(t + 1) + ".png");
        save_png(path, overlay_attention(np.resized, grid));
        r.artifacts.push_back(path);
      }
    }
  }
  const std::string ndjson_path = join_path(out_dir, "generated.ndjson");
  write_sketch_ndjson(ndjson_path, records);
  r.artifacts.insert(r.artifacts.begin(), ndjson_path);

  std::ostringstream s;
  s << "generated " << records.size() << " sketches (mean length "
    << (records.empty() ? 0.0 : total_len / double(records.size())) << ") to " << out_dir;
  r.summary = s.str();
  return r;
}

CommandResult cmd_saliency(const std::string& ckpt, const std::vector<std::string>& photo_paths,
                           const std::string& manifest_path, const std::string& split,
                           const std::string& out_dir, const SaliencyOptions& opt, bool force) {
  if (opt.mode == SaliencyMode::TeacherForced && manifest_path.empty())
    throw UsageError("teacher-forced saliency needs --data (photos carry no sketches)");
  ensure_out_dir(out_dir, force);
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const int side = lc.model.config().image_side;
  std::vector<PairedSample> storage;
  const std::vector<NamedPhoto> photos =
      gather_photos(photo_paths, manifest_path, split, side, opt.limit, &storage);

  CommandResult r;
  int degenerate = 0;
  for (const NamedPhoto& np : photos) {
    SaliencyMap sal;
    if (opt.mode == SaliencyMode::TeacherForced) {
      const PaddedSketch gt = pad_label(lc.model, np.pair->sketch_abs, side, side);
      sal = predict_saliency(lc.model, np.resized, SaliencyMode::TeacherForced, &gt);
    } else {
      sal = predict_saliency(lc.model, np.resized, SaliencyMode::FreeRunning);
    }
    if (sal.degenerate) ++degenerate;
    const Matrix out_map = resample_map(sal.values, np.orig_h, np.orig_w);
    const std::string png_path = join_path(out_dir, np.id + "_sal.png");
    save_png_gray(png_path, out_map);
    r.artifacts.push_back(png_path);
    if (opt.f32) {
      const std::string f32_path = join_path(out_dir, np.id + "_sal.f32");
      save_f32(f32_path, out_map);
      r.artifacts.push_back(f32_path);
    }
  }
  std::ostringstream s;
  s << "wrote " << photos.size() << " saliency maps to " << out_dir;
  if (degenerate > 0) s << " (" << degenerate << " degenerate)";
  r.summary = s.str();
  return r;
}

CommandResult cmd_eval(const std::string& ckpt, const std::string& manifest_path,
                       const std::string& split, const std::string& out_dir,
                       const MetricConfig& mcfg, bool force) {
  mcfg.validate();
  ensure_out_dir(out_dir, force);
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const DatasetManifest m = load_manifest(manifest_path);
  const std::vector<PairedSample> pairs =
      preprocess_pairs(load_pairs(m, split), lc.model.config().image_side);
  if (pairs.empty()) throw ConfigError("split '" + split + "' is empty");
  for (const PairedSample& p : pairs)
    if (!p.has_mask()) throw ConfigError("evaluation needs masks for every pair");

  CommandResult r;
  Json summary;
  std::vector<std::pair<std::string, std::vector<PrPoint>>> curves;
  for (const SaliencyMode mode : {SaliencyMode::TeacherForced, SaliencyMode::FreeRunning}) {
    const std::string tag = mode == SaliencyMode::TeacherForced ? "teacher" : "free";
    std::vector<PerImageRow> rows;
    const EvalReport rep = evaluate_split(lc.model, pairs, mode, mcfg, &rows);
    const std::string rep_path = join_path(out_dir, "eval_" + tag + ".json");
    write_eval_report_json(rep, rep_path);
    const std::string csv_path = join_path(out_dir, "per_image_" + tag + ".csv");
    write_per_image_csv(rows, csv_path);
    const std::string pr_path = join_path(out_dir, "pr_" + tag + ".csv");
    write_pr_csv(rep.pr_curve, pr_path);
    r.artifacts.insert(r.artifacts.end(), {rep_path, csv_path, pr_path});
    summary[tag] = eval_report_json(rep);
    curves.emplace_back(tag == "teacher" ? "TEACHER" : "FREE", rep.pr_curve);
    if (mode == SaliencyMode::TeacherForced) {
      std::ostringstream s;
      s << split << ": max F " << rep.max_fbeta << ", MAE " << rep.mae << ", S " << rep.s_measure
        << " over " << rep.images << " images (teacher-forced)";
      r.summary = s.str();
    }
  }
  const MassStats mass = mean_attention_mass(lc.model, pairs);
  summary["attention_mass"] = {{"mass_in_mask", mass.mass_in_mask},
                               {"area_fraction", mass.area_fraction},
                               {"ratio", mass.ratio}};
  const std::string sum_path = join_path(out_dir, "eval_summary.json");
  write_json(summary, sum_path);
  r.artifacts.push_back(sum_path);

  const std::string plot_path = join_path(out_dir, "pr_curves.png");
  plot_pr_curves(curves, plot_path);
  r.artifacts.push_back(plot_path);
  return r;
}

CommandResult cmd_probe(const std::string& ckpt, const std::string& manifest_path,
                        const std::string& out_dir, const ProbeOptions& opt, bool random_init,
                        int train_limit, bool force) {
  ensure_out_dir(out_dir, force);
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const int side = lc.model.config().image_side;
  const DatasetManifest m = load_manifest(manifest_path);
  std::vector<PairedSample> train_pairs = preprocess_pairs(load_pairs(m, "train"), side);
  const std::vector<PairedSample> test_pairs = preprocess_pairs(load_pairs(m, "test"), side);
  if (train_limit >= 0 && static_cast<int>(train_pairs.size()) > train_limit)
    train_pairs.resize(train_limit);

  ProbeResult res;
  if (random_init) {
    const SketchModel fresh(lc.model.config(), derive_seed(opt.seed, 0x70726F62));
    res = linear_probe(fresh, train_pairs, test_pairs, opt);
  } else {
    res = linear_probe(lc.model, train_pairs, test_pairs, opt);
  }

  Json j{{"kernel", opt.kernel},
         {"epochs", opt.epochs},
         {"lr", opt.lr},
         {"random_init", random_init},
         {"train_pairs", static_cast<int>(train_pairs.size())},
         {"final_bce", res.final_bce},
         {"backbone_unchanged", res.backbone_unchanged},
         {"eval", eval_report_json(res.report)}};
  const std::string path = join_path(out_dir, "probe_report.json");
  write_json(j, path);

  CommandResult r;
  r.artifacts = {path};
  std::ostringstream s;
  s << "probe " << opt.kernel << "x" << opt.kernel << (random_init ? " (random backbone)" : "")
    << ": max F " << res.report.max_fbeta << ", bce " << res.final_bce;
  r.summary = s.str();
  return r;
}

CommandResult cmd_finetune(const std::string& ckpt, const std::string& manifest_path,
                           const std::string& out_dir, const FinetuneOptions& opt, bool random_init,
                           bool force) {
  ensure_out_dir(out_dir, force);
  const LoadedCheckpoint lc = load_checkpoint(ckpt);
  const int side = lc.model.config().image_side;
  const DatasetManifest m = load_manifest(manifest_path);
  const std::vector<PairedSample> train_pairs = preprocess_pairs(load_pairs(m, "train"), side);
  const std::vector<PairedSample> test_pairs = preprocess_pairs(load_pairs(m, "test"), side);

  FinetuneResult res;
  if (random_init) {
    SketchModel fresh(lc.model.config(), derive_seed(opt.seed, 0x66696E65));
    res = finetune_fraction(std::move(fresh), train_pairs, test_pairs, opt);
  } else {
    res = finetune_fraction(lc.model, train_pairs, test_pairs, opt);
  }

  Json j{{"fraction", opt.fraction},
         {"subset_size", res.subset_size},
         {"epochs", opt.epochs},
         {"lr", opt.lr},
         {"random_init", random_init},
         {"final_bce", res.final_bce},
         {"eval", eval_report_json(res.report)}};
  const std::string path = join_path(out_dir, "finetune_report.json");
  write_json(j, path);

  CommandResult r;
  r.artifacts = {path};
  std::ostringstream s;
  s << "finetune on " << res.subset_size << " pairs" << (random_init ? " (random init)" : "")
    << ": max F " << res.report.max_fbeta << ", bce " << res.final_bce;
  r.summary = s.str();
  return r;
}

CommandResult cmd_ablate(const TrainConfig& base, const std::string& manifest_path,
                         const std::vector<std::string>& variants,
                         const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                         bool force, std::ostream* progress) {
  base.validate();
  ensure_out_dir(out_dir, force);
  const DatasetManifest data = load_manifest(manifest_path);
  const std::vector<AblationRow> rows =
      run_ablation_suite(base, data, variants, seeds, out_dir, progress);

  CommandResult r;
  r.artifacts = {join_path(out_dir, "ablations.csv"), join_path(out_dir, "ablations.json"),
                 join_path(out_dir, "ablations.png")};
  std::ostringstream s;
  s << "ablation suite: " << rows.size() << " runs;";
  std::vector<std::string> seen;
  for (const AblationRow& row : rows) {
    if (std::find(seen.begin(), seen.end(), row.variant) != seen.end()) continue;
    seen.push_back(row.variant);
    s << " " << row.variant << "=" << median_fbeta(rows, row.variant);
  }
  r.summary = s.str();
  return r;
}

CommandResult cmd_plot_pr(const std::vector<std::string>& csv_paths,
                          const std::vector<std::string>& labels, const std::string& out_png,
                          bool force) {
  if (csv_paths.empty()) throw UsageError("pass at least one --csv file");
  if (!labels.empty() && labels.size() != csv_paths.size())
    throw UsageError("--labels must match the number of --csv files");
  if (fs::exists(out_png) && !force)
    throw UsageError("output file exists (pass --force to overwrite): " + out_png);

  std::vector<std::pair<std::string, std::vector<PrPoint>>> curves;
  for (std::size_t i = 0; i < csv_paths.size(); ++i) {
    std::ifstream in(csv_paths[i]);
    if (!in) throw Error("cannot read " + csv_paths[i]);
    std::vector<PrPoint> curve;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (header) {
        header = false;
        continue;
      }
      std::istringstream ss(line);
      std::string cell;
      PrPoint p;
      double* fields[3] = {&p.threshold, &p.precision, &p.recall};
      for (int f = 0; f < 3; ++f) {
        if (!std::getline(ss, cell, ',')) throw Error("bad pr csv row in " + csv_paths[i]);
        try {
          *fields[f] = std::stod(cell);
        } catch (const std::exception&) {
          throw Error("bad pr csv value '" + cell + "' in " + csv_paths[i]);
        }
      }
      curve.push_back(p);
    }
    curves.emplace_back(labels.empty() ? stem_of(csv_paths[i]) : labels[i], std::move(curve));
  }
  const fs::path parent = fs::path(out_png).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  plot_pr_curves(curves, out_png);

  CommandResult r;
  r.artifacts = {out_png};
  r.summary = "plotted " + std::to_string(curves.size()) + " curves to " + out_png;
  return r;
}

namespace {

// Flag values live here across the parse; overrides apply only when the flag
// was actually given.
struct CliState {
  // global
  int jobs = 1;

  // shared
  std::string data;
  std::string out;
  std::string ckpt;
  std::string config_path;
  std::string split = "test";
  std::uint64_t seed = 1;
  bool force = false;

  // synth
  int side = 64;
  int n_train = 500, n_val = 100, n_test = 100;
  double texture = 0.35;

  // train / ablate overrides
  double lr = 1e-4;
  int batch_size = 16;
  int epochs = 40;
  double grad_clip = 1.0;
  double w_coord = 1.0, w_stroke = 1.0, w_eqv = 1.0;
  int t_max = 48, m = 10, d_h = 64, image_side = 64;
  std::string backbone = "tiny";
  bool no_eqv = false, attention_1d = false, single_scale = false;
  bool no_pen_state = false, l1_regression = false;
  bool non_deterministic = false;
  std::string resume;
  bool quiet = false;

  // generate / saliency
  std::vector<std::string> photos;
  double temperature = 1.0;
  bool greedy = false;
  int overlay_every = 10;
  int limit = -1;
  std::string mode = "free";
  bool f32 = false;

  // eval
  double beta_sq = 0.3;
  int thresholds = 256;
  bool per_image_fbeta = false;

  // probe / finetune
  int kernel = 3;
  bool random_init = false;
  int train_limit = -1;
  double fraction = 0.1;
  double head_lr = 5e-2;

  // ablate
  std::string variants = "full,no_eqv,attention_1d,single_scale";
  std::string seeds = "1,2,3";

  // plot-pr
  std::vector<std::string> csvs;
  std::string labels;
  std::string out_png;
};

TrainConfig train_config_from(const CliState& st, const CLI::App* sub) {
  TrainConfig cfg = TrainConfig::desk();
  if (!st.config_path.empty()) cfg = load_train_config(st.config_path);
  const auto given = [sub](const std::string& name) { return sub->count(name) > 0; };
  if (given("--lr")) cfg.lr = st.lr;
  if (given("--batch-size")) cfg.batch_size = st.batch_size;
  if (given("--epochs")) cfg.epochs = st.epochs;
  if (given("--grad-clip")) cfg.grad_clip = st.grad_clip;
  if (given("--w-coord")) cfg.w_coord = st.w_coord;
  if (given("--w-stroke")) cfg.w_stroke = st.w_stroke;
  if (given("--w-eqv")) cfg.w_eqv = st.w_eqv;
  if (given("--seed")) cfg.seed = st.seed;
  if (given("--t-max")) cfg.model.t_max = st.t_max;
  if (given("--mixtures")) cfg.model.m = st.m;
  if (given("--hidden")) cfg.model.d_h = st.d_h;
  if (given("--image-side")) cfg.model.image_side = st.image_side;
  if (given("--backbone")) cfg.model.backbone = st.backbone;
  if (given("--no-eqv")) cfg.model.ablations.no_eqv = st.no_eqv;
  if (given("--attention-1d")) cfg.model.ablations.attention_1d = st.attention_1d;
  if (given("--single-scale")) cfg.model.ablations.single_scale = st.single_scale;
  if (given("--no-pen-state")) cfg.model.ablations.no_pen_state = st.no_pen_state;
  if (given("--l1-regression")) cfg.model.ablations.l1_regression = st.l1_regression;
  if (given("--non-deterministic")) cfg.deterministic = !st.non_deterministic;
  return cfg;
}

void add_train_overrides(CLI::App* sub, CliState& st) {
  sub->add_option("--config", st.config_path, "JSON training config; flags override its fields")
      ->check(CLI::ExistingFile);
  sub->add_option("--lr", st.lr, "learning rate");
  sub->add_option("--batch-size", st.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  sub->add_option("--epochs", st.epochs, "training epochs")->check(CLI::PositiveNumber);
  sub->add_option("--grad-clip", st.grad_clip, "global gradient-norm clip (<= 0 disables)");
  sub->add_option("--w-coord", st.w_coord, "pen-state loss weight");
  sub->add_option("--w-stroke", st.w_stroke, "offset likelihood weight");
  sub->add_option("--w-eqv", st.w_eqv, "equivariance loss weight");
  sub->add_option("--seed", st.seed, "rng seed")->envname("SALSKETCH_SEED");
  sub->add_option("--t-max", st.t_max, "maximum sequence length")->check(CLI::PositiveNumber);
  sub->add_option("--mixtures", st.m, "mixture components")->check(CLI::PositiveNumber);
  sub->add_option("--hidden", st.d_h, "recurrent hidden width")->check(CLI::PositiveNumber);
  sub->add_option("--image-side", st.image_side, "input image side")->check(CLI::PositiveNumber);
  sub->add_option("--backbone", st.backbone, "backbone preset")
      ->check(CLI::IsMember({"tiny", "full"}));
  sub->add_flag("--no-eqv", st.no_eqv, "drop the equivariance term");
  sub->add_flag("--attention-1d", st.attention_1d, "factored 1d attention variant");
  sub->add_flag("--single-scale", st.single_scale, "coarsest-scale-only attention");
  sub->add_flag("--no-pen-state", st.no_pen_state, "drop the pen-state head");
  sub->add_flag("--l1-regression", st.l1_regression, "l1 offset head instead of the mixture");
  sub->add_flag("--non-deterministic", st.non_deterministic, "skip the determinism guards");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CliState st;
  CLI::App app{"Sequential photo-to-sketch model with attention-derived saliency maps"};
  app.require_subcommand(1);
  app.add_option("--jobs", st.jobs, "worker count (the pipeline is single-threaded; 1 only)")
      ->envname("SALSKETCH_JOBS")
      ->check(CLI::Range(1, 1024));

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic shape dataset");
  synth->add_option("--out", st.out, "output directory")->required();
  synth->add_option("--config", st.config_path, "JSON synthesis config")
      ->check(CLI::ExistingFile);
  synth->add_option("--seed", st.seed, "rng seed")->envname("SALSKETCH_SEED");
  synth->add_option("--side", st.side, "image side")->check(CLI::PositiveNumber);
  synth->add_option("--train", st.n_train, "training pairs")->check(CLI::NonNegativeNumber);
  synth->add_option("--val", st.n_val, "validation pairs")->check(CLI::NonNegativeNumber);
  synth->add_option("--test", st.n_test, "test pairs")->check(CLI::NonNegativeNumber);
  synth->add_option("--texture", st.texture, "background texture level");
  synth->add_flag("--force", st.force, "reuse a non-empty output directory");

  CLI::App* train_cmd = app.add_subcommand("train", "train the sketch model");
  train_cmd->add_option("--data", st.data, "dataset manifest")->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", st.out, "run directory")->required();
  add_train_overrides(train_cmd, st);
  train_cmd->add_option("--resume", st.resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);
  train_cmd->add_flag("--force", st.force, "reuse a non-empty run directory");
  train_cmd->add_flag("--quiet", st.quiet, "suppress per-epoch progress lines");

  CLI::App* gen = app.add_subcommand("generate", "sample sketches and attention overlays");
  gen->add_option("--ckpt", st.ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", st.out, "output directory")->required();
  gen->add_option("--photos", st.photos, "input photo PNGs")->check(CLI::ExistingFile);
  gen->add_option("--data", st.data, "dataset manifest")->check(CLI::ExistingFile);
  gen->add_option("--split", st.split, "manifest split")
      ->check(CLI::IsMember({"train", "val", "test"}));
  gen->add_option("--limit", st.limit, "cap on manifest photos");
  gen->add_option("--temperature", st.temperature, "sampling temperature")
      ->check(CLI::PositiveNumber);
  gen->add_flag("--greedy", st.greedy, "deterministic decoding");
  gen->add_option("--seed", st.seed, "sampling seed")->envname("SALSKETCH_SEED");
  gen->add_option("--overlay-every", st.overlay_every, "attention overlay interval (steps)");
  gen->add_flag("--force", st.force, "reuse a non-empty output directory");

  CLI::App* sal = app.add_subcommand("saliency", "predict saliency maps");
  sal->add_option("--ckpt", st.ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  sal->add_option("--out", st.out, "output directory")->required();
  sal->add_option("--photos", st.photos, "input photo PNGs")->check(CLI::ExistingFile);
  sal->add_option("--data", st.data, "dataset manifest")->check(CLI::ExistingFile);
  sal->add_option("--split", st.split, "manifest split")
      ->check(CLI::IsMember({"train", "val", "test"}));
  sal->add_option("--limit", st.limit, "cap on manifest photos");
  sal->add_option("--mode", st.mode, "free (generated) or teacher (ground-truth sketch)")
      ->check(CLI::IsMember({"free", "teacher"}));
  sal->add_flag("--f32", st.f32, "also write lossless float maps");
  sal->add_flag("--force", st.force, "reuse a non-empty output directory");

  CLI::App* eval_cmd = app.add_subcommand("eval", "saliency metrics over a manifest split");
  eval_cmd->add_option("--ckpt", st.ckpt, "model checkpoint")->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", st.data, "dataset manifest")->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", st.out, "output directory")->required();
  eval_cmd->add_option("--split", st.split, "manifest split")
      ->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_option("--beta-sq", st.beta_sq, "beta^2 of the F measure");
  eval_cmd->add_option("--thresholds", st.thresholds, "F sweep threshold count")
      ->check(CLI::Range(2, 100000));
  eval_cmd->add_flag("--per-image-fbeta", st.per_image_fbeta,
                     "average per-image maxima instead of pooling");
  eval_cmd->add_flag("--force", st.force, "reuse a non-empty output directory");

  CLI::App* probe = app.add_subcommand("probe", "linear saliency probe on frozen features");
  probe->add_option("--ckpt", st.ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  probe->add_option("--data", st.data, "dataset manifest")->required()->check(CLI::ExistingFile);
  probe->add_option("--out", st.out, "output directory")->required();
  probe->add_option("--kernel", st.kernel, "probe kernel side")->check(CLI::IsMember({1, 3}));
  probe->add_option("--epochs", st.epochs, "probe epochs")->check(CLI::PositiveNumber);
  probe->add_option("--lr", st.lr, "probe learning rate")->check(CLI::PositiveNumber);
  probe->add_option("--batch-size", st.batch_size, "probe batch size")
      ->check(CLI::PositiveNumber);
  probe->add_option("--seed", st.seed, "probe seed")->envname("SALSKETCH_SEED");
  probe->add_option("--train-limit", st.train_limit, "cap on probe training pairs");
  probe->add_flag("--random-init", st.random_init, "probe a freshly initialized backbone");
  probe->add_flag("--force", st.force, "reuse a non-empty output directory");

  CLI::App* ft = app.add_subcommand("finetune", "label-fraction saliency fine-tuning");
  ft->add_option("--ckpt", st.ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  ft->add_option("--data", st.data, "dataset manifest")->required()->check(CLI::ExistingFile);
  ft->add_option("--out", st.out, "output directory")->required();
  ft->add_option("--fraction", st.fraction, "labeled fraction of the train split")->required();
  ft->add_option("--epochs", st.epochs, "fine-tune epochs")->check(CLI::PositiveNumber);
  ft->add_option("--lr", st.lr, "backbone learning rate")->check(CLI::PositiveNumber);
  ft->add_option("--head-lr", st.head_lr, "prediction-head learning rate")
      ->check(CLI::PositiveNumber);
  ft->add_option("--batch-size", st.batch_size, "fine-tune batch size")
      ->check(CLI::PositiveNumber);
  ft->add_option("--seed", st.seed, "subset and shuffle seed")->envname("SALSKETCH_SEED");
  ft->add_flag("--random-init", st.random_init, "start from a fresh backbone");
  ft->add_flag("--force", st.force, "reuse a non-empty output directory");

  CLI::App* abl = app.add_subcommand("ablate", "train and score model variants");
  abl->add_option("--data", st.data, "dataset manifest")->required()->check(CLI::ExistingFile);
  abl->add_option("--out", st.out, "output directory")->required();
  add_train_overrides(abl, st);
  abl->add_option("--variants", st.variants, "comma list (full, no_eqv, attention_1d, "
                                             "single_scale, no_pen_state, l1_regression, m=<K>)");
  abl->add_option("--seeds", st.seeds, "comma list of seeds");
  abl->add_flag("--force", st.force, "reuse a non-empty output directory");
  abl->add_flag("--quiet", st.quiet, "suppress progress lines");

  CLI::App* plot = app.add_subcommand("plot-pr", "plot precision-recall CSVs");
  plot->add_option("--csv", st.csvs, "pr csv files")->required()->check(CLI::ExistingFile);
  plot->add_option("--labels", st.labels, "comma list of curve labels");
  plot->add_option("--out", st.out_png, "output PNG path")->required();
  plot->add_flag("--force", st.force, "overwrite an existing output file");

  try {
    app.parse(argc, argv);

    CommandResult res;
    if (app.got_subcommand(synth)) {
      SynthConfig cfg;
      if (!st.config_path.empty()) {
        std::ifstream in(st.config_path);
        if (!in) throw Error("cannot read " + st.config_path);
        Json j;
        in >> j;
        cfg = j.get<SynthConfig>();
      }
      const auto given = [&](const char* n) { return synth->count(n) > 0; };
      if (given("--side")) cfg.side = st.side;
      if (given("--train")) cfg.n_train = st.n_train;
      if (given("--val")) cfg.n_val = st.n_val;
      if (given("--test")) cfg.n_test = st.n_test;
      if (given("--texture")) cfg.texture_level = st.texture;
      res = cmd_synth(cfg, st.seed, st.out, st.force);
    } else if (app.got_subcommand(train_cmd)) {
      const TrainConfig cfg = train_config_from(st, train_cmd);
      res = cmd_train(cfg, st.data, st.out, st.force, st.resume,
                      st.quiet ? nullptr : &std::cerr);
    } else if (app.got_subcommand(gen)) {
      GenerateOptions opt;
      opt.temperature = st.temperature;
      opt.greedy = st.greedy;
      opt.seed = st.seed;
      opt.overlay_every = st.overlay_every;
      opt.limit = st.limit;
      res = cmd_generate(st.ckpt, st.photos, st.data, st.split, st.out, opt, st.force);
    } else if (app.got_subcommand(sal)) {
      SaliencyOptions opt;
      opt.mode = st.mode == "teacher" ? SaliencyMode::TeacherForced : SaliencyMode::FreeRunning;
      opt.f32 = st.f32;
      opt.limit = st.limit;
      res = cmd_saliency(st.ckpt, st.photos, st.data, st.split, st.out, opt, st.force);
    } else if (app.got_subcommand(eval_cmd)) {
      MetricConfig mcfg;
      mcfg.beta_sq = st.beta_sq;
      mcfg.thresholds = st.thresholds;
      mcfg.per_image_fbeta = st.per_image_fbeta;
      res = cmd_eval(st.ckpt, st.data, st.split, st.out, mcfg, st.force);
    } else if (app.got_subcommand(probe)) {
      ProbeOptions opt;
      opt.kernel = st.kernel;
      if (probe->count("--epochs") > 0) opt.epochs = st.epochs;
      if (probe->count("--lr") > 0) opt.lr = st.lr;
      if (probe->count("--batch-size") > 0) opt.batch_size = st.batch_size;
      opt.seed = st.seed;
      res = cmd_probe(st.ckpt, st.data, st.out, opt, st.random_init, st.train_limit, st.force);
    } else if (app.got_subcommand(ft)) {
      FinetuneOptions opt;
      opt.fraction = st.fraction;
      if (ft->count("--epochs") > 0) opt.epochs = st.epochs;
      if (ft->count("--lr") > 0) opt.lr = st.lr;
      if (ft->count("--head-lr") > 0) opt.head_lr = st.head_lr;
      if (ft->count("--batch-size") > 0) opt.batch_size = st.batch_size;
      opt.seed = st.seed;
      res = cmd_finetune(st.ckpt, st.data, st.out, opt, st.random_init, st.force);
    } else if (app.got_subcommand(abl)) {
      const TrainConfig cfg = train_config_from(st, abl);
      res = cmd_ablate(cfg, st.data, split_csv(st.variants), parse_seed_list(st.seeds), st.out,
                       st.force, st.quiet ? nullptr : &std::cerr);
    } else if (app.got_subcommand(plot)) {
      res = cmd_plot_pr(st.csvs, split_csv(st.labels), st.out_png, st.force);
    }

    std::cout << res.summary << "\n";
    for (const std::string& a : res.artifacts) std::cout << "  " << a << "\n";
    return res.exit_code;
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace salsketch
