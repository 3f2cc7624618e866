#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "nlohmann/json.hpp"
#include "salsketch/trainer.hpp"

using namespace salsketch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("salsketch_trainer_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

TrainConfig micro_train() {
  TrainConfig cfg = TrainConfig::desk();
  cfg.model.c_l = 8;
  cfg.model.c_lm1 = 8;
  cfg.model.c_lm2 = 4;
  cfg.model.d_h = 8;
  cfg.model.d = 8;
  cfg.model.m = 2;
  cfg.model.t_max = 48;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.lr = 1e-3;
  return cfg;
}

SynthConfig micro_synth() {
  SynthConfig cfg;
  cfg.side = 64;
  cfg.n_train = 6;
  cfg.n_val = 2;
  cfg.n_test = 2;
  cfg.rdp_epsilon = 2.0;  // short outlines keep the unrolls fast
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One shared corpus for every trainer test.
struct Corpus {
  TempDir dir{"corpus"};
  DatasetManifest manifest;
  Corpus() { manifest = write_synthetic_dataset(micro_synth(), 21, dir.str()); }
};

Corpus& corpus() {
  static Corpus c;
  return c;
}

}  // namespace

TEST_CASE("checkpoints round trip bit-exactly") {
  TempDir tmp("ckpt");
  TrainConfig cfg = micro_train();
  SketchModel model(cfg.model, 99);
  model.set_offset_scale(7.25);

  CheckpointMeta meta;
  meta.config = cfg;
  meta.epoch = 3;
  meta.global_step = 41;
  meta.offset_scale = model.offset_scale();
  std::mt19937_64 rng(5);
  rng.discard(17);
  {
    std::ostringstream ss;
    ss << rng;
    meta.rng_state = ss.str();
  }

  AdamState opt = AdamState::zeros_like(model.params());
  opt.t = 11;
  std::mt19937_64 noise(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Matrix& m : opt.m)
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i / m.cols(), i % m.cols()) = u(noise);
  for (Matrix& v : opt.v)
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i / v.cols(), i % v.cols()) = u(noise) + 1.5;

  const std::string path = (tmp.path / "a.bin").string();
  save_checkpoint(path, model, meta, &opt);
  const LoadedCheckpoint lc = load_checkpoint(path);

  CHECK(lc.meta.epoch == meta.epoch);
  CHECK(lc.meta.global_step == meta.global_step);
  CHECK(lc.meta.offset_scale == meta.offset_scale);
  CHECK(lc.meta.rng_state == meta.rng_state);
  CHECK(lc.model.offset_scale() == model.offset_scale());
  CHECK(config_fingerprint(lc.meta.config) == config_fingerprint(cfg));
  for (const std::string& name : model.params().order()) {
    const Matrix& a = model.params().at(name);
    const Matrix& b = lc.model.params().at(name);
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  }
  REQUIRE(lc.has_opt);
  CHECK(lc.opt.t == opt.t);
  REQUIRE(lc.opt.m.size() == opt.m.size());
  for (std::size_t i = 0; i < opt.m.size(); ++i) {
    CHECK(std::memcmp(lc.opt.m[i].data(), opt.m[i].data(), sizeof(double) * opt.m[i].size()) == 0);
    CHECK(std::memcmp(lc.opt.v[i].data(), opt.v[i].data(), sizeof(double) * opt.v[i].size()) == 0);
  }

  const std::string bare = (tmp.path / "b.bin").string();
  save_checkpoint(bare, model, meta, nullptr);
  CHECK_FALSE(load_checkpoint(bare).has_opt);
}

TEST_CASE("corrupt checkpoint files are rejected") {
  TempDir tmp("corrupt");
  CHECK_THROWS_AS(load_checkpoint((tmp.path / "missing.bin").string()), Error);

  TrainConfig cfg = micro_train();
  SketchModel model(cfg.model, 1);
  CheckpointMeta meta;
  meta.config = cfg;
  const std::string good = (tmp.path / "good.bin").string();
  save_checkpoint(good, model, meta);

  const std::string whole = slurp(good);
  {
    std::ofstream out(tmp.path / "truncated.bin", std::ios::binary);
    out.write(whole.data(), static_cast<std::streamsize>(whole.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint((tmp.path / "truncated.bin").string()), Error);

  {
    std::string bad = whole;
    bad[0] = 'X';
    std::ofstream out(tmp.path / "badmagic.bin", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_AS(load_checkpoint((tmp.path / "badmagic.bin").string()), Error);
}

TEST_CASE("training writes logs plus checkpoints and reports progress") {
  TempDir out("train");
  const TrainConfig cfg = micro_train();
  std::ostringstream progress;
  const TrainResult res = train(cfg, corpus().manifest, out.str(), {}, &progress);

  CHECK(res.epochs_run == cfg.epochs);
  CHECK(res.steps == cfg.epochs * 2);  // 6 samples in batches of 4
  CHECK(std::isfinite(res.initial_stroke_nll));
  CHECK(std::isfinite(res.final_stroke_nll));
  CHECK(fs::exists(res.final_checkpoint));
  CHECK(fs::exists(out.path / "ckpt_epoch_001.bin"));
  CHECK(fs::exists(out.path / "ckpt_epoch_002.bin"));
  CHECK(fs::exists(out.path / "train_log.ndjson"));
  CHECK(progress.str().find("epoch") != std::string::npos);

  std::ifstream log(out.path / "train_log.ndjson");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("step"));
    CHECK(j.contains("stroke"));
    CHECK(j.contains("total"));
    ++lines;
  }
  CHECK(lines == res.steps);  // one log line per optimizer step

  const LoadedCheckpoint lc = load_checkpoint(res.final_checkpoint);
  CHECK(lc.meta.epoch == cfg.epochs);
  CHECK(lc.model.offset_scale() > 0.0);
}

TEST_CASE("same-seed training runs are bit-identical") {
  TempDir a("det_a"), b("det_b");
  const TrainConfig cfg = micro_train();
  train(cfg, corpus().manifest, a.str());
  train(cfg, corpus().manifest, b.str());
  CHECK(slurp(a.path / "train_log.ndjson") == slurp(b.path / "train_log.ndjson"));
  CHECK(slurp(a.path / "ckpt_final.bin") == slurp(b.path / "ckpt_final.bin"));
}

TEST_CASE("resuming reproduces the uninterrupted run bit-exactly") {
  TempDir straight("straight"), split("split");
  TrainConfig cfg = micro_train();
  cfg.epochs = 2;
  train(cfg, corpus().manifest, straight.str());

  TrainConfig first = cfg;
  first.epochs = 1;
  train(first, corpus().manifest, split.str());
  train(cfg, corpus().manifest, split.str(), (split.path / "ckpt_final.bin").string());

  CHECK(slurp(straight.path / "ckpt_final.bin") == slurp(split.path / "ckpt_final.bin"));

  TrainConfig other = cfg;
  other.lr *= 2.0;
  CHECK_THROWS_AS(
      train(other, corpus().manifest, split.str(), (split.path / "ckpt_final.bin").string()),
      ConfigError);
}

TEST_CASE("split evaluation fills per-image rows and aggregates") {
  const TrainConfig cfg = micro_train();
  const SketchModel model(cfg.model, 31);
  const auto pairs = preprocess_pairs(load_pairs(corpus().manifest, "test"), cfg.model.image_side);
  REQUIRE_FALSE(pairs.empty());

  MetricConfig mcfg;
  mcfg.thresholds = 32;
  std::vector<PerImageRow> rows;
  const EvalReport rep = evaluate_split(model, pairs, SaliencyMode::TeacherForced, mcfg, &rows);
  CHECK(rep.images == static_cast<int>(pairs.size()));
  REQUIRE(rows.size() == pairs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].id == pairs[i].photo.id);
    CHECK(rows[i].mae >= 0.0);
    CHECK(rows[i].mae <= 1.0);
    CHECK(rows[i].max_fbeta >= 0.0);
    CHECK(rows[i].max_fbeta <= 1.0);
    CHECK(rows[i].s_measure >= 0.0);
    CHECK(rows[i].s_measure <= 1.0);
  }

  TempDir tmp("csv");
  const std::string csv = (tmp.path / "per_image.csv").string();
  write_per_image_csv(rows, csv);
  std::ifstream in(csv);
  std::string line;
  REQUIRE(static_cast<bool>(std::getline(in, line)));
  CHECK(line == "id,mae,max_fbeta,best_threshold,weighted_fbeta,s_measure");
  int data_lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++data_lines;
  CHECK(data_lines == static_cast<int>(rows.size()));
}

TEST_CASE("attention mass statistics stay consistent") {
  const TrainConfig cfg = micro_train();
  const SketchModel model(cfg.model, 37);
  const auto pairs = preprocess_pairs(load_pairs(corpus().manifest, "train"), cfg.model.image_side);

  const MassStats one = attention_mass_in_mask(model, pairs[0]);
  CHECK(one.mass_in_mask >= 0.0);
  CHECK(one.mass_in_mask <= 1.0 + 1e-9);
  CHECK(one.area_fraction > 0.0);
  CHECK(one.ratio == doctest::Approx(one.mass_in_mask / one.area_fraction).epsilon(1e-12));

  const MassStats mean = mean_attention_mass(model, pairs);
  double mass = 0.0, area = 0.0;
  for (const PairedSample& s : pairs) {
    const MassStats ms = attention_mass_in_mask(model, s);
    mass += ms.mass_in_mask;
    area += ms.area_fraction;
  }
  mass /= static_cast<double>(pairs.size());
  area /= static_cast<double>(pairs.size());
  CHECK(mean.mass_in_mask == doctest::Approx(mass).epsilon(1e-12));
  CHECK(mean.area_fraction == doctest::Approx(area).epsilon(1e-12));
  CHECK(mean.ratio == doctest::Approx(mass / area).epsilon(1e-12));

  PairedSample unlabeled = pairs[0];
  unlabeled.gt_mask = Matrix();
  CHECK_THROWS_AS(attention_mass_in_mask(model, unlabeled), DegenerateDataset);
  CHECK_THROWS_AS(mean_attention_mass(model, {unlabeled}), DegenerateDataset);
}

TEST_CASE("the linear probe leaves the backbone untouched") {
  const TrainConfig cfg = micro_train();
  const SketchModel model(cfg.model, 41);
  const auto train_pairs =
      preprocess_pairs(load_pairs(corpus().manifest, "train"), cfg.model.image_side);
  const auto eval_pairs =
      preprocess_pairs(load_pairs(corpus().manifest, "test"), cfg.model.image_side);

  ProbeOptions opt;
  opt.epochs = 2;
  opt.batch_size = 4;
  const ProbeResult res = linear_probe(model, train_pairs, eval_pairs, opt);
  CHECK(res.backbone_unchanged);
  CHECK(std::isfinite(res.final_bce));
  CHECK(res.final_bce > 0.0);
  CHECK(res.report.images == static_cast<int>(eval_pairs.size()));

  ProbeOptions k1 = opt;
  k1.kernel = 1;
  CHECK(linear_probe(model, train_pairs, eval_pairs, k1).backbone_unchanged);

  ProbeOptions bad = opt;
  bad.kernel = 2;
  CHECK_THROWS_AS(linear_probe(model, train_pairs, eval_pairs, bad), ConfigError);
}

TEST_CASE("finetuning draws a floor-sized labeled subset") {
  const TrainConfig cfg = micro_train();
  const SketchModel model(cfg.model, 43);
  const auto train_pairs =
      preprocess_pairs(load_pairs(corpus().manifest, "train"), cfg.model.image_side);
  const auto eval_pairs =
      preprocess_pairs(load_pairs(corpus().manifest, "test"), cfg.model.image_side);

  FinetuneOptions opt;
  opt.fraction = 0.5;
  opt.epochs = 1;
  opt.batch_size = 2;
  const FinetuneResult res = finetune_fraction(model, train_pairs, eval_pairs, opt);
  CHECK(res.subset_size == 3);  // floor(0.5 * 6)
  CHECK(std::isfinite(res.final_bce));
  CHECK(res.report.images == static_cast<int>(eval_pairs.size()));

  FinetuneOptions tiny = opt;
  tiny.fraction = 0.05;  // floor(0.3) == 0 labeled samples
  CHECK_THROWS_AS(finetune_fraction(model, train_pairs, eval_pairs, tiny), ConfigError);

  FinetuneOptions bad = opt;
  bad.fraction = 1.5;
  CHECK_THROWS_AS(finetune_fraction(model, train_pairs, eval_pairs, bad), ConfigError);
}

TEST_CASE("median selection works for odd and even row counts") {
  std::vector<AblationRow> rows;
  for (double f : {0.3, 0.1, 0.2}) {
    AblationRow r;
    r.variant = "full";
    r.max_fbeta = f;
    rows.push_back(r);
  }
  CHECK(median_fbeta(rows, "full") == 0.2);
  AblationRow extra;
  extra.variant = "full";
  extra.max_fbeta = 0.4;
  rows.push_back(extra);
  CHECK(median_fbeta(rows, "full") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(median_fbeta(rows, "absent"), ConfigError);
}
