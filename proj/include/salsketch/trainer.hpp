#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "salsketch/checkpoint.hpp"
#include "salsketch/data.hpp"
#include "salsketch/metrics.hpp"

namespace salsketch {

// Rescales photo, sketch and mask to the model input side (no-op when the
// sizes already match). Half-pixel convention, matching the resampler.
std::vector<PairedSample> preprocess_pairs(std::vector<PairedSample> pairs, int side);

struct TrainResult {
  std::string final_checkpoint;
  double initial_stroke_nll = 0.0;  // teacher-forced train mean before the first update
  double final_stroke_nll = 0.0;    // same after the last epoch
  long steps = 0;
  int epochs_run = 0;
};

// Adaptive-moment training of the full objective. Writes per-epoch checkpoints
// (ckpt_epoch_NNN.bin), ckpt_final.bin and train_log.ndjson under out_dir.
// `resume_from` restores parameters, optimizer and rng for a bit-exact
// continuation; its fingerprint must match cfg. `progress`, when given,
// receives one human-readable line per epoch.
TrainResult train(const TrainConfig& cfg, const DatasetManifest& data, const std::string& out_dir,
                  const std::string& resume_from = {}, std::ostream* progress = nullptr);

struct PerImageRow {
  std::string id;
  double mae = 0.0;
  double max_fbeta = 0.0;
  double best_threshold = 0.0;
  double weighted_fbeta = 0.0;
  double s_measure = 0.0;
};

// Saliency prediction per image plus metric aggregation. Pairs must carry
// masks and already be at the model side.
EvalReport evaluate_split(const SketchModel& model, const std::vector<PairedSample>& pairs,
                          SaliencyMode mode, const MetricConfig& mcfg = {},
                          std::vector<PerImageRow>* per_image = nullptr);
void write_per_image_csv(const std::vector<PerImageRow>& rows, const std::string& path);

// Fraction of pre-normalization attention mass falling inside the object
// mask, compared against the mask's area fraction.
struct MassStats {
  double mass_in_mask = 0.0;
  double area_fraction = 0.0;
  double ratio = 0.0;
};
MassStats attention_mass_in_mask(const SketchModel& model, const PairedSample& sample);
MassStats mean_attention_mass(const SketchModel& model, const std::vector<PairedSample>& pairs);

struct ProbeOptions {
  int kernel = 3;  // 1 or 3
  int epochs = 8;
  double lr = 0.05;
  int batch_size = 16;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  EvalReport report;
  double final_bce = 0.0;
  bool backbone_unchanged = false;
};

// One learnable conv layer on the bilinearly-upsampled coarsest feature map,
// trained with pixel-wise binary cross-entropy; the backbone stays frozen.
ProbeResult linear_probe(const SketchModel& model, const std::vector<PairedSample>& train_pairs,
                         const std::vector<PairedSample>& eval_pairs, const ProbeOptions& opt);

struct FinetuneOptions {
  double fraction = 0.1;
  int epochs = 150;       // passes over the labeled subset
  double lr = 1e-4;       // backbone rate; small so early head noise cannot wreck the features
  double head_lr = 5e-2;  // fresh prediction head needs a larger step
  int batch_size = 8;
  std::uint64_t seed = 1;
};

struct FinetuneResult {
  EvalReport report;
  int subset_size = 0;
  double final_bce = 0.0;
};

// Full-network fine-tuning (backbone + 3x3 head) with pixel-wise binary
// cross-entropy on a seed-deterministic subset of the labeled pairs.
FinetuneResult finetune_fraction(SketchModel model, const std::vector<PairedSample>& train_pairs,
                                 const std::vector<PairedSample>& eval_pairs,
                                 const FinetuneOptions& opt);

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double max_fbeta = 0.0;
  double mae = 0.0;
  double s_measure = 0.0;
  double stroke_nll = 0.0;
};

// Trains every requested variant with each seed and evaluates the test split
// (teacher-forced saliency). Known variants: full, no_eqv, attention_1d,
// single_scale, no_pen_state, l1_regression, m=<K>.
std::vector<AblationRow> run_ablation_suite(const TrainConfig& base, const DatasetManifest& data,
                                            const std::vector<std::string>& variants,
                                            const std::vector<std::uint64_t>& seeds,
                                            const std::string& out_dir,
                                            std::ostream* progress = nullptr);
void write_ablation_outputs(const std::vector<AblationRow>& rows, const std::string& out_dir);
double median_fbeta(const std::vector<AblationRow>& rows, const std::string& variant);

}  // namespace salsketch
