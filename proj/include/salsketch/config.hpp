#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "salsketch/common.hpp"

namespace salsketch {

using Json = nlohmann::json;

struct Ablations {
  bool no_eqv = false;
  bool attention_1d = false;
  bool single_scale = false;
  bool no_pen_state = false;
  bool l1_regression = false;
};

// Network dimensions. Presets: full() is the full-scale training setup,
// tiny() is the desk-scale setup used throughout the tests.
struct ModelConfig {
  int image_side = 64;
  std::string backbone = "tiny";  // "tiny" or "full"
  int c_l = 32;                   // channels at /32
  int c_lm1 = 32;                 // channels at /16
  int c_lm2 = 16;                 // channels at /8
  int d_h = 64;                   // recurrent hidden width
  int d = 32;                     // attention embedding width
  int m = 10;                     // mixture components
  int t_max = 48;

  static ModelConfig tiny();
  static ModelConfig full();

  Ablations ablations;

  // Decoder head width: 6M+3 for the GMM head, shrunk by the ablations.
  int head_dim() const;
  void validate() const;
};

struct AffineConfig {
  double hflip_weight = 1.0;
  double vflip_weight = 0.0;
  double rotate_weight = 0.5;
  double scale_weight = 0.5;
  double rot_min_deg = -15.0;
  double rot_max_deg = 15.0;
  double scale_min = 0.8;
  double scale_max = 1.2;

  void validate() const;
};

struct SynthConfig {
  int side = 64;
  int n_train = 500;
  int n_val = 100;
  int n_test = 100;
  std::vector<std::string> shapes = {"circle", "rectangle", "triangle", "star"};
  double texture_level = 0.35;
  double area_min = 0.05;
  double area_max = 0.4;
  double min_contrast = 0.25;
  double rdp_epsilon = -1.0;  // < 0 selects 2.0 * side / 256

  double effective_rdp_epsilon() const;
  void validate() const;
};

struct MetricConfig {
  double beta_sq = 0.3;
  double s_alpha = 0.5;
  int thresholds = 256;
  bool per_image_fbeta = false;

  void validate() const;
};

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-4;
  int batch_size = 16;
  int epochs = 40;
  double grad_clip = 1.0;
  double w_coord = 1.0;
  double w_stroke = 1.0;
  double w_eqv = 1.0;
  std::uint64_t seed = 1;
  bool deterministic = true;
  AffineConfig affine;

  static TrainConfig desk();
  static TrainConfig full();
  void validate() const;
};

// JSON round-trips. TrainConfig serializes flat (model fields at top level).
void to_json(Json& j, const Ablations& a);
void from_json(const Json& j, Ablations& a);
void to_json(Json& j, const AffineConfig& a);
void from_json(const Json& j, AffineConfig& a);
void to_json(Json& j, const SynthConfig& c);
void from_json(const Json& j, SynthConfig& c);
void to_json(Json& j, const MetricConfig& c);
void from_json(const Json& j, MetricConfig& c);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);

TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& c, const std::string& path);

// Canonical serialized form (sorted keys) used for checkpoint fingerprints.
std::string canonical_config_string(const TrainConfig& c);
std::uint64_t config_fingerprint(const TrainConfig& c);

}  // namespace salsketch
