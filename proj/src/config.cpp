#include "salsketch/config.hpp"

#include <fstream>
#include <sstream>

namespace salsketch {

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

ModelConfig ModelConfig::tiny() { return ModelConfig{}; }

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.image_side = 256;
  c.backbone = "full";
  c.c_l = 512;
  c.c_lm1 = 512;
  c.c_lm2 = 256;
  c.d_h = 512;
  c.d = 256;
  c.m = 20;
  c.t_max = 250;
  return c;
}

int ModelConfig::head_dim() const {
  const int offsets = ablations.l1_regression ? 2 : 6 * m;
  const int pen = ablations.no_pen_state ? 0 : 3;
  return offsets + pen;
}

void ModelConfig::validate() const {
  if (backbone != "tiny" && backbone != "full") {
    throw ConfigError("backbone must be \"tiny\" or \"full\", got \"" + backbone + "\"");
  }
  if (image_side <= 0 || image_side % 32 != 0) {
    throw ConfigError("image_side must be a positive multiple of 32, got " +
                      std::to_string(image_side));
  }
  if (c_l <= 0 || c_lm1 <= 0 || c_lm2 <= 0) throw ConfigError("channel counts must be positive");
  if (d_h <= 0 || d <= 0) throw ConfigError("d_h and d must be positive");
  if (m <= 0) throw ConfigError("m must be positive");
  if (t_max <= 0) throw ConfigError("t_max must be positive");
}

void AffineConfig::validate() const {
  if (hflip_weight < 0 || vflip_weight < 0 || rotate_weight < 0 || scale_weight < 0) {
    throw ConfigError("transform weights must be nonnegative");
  }
  if (hflip_weight + vflip_weight + rotate_weight + scale_weight <= 0) {
    throw ConfigError("no transform kind enabled");
  }
  if (rot_min_deg > rot_max_deg) throw ConfigError("rotation range is empty");
  if (!(scale_min > 0) || scale_min > scale_max) throw ConfigError("scale range invalid");
}

double SynthConfig::effective_rdp_epsilon() const {
  return rdp_epsilon >= 0 ? rdp_epsilon : 2.0 * side / 256.0;
}

void SynthConfig::validate() const {
  if (side < 16) throw ConfigError("canvas too small for minimum shape size");
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("negative split size");
  if (shapes.empty()) throw ConfigError("shape vocabulary is empty");
  for (const auto& s : shapes) {
    if (s != "circle" && s != "rectangle" && s != "triangle" && s != "star") {
      throw ConfigError("unknown shape \"" + s + "\"");
    }
  }
  if (!(area_min > 0) || area_min >= area_max || area_max > 1.0) {
    throw ConfigError("area bounds invalid");
  }
  if (texture_level < 0 || texture_level > 1) throw ConfigError("texture_level outside [0,1]");
  if (min_contrast < 0 || min_contrast > 1) throw ConfigError("min_contrast outside [0,1]");
}

void MetricConfig::validate() const {
  if (!(beta_sq > 0)) throw ConfigError("beta_sq must be positive");
  if (s_alpha < 0 || s_alpha > 1) throw ConfigError("s_alpha outside [0,1]");
  if (thresholds < 2) throw ConfigError("thresholds must be >= 2");
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.model = ModelConfig::full();
  c.epochs = 50;
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  affine.validate();
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (grad_clip < 0) throw ConfigError("grad_clip must be nonnegative");
  if (w_coord < 0 || w_stroke < 0 || w_eqv < 0) throw ConfigError("loss weights must be >= 0");
}

void to_json(Json& j, const Ablations& a) {
  j = Json{{"no_eqv", a.no_eqv},
           {"attention_1d", a.attention_1d},
           {"single_scale", a.single_scale},
           {"no_pen_state", a.no_pen_state},
           {"l1_regression", a.l1_regression}};
}

void from_json(const Json& j, Ablations& a) {
  read_if(j, "no_eqv", a.no_eqv);
  read_if(j, "attention_1d", a.attention_1d);
  read_if(j, "single_scale", a.single_scale);
  read_if(j, "no_pen_state", a.no_pen_state);
  read_if(j, "l1_regression", a.l1_regression);
}

void to_json(Json& j, const AffineConfig& a) {
  j = Json{{"hflip_weight", a.hflip_weight}, {"vflip_weight", a.vflip_weight},
           {"rotate_weight", a.rotate_weight}, {"scale_weight", a.scale_weight},
           {"rot_min_deg", a.rot_min_deg},   {"rot_max_deg", a.rot_max_deg},
           {"scale_min", a.scale_min},       {"scale_max", a.scale_max}};
}

void from_json(const Json& j, AffineConfig& a) {
  read_if(j, "hflip_weight", a.hflip_weight);
  read_if(j, "vflip_weight", a.vflip_weight);
  read_if(j, "rotate_weight", a.rotate_weight);
  read_if(j, "scale_weight", a.scale_weight);
  read_if(j, "rot_min_deg", a.rot_min_deg);
  read_if(j, "rot_max_deg", a.rot_max_deg);
  read_if(j, "scale_min", a.scale_min);
  read_if(j, "scale_max", a.scale_max);
}

void to_json(Json& j, const SynthConfig& c) {
  j = Json{{"side", c.side},
           {"n_train", c.n_train},
           {"n_val", c.n_val},
           {"n_test", c.n_test},
           {"shapes", c.shapes},
           {"texture_level", c.texture_level},
           {"area_min", c.area_min},
           {"area_max", c.area_max},
           {"min_contrast", c.min_contrast},
           {"rdp_epsilon", c.rdp_epsilon}};
}

void from_json(const Json& j, SynthConfig& c) {
  read_if(j, "side", c.side);
  read_if(j, "n_train", c.n_train);
  read_if(j, "n_val", c.n_val);
  read_if(j, "n_test", c.n_test);
  read_if(j, "shapes", c.shapes);
  read_if(j, "texture_level", c.texture_level);
  read_if(j, "area_min", c.area_min);
  read_if(j, "area_max", c.area_max);
  read_if(j, "min_contrast", c.min_contrast);
  read_if(j, "rdp_epsilon", c.rdp_epsilon);
}

void to_json(Json& j, const MetricConfig& c) {
  j = Json{{"beta_sq", c.beta_sq},
           {"s_alpha", c.s_alpha},
           {"thresholds", c.thresholds},
           {"per_image_fbeta", c.per_image_fbeta}};
}

void from_json(const Json& j, MetricConfig& c) {
  read_if(j, "beta_sq", c.beta_sq);
  read_if(j, "s_alpha", c.s_alpha);
  read_if(j, "thresholds", c.thresholds);
  read_if(j, "per_image_fbeta", c.per_image_fbeta);
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"lr", c.lr},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"t_max", c.model.t_max},
           {"m", c.model.m},
           {"image_side", c.model.image_side},
           {"backbone", c.model.backbone},
           {"c_l", c.model.c_l},
           {"c_lm1", c.model.c_lm1},
           {"c_lm2", c.model.c_lm2},
           {"d_h", c.model.d_h},
           {"d", c.model.d},
           {"ablations", c.model.ablations},
           {"grad_clip", c.grad_clip},
           {"w_coord", c.w_coord},
           {"w_stroke", c.w_stroke},
           {"w_eqv", c.w_eqv},
           {"seed", c.seed},
           {"deterministic", c.deterministic},
           {"affine", c.affine}};
}

void from_json(const Json& j, TrainConfig& c) {
  read_if(j, "lr", c.lr);
  read_if(j, "batch_size", c.batch_size);
  read_if(j, "epochs", c.epochs);
  read_if(j, "t_max", c.model.t_max);
  read_if(j, "m", c.model.m);
  read_if(j, "image_side", c.model.image_side);
  read_if(j, "backbone", c.model.backbone);
  read_if(j, "c_l", c.model.c_l);
  read_if(j, "c_lm1", c.model.c_lm1);
  read_if(j, "c_lm2", c.model.c_lm2);
  read_if(j, "d_h", c.model.d_h);
  read_if(j, "d", c.model.d);
  read_if(j, "ablations", c.model.ablations);
  read_if(j, "grad_clip", c.grad_clip);
  read_if(j, "w_coord", c.w_coord);
  read_if(j, "w_stroke", c.w_stroke);
  read_if(j, "w_eqv", c.w_eqv);
  read_if(j, "seed", c.seed);
  read_if(j, "deterministic", c.deterministic);
  read_if(j, "affine", c.affine);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

void save_train_config(const TrainConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << Json(c).dump(2) << "\n";
}

std::string canonical_config_string(const TrainConfig& c) { return Json(c).dump(); }

std::uint64_t config_fingerprint(const TrainConfig& c) {
  // FNV-1a over the canonical dump.
  const std::string s = canonical_config_string(c);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace salsketch
