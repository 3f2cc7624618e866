#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "salsketch/trainer.hpp"

namespace salsketch {

// Command misuse (bad flags, refusing to overwrite); exits with code 2.
struct UsageError : Error {
  using Error::Error;
};

struct CommandResult {
  int exit_code = 0;
  std::vector<std::string> artifacts;
  std::string summary;
};

CommandResult cmd_synth(const SynthConfig& cfg, std::uint64_t seed, const std::string& out_dir,
                        bool force);

CommandResult cmd_train(const TrainConfig& cfg, const std::string& manifest_path,
                        const std::string& out_dir, bool force, const std::string& resume = {},
                        std::ostream* progress = nullptr);

struct GenerateOptions {
  double temperature = 1.0;
  bool greedy = false;
  std::uint64_t seed = 1;
  int overlay_every = 10;
  int limit = -1;  // manifest mode: cap on the number of photos
};

// Photos come either from explicit paths or from a manifest split.
CommandResult cmd_generate(const std::string& ckpt, const std::vector<std::string>& photo_paths,
                           const std::string& manifest_path, const std::string& split,
                           const std::string& out_dir, const GenerateOptions& opt, bool force);

struct SaliencyOptions {
  SaliencyMode mode = SaliencyMode::FreeRunning;
  bool f32 = false;
  int limit = -1;
};

CommandResult cmd_saliency(const std::string& ckpt, const std::vector<std::string>& photo_paths,
                           const std::string& manifest_path, const std::string& split,
                           const std::string& out_dir, const SaliencyOptions& opt, bool force);

CommandResult cmd_eval(const std::string& ckpt, const std::string& manifest_path,
                       const std::string& split, const std::string& out_dir,
                       const MetricConfig& mcfg, bool force);

CommandResult cmd_probe(const std::string& ckpt, const std::string& manifest_path,
                        const std::string& out_dir, const ProbeOptions& opt, bool random_init,
                        int train_limit, bool force);

CommandResult cmd_finetune(const std::string& ckpt, const std::string& manifest_path,
                           const std::string& out_dir, const FinetuneOptions& opt, bool random_init,
                           bool force);

CommandResult cmd_ablate(const TrainConfig& base, const std::string& manifest_path,
                         const std::vector<std::string>& variants,
                         const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                         bool force, std::ostream* progress = nullptr);

CommandResult cmd_plot_pr(const std::vector<std::string>& csv_paths,
                          const std::vector<std::string>& labels, const std::string& out_png,
                          bool force);

int run_cli(int argc, const char* const* argv);

}  // namespace salsketch
