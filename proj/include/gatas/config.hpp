#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gatas {

enum class Task { kMultiClass, kMultiLabel, kLinkPrediction };

enum class Ablation {
  kFull,     // the complete model
  kBase,     // 1-step uniform sampling, no ln P, no path transforms, no node embeddings
  kNoTrans,  // uniform sampling over the C-step support, no ln P in attention
  kNoEmbed,  // h = b, no learnable node embeddings
  kNoPaths,  // neighbour representation is a shared projection of h_j
};

std::string_view to_string(Task task);
std::string_view to_string(Ablation ablation);
Task parse_task(std::string_view text);
Ablation parse_ablation(std::string_view text);

/// Flat run configuration. Keys mirror the hyper-parameter names used in
/// the JSON config file; defaults depend on the task.
struct Config {
  Task task = Task::kMultiClass;
  Ablation ablation = Ablation::kFull;

  std::uint32_t max_steps = 3;
  std::uint32_t sample_size = 100;
  std::uint32_t layer_size = 50;
  std::uint32_t node_embedding_size = 10;
  std::uint32_t edge_embedding_size = 10;
  std::uint32_t heads = 8;
  std::uint32_t head_hidden_size = 256;
  double input_noise_rate = 0.9;
  double dropout = 0.5;
  double l2 = 0.05;
  bool l2_exclude_biases_embeddings = false;
  double learning_rate = 0.001;
  std::uint32_t max_epochs = 1000;
  std::uint32_t patience = 100;
  std::uint32_t batch_size = 5000;
  std::uint64_t seed = 0;

  bool freeze_samples = false;
  double val_fraction = 0.05;
  double test_fraction = 0.10;
  unsigned threads = 0;
  std::string dataset;
  std::string cache;

  /// Raises ConfigError on out-of-range values.
  void validate() const;
};

/// Defaults for a task, following the published experiment settings.
Config defaults_for(Task task);

/// Parses a flat JSON object. "task" selects the defaults, other keys override
/// them; unknown keys are rejected.
Config config_from_json(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Resolved configuration as pretty-printed JSON (every key present).
std::string config_to_json(const Config& config);

}  // namespace gatas
