#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "gatas/config.hpp"
#include "gatas/graph.hpp"
#include "gatas/sampler.hpp"
#include "gatas/tensor.hpp"

namespace gatas {

/// Sinusoidal position encodings; row t (0..C) encodes position t,
/// row 0 being the self-loop position.
struct PositionalTable {
  Eigen::MatrixXd values;  // (C + 1) x D

  std::uint32_t max_steps() const { return static_cast<std::uint32_t>(values.rows()) - 1; }
  std::uint32_t dim() const { return static_cast<std::uint32_t>(values.cols()); }
};

/// values(t, 2i) = sin(t / 10000^(2i/D)), values(t, 2i+1) = cos(...). D must be even.
PositionalTable positional_table(std::uint32_t max_steps, std::uint32_t dim);

/// Model dimensions and switches, resolved from a Config and a graph.
struct ModelConfig {
  Task task = Task::kMultiClass;
  Ablation ablation = Ablation::kFull;
  std::uint32_t num_nodes = 0;
  std::uint32_t num_edge_types = 0;  // including the self-loop type
  std::uint32_t feature_dim = 0;     // raw feature width, 0 when the graph has none
  std::uint32_t num_outputs = 0;     // classes, labels, or raw edge types for links
  std::uint32_t max_steps = 3;
  std::uint32_t layer_size = 50;     // F, F' and F''
  std::uint32_t node_embedding_size = 10;
  std::uint32_t edge_embedding_size = 10;
  std::uint32_t heads = 8;
  std::uint32_t head_hidden_size = 256;
  double input_noise_rate = 0.0;
  double dropout = 0.0;
  bool l2_exclude_biases_embeddings = false;

  /// `base` is forced to one step; `base` and `no-embed` drop node embeddings.
  static ModelConfig resolve(const Config& config, const Graph& graph, std::uint32_t num_outputs);

  std::uint32_t embedding_size() const;  // effective R
  std::uint32_t input_size() const;      // R + F
  bool uses_paths() const { return ablation != Ablation::kNoPaths && ablation != Ablation::kBase; }
  bool uses_transitions() const {
    return ablation != Ablation::kNoTrans && ablation != Ablation::kBase;
  }
  SamplingMode sampling_mode() const {
    return uses_transitions() ? SamplingMode::kTransition : SamplingMode::kUniform;
  }
};

/// Forward products of one batch of neighbourhood samples.
template <typename T>
struct BatchOutput {
  nn::Var<T> representations;         // batch x (heads * layer_size)
  std::vector<nn::Var<T>> attention;  // per head, batch x S; padding columns are 0
  nn::Var<T> neighbour_reps;          // one row per valid sample entry
  nn::Var<T> position_weights;        // valid entries x C; unused positions are 0
  std::vector<nn::Index> entry_row;   // valid entry -> batch row
  std::vector<nn::Index> entry_slot;  // valid entry -> slot within its sample
};

template <typename T>
class GatasModel {
 public:
  GatasModel(const ModelConfig& config, const Graph& graph, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore<T>& params() { return params_; }
  const nn::ParameterStore<T>& params() const { return params_; }
  const PositionalTable& positions() const { return positions_; }

  /// Current step weights q = softmax(step logits).
  std::vector<double> step_weights() const;

  /// h rows for `nodes`: [l || b], l, or b depending on the configuration.
  nn::Var<T> node_inputs(nn::Tape<T>& tape, std::span<const NodeId> nodes, Rng& rng,
                         bool train);

  /// Neighbour representations, path attention and multi-head node attention
  /// for each sample; all samples must share the same capacity.
  BatchOutput<T> represent(nn::Tape<T>& tape, std::span<const NeighbourhoodSample> samples,
                           Rng& rng, bool train);

  /// Class or label logits from node representations.
  nn::Var<T> classify(nn::Var<T> representations, Rng& rng, bool train);

  /// Existence logit for each ordered pair (rows into `representations`) under
  /// the given raw (pre-augmentation) edge type.
  nn::Var<T> score_links(nn::Var<T> representations, std::span<const nn::Index> sources,
                         std::span<const nn::Index> targets, std::span<const EdgeTypeId> raw_types,
                         Rng& rng, bool train);

  /// Tape leaves for every parameter subject to the L2 penalty.
  std::vector<nn::Var<T>> regularized(nn::Tape<T>& tape);

 private:
  nn::Var<T> leaf(nn::Tape<T>& tape, const std::string& name);
  nn::Var<T> dense(nn::Tape<T>& tape, nn::Var<T> x, const std::string& prefix, bool activate);

  ModelConfig config_;
  PathCodebook codebook_;
  PositionalTable positions_;
  nn::Matrix<T> features_;  // layer-normalized raw features, num_nodes x feature_dim
  nn::ParameterStore<T> params_;
};

extern template class GatasModel<float>;
extern template class GatasModel<double>;

}  // namespace gatas
