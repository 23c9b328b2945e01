#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gatas/config.hpp"
#include "gatas/data.hpp"
#include "gatas/model.hpp"
#include "gatas/transition.hpp"

namespace gatas {

/// Steps actually used by a run: the base ablation works on direct neighbours.
std::uint32_t effective_max_steps(const Config& config);

/// Everything a run needs besides the model: the augmented training graph,
/// its transition tensors, targets and splits.
struct TrainingData {
  Task task = Task::kMultiClass;
  bool directed = false;
  Graph graph;  // augmented training graph
  TransitionTensors tensors;
  std::uint32_t num_outputs = 0;
  std::vector<std::vector<std::uint32_t>> labels;
  std::array<std::vector<NodeId>, 3> nodes;
  std::array<std::vector<LabeledEdge>, 3> edges;  // raw edge types
  std::set<Triplet> known_edges;                  // raw, full graph; excluded from negatives

  const std::vector<NodeId>& split_nodes(Split s) const { return nodes[static_cast<int>(s)]; }
  const std::vector<LabeledEdge>& split_edges(Split s) const {
    return edges[static_cast<int>(s)];
  }
};

/// Augmented graph the model sees: link tasks drop held-out positive edges.
Graph model_graph(const DatasetBundle& bundle, Task task);

/// Builds the training graph and, unless `tensors` is given, precomputes its
/// transition tensors. A supplied cache must match the training graph.
TrainingData prepare(const DatasetBundle& bundle, const Config& config,
                     std::optional<TransitionTensors> tensors = std::nullopt);

ModelConfig model_config(const Config& config, const TrainingData& data);

struct Evaluation {
  std::string metric;  // accuracy, micro_f1 or roc_auc
  double value = 0.0;
  double loss = 0.0;   // mean task loss, no penalty
  double f1 = 0.0;     // link prediction only (macro over edge types)
  std::size_t count = 0;
};

struct EpochRecord {
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double val_loss = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::uint32_t best_epoch = 0;
  Evaluation best;
};

/// Seed used for every evaluation-time neighbourhood sample of a run.
std::uint64_t evaluation_seed(const Config& config);

/// Mean task loss (softmax or sigmoid cross-entropy) plus l2 * sum of squared
/// regularized parameters.
template <typename T>
nn::Var<T> objective(GatasModel<T>& model, nn::Tape<T>& tape, nn::Var<T> task_loss, double l2);

template <typename T>
Evaluation evaluate(GatasModel<T>& model, const TrainingData& data, Split split,
                    const Config& config);

/// Nadam over shuffled training batches with fresh neighbourhood samples each
/// epoch (unless freeze_samples). Stops once `patience` epochs pass without a
/// better validation metric (ties broken by validation loss) and restores the
/// best parameters.
template <typename T>
FitResult fit(GatasModel<T>& model, const TrainingData& data, const Config& config,
              const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV with header epoch,train_loss,val_metric,val_loss.
void write_history(std::ostream& out, const std::vector<EpochRecord>& history);

extern template nn::Var<float> objective(GatasModel<float>&, nn::Tape<float>&, nn::Var<float>, double);
extern template nn::Var<double> objective(GatasModel<double>&, nn::Tape<double>&, nn::Var<double>, double);
extern template Evaluation evaluate(GatasModel<float>&, const TrainingData&, Split, const Config&);
extern template Evaluation evaluate(GatasModel<double>&, const TrainingData&, Split, const Config&);
extern template FitResult fit(GatasModel<float>&, const TrainingData&, const Config&,
                              const std::function<void(const EpochRecord&)>&);
extern template FitResult fit(GatasModel<double>&, const TrainingData&, const Config&,
                              const std::function<void(const EpochRecord&)>&);

}  // namespace gatas
