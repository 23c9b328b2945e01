#include "gatas/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <unordered_map>

#include "gatas/error.hpp"
#include "gatas/metrics.hpp"
#include "gatas/optimizer.hpp"
#include "gatas/sampler.hpp"

namespace gatas {

using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Var;

std::uint32_t effective_max_steps(const Config& config) {
  return config.ablation == Ablation::kBase ? 1 : config.max_steps;
}

Graph model_graph(const DatasetBundle& bundle, Task task) {
  return augment_graph(task == Task::kLinkPrediction ? training_graph(bundle) : bundle.graph);
}

TrainingData prepare(const DatasetBundle& bundle, const Config& config,
                     std::optional<TransitionTensors> tensors) {
  config.validate();
  validate_bundle(bundle, config.task);
  TrainingData data;
  data.task = config.task;
  data.directed = bundle.directed;
  data.labels = bundle.labels;
  data.nodes = bundle.nodes;
  data.edges = bundle.edges;

  if (config.task == Task::kLinkPrediction) {
    data.num_outputs = bundle.graph.num_edge_types();
    for (Split s : {Split::kVal, Split::kTest}) {
      if (bundle.split_edges(s).empty()) throw DataError(to_string(s) + " split has no edges");
    }
    for (const Triplet& t : bundle.graph.triplets()) data.known_edges.insert(t);
    data.graph = model_graph(bundle, config.task);
    auto& positives = data.edges[static_cast<int>(Split::kTrain)];
    std::erase_if(positives, [](const LabeledEdge& e) { return !e.positive; });
    if (positives.empty()) {
      for (const Triplet& t : data.graph.triplets()) {
        if (t.type == kSelfLoopType || (!bundle.directed && t.source > t.target)) continue;
        positives.push_back({t.source, t.type - 1, t.target, true});
      }
    }
    if (positives.empty()) throw DataError("training split has no edges");
  } else {
    if (bundle.num_classes == 0) throw DataError("dataset has no labels");
    data.num_outputs = bundle.num_classes;
    if (config.task == Task::kMultiClass && bundle.num_classes < 2) {
      throw DataError("multi-class task needs at least two classes");
    }
    if (bundle.split_nodes(Split::kTrain).empty()) throw DataError("training split is empty");
    if (bundle.split_nodes(Split::kVal).empty()) throw DataError("validation split is empty");
    data.graph = model_graph(bundle, config.task);
  }

  const std::uint32_t steps = effective_max_steps(config);
  if (tensors) {
    if (tensors->graph_checksum != data.graph.checksum()) {
      throw DataError("transition cache was built for a different graph");
    }
    if (tensors->max_steps() != steps) {
      throw ConfigError("transition cache holds " + std::to_string(tensors->max_steps()) +
                        " steps, configuration needs " + std::to_string(steps));
    }
    data.tensors = std::move(*tensors);
  } else {
    data.tensors = precompute(data.graph, steps, config.threads);
  }
  return data;
}

ModelConfig model_config(const Config& config, const TrainingData& data) {
  return ModelConfig::resolve(config, data.graph, data.num_outputs);
}

std::uint64_t evaluation_seed(const Config& config) { return derive_seed(config.seed, 0x6576616cULL); }

template <typename T>
Var<T> objective(GatasModel<T>& model, Tape<T>& tape, Var<T> task_loss, double l2) {
  if (l2 == 0.0) return task_loss;
  const std::vector<Var<T>> weights = model.regularized(tape);
  if (weights.empty()) return task_loss;
  return nn::add(task_loss, nn::l2_penalty<T>(weights, l2));
}

namespace {

template <typename T>
struct BatchResult {
  Var<T> logits;
  Var<T> loss;
};

/// Class or label logits and mean task loss for a node batch.
template <typename T>
BatchResult<T> node_batch(GatasModel<T>& model, Tape<T>& tape, const TrainingData& data,
                          std::span<const NodeId> nodes, const Config& config,
                          std::uint64_t sample_seed, Rng& rng, bool train) {
  const ModelConfig& mc = model.config();
  const std::vector<double> q = model.step_weights();
  const auto samples = batch_neighbourhoods(data.tensors, q, nodes, config.sample_size, sample_seed,
                                            mc.sampling_mode());
  BatchOutput<T> out = model.represent(tape, samples, rng, train);
  Var<T> logits = model.classify(out.representations, rng, train);
  if (mc.task == Task::kMultiClass) {
    std::vector<Index> labels(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) labels[k] = data.labels[nodes[k] - 1].front();
    return {logits, nn::softmax_cross_entropy(logits, std::move(labels))};
  }
  Matrix<T> targets = Matrix<T>::Zero(static_cast<Index>(nodes.size()), mc.num_outputs);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    for (std::uint32_t l : data.labels[nodes[k] - 1]) targets(static_cast<Index>(k), l) = 1;
  }
  return {logits, nn::sigmoid_cross_entropy(logits, targets)};
}

/// Link logits and mean sigmoid loss for a list of labeled edges.
template <typename T>
BatchResult<T> edge_batch(GatasModel<T>& model, Tape<T>& tape, const TrainingData& data,
                          std::span<const LabeledEdge> edges, const Config& config,
                          std::uint64_t sample_seed, Rng& rng, bool train) {
  std::vector<NodeId> nodes;
  std::unordered_map<NodeId, Index> row;
  auto intern = [&](NodeId v) {
    auto [it, inserted] = row.emplace(v, static_cast<Index>(nodes.size()));
    if (inserted) nodes.push_back(v);
    return it->second;
  };
  std::vector<Index> sources, targets;
  std::vector<EdgeTypeId> types;
  Matrix<T> labels(static_cast<Index>(edges.size()), 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    sources.push_back(intern(edges[k].source));
    targets.push_back(intern(edges[k].target));
    types.push_back(edges[k].type);
    labels(static_cast<Index>(k), 0) = edges[k].positive ? T(1) : T(0);
  }
  const ModelConfig& mc = model.config();
  const std::vector<double> q = model.step_weights();
  const auto samples = batch_neighbourhoods(data.tensors, q, nodes, config.sample_size, sample_seed,
                                            mc.sampling_mode());
  BatchOutput<T> out = model.represent(tape, samples, rng, train);
  Var<T> logits = model.score_links(out.representations, sources, targets, types, rng, train);
  return {logits, nn::sigmoid_cross_entropy(logits, labels)};
}

/// One corrupted-target negative per positive, avoiding every known edge.
std::vector<LabeledEdge> with_negatives(const TrainingData& data, std::span<const LabeledEdge> positives,
                                        Rng& rng) {
  const std::uint32_t n = data.graph.num_nodes();
  std::vector<LabeledEdge> out(positives.begin(), positives.end());
  for (const LabeledEdge& p : positives) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000) throw DataError("cannot draw a negative edge for node " + std::to_string(p.source));
      const NodeId t = 1 + static_cast<NodeId>(open_unit(rng) * n);
      if (t == p.source || data.known_edges.contains({p.source, p.type, t})) continue;
      if (!data.directed && data.known_edges.contains({t, p.type, p.source})) continue;
      out.push_back({p.source, p.type, t, false});
      break;
    }
  }
  return out;
}

template <typename T>
void check_finite(const Var<T>& loss) {
  if (!std::isfinite(static_cast<double>(loss.value()(0, 0)))) throw NumericError("non-finite loss");
}

}  // namespace

template <typename T>
Evaluation evaluate(GatasModel<T>& model, const TrainingData& data, Split split, const Config& config) {
  const std::uint64_t seed = evaluation_seed(config);
  Rng rng(seed);
  Evaluation ev;
  const std::size_t batch = config.batch_size;
  if (data.task != Task::kLinkPrediction) {
    const auto& nodes = data.split_nodes(split);
    if (nodes.empty()) throw DataError(to_string(split) + " split is empty");
    Eigen::MatrixXd logits(static_cast<Index>(nodes.size()), data.num_outputs);
    double loss_sum = 0;
    for (std::size_t start = 0; start < nodes.size(); start += batch) {
      const std::size_t len = std::min(batch, nodes.size() - start);
      Tape<T> tape;
      auto r = node_batch(model, tape, data, std::span(nodes).subspan(start, len), config, seed, rng, false);
      logits.middleRows(static_cast<Index>(start), static_cast<Index>(len)) = r.logits.value().template cast<double>();
      loss_sum += static_cast<double>(r.loss.value()(0, 0)) * static_cast<double>(len);
    }
    ev.count = nodes.size();
    ev.loss = loss_sum / static_cast<double>(nodes.size());
    if (data.task == Task::kMultiClass) {
      std::vector<std::uint32_t> labels;
      for (NodeId v : nodes) labels.push_back(data.labels[v - 1].front());
      ev.metric = "accuracy";
      ev.value = accuracy(logits, labels);
    } else {
      Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        for (std::uint32_t l : data.labels[nodes[k] - 1]) targets(static_cast<Index>(k), l) = 1;
      }
      ev.metric = "micro_f1";
      ev.value = micro_f1(logits, targets);
    }
    return ev;
  }

  const auto& edges = data.split_edges(split);
  if (edges.empty()) throw DataError(to_string(split) + " split has no edges");
  std::vector<LabeledEdge> queries = edges;
  if (std::none_of(queries.begin(), queries.end(), [](const auto& e) { return !e.positive; })) {
    Rng neg(derive_seed(seed, static_cast<std::uint64_t>(split) + 1));
    queries = with_negatives(data, edges, neg);
  }
  std::vector<double> scores;
  double loss_sum = 0;
  for (std::size_t start = 0; start < queries.size(); start += batch) {
    const std::size_t len = std::min(batch, queries.size() - start);
    Tape<T> tape;
    auto r = edge_batch(model, tape, data, std::span(queries).subspan(start, len), config, seed, rng, false);
    for (Index k = 0; k < r.logits.rows(); ++k) scores.push_back(static_cast<double>(r.logits.value()(k, 0)));
    loss_sum += static_cast<double>(r.loss.value()(0, 0)) * static_cast<double>(len);
  }
  std::map<EdgeTypeId, std::pair<std::vector<double>, std::vector<std::uint8_t>>> per_type;
  for (std::size_t k = 0; k < queries.size(); ++k) {
    auto& [s, l] = per_type[queries[k].type];
    s.push_back(scores[k]);
    l.push_back(queries[k].positive ? 1 : 0);
  }
  double auc_sum = 0, f1_sum = 0;
  std::size_t types = 0;
  for (const auto& [type, sl] : per_type) {
    const auto& [s, l] = sl;
    const auto pos = std::count(l.begin(), l.end(), std::uint8_t{1});
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(l.size())) continue;
    auc_sum += roc_auc(s, l);
    f1_sum += top_k_f1(s, l);
    ++types;
  }
  if (types == 0) throw DataError(to_string(split) + " split has no edge type with both classes");
  ev.metric = "roc_auc";
  ev.value = auc_sum / static_cast<double>(types);
  ev.f1 = f1_sum / static_cast<double>(types);
  ev.loss = loss_sum / static_cast<double>(queries.size());
  ev.count = queries.size();
  return ev;
}

template <typename T>
FitResult fit(GatasModel<T>& model, const TrainingData& data, const Config& config,
              const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const bool links = data.task == Task::kLinkPrediction;
  std::vector<NodeId> train_nodes = data.split_nodes(Split::kTrain);
  std::vector<LabeledEdge> train_edges = data.split_edges(Split::kTrain);
  if (links ? train_edges.empty() : train_nodes.empty()) throw DataError("training split is empty");

  Nadam<T> optimizer(model.params(), NadamOptions{config.learning_rate});
  FitResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  result.best.value = -std::numeric_limits<double>::infinity();
  std::vector<Matrix<T>> best_params;
  auto snapshot = [&] {
    best_params.clear();
    for (std::size_t k = 0; k < model.params().size(); ++k) best_params.push_back(model.params()[k].value);
  };
  snapshot();
  std::uint32_t since_best = 0;
  const std::size_t batch = config.batch_size;

  for (std::uint32_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, epoch);
    Rng rng(epoch_seed);
    const std::uint64_t sample_base = config.freeze_samples ? derive_seed(config.seed, 0) : epoch_seed;
    const std::size_t count = links ? train_edges.size() : train_nodes.size();
    for (std::size_t i = count; i > 1; --i) {
      const auto j = static_cast<std::size_t>(open_unit(rng) * static_cast<double>(i));
      if (links) std::swap(train_edges[i - 1], train_edges[j]);
      else std::swap(train_nodes[i - 1], train_nodes[j]);
    }

    double loss_sum = 0;
    std::size_t b = 0;
    for (std::size_t start = 0; start < count; start += batch, ++b) {
      const std::size_t len = std::min(batch, count - start);
      const std::uint64_t sample_seed = derive_seed(sample_base, b);
      Tape<T> tape;
      BatchResult<T> r;
      if (links) {
        Rng neg(derive_seed(sample_seed, 0x6e6567ULL));
        const auto queries = with_negatives(data, std::span(train_edges).subspan(start, len), neg);
        r = edge_batch(model, tape, data, queries, config, sample_seed, rng, true);
      } else {
        r = node_batch(model, tape, data, std::span(train_nodes).subspan(start, len), config, sample_seed,
                       rng, true);
      }
      Var<T> loss = objective(model, tape, r.loss, config.l2);
      check_finite(loss);
      model.params().zero_grad();
      tape.backward(loss);
      optimizer.step();
      loss_sum += static_cast<double>(loss.value()(0, 0)) * static_cast<double>(len);
    }

    const Evaluation val = evaluate(model, data, Split::kVal, config);
    if (!std::isfinite(val.loss)) throw NumericError("non-finite validation loss");
    EpochRecord record{epoch, loss_sum / static_cast<double>(count), val.value, val.loss};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (val.value > result.best.value || (val.value == result.best.value && val.loss < best_loss)) {
      result.best = val;
      result.best_epoch = epoch;
      best_loss = val.loss;
      since_best = 0;
      snapshot();
    } else if (++since_best > config.patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < model.params().size(); ++k) model.params()[k].value = best_params[k];
  return result;
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,train_loss,val_metric,val_loss\n";
  out.precision(10);
  for (const EpochRecord& r : history) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_metric << ',' << r.val_loss << '\n';
  }
}

template Var<float> objective(GatasModel<float>&, Tape<float>&, Var<float>, double);
template Var<double> objective(GatasModel<double>&, Tape<double>&, Var<double>, double);
template Evaluation evaluate(GatasModel<float>&, const TrainingData&, Split, const Config&);
template Evaluation evaluate(GatasModel<double>&, const TrainingData&, Split, const Config&);
template FitResult fit(GatasModel<float>&, const TrainingData&, const Config&,
                       const std::function<void(const EpochRecord&)>&);
template FitResult fit(GatasModel<double>&, const TrainingData&, const Config&,
                       const std::function<void(const EpochRecord&)>&);

}  // namespace gatas
