#include "gatas/model.hpp"

#include <cmath>
#include <unordered_map>

#include "gatas/error.hpp"

namespace gatas {

using nn::Index;
using nn::Matrix;
using nn::Tape;
using nn::Var;
using nn::Mask;

PositionalTable positional_table(std::uint32_t max_steps, std::uint32_t dim) {
  if (dim % 2 != 0) throw ConfigError("positional encoding size must be even, got " + std::to_string(dim));
  PositionalTable table;
  table.values.resize(max_steps + 1, dim);
  for (std::uint32_t t = 0; t <= max_steps; ++t) {
    for (std::uint32_t i = 0; i < dim / 2; ++i) {
      const double angle = t / std::pow(10000.0, 2.0 * i / dim);
      table.values(t, 2 * i) = std::sin(angle);
      table.values(t, 2 * i + 1) = std::cos(angle);
    }
  }
  return table;
}

ModelConfig ModelConfig::resolve(const Config& config, const Graph& graph,
                                 std::uint32_t num_outputs) {
  config.validate();
  ModelConfig m;
  m.task = config.task;
  m.ablation = config.ablation;
  m.num_nodes = graph.num_nodes();
  m.num_edge_types = graph.num_edge_types();
  m.feature_dim = graph.feature_dim();
  m.num_outputs = num_outputs;
  m.max_steps = config.ablation == Ablation::kBase ? 1 : config.max_steps;
  m.layer_size = config.layer_size;
  m.node_embedding_size = config.node_embedding_size;
  m.edge_embedding_size = config.edge_embedding_size;
  m.heads = config.heads;
  m.head_hidden_size = config.head_hidden_size;
  m.input_noise_rate = config.input_noise_rate;
  m.dropout = config.dropout;
  m.l2_exclude_biases_embeddings = config.l2_exclude_biases_embeddings;
  return m;
}

std::uint32_t ModelConfig::embedding_size() const {
  if (ablation == Ablation::kNoEmbed || ablation == Ablation::kBase) return 0;
  return node_embedding_size;
}

std::uint32_t ModelConfig::input_size() const {
  return embedding_size() + (feature_dim > 0 ? layer_size : 0);
}

namespace {

template <typename T>
Matrix<T> glorot(Index fan_in, Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix<T> w(fan_in, fan_out);
  for (Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<T>((2 * open_unit(rng) - 1) * limit);
  return w;
}

template <typename T>
Matrix<T> normal(Index rows, Index cols, double stddev, Rng& rng) {
  Matrix<T> w(rows, cols);
  for (Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<T>(stddev * standard_normal(rng));
  return w;
}

}  // namespace

template <typename T>
GatasModel<T>::GatasModel(const ModelConfig& config, const Graph& graph, std::uint64_t seed)
    : config_(config),
      codebook_(config.num_edge_types, config.max_steps),
      positions_(positional_table(config.max_steps, config.edge_embedding_size)) {
  if (!graph.augmented()) throw DataError("model requires an augmented graph");
  if (graph.num_nodes() != config_.num_nodes || graph.num_edge_types() != config_.num_edge_types ||
      graph.feature_dim() != config_.feature_dim) {
    throw DimensionMismatch("model configuration does not match the graph");
  }
  if (config_.input_size() == 0) {
    throw ConfigError("node inputs need features or node embeddings (node_embedding_size > 0)");
  }
  if (config_.num_outputs == 0) throw ConfigError("model needs at least one output");

  if (config_.feature_dim > 0) {
    Tape<T> tape;
    Matrix<T> raw = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(graph.feature_matrix().data(),
                                                                     graph.num_nodes(),
                                                                     graph.feature_dim())
                        .template cast<T>();
    features_ = nn::layer_norm(tape.constant(std::move(raw))).value();
  }

  Rng rng(derive_seed(seed, 0x6d6f64656cULL));
  const bool decay_all = !config_.l2_exclude_biases_embeddings;
  const Index r = config_.embedding_size();
  const Index f = config_.layer_size;
  const Index d = config_.edge_embedding_size;
  const Index h = config_.input_size();
  auto add_dense = [&](const std::string& prefix, Index in, Index out) {
    params_.add(prefix + ".W", glorot<T>(in, out, rng));
    params_.add(prefix + ".b", Matrix<T>::Zero(1, out), decay_all);
  };

  if (r > 0) {
    params_.add("node_embedding", normal<T>(config_.num_nodes, r, 0.1, rng), decay_all);
  }
  if (config_.feature_dim > 0) add_dense("feature", config_.feature_dim, f);
  // Path parameters exist in every variant so checkpoints share a layout;
  // without paths they are unused and left out of the penalty.
  const bool paths = config_.uses_paths();
  params_.add("edge_embedding", normal<T>(config_.num_edge_types, d, 0.1, rng), decay_all && paths);
  // Linear path-position scorer; a bias would cancel in the position softmax.
  params_.add("f.W", glorot<T>(h + d, 1, rng), paths);
  add_dense("z", paths ? h + d : h, f);
  for (std::uint32_t k = 0; k < config_.heads; ++k) {
    const std::string head = "head" + std::to_string(k);
    add_dense(head + ".g1", h + f, f);
    params_.add(head + ".g2.W", glorot<T>(f, 1, rng));
    add_dense(head + ".d", f, f);
  }
  {
    const StepCoefficients init = init_step_logits(config_.max_steps);
    Matrix<T> logits(1, config_.max_steps + 1);
    for (std::uint32_t t = 0; t <= config_.max_steps; ++t) logits(0, t) = static_cast<T>(init.logits[t]);
    params_.add("step_logits", std::move(logits), false);
  }

  const Index rep = static_cast<Index>(config_.heads) * f;
  const Index hidden = config_.head_hidden_size;
  switch (config_.task) {
    case Task::kMultiClass:
      add_dense("out", rep, config_.num_outputs);
      break;
    case Task::kMultiLabel:
      add_dense("mlp1", rep, hidden);
      add_dense("mlp2", hidden, hidden);
      add_dense("out", hidden, config_.num_outputs);
      break;
    case Task::kLinkPrediction:
      add_dense("node_hidden", rep, hidden);
      add_dense("pair1", 2 * hidden, hidden);
      add_dense("pair2", hidden, hidden);
      add_dense("out", hidden, config_.num_outputs);
      break;
  }
}

template <typename T>
std::vector<double> GatasModel<T>::step_weights() const {
  const Matrix<T>& logits = params_.get("step_logits").value;
  std::vector<double> values(static_cast<std::size_t>(logits.cols()));
  for (Index t = 0; t < logits.cols(); ++t) values[t] = static_cast<double>(logits(0, t));
  return softmax(values);
}

template <typename T>
Var<T> GatasModel<T>::leaf(Tape<T>& tape, const std::string& name) {
  return tape.parameter(params_.get(name));
}

template <typename T>
Var<T> GatasModel<T>::dense(Tape<T>& tape, Var<T> x, const std::string& prefix, bool activate) {
  Var<T> y = nn::add(nn::matmul(x, leaf(tape, prefix + ".W")), leaf(tape, prefix + ".b"));
  return activate ? nn::elu(y) : y;
}

template <typename T>
Var<T> GatasModel<T>::node_inputs(Tape<T>& tape, std::span<const NodeId> nodes, Rng& rng,
                                  bool train) {
  std::vector<Index> rows(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k] < 1 || nodes[k] > config_.num_nodes) {
      throw DataError("unknown node " + std::to_string(nodes[k]));
    }
    rows[k] = static_cast<Index>(nodes[k]) - 1;
  }
  std::vector<Var<T>> parts;
  if (config_.embedding_size() > 0) {
    parts.push_back(nn::gather_rows(leaf(tape, "node_embedding"), rows));
  }
  if (config_.feature_dim > 0) {
    Matrix<T> x(static_cast<Index>(rows.size()), features_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) x.row(static_cast<Index>(k)) = features_.row(rows[k]);
    Var<T> noised = nn::mask_inputs(tape.constant(std::move(x)), config_.input_noise_rate, rng, train);
    parts.push_back(dense(tape, noised, "feature", false));
  }
  return parts.size() == 1 ? parts.front() : nn::concat<T>(parts);
}

template <typename T>
BatchOutput<T> GatasModel<T>::represent(Tape<T>& tape, std::span<const NeighbourhoodSample> samples,
                                        Rng& rng, bool train) {
  if (samples.empty()) throw DataError("empty batch");
  const Index batch = static_cast<Index>(samples.size());
  const Index capacity = samples.front().capacity;
  const Index steps = config_.max_steps;
  for (const NeighbourhoodSample& s : samples) {
    if (s.capacity != capacity) throw ShapeError("samples in a batch must share their capacity");
    if (s.num_steps != steps + 1) throw ShapeError("sample step count does not match max_steps");
    if (s.valid_count == 0) throw DataError("all-masked sample for node " + std::to_string(s.target));
  }

  // Rows of H: targets first, then any neighbour not yet present.
  std::vector<NodeId> unique;
  std::unordered_map<NodeId, Index> row_of;
  auto intern = [&](NodeId node) {
    auto [it, inserted] = row_of.emplace(node, static_cast<Index>(unique.size()));
    if (inserted) unique.push_back(node);
    return it->second;
  };
  for (const NeighbourhoodSample& s : samples) intern(s.target);
  for (const NeighbourhoodSample& s : samples) {
    for (std::uint32_t k = 0; k < s.valid_count; ++k) intern(s.neighbours[k]);
  }
  Var<T> h = node_inputs(tape, unique, rng, train);

  BatchOutput<T> out;
  std::vector<Index> entry_target, entry_neighbour, entry_flat;
  Eigen::MatrixXd step_probs;
  Index entries = 0;
  for (const NeighbourhoodSample& s : samples) entries += s.valid_count;
  step_probs.resize(entries, steps + 1);

  // Path positions of every valid entry.
  std::vector<Index> pos_entry, pos_slot, pos_z_node, pos_f_node, pos_type, pos_t;
  Mask position_mask = Mask::Zero(entries, steps);
  Index e = 0;
  for (Index b = 0; b < batch; ++b) {
    const NeighbourhoodSample& s = samples[b];
    const Index target_row = row_of.at(s.target);
    for (std::uint32_t k = 0; k < s.valid_count; ++k, ++e) {
      const Index neighbour_row = row_of.at(s.neighbours[k]);
      out.entry_row.push_back(b);
      out.entry_slot.push_back(k);
      entry_target.push_back(target_row);
      entry_neighbour.push_back(neighbour_row);
      entry_flat.push_back(b * capacity + k);
      for (Index t = 0; t <= steps; ++t) step_probs(e, t) = s.step_vector(k)[t];

      if (s.paths[k] == 1) {
        pos_entry.push_back(e);
        pos_slot.push_back(e * steps);
        pos_z_node.push_back(target_row);
        pos_f_node.push_back(target_row);
        pos_type.push_back(kSelfLoopType - 1);
        pos_t.push_back(0);
        position_mask(e, 0) = 1;
        continue;
      }
      const std::vector<EdgeTypeId> path = codebook_.decode_path(s.paths[k]);
      for (std::size_t t = 0; t < path.size(); ++t) {
        pos_entry.push_back(e);
        pos_slot.push_back(e * steps + static_cast<Index>(t));
        pos_z_node.push_back(neighbour_row);
        pos_f_node.push_back(target_row);
        pos_type.push_back(static_cast<Index>(path[t]) - 1);
        pos_t.push_back(static_cast<Index>(t) + 1);
        position_mask(e, static_cast<Index>(t)) = 1;
      }
    }
  }

  // Neighbour representations.
  if (config_.uses_paths()) {
    Matrix<T> pos_rows(static_cast<Index>(pos_t.size()), positions_.dim());
    for (std::size_t p = 0; p < pos_t.size(); ++p) {
      pos_rows.row(static_cast<Index>(p)) = positions_.values.row(pos_t[p]).template cast<T>();
    }
    Var<T> edge_pos = nn::add(nn::gather_rows(leaf(tape, "edge_embedding"), pos_type),
                              tape.constant(std::move(pos_rows)));
    const std::array<Var<T>, 2> z_parts{nn::gather_rows(h, pos_z_node), edge_pos};
    const std::array<Var<T>, 2> f_parts{nn::gather_rows(h, pos_f_node), edge_pos};
    Var<T> z = dense(tape, nn::concat<T>(z_parts), "z", true);
    Var<T> f = nn::matmul(nn::concat<T>(f_parts), leaf(tape, "f.W"));
    Var<T> f_grid = nn::reshape(nn::scatter_rows(f, pos_slot, entries * steps), entries, steps);
    out.position_weights = nn::masked_softmax(f_grid, position_mask);
    Var<T> beta = nn::gather_rows(nn::reshape(out.position_weights, entries * steps, 1), pos_slot);
    out.neighbour_reps = nn::segment_sum(nn::scale_rows(z, beta), pos_entry, entries);
  } else {
    std::vector<Index> z_node(static_cast<std::size_t>(entries));
    for (std::size_t p = 0; p < pos_entry.size(); ++p) z_node[pos_entry[p]] = pos_z_node[p];
    out.neighbour_reps = dense(tape, nn::gather_rows(h, z_node), "z", true);
    Matrix<T> ones = Matrix<T>::Zero(entries, steps);
    ones.col(0).setOnes();
    out.position_weights = tape.constant(std::move(ones));
  }

  // Node attention over the sample, one pass per head.
  Mask sample_mask = Mask::Zero(batch, capacity);
  for (Index b = 0; b < batch; ++b) {
    sample_mask.row(b).head(samples[b].valid_count).setOnes();
  }
  const std::array<Var<T>, 2> g_parts{nn::gather_rows(h, entry_target), out.neighbour_reps};
  Var<T> g_in = nn::concat<T>(g_parts);
  Var<T> log_p;
  if (config_.uses_transitions()) {
    log_p = nn::log_mixture(leaf(tape, "step_logits"), step_probs, out.entry_row, batch);
  }
  std::vector<Var<T>> heads;
  for (std::uint32_t k = 0; k < config_.heads; ++k) {
    const std::string head = "head" + std::to_string(k);
    Var<T> logit = nn::matmul(dense(tape, g_in, head + ".g1", true), leaf(tape, head + ".g2.W"));
    if (log_p.valid()) logit = nn::add(logit, log_p);
    Var<T> grid = nn::reshape(nn::scatter_rows(logit, entry_flat, batch * capacity), batch, capacity);
    Var<T> alpha = nn::masked_softmax(grid, sample_mask);
    out.attention.push_back(alpha);
    Var<T> alpha_entries = nn::gather_rows(nn::reshape(alpha, batch * capacity, 1), entry_flat);
    alpha_entries = nn::dropout(alpha_entries, config_.dropout, rng, train);
    Var<T> values = dense(tape, out.neighbour_reps, head + ".d", true);
    heads.push_back(nn::elu(nn::segment_sum(nn::scale_rows(values, alpha_entries), out.entry_row, batch)));
  }
  Var<T> reps = heads.size() == 1 ? heads.front() : nn::concat<T>(heads);
  out.representations = nn::dropout(reps, config_.dropout, rng, train);
  return out;
}

template <typename T>
Var<T> GatasModel<T>::classify(Var<T> representations, Rng&, bool) {
  switch (config_.task) {
    case Task::kMultiClass:
      return dense(representations.tape(), representations, "out", false);
    case Task::kMultiLabel: {
      Tape<T>& tape = representations.tape();
      Var<T> x = dense(tape, representations, "mlp1", true);
      x = dense(tape, x, "mlp2", true);
      return dense(tape, x, "out", false);
    }
    case Task::kLinkPrediction:
      break;
  }
  throw ConfigError("classify() is not available for link prediction");
}

template <typename T>
Var<T> GatasModel<T>::score_links(Var<T> representations, std::span<const Index> sources,
                                  std::span<const Index> targets,
                                  std::span<const EdgeTypeId> raw_types, Rng&, bool) {
  if (config_.task != Task::kLinkPrediction) {
    throw ConfigError("score_links() needs the link-prediction task");
  }
  if (sources.size() != targets.size() || sources.size() != raw_types.size()) {
    throw ShapeError("score_links: pair and type lists differ in length");
  }
  std::vector<Index> columns(raw_types.size());
  for (std::size_t k = 0; k < raw_types.size(); ++k) {
    if (raw_types[k] < 1 || raw_types[k] > config_.num_outputs) {
      throw DataError("unknown edge type " + std::to_string(raw_types[k]));
    }
    columns[k] = static_cast<Index>(raw_types[k]) - 1;
  }
  Tape<T>& tape = representations.tape();
  Var<T> u = dense(tape, representations, "node_hidden", true);
  const std::array<Var<T>, 2> pair{
      nn::gather_rows(u, std::vector<Index>(sources.begin(), sources.end())),
      nn::gather_rows(u, std::vector<Index>(targets.begin(), targets.end()))};
  Var<T> x = dense(tape, nn::concat<T>(pair), "pair1", true);
  x = dense(tape, x, "pair2", true);
  return nn::pick(dense(tape, x, "out", false), std::move(columns));
}

template <typename T>
std::vector<Var<T>> GatasModel<T>::regularized(Tape<T>& tape) {
  std::vector<Var<T>> out;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (params_[k].regularized) out.push_back(tape.parameter(params_[k]));
  }
  return out;
}

template class GatasModel<float>;
template class GatasModel<double>;

}  // namespace gatas
