#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gatas/graph.hpp"

namespace gatas {

struct TransitionEntry {
  NodeId target = 0;
  PathIndex path = 0;
  double probability = 0.0;

  friend bool operator==(const TransitionEntry&, const TransitionEntry&) = default;
};

/// One step t of the transition tensor: for each source node, a sparse list
/// of (target, path, probability) entries sorted by (target, path).
class SparseTransitionTensor {
 public:
  SparseTransitionTensor() = default;
  SparseTransitionTensor(std::uint32_t step, std::uint32_t num_nodes);

  /// Builds from per-source slices; slices[i - 1] belongs to node i.
  SparseTransitionTensor(std::uint32_t step, std::vector<std::vector<TransitionEntry>> slices);

  std::uint32_t step() const { return step_; }
  std::uint32_t num_nodes() const { return static_cast<std::uint32_t>(offsets_.size() - 1); }
  std::span<const TransitionEntry> slice(NodeId source) const;
  std::size_t num_entries() const { return entries_.size(); }

  friend bool operator==(const SparseTransitionTensor&, const SparseTransitionTensor&) = default;

 private:
  std::uint32_t step_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<TransitionEntry> entries_;
};

/// Step tensors T(0)..T(C) for one graph, plus what is needed to validate a
/// cache against that graph.
struct TransitionTensors {
  std::uint64_t graph_checksum = 0;
  std::uint32_t num_edge_types = 0;
  std::vector<SparseTransitionTensor> steps;

  std::uint32_t max_steps() const { return static_cast<std::uint32_t>(steps.size()) - 1; }
  std::uint32_t num_nodes() const { return steps.empty() ? 0 : steps.front().num_nodes(); }
  PathCodebook codebook() const { return {num_edge_types, max_steps()}; }

  friend bool operator==(const TransitionTensors&, const TransitionTensors&) = default;
};

/// Unnormalized counts A(i, j, m) over non-self-loop types; step 1 layout.
SparseTransitionTensor adjacency_tensor(const Graph& graph);

/// Divides every non-empty source slice by its total. Negative values are rejected.
SparseTransitionTensor normalize(const SparseTransitionTensor& tensor);

/// T(0): exactly one (i, path 1, 1.0) entry per node.
SparseTransitionTensor step_zero_tensor(const Graph& graph);

/// Per-source sets of nodes already reached; reached[i - 1] is sorted.
using ReachedSets = std::vector<std::vector<NodeId>>;

/// Initial reached sets: each source reaches itself at step 0.
ReachedSets initial_reached(std::uint32_t num_nodes);

/// Adds the targets of `tensor` to the reached sets.
void mark_reached(ReachedSets& reached, const SparseTransitionTensor& tensor);

/// Composes T(t-1) with T(1), zeroing targets already reached, then normalizes.
/// `step` is t >= 2; `prev.step()` must equal t - 1.
SparseTransitionTensor next_step_tensor(const SparseTransitionTensor& first,
                                        const SparseTransitionTensor& prev,
                                        const ReachedSets& reached, std::uint32_t num_edge_types,
                                        std::uint32_t max_steps);

/// All step tensors T(0)..T(max_steps). Work is split over sources across
/// `threads` workers (0 picks hardware concurrency); output does not depend on it.
TransitionTensors precompute(const Graph& graph, std::uint32_t max_steps, unsigned threads = 0);

/// Same as precompute() but only fills step 1..C slices for `sources`; the
/// other sources keep just their step-0 self entry.
TransitionTensors precompute_sources(const Graph& graph, std::uint32_t max_steps,
                                     std::span<const NodeId> sources, unsigned threads = 0);

/// Binary little-endian cache; see README for the layout.
void save_tensors(const TransitionTensors& tensors, const std::filesystem::path& path);

/// Loads a cache and checks it against `expected_checksum`.
TransitionTensors load_tensors(const std::filesystem::path& path,
                               std::uint64_t expected_checksum);

}  // namespace gatas
