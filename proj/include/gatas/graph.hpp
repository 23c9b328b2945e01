#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gatas {

using NodeId = std::uint32_t;      // 1-based
using EdgeTypeId = std::uint32_t;  // 1-based; 1 is the self-loop type after augmentation
using PathIndex = std::uint64_t;   // 1-based; 0 is the empty prefix

/// Edge type reserved for the self-loops added by augment_graph().
inline constexpr EdgeTypeId kSelfLoopType = 1;

struct Triplet {
  NodeId source = 0;
  EdgeTypeId type = 0;
  NodeId target = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

/// Typed directed multigraph with optional dense node features.
///
/// Triplets are kept sorted by (source, type, target), and an adjacency
/// index gives each source's out-triplets as a contiguous span.
class Graph {
 public:
  Graph() = default;

  /// Validates ids and rejects duplicate triplets. `features` is either empty
  /// or holds num_nodes rows of `feature_dim` values, row-major.
  Graph(std::uint32_t num_nodes, std::uint32_t num_edge_types,
        std::vector<Triplet> triplets, std::uint32_t feature_dim = 0,
        std::vector<double> features = {}, bool augmented = false);

  std::uint32_t num_nodes() const { return num_nodes_; }
  std::uint32_t num_edge_types() const { return num_edge_types_; }
  std::uint32_t feature_dim() const { return feature_dim_; }
  bool has_features() const { return feature_dim_ > 0; }
  bool augmented() const { return augmented_; }

  std::span<const Triplet> triplets() const { return triplets_; }
  /// Out-triplets of `source`, sorted by (type, target).
  std::span<const Triplet> out_triplets(NodeId source) const;
  std::span<const double> features(NodeId node) const;
  std::span<const double> feature_matrix() const { return features_; }

  bool contains(const Triplet& t) const;

  /// FNV-1a digest of the structure (counts and sorted triplets).
  std::uint64_t checksum() const;

 private:
  std::uint32_t num_nodes_ = 0;
  std::uint32_t num_edge_types_ = 0;
  std::uint32_t feature_dim_ = 0;
  bool augmented_ = false;
  std::vector<Triplet> triplets_;
  std::vector<std::size_t> offsets_;
  std::vector<double> features_;
};

/// Adds the self-loop edge type at id 1, shifts every raw type by one and
/// adds one (i, 1, i) triplet per node. Raw self-loops and an already
/// augmented graph are rejected.
Graph augment_graph(const Graph& raw);

/// Closed-form index arithmetic over the level-ordered set of edge-type
/// paths of length 1..max_steps. Paths are numbered in bijective base
/// |types|: shorter paths first, lexicographic within a length.
class PathCodebook {
 public:
  PathCodebook(std::uint32_t num_edge_types, std::uint32_t max_steps);

  std::uint32_t num_edge_types() const { return num_edge_types_; }
  std::uint32_t max_steps() const { return max_steps_; }
  PathIndex num_paths() const { return num_paths_; }

  /// Edge type of the last step of path m.
  EdgeTypeId path_last(PathIndex m) const;
  /// Index of path m without its last step; 0 when m is a single step.
  PathIndex path_prefix(PathIndex m) const;
  std::vector<EdgeTypeId> decode_path(PathIndex m) const;
  std::uint32_t path_length(PathIndex m) const;
  PathIndex encode_path(std::span<const EdgeTypeId> sequence) const;
  /// Index of prefix extended by one step of `type`; prefix 0 is empty.
  PathIndex extend(PathIndex prefix, EdgeTypeId type) const;

 private:
  void check_index(PathIndex m) const;

  std::uint32_t num_edge_types_;
  std::uint32_t max_steps_;
  PathIndex num_paths_;
};

/// Formats a path as "(a,b,c)" using numeric type ids.
std::string format_path(std::span<const EdgeTypeId> sequence);

}  // namespace gatas
