#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gatas/config.hpp"
#include "gatas/graph.hpp"

namespace gatas {

enum class Split : std::uint8_t { kTrain = 0, kVal = 1, kTest = 2 };
inline constexpr std::array<Split, 3> kSplits{Split::kTrain, Split::kVal, Split::kTest};

std::string to_string(Split split);
Split parse_split(std::string_view text);

/// A queried edge with raw (pre-augmentation) type; label 1 marks an existing edge.
struct LabeledEdge {
  NodeId source = 0;
  EdgeTypeId type = 0;
  NodeId target = 0;
  bool positive = false;

  friend auto operator<=>(const LabeledEdge&, const LabeledEdge&) = default;
};

/// Graph, labels and splits as read from the interchange format.
///
/// Labels are 0-based class ids; an empty list marks an unlabeled node.
/// For undirected data every listed edge is stored in both directions.
struct DatasetBundle {
  Graph graph;  // raw, not augmented
  bool directed = false;
  std::uint32_t num_classes = 0;
  std::vector<std::vector<std::uint32_t>> labels;  // index node - 1
  std::array<std::vector<NodeId>, 3> nodes;        // per split, sorted
  std::array<std::vector<LabeledEdge>, 3> edges;   // per split, sorted

  const std::vector<NodeId>& split_nodes(Split s) const { return nodes[static_cast<int>(s)]; }
  const std::vector<LabeledEdge>& split_edges(Split s) const {
    return edges[static_cast<int>(s)];
  }
  bool has_edge_splits() const;
};

/// Parses the text format; errors carry the offending line number.
DatasetBundle parse_dataset(std::istream& in, Task task);
DatasetBundle load_dataset(const std::filesystem::path& path, Task task);

/// Writes the canonical form: header, N lines by id, E lines sorted (one per
/// unordered pair when undirected), then S lines by split.
void write_dataset(std::ostream& out, const DatasetBundle& bundle);
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path);

/// Checks split disjointness, label ranges and negative-edge absence.
void validate_bundle(const DatasetBundle& bundle, Task task);

/// Bundle graph without the held-out (validation and test) positive edges.
Graph training_graph(const DatasetBundle& bundle);

struct SynthesisSpec {
  std::uint32_t nodes = 200;
  std::uint32_t edge_types = 2;
  std::uint32_t degree = 4;  // edges drawn per node before symmetrization
  std::uint32_t classes = 2;
  std::uint64_t seed = 0;
  double feature_noise = 0.5;  // stddev of Gaussian noise on the one-hot features
  double homophily = 0.8;      // chance an edge stays inside the source's class
  double train_fraction = 0.2;
  double val_fraction = 0.2;
  double test_fraction = 0.4;
};

/// Seeded undirected multiplex graph with class-correlated features
/// (one-hot class plus noise) and a node split.
DatasetBundle synthesize(const SynthesisSpec& spec);

/// Holds out val/test fractions of the edges (whole unordered pairs when
/// undirected) and pairs each held-out edge with one absent edge of the same
/// type. The training split lists the remaining edges as positives.
DatasetBundle link_split(const DatasetBundle& bundle, double val_fraction, double test_fraction,
                         std::uint64_t seed);

}  // namespace gatas
