#pragma once

#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "gatas/graph.hpp"
#include "gatas/transition.hpp"

namespace oracle {

using gatas::Graph;
using gatas::NodeId;

// (source, target, path index) -> probability
using StepTable = std::map<std::tuple<NodeId, NodeId, std::uint64_t>, double>;

/// Step tables T(0)..T(C) for an augmented graph by explicit enumeration of
/// every walk over non-self-loop edges, keeping walks that move one BFS level
/// outward per step and weighting each by the product of 1 / out-degree.
std::vector<StepTable> enumerate_walks(const Graph& augmented, std::uint32_t max_steps);

/// Level-ordered path index computed from ranks: offset of shorter lengths
/// plus the lexicographic rank within the length, plus one.
std::uint64_t path_rank(const std::vector<std::uint32_t>& types, std::uint32_t num_types);

/// Same tensors flattened to a table, for comparison.
std::vector<StepTable> flatten(const gatas::TransitionTensors& tensors);

/// Random raw graph: 1..max_nodes nodes, 1..max_types edge types, no self-loops.
Graph random_graph(std::uint64_t seed, std::uint32_t max_nodes = 12, std::uint32_t max_types = 3);

/// Undirected path 1 - 2 - ... - n with one edge type.
Graph path_graph(std::uint32_t n);

}  // namespace oracle
