#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gatas/graph.hpp"
#include "gatas/transition.hpp"

namespace gatas {

using Rng = std::mt19937_64;

/// Mixes a global seed with a key (node id, epoch, ...) into a child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

/// Uniform double in the open interval (0, 1).
double open_unit(Rng& rng);

/// Standard normal variate (Box-Muller); identical across standard libraries.
double standard_normal(Rng& rng);

std::vector<double> softmax(std::span<const double> logits);

/// Unbounded step logits and the step weights q = softmax(logits).
struct StepCoefficients {
  std::vector<double> logits;  // length C + 1

  std::uint32_t max_steps() const { return static_cast<std::uint32_t>(logits.size()) - 1; }
  std::vector<double> weights() const { return softmax(logits); }
};

/// Decaying initialization logits[t] = -t / ln(C + 1).
StepCoefficients init_step_logits(std::uint32_t max_steps);

/// P = sum_t q_t s_t for one entry's step-probability vector s.
/// A zero result means the entry is outside the support and is rejected.
double combined_probability(std::span<const double> step_probs, std::span<const double> q);

/// dP/dlogits_u = q_u (s_u - P).
std::vector<double> combined_probability_gradient(std::span<const double> step_probs,
                                                  std::span<const double> q);

enum class SamplingMode {
  kTransition,  // weights P(i, j, m)
  kUniform,     // equal weight on every support entry
};

/// One element of a node's support under P.
struct SupportEntry {
  NodeId neighbour = 0;
  PathIndex path = 0;
  std::uint32_t step = 0;
  double transition = 0.0;  // T(step)(i, neighbour, path)
};

/// Union of the supports of T(0)..T(C) for `source`, ordered by step then (target, path).
std::vector<SupportEntry> support(const TransitionTensors& tensors, NodeId source);

/// Fixed-capacity sample of (neighbour, path) pairs for one target node.
/// The first `valid_count` rows are drawn entries, the rest is padding.
struct NeighbourhoodSample {
  NodeId target = 0;
  std::uint32_t capacity = 0;
  std::uint32_t num_steps = 0;  // C + 1
  std::uint32_t valid_count = 0;
  std::vector<NodeId> neighbours;  // 0 for padding
  std::vector<PathIndex> paths;    // 0 for padding
  std::vector<double> step_probs;  // capacity x num_steps, row-major

  bool valid(std::size_t k) const { return k < valid_count; }
  std::span<const double> step_vector(std::size_t k) const {
    return std::span<const double>(step_probs).subspan(k * num_steps, num_steps);
  }
  std::span<double> step_vector(std::size_t k) {
    return std::span<double>(step_probs).subspan(k * num_steps, num_steps);
  }
};

/// Draws min(S, |support|) distinct entries without replacement, with
/// inclusion driven by the sampling weights (Gumbel top-k).
NeighbourhoodSample sample_neighbourhood(const TransitionTensors& tensors,
                                         std::span<const double> q, NodeId source,
                                         std::uint32_t sample_size, Rng& rng,
                                         SamplingMode mode = SamplingMode::kTransition);

/// One sample per node, each drawn from its own generator seeded with
/// derive_seed(seed, node), so results do not depend on batch order.
std::vector<NeighbourhoodSample> batch_neighbourhoods(const TransitionTensors& tensors,
                                                      std::span<const double> q,
                                                      std::span<const NodeId> nodes,
                                                      std::uint32_t sample_size,
                                                      std::uint64_t seed,
                                                      SamplingMode mode = SamplingMode::kTransition);

}  // namespace gatas
