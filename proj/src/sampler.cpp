#include "gatas/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "gatas/error.hpp"

namespace gatas {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  // splitmix64 finalizer over a combination of both words
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (key + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double open_unit(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  const double r = std::sqrt(-2.0 * std::log(open_unit(rng)));
  return r * std::cos(2.0 * std::numbers::pi * open_unit(rng));
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t t = 0; t < logits.size(); ++t) {
    out[t] = std::exp(logits[t] - peak);
    total += out[t];
  }
  for (double& v : out) v /= total;
  return out;
}

StepCoefficients init_step_logits(std::uint32_t max_steps) {
  if (max_steps < 1) throw ConfigError("maximum number of steps must be >= 1");
  StepCoefficients c;
  c.logits.resize(max_steps + 1);
  const double scale = std::log(static_cast<double>(max_steps) + 1.0);
  for (std::uint32_t t = 0; t <= max_steps; ++t) c.logits[t] = -static_cast<double>(t) / scale;
  return c;
}

double combined_probability(std::span<const double> step_probs, std::span<const double> q) {
  if (step_probs.size() != q.size()) {
    throw ShapeError("step-probability vector and step weights differ in length");
  }
  double p = 0.0;
  for (std::size_t t = 0; t < q.size(); ++t) p += q[t] * step_probs[t];
  if (!(p > 0.0)) throw DataError("sampled entry lies outside the support of P");
  return p;
}

std::vector<double> combined_probability_gradient(std::span<const double> step_probs,
                                                  std::span<const double> q) {
  const double p = combined_probability(step_probs, q);
  std::vector<double> grad(q.size());
  for (std::size_t u = 0; u < q.size(); ++u) grad[u] = q[u] * (step_probs[u] - p);
  return grad;
}

std::vector<SupportEntry> support(const TransitionTensors& tensors, NodeId source) {
  std::vector<SupportEntry> out;
  for (const SparseTransitionTensor& step : tensors.steps) {
    for (const TransitionEntry& e : step.slice(source)) {
      if (e.probability > 0.0) out.push_back({e.target, e.path, step.step(), e.probability});
    }
  }
  return out;
}

NeighbourhoodSample sample_neighbourhood(const TransitionTensors& tensors,
                                         std::span<const double> q, NodeId source,
                                         std::uint32_t sample_size, Rng& rng,
                                         SamplingMode mode) {
  if (sample_size < 1) throw ConfigError("sample size must be >= 1");
  const std::uint32_t num_steps = tensors.max_steps() + 1;
  if (q.size() != num_steps) {
    throw ShapeError("step weights have length " + std::to_string(q.size()) + ", expected " +
                     std::to_string(num_steps));
  }
  const std::vector<SupportEntry> candidates = support(tensors, source);

  // Gumbel top-k: perturbed log-weights, keep the S largest.
  std::vector<double> keys(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double weight =
        mode == SamplingMode::kUniform ? 1.0 : q[candidates[k].step] * candidates[k].transition;
    keys[k] = std::log(weight) - std::log(-std::log(open_unit(rng)));
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min<std::size_t>(sample_size, candidates.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return keys[a] != keys[b] ? keys[a] > keys[b] : a < b;
                    });

  NeighbourhoodSample sample;
  sample.target = source;
  sample.capacity = sample_size;
  sample.num_steps = num_steps;
  sample.valid_count = static_cast<std::uint32_t>(take);
  sample.neighbours.assign(sample_size, 0);
  sample.paths.assign(sample_size, 0);
  sample.step_probs.assign(static_cast<std::size_t>(sample_size) * num_steps, 0.0);
  for (std::size_t k = 0; k < take; ++k) {
    const SupportEntry& e = candidates[order[k]];
    sample.neighbours[k] = e.neighbour;
    sample.paths[k] = e.path;
    sample.step_vector(k)[e.step] = e.transition;
  }
  return sample;
}

std::vector<NeighbourhoodSample> batch_neighbourhoods(const TransitionTensors& tensors,
                                                      std::span<const double> q,
                                                      std::span<const NodeId> nodes,
                                                      std::uint32_t sample_size,
                                                      std::uint64_t seed, SamplingMode mode) {
  std::vector<NeighbourhoodSample> out;
  out.reserve(nodes.size());
  for (NodeId node : nodes) {
    if (node < 1 || node > tensors.num_nodes()) {
      throw DataError("unknown node " + std::to_string(node));
    }
    Rng rng(derive_seed(seed, node));
    out.push_back(sample_neighbourhood(tensors, q, node, sample_size, rng, mode));
  }
  return out;
}

}  // namespace gatas
