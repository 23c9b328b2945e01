#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "derived_values.hpp"
#include "gatas/error.hpp"
#include "gatas/sampler.hpp"
#include "oracles.hpp"

using namespace gatas;

namespace {

TransitionTensors path_tensors(std::uint32_t c = 2) {
  return precompute(augment_graph(oracle::path_graph(3)), c, 1);
}

}  // namespace

TEST_CASE("initial step weights") {
  const auto s2 = init_step_logits(2);
  for (int t = 0; t < 3; ++t) CHECK(s2.logits[t] == doctest::Approx(derived::kLogitsC2[t]).epsilon(1e-15));
  const std::span<const double> expected[] = {derived::kQ1, derived::kQ2, derived::kQ3};
  for (std::uint32_t c = 1; c <= 3; ++c) {
    const auto q = init_step_logits(c).weights();
    REQUIRE(q.size() == c + 1);
    double total = 0;
    for (std::uint32_t t = 0; t <= c; ++t) {
      CHECK(std::abs(q[t] - expected[c - 1][t]) <= 1e-12);
      total += q[t];
    }
    CHECK(std::abs(total - 1) <= 1e-9);
  }
}

TEST_CASE("softmax is shift invariant and handles large logits") {
  const std::vector<double> a{1, 2, 3}, b{1001, 1002, 1003};
  const auto pa = softmax(a), pb = softmax(b);
  for (int k = 0; k < 3; ++k) CHECK(pa[k] == doctest::Approx(pb[k]).epsilon(1e-12));
}

TEST_CASE("combined probability and its gradient") {
  const std::vector<double> q(derived::kQ2, derived::kQ2 + 3);
  const std::vector<double> s{0, 0.5, 0};
  CHECK(combined_probability(s, q) == doctest::Approx(0.5 * derived::kQ2[1]));
  const std::vector<double> zero{0, 0, 0};
  CHECK_THROWS_AS(combined_probability(zero, q), DataError);

  // central difference through the softmax
  const std::vector<double> logits(derived::kLogitsC2, derived::kLogitsC2 + 3);
  const auto grad = combined_probability_gradient(s, q);
  for (int u = 0; u < 3; ++u) {
    auto up = logits, down = logits;
    up[u] += 1e-6;
    down[u] -= 1e-6;
    const double fd = (combined_probability(s, softmax(up)) - combined_probability(s, softmax(down))) / 2e-6;
    CHECK(grad[u] == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_CASE("support lists every entry of every step") {
  const auto tt = path_tensors();
  const auto sup = support(tt, 1);
  REQUIRE(sup.size() == 3);
  CHECK(sup[0].neighbour == 1);
  CHECK(sup[0].path == 1);
  CHECK(sup[0].step == 0);
  CHECK(sup[1].neighbour == 2);
  CHECK(sup[1].step == 1);
  CHECK(sup[2].neighbour == 3);
  CHECK(sup[2].path == 6);
  CHECK(sup[2].step == 2);
}

TEST_CASE("samples are distinct, padded and deterministic") {
  const Graph g = augment_graph(oracle::random_graph(3, 12, 2));
  const auto tt = precompute(g, 3, 1);
  const auto q = init_step_logits(3).weights();
  for (NodeId v = 1; v <= g.num_nodes(); ++v) {
    const std::size_t support_size = support(tt, v).size();
    for (std::uint32_t s : {1u, 3u, 50u}) {
      Rng rng(derive_seed(9, v));
      const auto sample = sample_neighbourhood(tt, q, v, s, rng);
      CHECK(sample.capacity == s);
      CHECK(sample.valid_count == std::min<std::size_t>(s, support_size));
      std::set<std::pair<NodeId, PathIndex>> seen;
      for (std::uint32_t k = 0; k < s; ++k) {
        if (sample.valid(k)) {
          CHECK(seen.emplace(sample.neighbours[k], sample.paths[k]).second);
          CHECK(combined_probability(sample.step_vector(k), q) > 0);
        } else {
          CHECK(sample.neighbours[k] == 0);
          CHECK(sample.paths[k] == 0);
        }
      }
      Rng again(derive_seed(9, v));
      const auto twin = sample_neighbourhood(tt, q, v, s, again);
      CHECK(twin.neighbours == sample.neighbours);
      CHECK(twin.paths == sample.paths);
    }
  }
}

TEST_CASE("a full-capacity sample covers the whole support") {
  const auto tt = path_tensors();
  Rng rng(1);
  const auto sample = sample_neighbourhood(tt, init_step_logits(2).weights(), 2, 10, rng);
  CHECK(sample.valid_count == 3);  // self and both neighbours
}

TEST_CASE("batch samples do not depend on batch order") {
  const Graph g = augment_graph(oracle::random_graph(4, 12, 2));
  const auto tt = precompute(g, 2, 1);
  const auto q = init_step_logits(2).weights();
  const std::vector<NodeId> ab{1, 2}, ba{2, 1};
  const auto x = batch_neighbourhoods(tt, q, ab, 4, 5);
  const auto y = batch_neighbourhoods(tt, q, ba, 4, 5);
  CHECK(x[0].neighbours == y[1].neighbours);
  CHECK(x[1].paths == y[0].paths);
  const std::vector<NodeId> bad{0};
  CHECK_THROWS_AS(batch_neighbourhoods(tt, q, bad, 4, 5), DataError);
}

TEST_CASE("single draws follow the combined probability") {
  const auto tt = path_tensors();
  const auto q = init_step_logits(2).weights();
  std::array<int, 4> counts{};
  Rng rng(2024);
  const int n = 20000;
  for (int k = 0; k < n; ++k) counts[sample_neighbourhood(tt, q, 1, 1, rng).neighbours[0]]++;
  double chi2 = 0;
  for (int v = 1; v <= 3; ++v) {
    const double e = n * derived::kQ2[v - 1];
    chi2 += (counts[v] - e) * (counts[v] - e) / e;
  }
  CHECK(std::exp(-chi2 / 2) > 0.01);  // df = 2
}

TEST_CASE("uniform mode ignores probabilities") {
  // source 1 of a star: one step-1 neighbour and many step-2 nodes
  std::vector<Triplet> edges{{1, 1, 2}, {2, 1, 1}};
  for (NodeId v = 3; v <= 12; ++v) {
    edges.push_back({2, 1, v});
    edges.push_back({v, 1, 2});
  }
  const auto tt = precompute(augment_graph(Graph(12, 1, edges)), 2, 1);
  const auto q = init_step_logits(2).weights();
  int self_uniform = 0, self_weighted = 0;
  Rng rng(3);
  for (int k = 0; k < 5000; ++k) {
    self_uniform += sample_neighbourhood(tt, q, 1, 1, rng, SamplingMode::kUniform).neighbours[0] == 1;
    self_weighted += sample_neighbourhood(tt, q, 1, 1, rng, SamplingMode::kTransition).neighbours[0] == 1;
  }
  CHECK(self_uniform / 5000.0 == doctest::Approx(1.0 / 12).epsilon(0.3));
  CHECK(self_weighted / 5000.0 == doctest::Approx(derived::kQ2[0]).epsilon(0.05));
}

TEST_CASE("open_unit stays inside the open interval") {
  Rng rng(0);
  double lo = 1, hi = 0;
  for (int k = 0; k < 100000; ++k) {
    const double u = open_unit(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0);
  CHECK(hi < 1);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}
