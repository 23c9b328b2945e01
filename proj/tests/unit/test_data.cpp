#include <doctest.h>

#include <set>
#include <sstream>

#include "gatas/error.hpp"
#include "gatas/data.hpp"
#include "gatas/transition.hpp"

using namespace gatas;

namespace {

DatasetBundle parse(const std::string& text, Task task = Task::kMultiClass) {
  std::istringstream in(text);
  return parse_dataset(in, task);
}

std::string write(const DatasetBundle& b) {
  std::ostringstream out;
  write_dataset(out, b);
  return out.str();
}

void check_line_error(const std::string& text, const std::string& fragment, Task task = Task::kMultiClass) {
  CAPTURE(text);
  CHECK_THROWS_WITH_AS(parse(text, task), doctest::Contains(fragment.c_str()), DataError);
}

const char* kSmall =
    "# two classes\n"
    "nodes=4 edge_types=2 features=2\n"
    "N 1 0 0.5 1\n"
    "N 2 1 -1 2.25\n"
    "N 3 0 0 0\n"
    "N 4 - 1 1\n"
    "E 1 1 2\n"
    "E 2 2 3\n"
    "S train N 1\n"
    "S val N 2\n"
    "S test N 3\n";

}  // namespace

TEST_CASE("parse a small labeled graph") {
  const DatasetBundle b = parse(kSmall);
  CHECK(b.graph.num_nodes() == 4);
  CHECK(b.graph.num_edge_types() == 2);
  CHECK(b.graph.triplets().size() == 4);  // undirected by default
  CHECK(b.graph.contains({2, 1, 1}));
  CHECK(b.num_classes == 2);
  CHECK(b.labels[1] == std::vector<std::uint32_t>{1});
  CHECK(b.labels[3].empty());
  CHECK(b.split_nodes(Split::kTrain) == std::vector<NodeId>{1});
  CHECK(b.split_nodes(Split::kTest) == std::vector<NodeId>{3});
  CHECK(b.graph.features(2)[1] == 2.25);
}

TEST_CASE("directed graphs keep single edges") {
  const DatasetBundle b = parse("nodes=3 edge_types=1 features=0 directed=1\nE 1 1 2\nE 2 1 1\n");
  CHECK(b.directed);
  CHECK(b.graph.triplets().size() == 2);
}

TEST_CASE("nodes without a split line are unassigned") {
  const DatasetBundle b = parse(kSmall);
  for (Split s : kSplits) {
    for (NodeId v : b.split_nodes(s)) CHECK(v != 4);
  }
}

TEST_CASE("parse errors name the line") {
  check_line_error("nodes=2 edge_types=1 features=0\nE 1 1 2\nE 2 1 1\n", "line 3: duplicate edge");
  check_line_error("nodes=2 edge_types=1 features=0\nE 1 1 1\n", "line 2: self-loop");
  check_line_error("nodes=2 edge_types=1 features=0\nE 1 2 2\n", "line 2: edge type");
  check_line_error("nodes=2 edge_types=1 features=0\nE 1 1 3\n", "line 2: node id");
  check_line_error("nodes=2 edge_types=1 features=1\nN 1 0\n", "line 2: node line needs");
  check_line_error("nodes=2 edge_types=1 features=1\nN 1 0 x\n", "line 2: bad feature");
  check_line_error("nodes=2 edge_types=1 features=0\nN 1 0,1\n", "line 2: multi-class");
  check_line_error("nodes=2 edge_types=1\n", "line 1: header is missing 'features'");
  check_line_error("nodes=2 edge_types=1 features=0 colour=3\n", "line 1: unknown header key");
  check_line_error("nodes=2 edge_types=1 features=0\nX 1\n", "line 2: unknown record");
  check_line_error("nodes=2 edge_types=1 features=0\nN 1 0\nS train N 1\nS val N 1\n", "line 4: node 1 listed");
  check_line_error("nodes=2 edge_types=1 features=0\nS nope N 1\n", "line 2: unknown split");
  check_line_error("nodes=2 edge_types=1 features=1\nN 1 0 1\n", "node 2 has no N line");
  check_line_error("nodes=2 edge_types=1 features=0\nN 1 0\nN 2 -\nS train N 2\n", "has no label");
  check_line_error("nodes=2 edge_types=1 features=0 classes=2\nN 1 5\n", "outside");
  check_line_error("", "no header");
}

TEST_CASE("multi-label parsing") {
  const DatasetBundle b = parse("nodes=2 edge_types=1 features=0\nN 1 2,0\nN 2 1\nS train N 1\n", Task::kMultiLabel);
  CHECK(b.labels[0] == std::vector<std::uint32_t>{0, 2});
  CHECK(b.num_classes == 3);
}

TEST_CASE("edge split lines are validated") {
  const std::string head = "nodes=3 edge_types=1 features=0\nE 1 1 2\n";
  const DatasetBundle b = parse(head + "S val E 1 1 2 1\nS val E 1 1 3 0\n", Task::kLinkPrediction);
  CHECK(b.has_edge_splits());
  CHECK(b.split_edges(Split::kVal).size() == 2);
  CHECK_THROWS_WITH_AS(parse(head + "S test E 1 1 2 0\n", Task::kLinkPrediction),
                       doctest::Contains("negative split edge present"), DataError);
  CHECK_THROWS_WITH_AS(parse(head + "S test E 2 1 3 1\n", Task::kLinkPrediction),
                       doctest::Contains("positive split edge missing"), DataError);
  CHECK_THROWS_WITH_AS(parse(head + "S val E 1 1 2 1\nS test E 1 1 2 1\n", Task::kLinkPrediction),
                       doctest::Contains("line 4"), DataError);
}

TEST_CASE("canonical files round trip byte for byte") {
  const std::string canonical = write(parse(kSmall));
  CHECK(write(parse(canonical)) == canonical);
  const DatasetBundle synthetic = synthesize(SynthesisSpec{});
  const std::string text = write(synthetic);
  CHECK(write(parse(text)) == text);
  const DatasetBundle linked = link_split(synthetic, 0.1, 0.1, 3);
  const std::string ltext = write(linked);
  CHECK(write(parse(ltext, Task::kLinkPrediction)) == ltext);
}

TEST_CASE("synthesis is seeded and well formed") {
  SynthesisSpec spec;
  spec.edge_types = 3;
  spec.nodes = 150;
  spec.classes = 3;
  CHECK(write(synthesize(spec)) == write(synthesize(spec)));
  SynthesisSpec other = spec;
  other.seed = 1;
  CHECK(write(synthesize(spec)) != write(synthesize(other)));

  const DatasetBundle b = synthesize(spec);
  std::set<EdgeTypeId> types;
  for (const Triplet& t : b.graph.triplets()) {
    types.insert(t.type);
    CHECK(b.graph.contains({t.target, t.type, t.source}));
  }
  CHECK(types.size() == 3);
  validate_bundle(b, Task::kMultiClass);

  spec.degree = spec.nodes;
  CHECK_THROWS_AS(synthesize(spec), ConfigError);
}

TEST_CASE("noise-free synthetic features separate the classes") {
  SynthesisSpec spec;
  spec.classes = 2;
  spec.feature_noise = 0;
  const DatasetBundle b = synthesize(spec);
  for (NodeId v = 1; v <= b.graph.num_nodes(); ++v) {
    const auto f = b.graph.features(v);
    CHECK((f[1] > f[0]) == (b.labels[v - 1].front() == 1));
  }
}

TEST_CASE("link split") {
  // 1000 undirected edges on a ring with chords
  std::vector<Triplet> edges;
  const std::uint32_t n = 500;
  for (NodeId v = 1; v <= n; ++v) {
    for (NodeId step : {1u, 7u}) {
      const NodeId w = (v - 1 + step) % n + 1;
      edges.push_back({v, 1, w});
      edges.push_back({w, 1, v});
    }
  }
  DatasetBundle b;
  b.graph = Graph(n, 1, edges);
  b.labels.resize(n);
  const DatasetBundle s = link_split(b, 0.05, 0.10, 7);
  auto count = [](const std::vector<LabeledEdge>& es, bool positive) {
    return std::count_if(es.begin(), es.end(), [&](const LabeledEdge& e) { return e.positive == positive; });
  };
  CHECK(count(s.split_edges(Split::kVal), true) == 50);
  CHECK(count(s.split_edges(Split::kVal), false) == 50);
  CHECK(count(s.split_edges(Split::kTest), true) == 100);
  CHECK(count(s.split_edges(Split::kTest), false) == 100);
  CHECK(count(s.split_edges(Split::kTrain), true) == 850);

  std::set<std::pair<NodeId, NodeId>> seen;
  for (Split split : kSplits) {
    for (const LabeledEdge& e : s.split_edges(split)) {
      CHECK(seen.insert({std::min(e.source, e.target), std::max(e.source, e.target)}).second);
      CHECK(e.positive == b.graph.contains({e.source, e.type, e.target}));
    }
  }

  const Graph train = training_graph(s);
  CHECK(train.triplets().size() == 2 * 850);
  const TransitionTensors tt = precompute(augment_graph(train), 1, 1);
  for (Split split : {Split::kVal, Split::kTest}) {
    for (const LabeledEdge& e : s.split_edges(split)) {
      if (!e.positive) continue;
      for (const auto& entry : tt.steps[1].slice(e.source)) CHECK(entry.target != e.target);
    }
  }
  CHECK(write(link_split(b, 0.05, 0.10, 7)) == write(s));
  CHECK_THROWS_AS(link_split(b, 0.6, 0.5, 7), ConfigError);
  DatasetBundle tiny;
  tiny.graph = Graph(3, 1, {{1, 1, 2}, {2, 1, 1}});
  tiny.labels.resize(3);
  CHECK_THROWS_AS(link_split(tiny, 0.05, 0.10, 0), DataError);
}
