#include "gatas/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "gatas/error.hpp"
#include "gatas/sampler.hpp"

namespace gatas {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(text) + "'");
}

bool DatasetBundle::has_edge_splits() const {
  return std::any_of(edges.begin(), edges.end(), [](const auto& e) { return !e.empty(); });
}

namespace {

struct LineError {
  std::size_t line;
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("line " + std::to_string(line) + ": " + what);
  }
};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t k = 0;
  while (k < s.size()) {
    while (k < s.size() && std::isspace(static_cast<unsigned char>(s[k]))) ++k;
    const std::size_t start = k;
    while (k < s.size() && !std::isspace(static_cast<unsigned char>(s[k]))) ++k;
    if (k > start) out.push_back(s.substr(start, k - start));
  }
  return out;
}

template <typename U>
U parse_number(std::string_view text, const LineError& at, const char* what) {
  U value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    at.fail(std::string("bad ") + what + " '" + std::string(text) + "'");
  }
  return value;
}

NodeId parse_node(std::string_view text, std::uint32_t n, const LineError& at) {
  const auto id = parse_number<std::uint32_t>(text, at, "node id");
  if (id < 1 || id > n) at.fail("node id " + std::to_string(id) + " out of range 1.." + std::to_string(n));
  return id;
}

EdgeTypeId parse_type(std::string_view text, std::uint32_t k, const LineError& at) {
  const auto t = parse_number<std::uint32_t>(text, at, "edge type");
  if (t < 1 || t > k) at.fail("edge type " + std::to_string(t) + " out of range 1.." + std::to_string(k));
  return t;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

DatasetBundle parse_dataset(std::istream& in, Task task) {
  std::string raw;
  std::size_t line_no = 0;
  bool have_header = false;
  std::uint32_t n = 0, k = 0, f = 0;
  std::optional<std::uint32_t> classes;
  bool directed = false;

  std::vector<double> features;
  std::vector<bool> seen_node;
  std::vector<std::vector<std::uint32_t>> labels;
  std::set<Triplet> triplets;
  std::array<std::set<NodeId>, 3> split_nodes;
  std::array<std::set<LabeledEdge>, 3> split_edges;

  while (std::getline(in, raw)) {
    ++line_no;
    const LineError at{line_no};
    const auto tok = split_ws(raw);
    if (tok.empty() || tok[0].front() == '#') continue;

    if (!have_header) {
      std::map<std::string, std::string, std::less<>> keys;
      for (auto t : tok) {
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) at.fail("header expects key=value, got '" + std::string(t) + "'");
        keys.emplace(std::string(t.substr(0, eq)), std::string(t.substr(eq + 1)));
      }
      auto take = [&](const char* key, bool required) -> std::optional<std::uint32_t> {
        auto it = keys.find(key);
        if (it == keys.end()) {
          if (required) at.fail(std::string("header is missing '") + key + "'");
          return std::nullopt;
        }
        const auto v = parse_number<std::uint32_t>(it->second, at, key);
        keys.erase(it);
        return v;
      };
      n = *take("nodes", true);
      k = *take("edge_types", true);
      f = *take("features", true);
      directed = take("directed", false).value_or(0) != 0;
      classes = take("classes", false);
      if (!keys.empty()) at.fail("unknown header key '" + keys.begin()->first + "'");
      if (n == 0) at.fail("graph has no nodes");
      features.assign(static_cast<std::size_t>(n) * f, 0.0);
      seen_node.assign(n, false);
      labels.assign(n, {});
      have_header = true;
      continue;
    }

    if (tok[0] == "N") {
      if (tok.size() != 3 + static_cast<std::size_t>(f)) {
        at.fail("node line needs " + std::to_string(3 + f) + " fields, got " + std::to_string(tok.size()));
      }
      const NodeId id = parse_node(tok[1], n, at);
      if (seen_node[id - 1]) at.fail("duplicate node " + std::to_string(id));
      seen_node[id - 1] = true;
      if (tok[2] != "-") {
        std::string_view rest = tok[2];
        while (true) {
          const auto comma = rest.find(',');
          labels[id - 1].push_back(parse_number<std::uint32_t>(rest.substr(0, comma), at, "label"));
          if (comma == std::string_view::npos) break;
          rest.remove_prefix(comma + 1);
        }
        if (task == Task::kMultiClass && labels[id - 1].size() != 1) {
          at.fail("multi-class node needs exactly one label");
        }
        auto& l = labels[id - 1];
        std::sort(l.begin(), l.end());
        if (std::adjacent_find(l.begin(), l.end()) != l.end()) at.fail("repeated label");
      }
      for (std::uint32_t c = 0; c < f; ++c) {
        const double v = parse_number<double>(tok[3 + c], at, "feature");
        if (!std::isfinite(v)) at.fail("non-finite feature");
        features[static_cast<std::size_t>(id - 1) * f + c] = v;
      }
    } else if (tok[0] == "E") {
      if (tok.size() != 4) at.fail("edge line needs 4 fields");
      const NodeId s = parse_node(tok[1], n, at);
      const EdgeTypeId r = parse_type(tok[2], k, at);
      const NodeId t = parse_node(tok[3], n, at);
      if (s == t) at.fail("self-loop on node " + std::to_string(s));
      if (!triplets.insert({s, r, t}).second || (!directed && !triplets.insert({t, r, s}).second)) {
        at.fail("duplicate edge " + std::to_string(s) + " " + std::to_string(r) + " " + std::to_string(t));
      }
    } else if (tok[0] == "S") {
      if (tok.size() < 3) at.fail("split line too short");
      const Split split = [&] {
        try {
          return parse_split(tok[1]);
        } catch (const DataError& e) {
          at.fail(e.what());
        }
      }();
      const int si = static_cast<int>(split);
      if (tok[2] == "N") {
        if (tok.size() != 4) at.fail("node split line needs 4 fields");
        const NodeId id = parse_node(tok[3], n, at);
        for (const auto& other : split_nodes) {
          if (other.contains(id)) at.fail("node " + std::to_string(id) + " listed in more than one split");
        }
        split_nodes[si].insert(id);
      } else if (tok[2] == "E") {
        if (tok.size() != 7) at.fail("edge split line needs 7 fields");
        LabeledEdge e{parse_node(tok[3], n, at), parse_type(tok[4], k, at), parse_node(tok[5], n, at),
                      false};
        const auto label = parse_number<std::uint32_t>(tok[6], at, "edge label");
        if (label > 1) at.fail("edge label must be 0 or 1");
        e.positive = label == 1;
        for (const auto& other : split_edges) {
          for (bool p : {false, true}) {
            if (other.contains(LabeledEdge{e.source, e.type, e.target, p})) {
              at.fail("edge listed more than once in the splits");
            }
          }
        }
        split_edges[si].insert(e);
      } else {
        at.fail("split line kind must be N or E");
      }
    } else {
      at.fail("unknown record '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_header) throw DataError("dataset has no header line");
  if (f > 0) {
    for (NodeId id = 1; id <= n; ++id) {
      if (!seen_node[id - 1]) throw DataError("node " + std::to_string(id) + " has no N line");
    }
  }

  DatasetBundle bundle;
  bundle.graph = Graph(n, k, {triplets.begin(), triplets.end()}, f, std::move(features));
  bundle.directed = directed;
  bundle.labels = std::move(labels);
  std::uint32_t max_label = 0;
  bool any_label = false;
  for (const auto& l : bundle.labels) {
    if (!l.empty()) {
      any_label = true;
      max_label = std::max(max_label, l.back());
    }
  }
  bundle.num_classes = classes.value_or(any_label ? max_label + 1 : 0);
  for (int s = 0; s < 3; ++s) {
    bundle.nodes[s].assign(split_nodes[s].begin(), split_nodes[s].end());
    bundle.edges[s].assign(split_edges[s].begin(), split_edges[s].end());
  }
  validate_bundle(bundle, task);
  return bundle;
}

DatasetBundle load_dataset(const std::filesystem::path& path, Task task) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  try {
    return parse_dataset(in, task);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void validate_bundle(const DatasetBundle& bundle, Task task) {
  const Graph& g = bundle.graph;
  if (bundle.labels.size() != g.num_nodes()) throw DataError("label table size differs from node count");
  for (NodeId id = 1; id <= g.num_nodes(); ++id) {
    for (std::uint32_t l : bundle.labels[id - 1]) {
      if (l >= bundle.num_classes) {
        throw DataError("node " + std::to_string(id) + " has label " + std::to_string(l) +
                        " outside 0.." + std::to_string(bundle.num_classes) + "-1");
      }
    }
  }
  std::set<NodeId> seen;
  for (const auto& nodes : bundle.nodes) {
    for (NodeId id : nodes) {
      if (id < 1 || id > g.num_nodes()) throw DataError("split node " + std::to_string(id) + " out of range");
      if (!seen.insert(id).second) throw DataError("node " + std::to_string(id) + " in more than one split");
      if (task != Task::kLinkPrediction && bundle.labels[id - 1].empty()) {
        throw DataError("split node " + std::to_string(id) + " has no label");
      }
    }
  }
  std::set<std::pair<Triplet, bool>> edges;
  for (const auto& list : bundle.edges) {
    for (const LabeledEdge& e : list) {
      const Triplet t{e.source, e.type, e.target};
      if (e.source < 1 || e.source > g.num_nodes() || e.target < 1 || e.target > g.num_nodes() ||
          e.type < 1 || e.type > g.num_edge_types()) {
        throw DataError("split edge out of range");
      }
      if (e.positive != g.contains(t)) {
        throw DataError(std::string(e.positive ? "positive split edge missing from" : "negative split edge present in") +
                        " the graph: " + std::to_string(e.source) + " " + std::to_string(e.type) + " " +
                        std::to_string(e.target));
      }
      if (!edges.emplace(t, e.positive).second) throw DataError("split edge listed twice");
    }
  }
}

void write_dataset(std::ostream& out, const DatasetBundle& bundle) {
  const Graph& g = bundle.graph;
  out << "nodes=" << g.num_nodes() << " edge_types=" << g.num_edge_types()
      << " features=" << g.feature_dim() << " directed=" << (bundle.directed ? 1 : 0)
      << " classes=" << bundle.num_classes << '\n';
  for (NodeId id = 1; id <= g.num_nodes(); ++id) {
    const auto& l = bundle.labels[id - 1];
    if (!g.has_features() && l.empty()) continue;
    out << "N " << id << ' ';
    if (l.empty()) out << '-';
    for (std::size_t c = 0; c < l.size(); ++c) out << (c ? "," : "") << l[c];
    for (double v : g.features(id)) out << ' ' << format_double(v);
    out << '\n';
  }
  for (const Triplet& t : g.triplets()) {
    if (!bundle.directed && t.source > t.target) continue;
    out << "E " << t.source << ' ' << t.type << ' ' << t.target << '\n';
  }
  for (Split s : kSplits) {
    for (NodeId id : bundle.split_nodes(s)) out << "S " << to_string(s) << " N " << id << '\n';
    for (const LabeledEdge& e : bundle.split_edges(s)) {
      out << "S " << to_string(s) << " E " << e.source << ' ' << e.type << ' ' << e.target << ' '
          << (e.positive ? 1 : 0) << '\n';
    }
  }
}

void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  write_dataset(out, bundle);
  if (!out) throw DataError("failed writing dataset " + path.string());
}

Graph training_graph(const DatasetBundle& bundle) {
  std::set<Triplet> held_out;
  for (Split s : {Split::kVal, Split::kTest}) {
    for (const LabeledEdge& e : bundle.split_edges(s)) {
      if (!e.positive) continue;
      held_out.insert({e.source, e.type, e.target});
      if (!bundle.directed) held_out.insert({e.target, e.type, e.source});
    }
  }
  const Graph& g = bundle.graph;
  std::vector<Triplet> kept;
  for (const Triplet& t : g.triplets()) {
    if (!held_out.contains(t)) kept.push_back(t);
  }
  return Graph(g.num_nodes(), g.num_edge_types(), std::move(kept), g.feature_dim(),
               {g.feature_matrix().begin(), g.feature_matrix().end()});
}

namespace {

std::uint32_t uniform_index(Rng& rng, std::uint32_t n) {
  return static_cast<std::uint32_t>(open_unit(rng) * n);
}

}  // namespace

DatasetBundle synthesize(const SynthesisSpec& spec) {
  if (spec.nodes < 2) throw ConfigError("synthetic graph needs at least 2 nodes");
  if (spec.degree >= spec.nodes) {
    throw ConfigError("degree " + std::to_string(spec.degree) + " must be below the node count " +
                      std::to_string(spec.nodes));
  }
  if (spec.edge_types == 0 || spec.classes == 0) throw ConfigError("need at least one edge type and class");
  if (spec.homophily < 0 || spec.homophily > 1 || spec.feature_noise < 0) {
    throw ConfigError("homophily must lie in [0,1] and noise must be non-negative");
  }
  if (spec.train_fraction < 0 || spec.val_fraction < 0 || spec.test_fraction < 0 ||
      spec.train_fraction + spec.val_fraction + spec.test_fraction > 1.0 + 1e-12) {
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  }
  Rng rng(derive_seed(spec.seed, 0x73796e7468ULL));
  const std::uint32_t n = spec.nodes;

  std::vector<std::uint32_t> cls(n);
  for (std::uint32_t i = 0; i < n; ++i) cls[i] = i % spec.classes;
  for (std::uint32_t i = n - 1; i > 0; --i) std::swap(cls[i], cls[uniform_index(rng, i + 1)]);
  std::vector<std::vector<NodeId>> members(spec.classes);
  for (std::uint32_t i = 0; i < n; ++i) members[cls[i]].push_back(i + 1);

  std::vector<double> features(static_cast<std::size_t>(n) * spec.classes);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t c = 0; c < spec.classes; ++c) {
      const double noise = spec.feature_noise > 0 ? spec.feature_noise * standard_normal(rng) : 0.0;
      features[static_cast<std::size_t>(i) * spec.classes + c] = (c == cls[i] ? 1.0 : 0.0) + noise;
    }
  }

  std::set<Triplet> triplets;
  for (NodeId s = 1; s <= n; ++s) {
    const auto& same = members[cls[s - 1]];
    for (std::uint32_t d = 0; d < spec.degree; ++d) {
      for (int attempt = 0; attempt < 32; ++attempt) {
        const EdgeTypeId r = 1 + uniform_index(rng, spec.edge_types);
        const bool inside = open_unit(rng) < spec.homophily && same.size() > 1;
        const NodeId t = inside ? same[uniform_index(rng, static_cast<std::uint32_t>(same.size()))]
                                : 1 + uniform_index(rng, n);
        if (t == s || triplets.contains({s, r, t})) continue;
        triplets.insert({s, r, t});
        triplets.insert({t, r, s});
        break;
      }
    }
  }

  DatasetBundle bundle;
  bundle.graph = Graph(n, spec.edge_types, {triplets.begin(), triplets.end()}, spec.classes,
                       std::move(features));
  bundle.directed = false;
  bundle.num_classes = spec.classes;
  bundle.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) bundle.labels[i] = {cls[i]};

  std::vector<NodeId> order(n);
  for (std::uint32_t i = 0; i < n; ++i) order[i] = i + 1;
  for (std::uint32_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.val_fraction * n));
  const auto n_test = std::min<std::size_t>(static_cast<std::size_t>(std::llround(spec.test_fraction * n)),
                                            n - std::min<std::size_t>(n, n_train + n_val));
  std::size_t at = 0;
  for (auto [split, count] : {std::pair{0, n_train}, std::pair{1, n_val}, std::pair{2, n_test}}) {
    auto& list = bundle.nodes[split];
    for (std::size_t c = 0; c < count && at < n; ++c) list.push_back(order[at++]);
    std::sort(list.begin(), list.end());
  }
  return bundle;
}

DatasetBundle link_split(const DatasetBundle& bundle, double val_fraction, double test_fraction,
                         std::uint64_t seed) {
  if (val_fraction < 0 || test_fraction < 0 || val_fraction + test_fraction >= 1.0) {
    throw ConfigError("link split fractions must be non-negative and sum below 1");
  }
  const Graph& g = bundle.graph;
  std::vector<Triplet> pairs;
  for (const Triplet& t : g.triplets()) {
    if (bundle.directed || t.source < t.target) pairs.push_back(t);
  }
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(pairs.size())));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(pairs.size())));
  if ((val_fraction > 0 && n_val == 0) || (test_fraction > 0 && n_test == 0) ||
      n_val + n_test >= pairs.size()) {
    throw DataError("graph with " + std::to_string(pairs.size()) + " edges is too small for the link split");
  }

  Rng rng(derive_seed(seed, 0x6c696e6bULL));
  for (std::size_t i = pairs.size() - 1; i > 0; --i) {
    std::swap(pairs[i], pairs[uniform_index(rng, static_cast<std::uint32_t>(i + 1))]);
  }

  DatasetBundle out = bundle;
  for (auto& e : out.edges) e.clear();
  std::set<Triplet> negatives;
  auto absent = [&](NodeId s, EdgeTypeId r, NodeId t) {
    if (s == t || g.contains({s, r, t}) || negatives.contains({s, r, t})) return false;
    return bundle.directed || (!g.contains({t, r, s}) && !negatives.contains({t, r, s}));
  };
  const std::size_t limit = 1000 * static_cast<std::size_t>(g.num_nodes());
  std::size_t at = 0;
  for (auto [split, count] : {std::pair{Split::kVal, n_val}, std::pair{Split::kTest, n_test}}) {
    auto& list = out.edges[static_cast<int>(split)];
    for (std::size_t c = 0; c < count; ++c, ++at) {
      const Triplet& p = pairs[at];
      list.push_back({p.source, p.type, p.target, true});
      std::size_t tries = 0;
      while (true) {
        if (++tries > limit) throw DataError("graph is too dense to draw negative edges");
        NodeId s = 1 + uniform_index(rng, g.num_nodes());
        NodeId t = 1 + uniform_index(rng, g.num_nodes());
        if (!bundle.directed && s > t) std::swap(s, t);
        if (!absent(s, p.type, t)) continue;
        negatives.insert({s, p.type, t});
        list.push_back({s, p.type, t, false});
        break;
      }
    }
    std::sort(list.begin(), list.end());
  }
  auto& train = out.edges[static_cast<int>(Split::kTrain)];
  for (; at < pairs.size(); ++at) train.push_back({pairs[at].source, pairs[at].type, pairs[at].target, true});
  std::sort(train.begin(), train.end());
  return out;
}

}  // namespace gatas
