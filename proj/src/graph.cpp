#include "gatas/graph.hpp"

#include <algorithm>
#include <limits>

#include "gatas/error.hpp"

namespace gatas {

namespace {

std::string describe(const Triplet& t) {
  return "(" + std::to_string(t.source) + ", " + std::to_string(t.type) + ", " +
         std::to_string(t.target) + ")";
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& hash, std::uint32_t value) {
  for (int byte = 0; byte < 4; ++byte) {
    hash ^= (value >> (8 * byte)) & 0xFFu;
    hash *= kFnvPrime;
  }
}

}  // namespace

Graph::Graph(std::uint32_t num_nodes, std::uint32_t num_edge_types,
             std::vector<Triplet> triplets, std::uint32_t feature_dim,
             std::vector<double> features, bool augmented)
    : num_nodes_(num_nodes),
      num_edge_types_(num_edge_types),
      feature_dim_(feature_dim),
      augmented_(augmented),
      triplets_(std::move(triplets)),
      features_(std::move(features)) {
  for (const Triplet& t : triplets_) {
    if (t.source < 1 || t.source > num_nodes_ || t.target < 1 || t.target > num_nodes_) {
      throw DataError("triplet " + describe(t) + " references a node outside [1, " +
                      std::to_string(num_nodes_) + "]");
    }
    if (t.type < 1 || t.type > num_edge_types_) {
      throw DataError("triplet " + describe(t) + " has an edge type outside [1, " +
                      std::to_string(num_edge_types_) + "]");
    }
  }
  std::sort(triplets_.begin(), triplets_.end());
  auto dup = std::adjacent_find(triplets_.begin(), triplets_.end());
  if (dup != triplets_.end()) {
    throw DataError("duplicate triplet " + describe(*dup));
  }
  if (feature_dim_ == 0 && !features_.empty()) {
    throw DataError("features given with feature dimension 0");
  }
  if (feature_dim_ > 0 &&
      features_.size() != static_cast<std::size_t>(num_nodes_) * feature_dim_) {
    throw DataError("feature matrix has " + std::to_string(features_.size()) +
                    " values, expected " +
                    std::to_string(static_cast<std::size_t>(num_nodes_) * feature_dim_));
  }
  if (augmented_) {
    std::size_t self_loops = 0;
    for (const Triplet& t : triplets_) {
      if (t.type == kSelfLoopType) {
        if (t.source != t.target) {
          throw DataError("self-loop type used by non-loop triplet " + describe(t));
        }
        ++self_loops;
      }
    }
    if (self_loops != num_nodes_) {
      throw DataError("augmented graph must carry exactly one self-loop per node");
    }
  }

  offsets_.assign(static_cast<std::size_t>(num_nodes_) + 1, 0);
  for (const Triplet& t : triplets_) ++offsets_[t.source];
  for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
}

std::span<const Triplet> Graph::out_triplets(NodeId source) const {
  if (source < 1 || source > num_nodes_) {
    throw DataError("unknown node " + std::to_string(source));
  }
  const std::size_t begin = offsets_[source - 1];
  const std::size_t end = offsets_[source];
  return std::span<const Triplet>(triplets_).subspan(begin, end - begin);
}

std::span<const double> Graph::features(NodeId node) const {
  if (node < 1 || node > num_nodes_) {
    throw DataError("unknown node " + std::to_string(node));
  }
  if (feature_dim_ == 0) return {};
  return std::span<const double>(features_).subspan(
      static_cast<std::size_t>(node - 1) * feature_dim_, feature_dim_);
}

bool Graph::contains(const Triplet& t) const {
  if (t.source < 1 || t.source > num_nodes_) return false;
  auto out = out_triplets(t.source);
  return std::binary_search(out.begin(), out.end(), t);
}

std::uint64_t Graph::checksum() const {
  std::uint64_t hash = kFnvOffset;
  fnv_mix(hash, num_nodes_);
  fnv_mix(hash, num_edge_types_);
  for (const Triplet& t : triplets_) {
    fnv_mix(hash, t.source);
    fnv_mix(hash, t.type);
    fnv_mix(hash, t.target);
  }
  return hash;
}

Graph augment_graph(const Graph& raw) {
  if (raw.augmented()) {
    throw DataError("graph is already augmented with self-loops");
  }
  std::vector<Triplet> triplets;
  triplets.reserve(raw.triplets().size() + raw.num_nodes());
  for (NodeId i = 1; i <= raw.num_nodes(); ++i) {
    triplets.push_back({i, kSelfLoopType, i});
  }
  for (const Triplet& t : raw.triplets()) {
    if (t.source == t.target) {
      throw DataError("raw self-loop " + describe(t) +
                      "; self-loops are reserved for the augmentation edge type");
    }
    triplets.push_back({t.source, t.type + 1, t.target});
  }
  const auto matrix = raw.feature_matrix();
  return Graph(raw.num_nodes(), raw.num_edge_types() + 1, std::move(triplets), raw.feature_dim(),
               std::vector<double>(matrix.begin(), matrix.end()), true);
}

PathCodebook::PathCodebook(std::uint32_t num_edge_types, std::uint32_t max_steps)
    : num_edge_types_(num_edge_types), max_steps_(max_steps), num_paths_(0) {
  if (num_edge_types_ < 1) throw ConfigError("path codebook needs at least one edge type");
  if (max_steps_ < 1) throw ConfigError("maximum number of steps must be >= 1");
  PathIndex level = 1;
  for (std::uint32_t t = 1; t <= max_steps_; ++t) {
    if (level > std::numeric_limits<PathIndex>::max() / num_edge_types_) {
      throw ConfigError("edge-type path count overflows 64 bits");
    }
    level *= num_edge_types_;
    if (num_paths_ > std::numeric_limits<PathIndex>::max() - level) {
      throw ConfigError("edge-type path count overflows 64 bits");
    }
    num_paths_ += level;
  }
}

void PathCodebook::check_index(PathIndex m) const {
  if (m < 1 || m > num_paths_) {
    throw DataError("path index " + std::to_string(m) + " outside [1, " +
                    std::to_string(num_paths_) + "]");
  }
}

EdgeTypeId PathCodebook::path_last(PathIndex m) const {
  check_index(m);
  return static_cast<EdgeTypeId>((m - 1) % num_edge_types_ + 1);
}

PathIndex PathCodebook::path_prefix(PathIndex m) const {
  check_index(m);
  return (m - 1) / num_edge_types_;
}

std::vector<EdgeTypeId> PathCodebook::decode_path(PathIndex m) const {
  check_index(m);
  std::vector<EdgeTypeId> sequence;
  while (m > 0) {
    sequence.push_back(static_cast<EdgeTypeId>((m - 1) % num_edge_types_ + 1));
    m = (m - 1) / num_edge_types_;
  }
  std::reverse(sequence.begin(), sequence.end());
  return sequence;
}

std::uint32_t PathCodebook::path_length(PathIndex m) const {
  check_index(m);
  std::uint32_t length = 0;
  while (m > 0) {
    m = (m - 1) / num_edge_types_;
    ++length;
  }
  return length;
}

PathIndex PathCodebook::extend(PathIndex prefix, EdgeTypeId type) const {
  if (type < 1 || type > num_edge_types_) {
    throw DataError("edge type " + std::to_string(type) + " outside [1, " +
                    std::to_string(num_edge_types_) + "]");
  }
  if (prefix != 0) check_index(prefix);
  const PathIndex m = prefix * num_edge_types_ + type;
  check_index(m);
  return m;
}

PathIndex PathCodebook::encode_path(std::span<const EdgeTypeId> sequence) const {
  if (sequence.empty() || sequence.size() > max_steps_) {
    throw DataError("path length " + std::to_string(sequence.size()) + " outside [1, " +
                    std::to_string(max_steps_) + "]");
  }
  PathIndex m = 0;
  for (EdgeTypeId type : sequence) m = extend(m, type);
  return m;
}

std::string format_path(std::span<const EdgeTypeId> sequence) {
  std::string out = "(";
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    if (k > 0) out += ',';
    out += std::to_string(sequence[k]);
  }
  out += ')';
  return out;
}

}  // namespace gatas
