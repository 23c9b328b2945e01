#include "gatas/transition.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include "gatas/error.hpp"

namespace gatas {

namespace {

using Slice = std::vector<TransitionEntry>;

bool entry_less(const TransitionEntry& a, const TransitionEntry& b) {
  return a.target != b.target ? a.target < b.target : a.path < b.path;
}

void normalize_slice(Slice& slice) {
  double total = 0.0;
  for (const TransitionEntry& e : slice) total += e.probability;
  if (total <= 0.0) {
    slice.clear();
    return;
  }
  for (TransitionEntry& e : slice) e.probability /= total;
}

// Sorts by (target, path) and merges equal keys by summation.
void coalesce(Slice& slice) {
  std::stable_sort(slice.begin(), slice.end(), entry_less);
  std::size_t out = 0;
  for (std::size_t k = 0; k < slice.size(); ++k) {
    if (out > 0 && slice[out - 1].target == slice[k].target &&
        slice[out - 1].path == slice[k].path) {
      slice[out - 1].probability += slice[k].probability;
    } else {
      slice[out++] = slice[k];
    }
  }
  slice.resize(out);
}

// One composition step for a single source: sum over x of
// prev(i, x, prefix) * first(x, j, last) for targets j not yet reached.
Slice compose_slice(const SparseTransitionTensor& first, std::span<const TransitionEntry> prev,
                    std::span<const NodeId> reached, std::uint32_t num_edge_types) {
  Slice out;
  for (const TransitionEntry& via : prev) {
    for (const TransitionEntry& hop : first.slice(via.target)) {
      if (std::binary_search(reached.begin(), reached.end(), hop.target)) continue;
      out.push_back({hop.target, via.path * num_edge_types + hop.path,
                     via.probability * hop.probability});
    }
  }
  coalesce(out);
  normalize_slice(out);
  return out;
}

void insert_reached(std::vector<NodeId>& reached, std::span<const TransitionEntry> slice) {
  for (const TransitionEntry& e : slice) reached.push_back(e.target);
  std::sort(reached.begin(), reached.end());
  reached.erase(std::unique(reached.begin(), reached.end()), reached.end());
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t k = w; k < count; k += threads) fn(k);
    });
  }
}

}  // namespace

SparseTransitionTensor::SparseTransitionTensor(std::uint32_t step, std::uint32_t num_nodes)
    : step_(step), offsets_(static_cast<std::size_t>(num_nodes) + 1, 0) {}

SparseTransitionTensor::SparseTransitionTensor(std::uint32_t step,
                                               std::vector<std::vector<TransitionEntry>> slices)
    : step_(step) {
  offsets_.assign(slices.size() + 1, 0);
  std::size_t total = 0;
  for (const auto& s : slices) total += s.size();
  entries_.reserve(total);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    std::sort(slices[i].begin(), slices[i].end(), entry_less);
    for (std::size_t k = 1; k < slices[i].size(); ++k) {
      if (slices[i][k - 1].target == slices[i][k].target &&
          slices[i][k - 1].path == slices[i][k].path) {
        throw DataError("duplicate (target, path) pair in slice of node " + std::to_string(i + 1));
      }
    }
    entries_.insert(entries_.end(), slices[i].begin(), slices[i].end());
    offsets_[i + 1] = entries_.size();
  }
}

std::span<const TransitionEntry> SparseTransitionTensor::slice(NodeId source) const {
  if (source < 1 || source >= offsets_.size()) {
    throw DataError("unknown node " + std::to_string(source));
  }
  return std::span<const TransitionEntry>(entries_).subspan(
      offsets_[source - 1], offsets_[source] - offsets_[source - 1]);
}

SparseTransitionTensor adjacency_tensor(const Graph& graph) {
  std::vector<Slice> slices(graph.num_nodes());
  for (const Triplet& t : graph.triplets()) {
    if (t.type == kSelfLoopType) continue;
    slices[t.source - 1].push_back({t.target, t.type, 1.0});
  }
  return SparseTransitionTensor(1, std::move(slices));
}

SparseTransitionTensor normalize(const SparseTransitionTensor& tensor) {
  std::vector<Slice> slices(tensor.num_nodes());
  for (NodeId i = 1; i <= tensor.num_nodes(); ++i) {
    auto s = tensor.slice(i);
    for (const TransitionEntry& e : s) {
      if (!(e.probability >= 0.0)) {
        throw DataError("negative or NaN transition value in slice of node " + std::to_string(i));
      }
    }
    slices[i - 1].assign(s.begin(), s.end());
    normalize_slice(slices[i - 1]);
  }
  return SparseTransitionTensor(tensor.step(), std::move(slices));
}

SparseTransitionTensor step_zero_tensor(const Graph& graph) {
  std::vector<Slice> slices(graph.num_nodes());
  for (NodeId i = 1; i <= graph.num_nodes(); ++i) slices[i - 1].push_back({i, 1, 1.0});
  return SparseTransitionTensor(0, std::move(slices));
}

ReachedSets initial_reached(std::uint32_t num_nodes) {
  ReachedSets reached(num_nodes);
  for (NodeId i = 1; i <= num_nodes; ++i) reached[i - 1].push_back(i);
  return reached;
}

void mark_reached(ReachedSets& reached, const SparseTransitionTensor& tensor) {
  if (reached.size() != tensor.num_nodes()) {
    throw DataError("reached sets do not match tensor node count");
  }
  for (NodeId i = 1; i <= tensor.num_nodes(); ++i) insert_reached(reached[i - 1], tensor.slice(i));
}

SparseTransitionTensor next_step_tensor(const SparseTransitionTensor& first,
                                        const SparseTransitionTensor& prev,
                                        const ReachedSets& reached, std::uint32_t num_edge_types,
                                        std::uint32_t max_steps) {
  const std::uint32_t step = prev.step() + 1;
  if (first.step() != 1 || prev.step() < 1 || step > max_steps) {
    throw DataError("step/codebook mismatch: cannot build step " + std::to_string(step) +
                    " with maximum " + std::to_string(max_steps));
  }
  if (first.num_nodes() != prev.num_nodes() || reached.size() != prev.num_nodes()) {
    throw DataError("tensor node counts disagree");
  }
  std::vector<Slice> slices(prev.num_nodes());
  for (NodeId i = 1; i <= prev.num_nodes(); ++i) {
    slices[i - 1] = compose_slice(first, prev.slice(i), reached[i - 1], num_edge_types);
  }
  return SparseTransitionTensor(step, std::move(slices));
}

TransitionTensors precompute_sources(const Graph& graph, std::uint32_t max_steps,
                                     std::span<const NodeId> sources, unsigned threads) {
  if (max_steps < 1) throw ConfigError("maximum number of steps must be >= 1");
  if (!graph.augmented()) throw DataError("transition tensors require an augmented graph");
  PathCodebook codebook(graph.num_edge_types(), max_steps);
  if (codebook.num_paths() > std::numeric_limits<std::uint32_t>::max()) {
    throw ConfigError("edge-type path count exceeds 32-bit path indices");
  }

  const std::uint32_t n = graph.num_nodes();
  const std::uint32_t k = graph.num_edge_types();
  const SparseTransitionTensor first = normalize(adjacency_tensor(graph));

  for (NodeId i : sources) {
    if (i < 1 || i > n) throw DataError("unknown node " + std::to_string(i));
  }
  // per_step[t - 1][i - 1] for t = 1..C.
  std::vector<std::vector<Slice>> per_step(max_steps, std::vector<Slice>(n));
  parallel_for(sources.size(), threads, [&](std::size_t idx) {
    const NodeId i = sources[idx];
    auto s1 = first.slice(i);
    per_step[0][i - 1].assign(s1.begin(), s1.end());
    std::vector<NodeId> reached{i};
    insert_reached(reached, per_step[0][i - 1]);
    for (std::uint32_t t = 2; t <= max_steps; ++t) {
      per_step[t - 1][i - 1] = compose_slice(first, per_step[t - 2][i - 1], reached, k);
      insert_reached(reached, per_step[t - 1][i - 1]);
    }
  });

  TransitionTensors out;
  out.graph_checksum = graph.checksum();
  out.num_edge_types = k;
  out.steps.reserve(max_steps + 1);
  out.steps.push_back(step_zero_tensor(graph));
  for (std::uint32_t t = 1; t <= max_steps; ++t) {
    out.steps.emplace_back(t, std::move(per_step[t - 1]));
  }
  return out;
}

TransitionTensors precompute(const Graph& graph, std::uint32_t max_steps, unsigned threads) {
  std::vector<NodeId> sources(graph.num_nodes());
  for (NodeId i = 1; i <= graph.num_nodes(); ++i) sources[i - 1] = i;
  return precompute_sources(graph, max_steps, sources, threads);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr std::array<char, 8> kMagic{'G', 'A', 'T', 'A', 'S', 'T', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out_.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }

  void varint(std::uint64_t value) {
    while (value >= 0x80) {
      out_.put(static_cast<char>((value & 0x7F) | 0x80));
      value >>= 7;
    }
    out_.put(static_cast<char>(value));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    std::array<unsigned char, sizeof(T)> bytes;
    if (!in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
      throw DataError("truncated tensor cache");
    }
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  std::uint64_t varint() {
    std::uint64_t value = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) throw DataError("truncated tensor cache");
      value |= static_cast<std::uint64_t>(c & 0x7F) << shift;
      if ((c & 0x80) == 0) return value;
    }
    throw DataError("malformed varint in tensor cache");
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_tensors(const TransitionTensors& tensors, const std::filesystem::path& path) {
  if (tensors.steps.empty()) throw DataError("no tensors to save");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(tensors.graph_checksum);
  w.put<std::uint32_t>(tensors.max_steps());
  w.put<std::uint32_t>(tensors.num_edge_types);
  w.put<std::uint64_t>(tensors.codebook().num_paths());
  w.put<std::uint32_t>(tensors.num_nodes());
  for (const SparseTransitionTensor& step : tensors.steps) {
    for (NodeId i = 1; i <= step.num_nodes(); ++i) {
      auto slice = step.slice(i);
      w.varint(slice.size());
      for (const TransitionEntry& e : slice) {
        w.put<std::uint32_t>(e.target);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(e.path));
        w.put<double>(e.probability);
      }
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

TransitionTensors load_tensors(const std::filesystem::path& path,
                               std::uint64_t expected_checksum) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor cache " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError(path.string() + " is not a tensor cache");
  }
  Reader r(in);
  if (const auto version = r.get<std::uint32_t>(); version != kVersion) {
    throw DataError("unsupported tensor cache version " + std::to_string(version));
  }
  TransitionTensors out;
  out.graph_checksum = r.get<std::uint64_t>();
  if (out.graph_checksum != expected_checksum) {
    throw DataError("tensor cache was built for a different graph (checksum mismatch)");
  }
  const auto max_steps = r.get<std::uint32_t>();
  out.num_edge_types = r.get<std::uint32_t>();
  const auto num_paths = r.get<std::uint64_t>();
  const auto num_nodes = r.get<std::uint32_t>();
  if (max_steps < 1 || PathCodebook(out.num_edge_types, max_steps).num_paths() != num_paths) {
    throw DataError("inconsistent tensor cache header");
  }
  for (std::uint32_t t = 0; t <= max_steps; ++t) {
    std::vector<Slice> slices(num_nodes);
    for (std::uint32_t i = 0; i < num_nodes; ++i) {
      const std::uint64_t count = r.varint();
      if (count > num_paths * num_nodes) throw DataError("corrupt slice length in tensor cache");
      slices[i].resize(count);
      for (auto& e : slices[i]) {
        e.target = r.get<std::uint32_t>();
        e.path = r.get<std::uint32_t>();
        e.probability = r.get<double>();
        if (e.target < 1 || e.target > num_nodes || e.path < 1 || e.path > num_paths) {
          throw DataError("corrupt entry in tensor cache");
        }
      }
    }
    out.steps.emplace_back(t, std::move(slices));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes in tensor cache");
  }
  return out;
}

}  // namespace gatas
