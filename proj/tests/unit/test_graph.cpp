#include <doctest.h>

#include "derived_values.hpp"
#include "gatas/error.hpp"
#include "gatas/graph.hpp"
#include "oracles.hpp"

using namespace gatas;

TEST_CASE("graph sorts triplets and indexes sources") {
  Graph g(3, 2, {{2, 1, 3}, {1, 2, 2}, {1, 1, 3}});
  REQUIRE(g.triplets().size() == 3);
  CHECK(g.triplets()[0] == Triplet{1, 1, 3});
  CHECK(g.triplets()[1] == Triplet{1, 2, 2});
  CHECK(g.out_triplets(1).size() == 2);
  CHECK(g.out_triplets(2).size() == 1);
  CHECK(g.out_triplets(3).empty());
  CHECK(g.contains({2, 1, 3}));
  CHECK_FALSE(g.contains({3, 1, 2}));
}

TEST_CASE("graph rejects bad input") {
  CHECK_THROWS_AS(Graph(2, 1, {{1, 1, 3}}), DataError);
  CHECK_THROWS_AS(Graph(2, 1, {{1, 2, 2}}), DataError);
  CHECK_THROWS_AS(Graph(2, 1, {{0, 1, 2}}), DataError);
  CHECK_THROWS_WITH_AS(Graph(2, 1, {{1, 1, 2}, {1, 1, 2}}), doctest::Contains("duplicate"), DataError);
  CHECK_THROWS_AS(Graph(2, 1, {}, 2, {1.0, 2.0, 3.0}), DataError);
}

TEST_CASE("features are stored row-major per node") {
  Graph g(2, 1, {}, 2, {1, 2, 3, 4});
  CHECK(g.features(2)[0] == 3);
  CHECK(g.features(2)[1] == 4);
}

TEST_CASE("augmentation adds a self-loop type and shifts raw types") {
  Graph raw(3, 2, {{1, 1, 2}, {2, 2, 3}});
  Graph aug = augment_graph(raw);
  CHECK(aug.augmented());
  CHECK(aug.num_edge_types() == 3);
  CHECK(aug.triplets().size() == 5);
  for (NodeId v = 1; v <= 3; ++v) CHECK(aug.contains({v, kSelfLoopType, v}));
  CHECK(aug.contains({1, 2, 2}));
  CHECK(aug.contains({2, 3, 3}));
  CHECK_THROWS_AS(augment_graph(aug), DataError);
  CHECK_THROWS_AS(augment_graph(Graph(2, 1, {{1, 1, 1}})), DataError);
}

TEST_CASE("checksum tracks structure") {
  Graph a(3, 1, {{1, 1, 2}});
  Graph b(3, 1, {{1, 1, 2}});
  Graph c(3, 1, {{2, 1, 1}});
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
}

TEST_CASE("codebook enumerates paths shortest first") {
  PathCodebook book(2, 2);
  CHECK(book.num_paths() == derived::kPathsK2C2);
  const std::vector<std::vector<EdgeTypeId>> expected{{1}, {2}, {1, 1}, {1, 2}, {2, 1}, {2, 2}};
  for (PathIndex m = 1; m <= 6; ++m) CHECK(book.decode_path(m) == expected[m - 1]);
  CHECK(book.path_last(4) == 2);
  CHECK(book.path_prefix(4) == 1);
  CHECK(book.path_prefix(2) == 0);
  CHECK(PathCodebook(3, 3).num_paths() == derived::kPathsK3C3);
  CHECK(format_path(expected[3]) == "(1,2)");
}

TEST_CASE("codebook round trips and extends") {
  for (std::uint32_t k = 1; k <= 4; ++k) {
    for (std::uint32_t c = 1; c <= 4; ++c) {
      PathCodebook book(k, c);
      for (PathIndex m = 1; m <= book.num_paths(); ++m) {
        const auto seq = book.decode_path(m);
        CHECK(book.encode_path(seq) == m);
        CHECK(book.path_length(m) == seq.size());
        CHECK(oracle::path_rank(seq, k) == m);
        CHECK(book.extend(book.path_prefix(m), book.path_last(m)) == m);
      }
    }
  }
}

TEST_CASE("codebook rejects out-of-range input") {
  PathCodebook book(2, 2);
  CHECK_THROWS(book.decode_path(0));
  CHECK_THROWS(book.decode_path(7));
  const std::vector<EdgeTypeId> too_long{1, 1, 1};
  CHECK_THROWS(book.encode_path(too_long));
  const std::vector<EdgeTypeId> bad_type{3};
  CHECK_THROWS(book.encode_path(bad_type));
  CHECK_THROWS(book.extend(3, 1));
}
