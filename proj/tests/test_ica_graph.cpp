#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "retigraph/errors.hpp"
#include "retigraph/ica_graph.hpp"

using namespace retigraph;

namespace {

IntensityGrid flat_image(int w, int h, double value = 0.3) {
  IntensityGrid img;
  img.width = w;
  img.height = h;
  img.values.assign(static_cast<size_t>(w) * h, value);
  return img;
}

BinaryGrid from_rows(const std::vector<std::string>& rows) {
  BinaryGrid g(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) g.set(x, y, rows[y][x] == '#');
  return g;
}

}  // namespace

TEST_CASE("extract_ica_nodes on all-foreground segmentation") {
  BinaryGrid g(10, 10);
  for (auto& v : g.mask) v = 1;
  CHECK(extract_ica_nodes(g, flat_image(10, 10)).empty());
}

TEST_CASE("extract_ica_nodes hollow square ring") {
  BinaryGrid g(16, 16);
  for (int i = 4; i <= 11; ++i) {
    g.set(i, 4, true);
    g.set(i, 11, true);
    g.set(4, i, true);
    g.set(11, i, true);
  }
  const std::vector<ICANode> nodes = extract_ica_nodes(g, flat_image(16, 16));
  REQUIRE(nodes.size() == 2);
  // outside (raster-first) then inside
  CHECK(nodes[0].touches_border);
  CHECK_FALSE(nodes[1].touches_border);
  CHECK(nodes[1].area_mm2 < nodes[0].area_mm2);

  // masks partition the background
  std::set<std::pair<int, int>> seen;
  size_t total = 0;
  for (const ICANode& n : nodes) {
    n.mask.for_each_pixel([&](int x, int y) {
      REQUIRE_FALSE(g.at(x, y));
      REQUIRE(seen.insert({x, y}).second);
    });
    total += n.mask.pixel_count();
  }
  CHECK(total == g.mask.size() - g.count());
}

TEST_CASE("extract_ica_nodes count equals flood-fill background components") {
  Rng rng(17);
  for (int it = 0; it < 25; ++it) {
    const BinaryGrid g = oracle::random_blobs(48, rng, 7);
    const auto nodes = extract_ica_nodes(g, flat_image(48, 48));
    CHECK(static_cast<int>(nodes.size()) == oracle::component_count(invert(g), 4));
  }
}

TEST_CASE("skeleton_adjacency_edges two rooms one wall") {
  // A vertical 1-px wall splitting the frame: one edge between the two rooms.
  BinaryGrid g(20, 20);
  for (int y = 0; y < 20; ++y) g.set(10, y, true);
  const auto edges = skeleton_adjacency_edges(g);
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].first == 0);
  CHECK(edges[0].second == 1);
}

TEST_CASE("skeleton_adjacency_edges corridor between two walls") {
  // left room | wall | corridor | wall | right room
  BinaryGrid g(24, 16);
  for (int y = 0; y < 16; ++y) {
    g.set(8, y, true);
    g.set(15, y, true);
  }
  const auto edges = skeleton_adjacency_edges(g);
  // (left,mid) and (mid,right), never (left,right)
  REQUIRE(edges.size() == 2);
  const std::set<std::pair<int32_t, int32_t>> s(edges.begin(), edges.end());
  CHECK(s.count({0, 1}) == 1);
  CHECK(s.count({1, 2}) == 1);
  CHECK(s.count({0, 2}) == 0);
}

TEST_CASE("skeleton_adjacency_edges empty foreground") {
  CHECK(skeleton_adjacency_edges(BinaryGrid(12, 12)).empty());
}

TEST_CASE("skeleton_adjacency_edges are symmetric-as-undirected and deduplicated") {
  Rng rng(3);
  for (int it = 0; it < 15; ++it) {
    const BinaryGrid g = oracle::random_blobs(64, rng, 12);
    const auto edges = skeleton_adjacency_edges(g);
    std::set<std::pair<int32_t, int32_t>> seen;
    const int n = oracle::component_count(invert(g), 4);
    for (const auto& [a, b] : edges) {
      REQUIRE(a < b);  // stored once per unordered pair
      REQUIRE(a >= 0);
      REQUIRE(b < n);
      REQUIRE(seen.insert({a, b}).second);
    }
  }
}

TEST_CASE("identify_faz by center containment") {
  // wall at x=10; center pixel (10,10) of a 21x21 image sits ON the wall?
  // Use 20x20: center pixel (10,10) belongs to the right room.
  BinaryGrid g(20, 20);
  for (int y = 0; y < 20; ++y) g.set(5, y, true);
  const auto nodes = extract_ica_nodes(g, flat_image(20, 20));
  REQUIRE(nodes.size() == 2);
  const int32_t faz = identify_faz(nodes, {10.0, 10.0});
  CHECK(faz == 1);  // the room right of the wall contains (10,10)
}

TEST_CASE("identify_faz falls back to nearest centroid when center is vessel") {
  const BinaryGrid g = from_rows({
      "..........",
      ".####.....",
      ".#..#.....",
      ".####.....",
      "..........",
      "#########.",
      "....#.....",
      "....#.....",
      "....#.....",
      "....#.....",
  });
  const auto nodes = extract_ica_nodes(g, flat_image(10, 10));
  const int32_t id = identify_faz(nodes, {4.0, 5.0});  // center on the long wall
  // nearest centroid decides; compute expectation directly
  double best_d = 1e18;
  int32_t best = -1;
  for (const ICANode& n : nodes) {
    const double dx = n.centroid.x - 4.0, dy = n.centroid.y - 5.0;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (d < best_d) {
      best_d = d;
      best = n.id;
    }
  }
  CHECK(id == best);
}

TEST_CASE("identify_faz requires nodes") {
  CHECK_THROWS_AS(identify_faz({}, {5.0, 5.0}), DegenerateInputError);
}

TEST_CASE("acircularity of a disc is close to 1") {
  const int S = 64;
  BinaryGrid g(S, S);
  for (auto& v : g.mask) v = 1;
  // carve a disc of background, radius 20
  const double r = 20.0;
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double dx = x - S / 2.0, dy = y - S / 2.0;
      if (dx * dx + dy * dy <= r * r) g.set(x, y, false);
    }
  const auto nodes = extract_ica_nodes(g, flat_image(S, S));
  REQUIRE(nodes.size() == 1);
  const FAZNode faz = make_faz_node(nodes[0]);
  CHECK(faz.acircularity == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("injective-map consistency holds for thinned masks") {
  // Background components never merge under topology-preserving thinning, so
  // the adjacency construction must never throw on valid inputs.
  Rng rng(29);
  for (int it = 0; it < 30; ++it) {
    const BinaryGrid g = oracle::random_blobs(56, rng, 10);
    CHECK_NOTHROW(skeleton_adjacency_edges(g));
  }
}
