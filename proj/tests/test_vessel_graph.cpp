#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "retigraph/errors.hpp"
#include "retigraph/vessel_graph.hpp"

using namespace retigraph;

namespace {

BinaryGrid from_rows(const std::vector<std::string>& rows) {
  BinaryGrid g(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) g.set(x, y, rows[y][x] == '#');
  return g;
}

IntensityGrid flat_image(int w, int h, double value = 0.8) {
  IntensityGrid img;
  img.width = w;
  img.height = h;
  img.values.assign(static_cast<size_t>(w) * h, value);
  return img;
}

void draw_line(BinaryGrid& g, int x0, int y0, int x1, int y1) {
  const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  for (int s = 0; s <= steps; ++s) {
    const int x = x0 + (x1 - x0) * s / std::max(1, steps);
    const int y = y0 + (y1 - y0) * s / std::max(1, steps);
    g.set(x, y, true);
  }
}

}  // namespace

TEST_CASE("classify_skeleton on a straight line") {
  BinaryGrid g(14, 5);
  for (int x = 2; x < 12; ++x) g.set(x, 2, true);
  const SkeletonClassification cls = classify_skeleton(g);
  int endpoints = 0, slabs = 0, branches = 0;
  for (int x = 0; x < g.width; ++x)
    for (int y = 0; y < g.height; ++y) {
      switch (cls.cls(x, y)) {
        case SkelClass::Endpoint: ++endpoints; break;
        case SkelClass::Slab: ++slabs; break;
        case SkelClass::Branch: ++branches; break;
        default: break;
      }
    }
  CHECK(endpoints == 2);
  CHECK(slabs == 8);
  CHECK(branches == 0);
  CHECK(cls.num_clusters == 0);
}

TEST_CASE("classify_skeleton on a plus shape") {
  BinaryGrid g(11, 11);
  for (int i = 1; i < 10; ++i) {
    g.set(i, 5, true);
    g.set(5, i, true);
  }
  const SkeletonClassification cls = classify_skeleton(g);
  int endpoints = 0, branch_pixels = 0;
  for (int x = 0; x < 11; ++x)
    for (int y = 0; y < 11; ++y) {
      endpoints += cls.cls(x, y) == SkelClass::Endpoint;
      branch_pixels += cls.cls(x, y) == SkelClass::Branch;
    }
  CHECK(endpoints == 4);
  CHECK(cls.num_clusters == 1);
  CHECK(branch_pixels >= 1);
  CHECK(cls.cluster_centroids[0].x == doctest::Approx(5.0));
  CHECK(cls.cluster_centroids[0].y == doctest::Approx(5.0));
}

TEST_CASE("classify_skeleton matches neighbor-count oracle on random thinned blobs") {
  Rng rng(77);
  for (int it = 0; it < 20; ++it) {
    const BinaryGrid skel = skeletonize(oracle::random_blobs(48, rng));
    const SkeletonClassification cls = classify_skeleton(skel);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) {
        if (!skel.at(x, y)) {
          REQUIRE(cls.cls(x, y) == SkelClass::None);
          continue;
        }
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            if ((dx || dy) && skel.at_safe(x + dx, y + dy)) ++n;
        const SkelClass expect =
            n <= 1 ? SkelClass::Endpoint : (n == 2 ? SkelClass::Slab : SkelClass::Branch);
        REQUIRE(cls.cls(x, y) == expect);
      }
  }
}

TEST_CASE("trace_segments on a straight line") {
  BinaryGrid g(14, 5);
  for (int x = 2; x < 12; ++x) g.set(x, 2, true);
  const TraceResult tr = trace_segments(g, classify_skeleton(g));
  REQUIRE(tr.paths.size() == 1);
  CHECK(tr.paths[0].size() == 10);
  CHECK(tr.adjacency.empty());
  CHECK_FALSE(tr.closed[0]);
  CHECK(tr.end_clusters[0][0] == -1);
  CHECK(tr.end_clusters[0][1] == -1);
}

TEST_CASE("trace_segments on a Y junction") {
  // Three arms meeting at one branch cluster.
  BinaryGrid g(15, 15);
  draw_line(g, 7, 7, 7, 13);   // down
  draw_line(g, 7, 7, 1, 1);    // up-left diagonal
  draw_line(g, 7, 7, 13, 1);   // up-right diagonal
  const SkeletonClassification cls = classify_skeleton(g);
  const TraceResult tr = trace_segments(g, cls);
  REQUIRE(tr.paths.size() == 3);
  CHECK(tr.adjacency.size() == 3);  // all pairs at the single junction

  // Every slab pixel appears in exactly one path.
  std::set<std::pair<int, int>> seen;
  size_t slab_or_end = 0;
  for (int y = 0; y < 15; ++y)
    for (int x = 0; x < 15; ++x)
      if (cls.cls(x, y) == SkelClass::Slab || cls.cls(x, y) == SkelClass::Endpoint) ++slab_or_end;
  size_t total = 0;
  for (const auto& path : tr.paths) {
    total += path.size();
    for (const Pixel& p : path) REQUIRE(seen.insert({p.x, p.y}).second);
  }
  CHECK(total == slab_or_end);
}

TEST_CASE("trace_segments on an isolated ring") {
  // Diamond outline: a true cycle, every pixel has exactly two 8-neighbors.
  BinaryGrid g(16, 16);
  const int cx = 8, cy = 8, r = 5;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (std::abs(x - cx) + std::abs(y - cy) == r) g.set(x, y, true);
  REQUIRE(skeletonize(g) == g);  // already thin
  const SkeletonClassification cls = classify_skeleton(g);
  const TraceResult tr = trace_segments(g, cls);
  REQUIRE(tr.paths.size() == 1);
  CHECK(tr.closed[0]);
  CHECK(tr.adjacency.empty());
  CHECK(tr.paths[0].size() == g.count());
  CHECK(tr.paths[0].front() == Pixel{8, 3});  // split at the raster-first pixel
  const VesselFeatures f =
      segment_features(tr.paths[0], true, distance_transform(g), flat_image(16, 16), g);
  CHECK(f.tortuosity == kTortuosityCap);
  CHECK(f.endpoint_a == f.endpoint_b);
}

TEST_CASE("segment_features straight path") {
  BinaryGrid g(15, 5);
  for (int x = 2; x < 13; ++x) g.set(x, 2, true);
  IntensityGrid img = flat_image(15, 5, 0.7);
  img.pixel_size_mm = 3.0 / 304.0;
  const TraceResult tr = trace_segments(g, classify_skeleton(g));
  REQUIRE(tr.paths.size() == 1);
  REQUIRE(tr.paths[0].size() == 11);
  const VesselFeatures f =
      segment_features(tr.paths[0], false, distance_transform(g), img, g);
  CHECK(f.length_mm == doctest::Approx(10.0 * 3.0 / 304.0));
  CHECK(f.tortuosity == doctest::Approx(1.0));
  CHECK(f.avg_radius_mm == doctest::Approx(1.0 * 3.0 / 304.0));
  CHECK(f.radius_variability == doctest::Approx(0.0));
  CHECK(f.is_terminal == false);  // set by build_vessel_graph, not here
  CHECK(f.mean_intensity == doctest::Approx(0.7));
}

TEST_CASE("segment_features quarter arc tortuosity") {
  // Midpoint-digitized quarter circle, radius 40: analytic arc/chord is
  // (pi/2)/sqrt(2) ~ 1.1107. The 1/sqrt(2) chain weights overestimate curved
  // arc length by ~5-6%, so the discretization band is 0.07 here.
  BinaryGrid g(64, 64);
  std::vector<Pixel> path;
  const int r = 40;
  int x = r, y = 0;
  path.push_back({x, y});
  g.set(x, y, true);
  auto err = [&](int cx, int cy) {
    return std::abs(static_cast<double>(cx) * cx + static_cast<double>(cy) * cy -
                    static_cast<double>(r) * r);
  };
  while (x > 0) {
    const double e_n = err(x, y + 1), e_nw = err(x - 1, y + 1), e_w = err(x - 1, y);
    if (e_nw <= e_n && e_nw <= e_w) {
      --x;
      ++y;
    } else if (e_n <= e_w) {
      ++y;
    } else {
      --x;
    }
    path.push_back({x, y});
    g.set(x, y, true);
  }
  const VesselFeatures f =
      segment_features(path, false, distance_transform(g), flat_image(64, 64), g);
  const double analytic = 3.14159265358979 / 2.0 / std::sqrt(2.0);
  CHECK(std::abs(f.tortuosity - analytic) < 0.07);
  CHECK(f.tortuosity >= 1.0);
}

TEST_CASE("segment_features errors and caps") {
  BinaryGrid g(8, 8);
  g.set(3, 3, true);
  CHECK_THROWS_AS(
      segment_features({}, false, distance_transform(g), flat_image(8, 8), g),
      ArgumentError);
  // single pixel: chord 0 -> capped
  const VesselFeatures f =
      segment_features({{3, 3}}, false, distance_transform(g), flat_image(8, 8), g);
  CHECK(f.tortuosity == kTortuosityCap);
  CHECK(f.length_mm > 0.0);
}

TEST_CASE("build_vessel_graph empty foreground") {
  const VesselGraph vg = build_vessel_graph(BinaryGrid(32, 32), flat_image(32, 32));
  CHECK(vg.segments.empty());
  CHECK(vg.edges.empty());
}

TEST_CASE("build_vessel_graph H shape") {
  // Two vertical bars joined by a crossbar: 5 segments, both junctions
  // connect 3 segments pairwise -> 6 adjacency pairs.
  BinaryGrid g(21, 21);
  draw_line(g, 4, 2, 4, 18);
  draw_line(g, 16, 2, 16, 18);
  draw_line(g, 4, 10, 16, 10);
  const VesselGraph vg = build_vessel_graph(g, flat_image(21, 21));
  CHECK(vg.segments.size() == 5);
  CHECK(vg.edges.size() == 6);
  int terminal = 0;
  for (const VesselSegment& s : vg.segments) terminal += s.features.is_terminal;
  CHECK(terminal == 4);
}

TEST_CASE("build_vessel_graph branching tree identity") {
  // A tree with B internal degree-3 bifurcations has 2B+1 segments.
  BinaryGrid g(160, 100);
  struct Node {
    int x, y, depth;
  };
  int bifurcations = 0;
  std::vector<Node> queue{{80, 92, 0}};
  while (!queue.empty()) {
    const Node n = queue.back();
    queue.pop_back();
    if (n.depth == 3) continue;
    const int reach = 40 >> n.depth;
    const int ny = n.y - (24 >> n.depth);
    draw_line(g, n.x, n.y, n.x - reach, ny);
    draw_line(g, n.x, n.y, n.x + reach, ny);
    ++bifurcations;
    queue.push_back({n.x - reach, ny, n.depth + 1});
    queue.push_back({n.x + reach, ny, n.depth + 1});
  }
  // trunk below the root
  draw_line(g, 80, 92, 80, 97);
  const VesselGraph vg = build_vessel_graph(g, flat_image(160, 100));
  CHECK(vg.segments.size() == 2 * static_cast<size_t>(bifurcations) + 1);
}

TEST_CASE("vessel graph invariants on random blobs") {
  Rng rng(123);
  for (int it = 0; it < 10; ++it) {
    const BinaryGrid g = oracle::random_blobs(72, rng, 10);
    const VesselGraph vg = build_vessel_graph(g, flat_image(72, 72));

    // adjacency irreflexive + deduplicated
    std::set<std::pair<int32_t, int32_t>> pairs;
    for (const auto& [a, b] : vg.edges) {
      REQUIRE(a < b);
      REQUIRE(pairs.insert({a, b}).second);
      REQUIRE(a >= 0);
      REQUIRE(b < static_cast<int32_t>(vg.segments.size()));
    }
    std::set<std::pair<int, int>> mask_seen;
    for (const VesselSegment& s : vg.segments) {
      const VesselFeatures& f = s.features;
      REQUIRE(std::isfinite(f.length_mm));
      REQUIRE(f.length_mm > 0.0);
      REQUIRE(f.avg_radius_mm > 0.0);
      REQUIRE(f.radius_variability >= 0.0);
      REQUIRE(f.tortuosity >= 1.0 - 1e-9);
      REQUIRE(f.tortuosity <= kTortuosityCap);
      REQUIRE(f.area_mm2 > 0.0);
      // masks are disjoint across segments and contain the path
      s.mask.for_each_pixel([&](int x, int y) {
        REQUIRE(g.at(x, y));
        REQUIRE(mask_seen.insert({x, y}).second);
      });
      std::set<std::pair<int, int>> in_mask;
      s.mask.for_each_pixel([&](int x, int y) { in_mask.insert({x, y}); });
      for (const Pixel& p : s.path) REQUIRE(in_mask.count({p.x, p.y}) == 1);
    }
  }
}

TEST_CASE("build_vessel_graph deterministic") {
  Rng rng(9);
  const BinaryGrid g = oracle::random_blobs(64, rng, 9);
  const IntensityGrid img = flat_image(64, 64, 0.6);
  const VesselGraph a = build_vessel_graph(g, img);
  const VesselGraph b = build_vessel_graph(g, img);
  REQUIRE(a.segments.size() == b.segments.size());
  CHECK(a.edges == b.edges);
  for (size_t i = 0; i < a.segments.size(); ++i) {
    CHECK(a.segments[i].path == b.segments[i].path);
    CHECK(a.segments[i].mask == b.segments[i].mask);
  }
}
