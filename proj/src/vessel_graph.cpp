#include "retigraph/vessel_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "retigraph/errors.hpp"

namespace retigraph {

namespace {

// Fixed neighbor order (row-major over the 3x3 window) keeps tracing
// deterministic.
constexpr int kNbrDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
constexpr int kNbrDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

constexpr double kSqrt2 = 1.4142135623730951;

}  // namespace

SkeletonClassification classify_skeleton(const BinaryGrid& skel) {
  const int w = skel.width;
  const int h = skel.height;
  SkeletonClassification out;
  out.width = w;
  out.height = h;
  out.classes.assign(static_cast<size_t>(w) * h, SkelClass::None);
  out.branch_cluster.assign(static_cast<size_t>(w) * h, -1);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!skel.at(x, y)) continue;
      int n = 0;
      for (int k = 0; k < 8; ++k) n += skel.at_safe(x + kNbrDx[k], y + kNbrDy[k]);
      SkelClass c = n <= 1 ? SkelClass::Endpoint : (n == 2 ? SkelClass::Slab : SkelClass::Branch);
      out.classes[static_cast<size_t>(y) * w + x] = c;
    }
  }

  // Merge 8-adjacent branch pixels into clusters, ids in raster-first order.
  std::vector<Pixel> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      if (out.classes[idx] != SkelClass::Branch || out.branch_cluster[idx] >= 0) continue;
      const int32_t cid = out.num_clusters++;
      double sx = 0.0, sy = 0.0;
      int count = 0;
      stack.push_back({x, y});
      out.branch_cluster[idx] = cid;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        sx += p.x;
        sy += p.y;
        ++count;
        for (int k = 0; k < 8; ++k) {
          const int nx = p.x + kNbrDx[k], ny = p.y + kNbrDy[k];
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const size_t nidx = static_cast<size_t>(ny) * w + nx;
          if (out.classes[nidx] == SkelClass::Branch && out.branch_cluster[nidx] < 0) {
            out.branch_cluster[nidx] = cid;
            stack.push_back({nx, ny});
          }
        }
      }
      out.cluster_centroids.push_back({sx / count, sy / count});
    }
  }
  return out;
}

namespace {

struct Walker {
  const BinaryGrid& skel;
  const SkeletonClassification& cls;
  std::vector<uint8_t>& visited;

  bool is_skel(int x, int y) const { return skel.at_safe(x, y); }

  // Traces one segment starting at `seed`. `start_cluster` is the cluster the
  // walk leaves from (-1 for endpoint/cycle seeds).
  void walk(Pixel seed, int32_t start_cluster, bool cycle_seed,
            std::vector<Pixel>& path, std::array<int32_t, 2>& ends, bool& closed) {
    const int w = skel.width;
    path.clear();
    path.push_back(seed);
    visited[static_cast<size_t>(seed.y) * w + seed.x] = 1;
    ends = {start_cluster, -1};
    closed = false;

    Pixel prev{-1, -1};
    bool have_prev = false;
    while (true) {
      const Pixel cur = path.back();
      if (path.size() > 1 && cls.cls(cur.x, cur.y) == SkelClass::Endpoint) {
        ends[1] = -1;
        return;
      }
      Pixel next{-1, -1};
      bool have_next = false;
      int self_count = 0;      // seed adjacencies into the seeding cluster
      int32_t adj_other = -1;  // first adjacent cluster not consumed by seeding
      bool hit_visited_front = false;
      for (int k = 0; k < 8; ++k) {
        const int nx = cur.x + kNbrDx[k], ny = cur.y + kNbrDy[k];
        if (!is_skel(nx, ny)) continue;
        if (have_prev && nx == prev.x && ny == prev.y) continue;
        if (cls.cls(nx, ny) == SkelClass::Branch) {
          const int32_t c = cls.cluster(nx, ny);
          if (path.size() == 1 && c == start_cluster)
            ++self_count;
          else if (adj_other < 0)
            adj_other = c;
          continue;
        }
        const size_t nidx = static_cast<size_t>(ny) * w + nx;
        if (visited[nidx]) {
          if (nx == path.front().x && ny == path.front().y) hit_visited_front = true;
          continue;
        }
        if (!have_next) {
          next = {nx, ny};
          have_next = true;
        }
      }
      if (have_next) {
        visited[static_cast<size_t>(next.y) * w + next.x] = 1;
        prev = cur;
        have_prev = true;
        path.push_back(next);
        continue;
      }
      if (adj_other >= 0) {
        ends[1] = adj_other;
        return;
      }
      if (self_count >= 2) {
        ends[1] = start_cluster;  // one-pixel loop back onto the seeding cluster
        return;
      }
      if (cycle_seed && hit_visited_front && path.size() >= 3) {
        closed = true;
        ends = {-1, -1};
        return;
      }
      // Single adjacency back to the seed cluster (or none at all): the free
      // side is a skeleton endpoint.
      if (path.size() == 1) {
        ends[1] = -1;
        return;
      }
      throw InternalError("segment trace ended without a terminal");
    }
  }
};

}  // namespace

TraceResult trace_segments(const BinaryGrid& skel, const SkeletonClassification& cls) {
  const int w = skel.width;
  const int h = skel.height;
  TraceResult out;
  std::vector<uint8_t> visited(static_cast<size_t>(w) * h, 0);
  Walker walker{skel, cls, visited};

  auto emit = [&](std::vector<Pixel>&& path, std::array<int32_t, 2> ends, bool closed) {
    if (!closed && path.size() > 1 && raster_less(path.back(), path.front())) {
      std::reverse(path.begin(), path.end());
      std::swap(ends[0], ends[1]);
    }
    out.paths.push_back(std::move(path));
    out.end_clusters.push_back(ends);
    out.closed.push_back(closed);
  };

  std::vector<Pixel> path;
  std::array<int32_t, 2> ends{};
  bool closed = false;

  // Endpoint-seeded walks first (raster order).
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      if (cls.classes[idx] != SkelClass::Endpoint || visited[idx]) continue;
      walker.walk({x, y}, -1, false, path, ends, closed);
      emit(std::move(path), ends, closed);
    }
  }
  // Cluster-seeded walks.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      if (cls.classes[idx] != SkelClass::Branch) continue;
      const int32_t cid = cls.branch_cluster[idx];
      for (int k = 0; k < 8; ++k) {
        const int nx = x + kNbrDx[k], ny = y + kNbrDy[k];
        if (!skel.at_safe(nx, ny)) continue;
        const size_t nidx = static_cast<size_t>(ny) * w + nx;
        if (cls.classes[nidx] == SkelClass::Branch || visited[nidx]) continue;
        walker.walk({nx, ny}, cid, false, path, ends, closed);
        emit(std::move(path), ends, closed);
      }
    }
  }
  // Remaining slabs form isolated cycles.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      if (cls.classes[idx] != SkelClass::Slab || visited[idx]) continue;
      walker.walk({x, y}, -1, true, path, ends, closed);
      emit(std::move(path), ends, closed);
    }
  }

  // Deterministic segment order: by raster-first path pixel.
  std::vector<size_t> order(out.paths.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return raster_less(out.paths[a].front(), out.paths[b].front());
  });
  TraceResult sorted;
  sorted.paths.reserve(order.size());
  for (size_t i : order) {
    sorted.paths.push_back(std::move(out.paths[i]));
    sorted.end_clusters.push_back(out.end_clusters[i]);
    sorted.closed.push_back(out.closed[i]);
  }

  // Segment adjacency: ids sharing a branch cluster.
  std::vector<std::vector<int32_t>> by_cluster(cls.num_clusters);
  for (size_t i = 0; i < sorted.paths.size(); ++i)
    for (int side = 0; side < 2; ++side) {
      const int32_t c = sorted.end_clusters[i][side];
      if (c >= 0) by_cluster[c].push_back(static_cast<int32_t>(i));
    }
  std::set<std::pair<int32_t, int32_t>> pairs;
  for (auto& ids : by_cluster) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (size_t a = 0; a < ids.size(); ++a)
      for (size_t b = a + 1; b < ids.size(); ++b) pairs.insert({ids[a], ids[b]});
  }
  sorted.adjacency.assign(pairs.begin(), pairs.end());
  return sorted;
}

namespace {

double step_len(const Pixel& a, const Pixel& b) {
  return (a.x != b.x && a.y != b.y) ? kSqrt2 : 1.0;
}

}  // namespace

VesselFeatures segment_features(const std::vector<Pixel>& path, bool closed,
                                const std::vector<double>& dist, const IntensityGrid& img,
                                const BinaryGrid& foreground, PixelMask* mask_out) {
  if (path.empty()) throw ArgumentError("segment path is empty");
  const size_t n = path.size();
  const double px = img.pixel_size_mm;

  // Arc length; a closed path includes the step back to its first pixel.
  double length_px = 0.0;
  std::vector<double> ds(n, 0.0);  // per-pixel arc share
  if (n == 1) {
    length_px = 1.0;
    ds[0] = 1.0;
  } else {
    std::vector<double> steps;
    steps.reserve(n);
    for (size_t i = 0; i + 1 < n; ++i) steps.push_back(step_len(path[i], path[i + 1]));
    if (closed) steps.push_back(step_len(path.back(), path.front()));
    for (double s : steps) length_px += s;
    for (size_t i = 0; i < n; ++i) {
      const double pre = i == 0 ? (closed ? steps.back() : 0.0) : steps[i - 1];
      const double post = i < steps.size() ? steps[i] : 0.0;
      ds[i] = 0.5 * (pre + post);
    }
  }

  std::vector<double> radius(n);
  for (size_t i = 0; i < n; ++i)
    radius[i] = dist[static_cast<size_t>(path[i].y) * img.width + path[i].x];
  double r_mean = 0.0;
  for (double r : radius) r_mean += r;
  r_mean /= static_cast<double>(n);
  double r_var = 0.0;
  for (double r : radius) r_var += (r - r_mean) * (r - r_mean);
  r_var /= static_cast<double>(n);

  VesselFeatures f;
  f.length_mm = length_px * px;
  f.avg_radius_mm = r_mean * px;
  f.radius_variability = r_mean > 0.0 ? std::sqrt(r_var) / r_mean : 0.0;
  double area_px2 = 0.0;
  for (size_t i = 0; i < n; ++i) area_px2 += 2.0 * radius[i] * ds[i];
  f.area_mm2 = area_px2 * px * px;

  double chord_px = 0.0;
  if (!closed && n > 1) {
    const double dx = path.front().x - path.back().x;
    const double dy = path.front().y - path.back().y;
    chord_px = std::sqrt(dx * dx + dy * dy);
  }
  f.tortuosity = chord_px < 1.0 ? kTortuosityCap
                                : std::clamp(length_px / chord_px, 1.0, kTortuosityCap);

  f.midpoint = {static_cast<double>(path[n / 2].x), static_cast<double>(path[n / 2].y)};
  f.endpoint_a = {static_cast<double>(path.front().x), static_cast<double>(path.front().y)};
  // A closed segment starts and ends at its split pixel.
  const Pixel& last = closed ? path.front() : path.back();
  f.endpoint_b = {static_cast<double>(last.x), static_cast<double>(last.y)};

  // Disc dilation, clipped to foreground. The sqrt(2) floor keeps diagonal
  // neighbors of 1-px-wide centerlines inside the mask.
  std::vector<Pixel> mask_pixels;
  for (size_t i = 0; i < n; ++i) {
    const double r = std::max(radius[i], kSqrt2);
    const int ri = static_cast<int>(std::floor(r));
    for (int dy = -ri; dy <= ri; ++dy)
      for (int dx = -ri; dx <= ri; ++dx) {
        if (dx * dx + dy * dy > r * r + 1e-9) continue;
        const int qx = path[i].x + dx, qy = path[i].y + dy;
        if (foreground.at_safe(qx, qy)) mask_pixels.push_back({qx, qy});
      }
  }
  PixelMask mask = mask_from_pixels(std::move(mask_pixels));
  double si = 0.0, si2 = 0.0;
  size_t count = 0;
  mask.for_each_pixel([&](int x, int y) {
    const double v = img.at(x, y);
    si += v;
    si2 += v * v;
    ++count;
  });
  if (count > 0) {
    f.mean_intensity = si / count;
    f.std_intensity = std::sqrt(std::max(0.0, si2 / count - f.mean_intensity * f.mean_intensity));
  }
  if (mask_out) *mask_out = std::move(mask);
  return f;
}

VesselGraph build_vessel_graph(const BinaryGrid& seg, const IntensityGrid& img) {
  if (seg.width != img.width || seg.height != img.height)
    throw ArgumentError("segmentation and intensity grids differ in size");
  VesselGraph graph;
  const BinaryGrid skel = skeletonize(seg);
  if (skel.count() == 0) return graph;

  const SkeletonClassification cls = classify_skeleton(skel);
  TraceResult tr = trace_segments(skel, cls);
  const std::vector<double> dist = distance_transform(seg);

  const int w = seg.width;
  const int h = seg.height;
  graph.segments.resize(tr.paths.size());

  // Claim pass: every foreground pixel within a disc goes to the nearest path
  // pixel; ties resolve to the lower segment id.
  std::vector<int64_t> best_d2(static_cast<size_t>(w) * h, std::numeric_limits<int64_t>::max());
  std::vector<int32_t> owner(static_cast<size_t>(w) * h, -1);
  for (size_t i = 0; i < tr.paths.size(); ++i) {
    for (const Pixel& p : tr.paths[i]) {
      const double r = std::max(dist[static_cast<size_t>(p.y) * w + p.x], kSqrt2);
      const int ri = static_cast<int>(std::floor(r));
      for (int dy = -ri; dy <= ri; ++dy)
        for (int dx = -ri; dx <= ri; ++dx) {
          const int64_t d2 = int64_t(dx) * dx + int64_t(dy) * dy;
          if (static_cast<double>(d2) > r * r + 1e-9) continue;
          const int qx = p.x + dx, qy = p.y + dy;
          if (!seg.at_safe(qx, qy)) continue;
          const size_t qi = static_cast<size_t>(qy) * w + qx;
          if (d2 < best_d2[qi]) {
            best_d2[qi] = d2;
            owner[qi] = static_cast<int32_t>(i);
          }
        }
    }
  }
  // Branch-cluster surroundings can sit outside every disc. Flood the claim
  // map outward so vessel masks tile the whole foreground (ties to the lower
  // segment id; synchronous rounds keep it deterministic).
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<size_t, int32_t>> assign;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t qi = static_cast<size_t>(y) * w + x;
        if (!seg.at(x, y) || owner[qi] >= 0) continue;
        int32_t best = -1;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            const int32_t o = owner[static_cast<size_t>(ny) * w + nx];
            if (o >= 0 && (best < 0 || o < best)) best = o;
          }
        if (best >= 0) assign.push_back({qi, best});
      }
    for (const auto& [qi, o] : assign) {
      owner[qi] = o;
      changed = true;
    }
  }

  std::vector<std::vector<Pixel>> owned(tr.paths.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int32_t o = owner[static_cast<size_t>(y) * w + x];
      if (o >= 0) owned[o].push_back({x, y});
    }

  for (size_t i = 0; i < tr.paths.size(); ++i) {
    VesselSegment& s = graph.segments[i];
    s.id = static_cast<int32_t>(i);
    s.path = std::move(tr.paths[i]);
    s.closed = tr.closed[i];
    s.end_clusters = tr.end_clusters[i];
    s.features = segment_features(s.path, s.closed, dist, img, seg, nullptr);
    s.mask = mask_from_pixels(std::move(owned[i]));

    // Intensity statistics over the resolved mask.
    double si = 0.0, si2 = 0.0;
    size_t count = 0;
    s.mask.for_each_pixel([&](int x, int y) {
      const double v = img.at(x, y);
      si += v;
      si2 += v * v;
      ++count;
    });
    if (count > 0) {
      s.features.mean_intensity = si / count;
      s.features.std_intensity =
          std::sqrt(std::max(0.0, si2 / count - (si / count) * (si / count)));
    }
    for (int side = 0; side < 2; ++side) {
      const int32_t c = s.end_clusters[side];
      if (c >= 0) {
        Point& ep = side == 0 ? s.features.endpoint_a : s.features.endpoint_b;
        ep = cls.cluster_centroids[c];
      }
    }
    s.features.is_terminal =
        !s.closed && (s.end_clusters[0] < 0 || s.end_clusters[1] < 0);
  }
  graph.edges = std::move(tr.adjacency);
  return graph;
}

}  // namespace retigraph
