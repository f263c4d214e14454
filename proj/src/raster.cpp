#include "retigraph/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "retigraph/errors.hpp"

namespace retigraph {

size_t BinaryGrid::count() const {
  size_t n = 0;
  for (uint8_t v : mask) n += v != 0;
  return n;
}

size_t PixelMask::pixel_count() const {
  size_t n = 0;
  for (const RleRun& r : runs) n += static_cast<size_t>(r.run_len);
  return n;
}

PixelMask mask_from_pixels(std::vector<Pixel> pixels) {
  std::sort(pixels.begin(), pixels.end(),
            [](const Pixel& a, const Pixel& b) { return raster_less(a, b); });
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  PixelMask m;
  size_t i = 0;
  while (i < pixels.size()) {
    size_t j = i + 1;
    while (j < pixels.size() && pixels[j].y == pixels[i].y &&
           pixels[j].x == pixels[j - 1].x + 1)
      ++j;
    m.runs.push_back({pixels[i].y, pixels[i].x, static_cast<int32_t>(j - i)});
    i = j;
  }
  return m;
}

PixelMask mask_from_grid(const BinaryGrid& grid) {
  PixelMask m;
  for (int y = 0; y < grid.height; ++y) {
    int x = 0;
    while (x < grid.width) {
      if (!grid.at(x, y)) {
        ++x;
        continue;
      }
      int start = x;
      while (x < grid.width && grid.at(x, y)) ++x;
      m.runs.push_back({y, start, x - start});
    }
  }
  return m;
}

BinaryGrid threshold(const IntensityGrid& grid, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw ArgumentError("threshold must be in [0,1], got " + std::to_string(t));
  BinaryGrid out(grid.width, grid.height);
  for (size_t i = 0; i < grid.values.size(); ++i) out.mask[i] = grid.values[i] >= t ? 1 : 0;
  return out;
}

BinaryGrid invert(const BinaryGrid& binary) {
  BinaryGrid out(binary.width, binary.height);
  for (size_t i = 0; i < binary.mask.size(); ++i) out.mask[i] = binary.mask[i] ? 0 : 1;
  return out;
}

namespace {

struct UnionFind {
  std::vector<int32_t> parent;

  int32_t make() {
    parent.push_back(static_cast<int32_t>(parent.size()));
    return parent.back();
  }
  int32_t find(int32_t a) {
    int32_t root = a;
    while (parent[root] != root) root = parent[root];
    while (parent[a] != root) {
      int32_t next = parent[a];
      parent[a] = root;
      a = next;
    }
    return root;
  }
  void unite(int32_t a, int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Lower id wins so provisional labels stay raster-ordered.
    if (a < b)
      parent[b] = a;
    else
      parent[a] = b;
  }
};

}  // namespace

LabelGrid connected_components(const BinaryGrid& binary, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw ArgumentError("connectivity must be 4 or 8");
  const int w = binary.width;
  const int h = binary.height;
  LabelGrid out;
  out.width = w;
  out.height = h;
  out.labels.assign(static_cast<size_t>(w) * h, 0);

  UnionFind uf;
  std::vector<int32_t> provisional(static_cast<size_t>(w) * h, -1);

  // First pass: scan already-visited neighbors (above row and left pixel).
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!binary.at(x, y)) continue;
      const size_t idx = static_cast<size_t>(y) * w + x;
      int32_t label = -1;
      auto consider = [&](int nx, int ny) {
        if (nx < 0 || nx >= w || ny < 0) return;
        int32_t nl = provisional[static_cast<size_t>(ny) * w + nx];
        if (nl < 0) return;
        if (label < 0)
          label = uf.find(nl);
        else
          uf.unite(label, nl);
      };
      consider(x - 1, y);
      consider(x, y - 1);
      if (connectivity == 8) {
        consider(x - 1, y - 1);
        consider(x + 1, y - 1);
      }
      if (label < 0) label = uf.make();
      provisional[idx] = label;
    }
  }

  // Second pass: map roots to final labels in raster-scan-first-pixel order.
  std::vector<int32_t> final_label(uf.parent.size(), 0);
  int32_t next = 0;
  for (size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] < 0) continue;
    int32_t root = uf.find(provisional[i]);
    if (final_label[root] == 0) final_label[root] = ++next;
    out.labels[i] = final_label[root];
  }
  out.num_labels = next;
  return out;
}

namespace {

// 8-neighborhood in clockwise ring order starting north; used by the thinning
// transition count.
constexpr int kRingDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kRingDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

struct ThinningLocal {
  int neighbors = 0;    // B(p)
  int transitions = 0;  // A(p): 0->1 steps around the ring
  bool ring[8] = {};
  bool bg_in_grid[8] = {};
};

ThinningLocal thinning_local(const BinaryGrid& g, int x, int y) {
  ThinningLocal loc;
  for (int i = 0; i < 8; ++i) {
    const int nx = x + kRingDx[i], ny = y + kRingDy[i];
    loc.ring[i] = g.at_safe(nx, ny);
    loc.bg_in_grid[i] = g.in_bounds(nx, ny) && !loc.ring[i];
    loc.neighbors += loc.ring[i];
  }
  for (int i = 0; i < 8; ++i)
    if (!loc.ring[i] && loc.ring[(i + 1) % 8]) ++loc.transitions;
  return loc;
}

// Number of 4-connected in-grid background arcs around p that touch one of
// p's 4-neighbors. Interior pixels with A(p)=1 always score 1; at the image
// border this stops deletions that would merge background components through
// the virtual outside.
int background_arcs(const ThinningLocal& loc) {
  int arcs = 0;
  for (int start = 0; start < 8; ++start) {
    if (!loc.bg_in_grid[start]) continue;
    if (loc.bg_in_grid[(start + 7) % 8]) continue;  // not the arc's first index
    bool touches_axis = false;
    for (int i = start; loc.bg_in_grid[i % 8] && i < start + 8; ++i)
      touches_axis |= (i % 8) % 2 == 0;  // N/E/S/W sit at even ring indices
    arcs += touches_axis;
  }
  // Full background ring (isolated pixel): one arc.
  if (arcs == 0) {
    bool all_bg = true;
    for (bool b : loc.bg_in_grid) all_bg &= b;
    if (all_bg) arcs = 1;
  }
  return arcs;
}

}  // namespace

BinaryGrid skeletonize(const BinaryGrid& binary) {
  BinaryGrid g = binary;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int step = 0; step < 2; ++step) {
      for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
          if (!g.at(x, y)) continue;
          ThinningLocal loc = thinning_local(g, x, y);
          if (loc.neighbors < 2 || loc.neighbors > 6) continue;
          if (loc.transitions != 1) continue;
          if (background_arcs(loc) != 1) continue;
          const bool n = loc.ring[0], e = loc.ring[2], s = loc.ring[4], w = loc.ring[6];
          // Conditions are evaluated against the live grid, so every deletion
          // is a simple point and component counts survive intact.
          if (step == 0) {
            if ((n && e && s) || (e && s && w)) continue;
          } else {
            if ((n && e && w) || (n && s && w)) continue;
          }
          g.set(x, y, false);
          changed = true;
        }
      }
    }
  }
  return g;
}

namespace {

// 1-D squared distance transform (Felzenszwalb & Huttenlocher lower envelope).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, int n) {
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * static_cast<double>(q)) - (f[v[k]] + v[k] * static_cast<double>(v[k]))) /
          (2.0 * q - 2.0 * v[k]);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    double dq = q - static_cast<double>(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const BinaryGrid& binary) {
  // Pad with a one-pixel background frame so the border acts as background.
  const int w = binary.width + 2;
  const int h = binary.height + 2;
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> sq(static_cast<size_t>(w) * h, 0.0);
  for (int y = 0; y < binary.height; ++y)
    for (int x = 0; x < binary.width; ++x)
      sq[static_cast<size_t>(y + 1) * w + (x + 1)] = binary.at(x, y) ? kInf : 0.0;

  std::vector<double> col(h), dcol(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = sq[static_cast<size_t>(y) * w + x];
    edt_1d(col, dcol, h);
    for (int y = 0; y < h; ++y) sq[static_cast<size_t>(y) * w + x] = dcol[y];
  }
  std::vector<double> row(w), drow(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = sq[static_cast<size_t>(y) * w + x];
    edt_1d(row, drow, w);
    for (int x = 0; x < w; ++x) sq[static_cast<size_t>(y) * w + x] = drow[x];
  }

  std::vector<double> out(static_cast<size_t>(binary.width) * binary.height, 0.0);
  for (int y = 0; y < binary.height; ++y)
    for (int x = 0; x < binary.width; ++x)
      out[static_cast<size_t>(y) * binary.width + x] =
          std::sqrt(sq[static_cast<size_t>(y + 1) * w + (x + 1)]);
  return out;
}

namespace {

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Monotone chain; input must be sorted lexicographically.
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  size_t lower = k + 1;
  for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
    hull[k++] = *it;
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Point>& poly) {
  if (poly.size() < 3) return 0.0;
  double a = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return std::abs(a) * 0.5;
}

}  // namespace

std::vector<Point> region_hull(const std::vector<Pixel>& pixels) {
  std::vector<Point> pts;
  pts.reserve(pixels.size());
  for (const Pixel& p : pixels) pts.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});
  return convex_hull(std::move(pts));
}

RegionProps region_properties(const LabelGrid& labels, int32_t label, const IntensityGrid& intensity) {
  if (label < 1 || label > labels.num_labels)
    throw ArgumentError("label " + std::to_string(label) + " out of range 1.." +
                        std::to_string(labels.num_labels));
  if (labels.width != intensity.width || labels.height != intensity.height)
    throw ArgumentError("label grid and intensity grid dimensions differ");

  const int w = labels.width;
  const int h = labels.height;
  std::vector<Pixel> pixels;
  double sum_i = 0.0, sum_i2 = 0.0;
  double perim = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (labels.at(x, y) != label) continue;
      pixels.push_back({x, y});
      const double v = intensity.at(x, y);
      sum_i += v;
      sum_i2 += v * v;
      auto edge = [&](int nx, int ny) {
        if (nx < 0 || nx >= w || ny < 0 || ny >= h) return true;
        return labels.at(nx, ny) != label;
      };
      perim += edge(x - 1, y) + edge(x + 1, y) + edge(x, y - 1) + edge(x, y + 1);
    }
  }
  const double n = static_cast<double>(pixels.size());

  RegionProps props;
  props.area = n;
  props.perimeter = perim;
  double cx = 0.0, cy = 0.0;
  for (const Pixel& p : pixels) {
    cx += p.x;
    cy += p.y;
  }
  cx /= n;
  cy /= n;
  props.centroid = {cx, cy};

  double mu20 = 0.0, mu02 = 0.0, mu11 = 0.0;
  for (const Pixel& p : pixels) {
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    mu20 += dx * dx;
    mu02 += dy * dy;
    mu11 += dx * dy;
  }
  mu20 /= n;
  mu02 /= n;
  mu11 /= n;
  const double tr = mu20 + mu02;
  const double det = std::sqrt(std::max(0.0, (mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11));
  const double l1 = 0.5 * (tr + det);
  const double l2 = std::max(0.0, 0.5 * (tr - det));
  props.major_axis_len = 4.0 * std::sqrt(std::max(0.0, l1));
  props.minor_axis_len = 4.0 * std::sqrt(l2);
  props.eccentricity = l1 > 0.0 ? std::sqrt(std::max(0.0, 1.0 - l2 / l1)) : 0.0;

  const double hull_area = polygon_area(region_hull(pixels));
  props.solidity = hull_area > 0.0 ? std::min(1.0, n / hull_area) : 1.0;

  props.mean_intensity = sum_i / n;
  props.std_intensity = std::sqrt(std::max(0.0, sum_i2 / n - props.mean_intensity * props.mean_intensity));
  return props;
}

}  // namespace retigraph
