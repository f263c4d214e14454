#include "retigraph/ica_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "retigraph/errors.hpp"

namespace retigraph {

std::vector<ICANode> extract_ica_nodes(const BinaryGrid& seg, const IntensityGrid& img) {
  if (seg.width != img.width || seg.height != img.height)
    throw ArgumentError("segmentation and intensity grids differ in size");
  const LabelGrid labels = connected_components(invert(seg), 4);
  const double px = img.pixel_size_mm;

  std::vector<ICANode> nodes(labels.num_labels);
  std::vector<std::vector<Pixel>> pixels(labels.num_labels);
  for (int y = 0; y < seg.height; ++y)
    for (int x = 0; x < seg.width; ++x) {
      const int32_t l = labels.at(x, y);
      if (l > 0) pixels[l - 1].push_back({x, y});
    }

  for (int32_t l = 1; l <= labels.num_labels; ++l) {
    ICANode& n = nodes[l - 1];
    const RegionProps props = region_properties(labels, l, img);
    n.id = l - 1;
    n.area_mm2 = props.area * px * px;
    n.perimeter_mm = props.perimeter * px;
    n.centroid = props.centroid;
    n.eccentricity = props.eccentricity;
    n.major_axis_mm = props.major_axis_len * px;
    n.minor_axis_mm = props.minor_axis_len * px;
    n.solidity = props.solidity;
    n.mean_intensity = props.mean_intensity;
    n.std_intensity = props.std_intensity;
    for (const Pixel& p : pixels[l - 1])
      if (p.x == 0 || p.y == 0 || p.x == seg.width - 1 || p.y == seg.height - 1) {
        n.touches_border = true;
        break;
      }
    n.mask = mask_from_pixels(std::move(pixels[l - 1]));
  }
  return nodes;
}

std::vector<std::pair<int32_t, int32_t>> skeleton_adjacency_edges(const BinaryGrid& seg) {
  const BinaryGrid skel = skeletonize(seg);
  const LabelGrid seg_bg = connected_components(invert(seg), 4);
  const LabelGrid skel_bg = connected_components(invert(skel), 4);
  const int w = seg.width;
  const int h = seg.height;

  // Injective map: each segmentation-background component lies in exactly one
  // skeleton-background component (thinning only ever removes foreground).
  std::vector<int32_t> to_skel(seg_bg.num_labels + 1, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int32_t s = seg_bg.at(x, y);
      if (s == 0) continue;
      const int32_t k = skel_bg.at(x, y);
      if (k == 0) throw InternalError("segmentation background pixel lost by thinning");
      if (to_skel[s] == 0)
        to_skel[s] = k;
      else if (to_skel[s] != k)
        throw InternalError("background component split across skeleton components");
    }
  std::vector<int32_t> to_seg(skel_bg.num_labels + 1, 0);
  for (int32_t s = 1; s <= seg_bg.num_labels; ++s) {
    const int32_t k = to_skel[s];
    if (to_seg[k] != 0)
      throw InternalError("background-component map is not injective");
    to_seg[k] = s;
  }

  std::set<std::pair<int32_t, int32_t>> edges;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!skel.at(x, y)) continue;
      int32_t found[8];
      int nf = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const int32_t k = skel_bg.at(nx, ny);
          if (k == 0) continue;
          bool seen = false;
          for (int i = 0; i < nf; ++i) seen |= found[i] == k;
          if (!seen) found[nf++] = k;
        }
      for (int i = 0; i < nf; ++i)
        for (int j = i + 1; j < nf; ++j) {
          const int32_t a = to_seg[found[i]];
          const int32_t b = to_seg[found[j]];
          if (a == 0 || b == 0) continue;  // skeleton-only cavity, no ICA behind it
          edges.insert({std::min(a, b) - 1, std::max(a, b) - 1});
        }
    }
  return {edges.begin(), edges.end()};
}

int32_t identify_faz(const std::vector<ICANode>& nodes, Point center) {
  if (nodes.empty()) throw DegenerateInputError("no intercapillary areas in image");
  const int cx = static_cast<int>(center.x);
  const int cy = static_cast<int>(center.y);
  for (const ICANode& n : nodes)
    for (const RleRun& r : n.mask.runs)
      if (r.row == cy && cx >= r.start_col && cx < r.start_col + r.run_len) return n.id;

  // Center pixel is on a vessel: nearest centroid, ties to larger area, then
  // lower id.
  int32_t best = -1;
  double best_d = 0.0, best_area = 0.0;
  for (const ICANode& n : nodes) {
    const double dx = n.centroid.x - center.x;
    const double dy = n.centroid.y - center.y;
    const double d = std::sqrt(dx * dx + dy * dy);
    if (best < 0 || d < best_d || (d == best_d && n.area_mm2 > best_area)) {
      best = n.id;
      best_d = d;
      best_area = n.area_mm2;
    }
  }
  return best;
}

// Boundary length via Moore tracing through pixel centers, plus the half-pixel
// offset a center polygon loses against the true outline (2*pi*0.5 for smooth
// shapes). The edge-count perimeter would score a perfect circle at 4/pi.
double contour_length(const PixelMask& mask) {
  constexpr double kPi = 3.14159265358979323846;
  constexpr double kSqrt2 = 1.4142135623730951;
  if (mask.runs.empty()) return 0.0;
  std::set<std::pair<int, int>> px;  // (y, x): raster order
  mask.for_each_pixel([&](int x, int y) { px.insert({y, x}); });
  if (px.size() == 1) return kPi;
  const auto start = *px.begin();
  auto in = [&](int y, int x) { return px.count({y, x}) > 0; };

  // clockwise ring starting west; everything north/west of the raster-first
  // pixel is outside the set
  static const int dy[8] = {0, -1, -1, -1, 0, 1, 1, 1};
  static const int dx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

  double length = kPi;
  std::pair<int, int> cur = start;
  std::pair<int, int> second{-1, -1};
  bool have_second = false;
  int scan_from = 0;
  const size_t cap = 4 * px.size() + 8;
  for (size_t steps = 0; steps < cap; ++steps) {
    int found = -1;
    for (int i = 0; i < 8; ++i) {
      const int d = (scan_from + i) % 8;
      if (in(cur.first + dy[d], cur.second + dx[d])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;
    const std::pair<int, int> next{cur.first + dy[found], cur.second + dx[found]};
    if (have_second && cur == start && next == second) break;  // loop closed
    if (!have_second) {
      second = next;
      have_second = true;
    }
    length += (dx[found] != 0 && dy[found] != 0) ? kSqrt2 : 1.0;
    cur = next;
    scan_from = (found + 5) % 8;  // just past the backtrack direction
  }
  return length;
}

FAZNode make_faz_node(const ICANode& node) {
  FAZNode faz;
  static_cast<ICANode&>(faz) = node;
  const double pi = 3.14159265358979323846;
  if (node.area_mm2 > 0.0) {
    const double px = node.mask.pixel_count() > 0
                          ? std::sqrt(node.area_mm2 / node.mask.pixel_count())
                          : 1.0;
    const double boundary_mm = contour_length(node.mask) * px;
    faz.acircularity = boundary_mm / (2.0 * std::sqrt(pi * node.area_mm2));
  }
  return faz;
}

}  // namespace retigraph
