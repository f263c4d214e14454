#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "retigraph/raster.hpp"

namespace retigraph {

enum class SkelClass : uint8_t { None = 0, Endpoint, Slab, Branch };

struct SkeletonClassification {
  int width = 0;
  int height = 0;
  std::vector<SkelClass> classes;        // per pixel
  std::vector<int32_t> branch_cluster;   // per pixel, -1 unless Branch
  int32_t num_clusters = 0;
  std::vector<Point> cluster_centroids;  // sub-pixel, per cluster

  SkelClass cls(int x, int y) const { return classes[static_cast<size_t>(y) * width + x]; }
  int32_t cluster(int x, int y) const { return branch_cluster[static_cast<size_t>(y) * width + x]; }
};

struct VesselFeatures {
  double length_mm = 0.0;
  double avg_radius_mm = 0.0;
  double radius_variability = 0.0;  // std of radius / mean radius
  double area_mm2 = 0.0;            // sum of 2*r*ds along the centerline
  double tortuosity = 1.0;          // arc length / chord length, capped
  double mean_intensity = 0.0;
  double std_intensity = 0.0;
  Point midpoint;
  Point endpoint_a;
  Point endpoint_b;
  bool is_terminal = false;  // at least one end is a skeleton endpoint
};

inline constexpr double kTortuosityCap = 20.0;

struct VesselSegment {
  int32_t id = 0;
  std::vector<Pixel> path;  // ordered centerline pixels, pairwise 8-adjacent
  bool closed = false;      // isolated cycle split at its raster-first pixel
  // Cluster ids at each end; -1 when the end is a skeleton endpoint.
  std::array<int32_t, 2> end_clusters = {-1, -1};
  VesselFeatures features;
  PixelMask mask;  // centerline dilated to the local radius, clipped to foreground
};

struct VesselGraph {
  std::vector<VesselSegment> segments;
  std::vector<std::pair<int32_t, int32_t>> edges;  // segment adjacency, i < j, deduplicated
};

// Classifies every skeleton pixel by its 8-neighbor count (1 or 0 -> endpoint,
// 2 -> slab, >=3 -> branch) and merges 8-adjacent branch pixels into clusters.
SkeletonClassification classify_skeleton(const BinaryGrid& skel);

struct TraceResult {
  std::vector<std::vector<Pixel>> paths;
  std::vector<bool> closed;
  std::vector<std::array<int32_t, 2>> end_clusters;
  std::vector<std::pair<int32_t, int32_t>> adjacency;
};

// Splits the skeleton into maximal slab paths between branch clusters and
// endpoints. Deterministic: paths are sorted by their raster-first pixel.
TraceResult trace_segments(const BinaryGrid& skel, const SkeletonClassification& cls);

// Features of one centerline path. dist is the exact distance transform of the
// segmentation map (pixel units); the mask is the union of per-pixel discs
// clipped to the foreground, before cross-segment ownership resolution.
VesselFeatures segment_features(const std::vector<Pixel>& path, bool closed,
                                const std::vector<double>& dist, const IntensityGrid& img,
                                const BinaryGrid& foreground, PixelMask* mask_out = nullptr);

// Full vessel-graph extraction: skeletonize -> classify -> trace -> features,
// with overlapping disc claims resolved to the nearest path pixel (ties to the
// lower segment id). Empty foreground yields an empty graph.
VesselGraph build_vessel_graph(const BinaryGrid& seg, const IntensityGrid& img);

}  // namespace retigraph
