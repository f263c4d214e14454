#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "retigraph/raster.hpp"

namespace retigraph {

struct ICANode {
  int32_t id = 0;
  // Geometry in physical units (mm / mm^2); centroid stays in pixels.
  double area_mm2 = 0.0;
  double perimeter_mm = 0.0;
  Point centroid;
  double eccentricity = 0.0;
  double major_axis_mm = 0.0;
  double minor_axis_mm = 0.0;
  double solidity = 1.0;
  double mean_intensity = 0.0;
  double std_intensity = 0.0;
  bool touches_border = false;
  PixelMask mask;
};

struct FAZNode : ICANode {
  double acircularity = 1.0;  // perimeter / (2*sqrt(pi*area))
};

// One node per 4-connected background component of the segmentation map, in
// deterministic label order.
std::vector<ICANode> extract_ica_nodes(const BinaryGrid& seg, const IntensityGrid& img);

// ICA-ICA adjacency: two intercapillary areas are linked when only a vessel
// separates them. Edges come from skeleton pixels whose neighborhoods touch
// two background components of the skeletonized map, pulled back through the
// injective map from segmentation-background components.
std::vector<std::pair<int32_t, int32_t>> skeleton_adjacency_edges(const BinaryGrid& seg);

// The central intercapillary area: the one containing the image center pixel,
// falling back to the nearest centroid when the center lies on a vessel
// (ties: larger area, then lower id).
int32_t identify_faz(const std::vector<ICANode>& nodes, Point center);

FAZNode make_faz_node(const ICANode& node);

}  // namespace retigraph
