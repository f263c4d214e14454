#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "retigraph/gnn.hpp"
#include "retigraph/hetero_graph.hpp"
#include "retigraph/raster.hpp"

namespace retigraph {

// Exact 2-D k-nearest-neighbor search; distance ties resolve to the earlier
// insertion index.
class KdTree {
 public:
  void build(std::vector<Point> points);
  std::vector<int32_t> knn(Point query, int k) const;
  size_t size() const { return points_.size(); }

 private:
  struct Node {
    int32_t point = -1;
    int32_t left = -1;
    int32_t right = -1;
    uint8_t axis = 0;
  };
  int32_t build_recursive(std::vector<int32_t>& ids, int lo, int hi, int depth);
  std::vector<Point> points_;
  std::vector<Node> nodes_;
  int32_t root_ = -1;
};

// Spatial search structure over Z-scored training-node features, one tree per
// node type, keyed by vessel midpoints / ICA centroids / FAZ centroids.
struct BaselineIndex {
  int k = 25;
  struct TypeIndex {
    int32_t dim = 0;
    std::vector<Point> positions;
    std::vector<double> features;  // entries x dim, normalized
    KdTree tree;
  };
  std::array<TypeIndex, kNumNodeTypes> types;
};

BaselineIndex build_baseline_index(const std::vector<HeteroGraph>& training_graphs,
                                   const NormStats& stats, int k);

// Feature-wise mean of the k spatially nearest same-type training nodes.
std::vector<double> dynamic_baseline(Point position, NodeType type, const BaselineIndex& index);

struct Attribution {
  int target_class = 0;
  int steps = 0;
  double f_input = 0.0;
  double f_baseline = 0.0;
  double completeness_gap = 0.0;
  // Per type, node-major (count x dim), matching the graph layout.
  std::array<std::vector<double>, kNumNodeTypes> scores;
  std::array<std::vector<double>, kNumNodeTypes> baselines;
  std::array<std::vector<double>, kNumNodeTypes> node_importance;
};

// Integrated gradients along the straight path from the dynamic-baseline graph
// to the input, midpoint rule with `steps` evaluations of the target-class
// logit gradient. target_class = -1 explains the predicted class.
Attribution integrated_gradients(const HeteroGraph& normalized_graph, ModelParams& params,
                                 const BaselineIndex& index, int target_class, int steps);

struct RankedNode {
  NodeType type = NodeType::Vessel;
  int32_t id = 0;
  double importance = 0.0;
};

// Nodes sorted by descending importance (ties by type then id). Pass a type to
// restrict the ranking.
std::vector<RankedNode> rank_nodes(const Attribution& attr, int top_n);
std::vector<RankedNode> rank_nodes(const Attribution& attr, int top_n, NodeType type);

struct FeatureAttribution {
  std::string name;
  double attribution = 0.0;
  double sd_deviation = 0.0;  // normalized feature value, already in SD units
  double raw_value = 0.0;
};

// The j features of one node with the largest absolute attribution.
std::vector<FeatureAttribution> top_features(const Attribution& attr, const HeteroGraph& graph,
                                             NodeType type, int32_t node, int j);

enum class OverlayMode { Vessel, IcaFaz, Combined };

struct OverlayOptions {
  OverlayMode mode = OverlayMode::Combined;
  bool render_negative = false;  // blue tint for negative importance
};

// Grayscale base with node masks tinted red, alpha proportional to positive
// node importance (normalized by the image maximum).
RgbImage render_overlay(const HeteroGraph& graph, const Attribution& attr,
                        const IntensityGrid& base, const OverlayOptions& opts = {});

// The machine-readable explanation artifact consumed by external viewers.
std::string attribution_report_json(const HeteroGraph& graph, const Attribution& attr,
                                    const Prediction& prediction, int top_nodes, int top_feats);

void save_baseline_index(const BaselineIndex& index, const std::string& path);
BaselineIndex load_baseline_index(const std::string& path);

}  // namespace retigraph
