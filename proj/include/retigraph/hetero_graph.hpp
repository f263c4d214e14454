#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "retigraph/raster.hpp"

namespace retigraph {

enum class NodeType : uint8_t { Vessel = 0, Ica = 1, Faz = 2 };
inline constexpr int kNumNodeTypes = 3;

enum class Relation : uint8_t { VesVes = 0, IcaIca = 1, VesIca = 2, FazVes = 3, FazIca = 4 };
inline constexpr int kNumRelations = 5;

const char* node_type_name(NodeType t);
const char* relation_name(Relation r);

// Disease stages: {healthy, DM} -> Healthy and {early, late NPDR} -> NPDR
// pooling happens at dataset load, so the model always sees three classes.
enum class ClassLabel : uint8_t { Healthy = 0, NPDR = 1, PDR = 2 };
inline constexpr int kNumClasses = 3;
const char* class_label_name(ClassLabel l);
ClassLabel parse_class_label(const std::string& name);

struct NodeSet {
  int32_t count = 0;
  int32_t dim = 0;
  std::vector<double> features;  // count x dim, row-major, raw physical units
  std::vector<Point> positions;  // vessel midpoint / ICA centroid / FAZ centroid
  std::vector<PixelMask> masks;

  const double* row(int32_t i) const { return features.data() + static_cast<size_t>(i) * dim; }
  friend bool operator==(const NodeSet&, const NodeSet&) = default;
};

struct GraphMeta {
  std::string image_id;
  std::string group_id;
  double pixel_size_mm = kDefaultPixelSizeMm;
  int width = 0;
  int height = 0;
  std::array<std::vector<std::string>, kNumNodeTypes> feature_names;
  std::array<bool, kNumRelations> active_relations = {true, true, true, true, true};
  friend bool operator==(const GraphMeta&, const GraphMeta&) = default;
};

using EdgeList = std::vector<std::pair<int32_t, int32_t>>;

struct HeteroGraph {
  GraphMeta meta;
  std::array<NodeSet, kNumNodeTypes> nodes;
  // VesVes/IcaIca: (i, j) with i < j, undirected. VesIca: (vessel, ica).
  // FazVes: (0, vessel). FazIca: (0, ica).
  std::array<EdgeList, kNumRelations> edges;
  std::optional<ClassLabel> label;
  // Z-scored features, same layout as NodeSet::features; filled by normalize().
  std::array<std::vector<double>, kNumNodeTypes> normalized;

  const NodeSet& of(NodeType t) const { return nodes[static_cast<int>(t)]; }
  NodeSet& of(NodeType t) { return nodes[static_cast<int>(t)]; }
  const EdgeList& rel(Relation r) const { return edges[static_cast<int>(r)]; }
  EdgeList& rel(Relation r) { return edges[static_cast<int>(r)]; }
  bool relation_active(Relation r) const { return meta.active_relations[static_cast<int>(r)]; }

  friend bool operator==(const HeteroGraph&, const HeteroGraph&) = default;
};

struct NormStats {
  std::array<std::vector<double>, kNumNodeTypes> mean;
  std::array<std::vector<double>, kNumNodeTypes> stddev;  // floored at kStdFloor
  friend bool operator==(const NormStats&, const NormStats&) = default;
};

inline constexpr double kStdFloor = 1e-6;

struct AssembleOptions {
  double pixel_size_mm = kDefaultPixelSizeMm;
  // Positional coordinates stay out of the model features by default; they are
  // always kept in NodeSet::positions for the explanation neighbor search.
  bool include_coords = false;
  std::string image_id;
  std::string group_id;
};

std::vector<std::string> feature_manifest(NodeType t, bool include_coords);

// Full graph construction: vessel graph + ICA nodes + skeleton adjacency +
// FAZ identification, then the heterogeneous relations from pixel-mask
// adjacency. Throws DegenerateInputError when the image has no background.
HeteroGraph assemble(const BinaryGrid& seg, const IntensityGrid& img,
                     const AssembleOptions& opts = {});

// Feature-wise mean/std pooled over every node of each type across the
// training graphs (population convention, std floored).
NormStats fit_norm_stats(const std::vector<HeteroGraph>& graphs);

// Returns a copy with `normalized` filled; raw features stay untouched so
// explanations can report physical values.
HeteroGraph normalize(const HeteroGraph& graph, const NormStats& stats);

// Homogeneous-ablation view: relations outside `keep` are removed and node
// types with no remaining incident relation are dropped from the model input.
HeteroGraph mask_relations(const HeteroGraph& graph, const std::vector<Relation>& keep);

// Versioned JSON with run-length-encoded masks; lossless round trip.
std::string serialize(const HeteroGraph& graph);
HeteroGraph deserialize(const std::string& bytes);

void save_graph(const HeteroGraph& graph, const std::string& path);
HeteroGraph load_graph(const std::string& path);

}  // namespace retigraph
