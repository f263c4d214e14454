#include "retigraph/hetero_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/ica_graph.hpp"
#include "retigraph/vessel_graph.hpp"

namespace retigraph {

using json = nlohmann::json;

const char* node_type_name(NodeType t) {
  switch (t) {
    case NodeType::Vessel: return "vessel";
    case NodeType::Ica: return "ica";
    case NodeType::Faz: return "faz";
  }
  return "?";
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::VesVes: return "ves_ves";
    case Relation::IcaIca: return "ica_ica";
    case Relation::VesIca: return "ves_ica";
    case Relation::FazVes: return "faz_ves";
    case Relation::FazIca: return "faz_ica";
  }
  return "?";
}

const char* class_label_name(ClassLabel l) {
  switch (l) {
    case ClassLabel::Healthy: return "Healthy";
    case ClassLabel::NPDR: return "NPDR";
    case ClassLabel::PDR: return "PDR";
  }
  return "?";
}

ClassLabel parse_class_label(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (name == class_label_name(static_cast<ClassLabel>(i))) return static_cast<ClassLabel>(i);
  throw FormatError("unknown class label: " + name);
}

std::vector<std::string> feature_manifest(NodeType t, bool include_coords) {
  std::vector<std::string> names;
  switch (t) {
    case NodeType::Vessel:
      names = {"length_mm",   "avg_radius_mm",  "radius_variability", "area_mm2",
               "tortuosity",  "mean_intensity", "std_intensity",      "is_terminal"};
      if (include_coords)
        names.insert(names.end(), {"midpoint_x", "midpoint_y", "endpoint_a_x", "endpoint_a_y",
                                   "endpoint_b_x", "endpoint_b_y"});
      break;
    case NodeType::Ica:
    case NodeType::Faz:
      names = {"area_mm2", "perimeter_mm",   "eccentricity",  "major_axis_mm", "minor_axis_mm",
               "solidity", "mean_intensity", "std_intensity", "touches_border"};
      if (t == NodeType::Faz) names.push_back("acircularity");
      if (include_coords) names.insert(names.end(), {"centroid_x", "centroid_y"});
      break;
  }
  return names;
}

namespace {

void append_ica_features(std::vector<double>& out, const ICANode& n, bool with_acirc,
                         double acirc, bool include_coords) {
  out.insert(out.end(), {n.area_mm2, n.perimeter_mm, n.eccentricity, n.major_axis_mm,
                         n.minor_axis_mm, n.solidity, n.mean_intensity, n.std_intensity,
                         n.touches_border ? 1.0 : 0.0});
  if (with_acirc) out.push_back(acirc);
  if (include_coords) out.insert(out.end(), {n.centroid.x, n.centroid.y});
}

}  // namespace

HeteroGraph assemble(const BinaryGrid& seg, const IntensityGrid& img, const AssembleOptions& opts) {
  if (seg.width != img.width || seg.height != img.height)
    throw ArgumentError("segmentation and intensity grids differ in size");
  if (seg.count() == 0) throw DegenerateInputError("segmentation has no foreground");

  VesselGraph vg = build_vessel_graph(seg, img);
  std::vector<ICANode> icas = extract_ica_nodes(seg, img);
  if (icas.empty()) throw DegenerateInputError("image has no background components");
  const EdgeList ica_edges = skeleton_adjacency_edges(seg);
  const int32_t faz_id =
      identify_faz(icas, {seg.width / 2.0, seg.height / 2.0});
  const FAZNode faz = make_faz_node(icas[faz_id]);

  const int w = seg.width;
  const int h = seg.height;

  // Pixel ownership maps for mask adjacency.
  std::vector<int32_t> ves_owner(static_cast<size_t>(w) * h, -1);
  for (const VesselSegment& s : vg.segments)
    s.mask.for_each_pixel([&](int x, int y) { ves_owner[static_cast<size_t>(y) * w + x] = s.id; });
  std::vector<int32_t> ica_owner(static_cast<size_t>(w) * h, -1);
  for (const ICANode& n : icas)
    n.mask.for_each_pixel([&](int x, int y) { ica_owner[static_cast<size_t>(y) * w + x] = n.id; });

  // Vessel-ICA adjacency: a vessel mask pixel 8-adjacent to an ICA mask pixel.
  std::set<std::pair<int32_t, int32_t>> ves_ica;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int32_t ica = ica_owner[static_cast<size_t>(y) * w + x];
      if (ica < 0) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          const int32_t ves = ves_owner[static_cast<size_t>(ny) * w + nx];
          if (ves >= 0) ves_ica.insert({ves, ica});
        }
    }

  HeteroGraph g;
  g.meta.image_id = opts.image_id;
  g.meta.group_id = opts.group_id;
  g.meta.pixel_size_mm = img.pixel_size_mm;
  g.meta.width = w;
  g.meta.height = h;
  for (int t = 0; t < kNumNodeTypes; ++t)
    g.meta.feature_names[t] = feature_manifest(static_cast<NodeType>(t), opts.include_coords);

  // Vessel nodes.
  NodeSet& vn = g.of(NodeType::Vessel);
  vn.count = static_cast<int32_t>(vg.segments.size());
  vn.dim = static_cast<int32_t>(g.meta.feature_names[0].size());
  for (VesselSegment& s : vg.segments) {
    const VesselFeatures& f = s.features;
    vn.features.insert(vn.features.end(),
                       {f.length_mm, f.avg_radius_mm, f.radius_variability, f.area_mm2,
                        f.tortuosity, f.mean_intensity, f.std_intensity,
                        f.is_terminal ? 1.0 : 0.0});
    if (opts.include_coords)
      vn.features.insert(vn.features.end(), {f.midpoint.x, f.midpoint.y, f.endpoint_a.x,
                                             f.endpoint_a.y, f.endpoint_b.x, f.endpoint_b.y});
    vn.positions.push_back(f.midpoint);
    vn.masks.push_back(std::move(s.mask));
  }
  g.rel(Relation::VesVes) = std::move(vg.edges);

  // ICA nodes, with the FAZ pulled out and its incidences re-typed.
  std::vector<int32_t> remap(icas.size(), -1);
  NodeSet& in = g.of(NodeType::Ica);
  in.dim = static_cast<int32_t>(g.meta.feature_names[1].size());
  for (ICANode& n : icas) {
    if (n.id == faz_id) continue;
    remap[n.id] = in.count++;
    append_ica_features(in.features, n, false, 0.0, opts.include_coords);
    in.positions.push_back(n.centroid);
    in.masks.push_back(std::move(n.mask));
  }

  NodeSet& fn = g.of(NodeType::Faz);
  fn.count = 1;
  fn.dim = static_cast<int32_t>(g.meta.feature_names[2].size());
  append_ica_features(fn.features, faz, true, faz.acircularity, opts.include_coords);
  fn.positions.push_back(faz.centroid);
  fn.masks.push_back(faz.mask);

  for (const auto& [a, b] : ica_edges) {
    if (a == faz_id)
      g.rel(Relation::FazIca).push_back({0, remap[b]});
    else if (b == faz_id)
      g.rel(Relation::FazIca).push_back({0, remap[a]});
    else
      g.rel(Relation::IcaIca).push_back({std::min(remap[a], remap[b]), std::max(remap[a], remap[b])});
  }
  for (const auto& [ves, ica] : ves_ica) {
    if (ica == faz_id)
      g.rel(Relation::FazVes).push_back({0, ves});
    else
      g.rel(Relation::VesIca).push_back({ves, remap[ica]});
  }
  for (auto& list : g.edges) std::sort(list.begin(), list.end());
  return g;
}

NormStats fit_norm_stats(const std::vector<HeteroGraph>& graphs) {
  if (graphs.empty()) throw ArgumentError("fit_norm_stats needs at least one graph");
  NormStats stats;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    int32_t dim = 0;
    for (const HeteroGraph& g : graphs)
      if (g.nodes[t].count > 0) dim = g.nodes[t].dim;
    stats.mean[t].assign(dim, 0.0);
    stats.stddev[t].assign(dim, 1.0);
    if (dim == 0) continue;
    size_t n = 0;
    std::vector<double> sum(dim, 0.0), sum2(dim, 0.0);
    for (const HeteroGraph& g : graphs) {
      const NodeSet& ns = g.nodes[t];
      if (ns.count == 0) continue;
      if (ns.dim != dim) throw ArgumentError("inconsistent feature dimensions across graphs");
      for (int32_t i = 0; i < ns.count; ++i) {
        const double* row = ns.row(i);
        for (int32_t j = 0; j < dim; ++j) {
          sum[j] += row[j];
          sum2[j] += row[j] * row[j];
        }
        ++n;
      }
    }
    if (n == 0) continue;
    for (int32_t j = 0; j < dim; ++j) {
      const double mean = sum[j] / static_cast<double>(n);
      const double var = std::max(0.0, sum2[j] / static_cast<double>(n) - mean * mean);
      stats.mean[t][j] = mean;
      stats.stddev[t][j] = std::max(std::sqrt(var), kStdFloor);
    }
  }
  return stats;
}

HeteroGraph normalize(const HeteroGraph& graph, const NormStats& stats) {
  HeteroGraph out = graph;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const NodeSet& ns = graph.nodes[t];
    if (ns.count == 0) {
      out.normalized[t].clear();
      continue;
    }
    if (static_cast<size_t>(ns.dim) != stats.mean[t].size())
      throw ArgumentError("normalization stats dimension mismatch for type " +
                          std::string(node_type_name(static_cast<NodeType>(t))));
    out.normalized[t].resize(ns.features.size());
    for (int32_t i = 0; i < ns.count; ++i)
      for (int32_t j = 0; j < ns.dim; ++j) {
        const size_t k = static_cast<size_t>(i) * ns.dim + j;
        out.normalized[t][k] = (ns.features[k] - stats.mean[t][j]) / stats.stddev[t][j];
      }
  }
  return out;
}

HeteroGraph mask_relations(const HeteroGraph& graph, const std::vector<Relation>& keep) {
  if (keep.empty()) throw ArgumentError("relation keep set must not be empty");
  std::array<bool, kNumRelations> active = {};
  for (Relation r : keep) active[static_cast<int>(r)] = true;

  HeteroGraph out = graph;
  out.meta.active_relations = active;
  for (int r = 0; r < kNumRelations; ++r)
    if (!active[r]) out.edges[r].clear();

  static const std::array<std::vector<Relation>, kNumNodeTypes> incident = {{
      {Relation::VesVes, Relation::VesIca, Relation::FazVes},
      {Relation::IcaIca, Relation::VesIca, Relation::FazIca},
      {Relation::FazVes, Relation::FazIca},
  }};
  for (int t = 0; t < kNumNodeTypes; ++t) {
    bool any = false;
    for (Relation r : incident[t]) any |= active[static_cast<int>(r)];
    if (!any) {
      out.nodes[t] = NodeSet{};
      out.nodes[t].dim = graph.nodes[t].dim;
      out.normalized[t].clear();
    }
  }
  return out;
}

// --- serialization ----------------------------------------------------------

namespace {

json mask_to_json(const PixelMask& mask) {
  json a = json::array();
  for (const RleRun& r : mask.runs) a.push_back({r.row, r.start_col, r.run_len});
  return a;
}

PixelMask mask_from_json(const json& a) {
  PixelMask m;
  for (const auto& r : a) {
    if (!r.is_array() || r.size() != 3) throw FormatError("mask run must be [row,col,len]");
    m.runs.push_back({r[0].get<int32_t>(), r[1].get<int32_t>(), r[2].get<int32_t>()});
  }
  return m;
}

json nodeset_to_json(const NodeSet& ns) {
  json arr = json::array();
  for (int32_t i = 0; i < ns.count; ++i) {
    json node;
    node["features"] = std::vector<double>(ns.row(i), ns.row(i) + ns.dim);
    node["position"] = {ns.positions[i].x, ns.positions[i].y};
    node["mask"] = mask_to_json(ns.masks[i]);
    arr.push_back(std::move(node));
  }
  return arr;
}

NodeSet nodeset_from_json(const json& arr, int32_t dim) {
  NodeSet ns;
  ns.dim = dim;
  for (const auto& node : arr) {
    const auto& f = node.at("features");
    if (static_cast<int32_t>(f.size()) != dim)
      throw FormatError("node feature length does not match manifest");
    for (const auto& v : f) {
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw FormatError("non-finite feature value");
      ns.features.push_back(x);
    }
    const auto& p = node.at("position");
    ns.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    ns.masks.push_back(mask_from_json(node.at("mask")));
    ++ns.count;
  }
  return ns;
}

json edges_to_json(const EdgeList& edges) {
  json a = json::array();
  for (const auto& [i, j] : edges) a.push_back({i, j});
  return a;
}

EdgeList edges_from_json(const json& a, int32_t n_first, int32_t n_second) {
  EdgeList out;
  for (const auto& e : a) {
    if (!e.is_array() || e.size() != 2) throw FormatError("edge must be an index pair");
    const int32_t i = e[0].get<int32_t>();
    const int32_t j = e[1].get<int32_t>();
    if (i < 0 || i >= n_first || j < 0 || j >= n_second)
      throw FormatError("edge index out of range");
    out.push_back({i, j});
  }
  return out;
}

constexpr int kGraphFormatVersion = 1;

}  // namespace

std::string serialize(const HeteroGraph& graph) {
  json j;
  j["version"] = kGraphFormatVersion;
  json meta;
  meta["image_id"] = graph.meta.image_id;
  meta["group_id"] = graph.meta.group_id;
  meta["pixel_size_mm"] = graph.meta.pixel_size_mm;
  meta["width"] = graph.meta.width;
  meta["height"] = graph.meta.height;
  meta["vessel_features"] = graph.meta.feature_names[0];
  meta["ica_features"] = graph.meta.feature_names[1];
  meta["faz_features"] = graph.meta.feature_names[2];
  json active = json::array();
  for (int r = 0; r < kNumRelations; ++r)
    if (graph.meta.active_relations[r]) active.push_back(relation_name(static_cast<Relation>(r)));
  meta["active_relations"] = std::move(active);
  j["meta"] = std::move(meta);

  j["vessel_nodes"] = nodeset_to_json(graph.of(NodeType::Vessel));
  j["ica_nodes"] = nodeset_to_json(graph.of(NodeType::Ica));
  if (graph.of(NodeType::Faz).count > 0) {
    j["faz"] = nodeset_to_json(graph.of(NodeType::Faz))[0];
  } else {
    j["faz"] = nullptr;
  }
  json edges;
  for (int r = 0; r < kNumRelations; ++r)
    edges[relation_name(static_cast<Relation>(r))] = edges_to_json(graph.edges[r]);
  j["edges"] = std::move(edges);
  if (graph.label)
    j["label"] = class_label_name(*graph.label);
  else
    j["label"] = nullptr;
  return j.dump();
}

HeteroGraph deserialize(const std::string& bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || !j.contains("version")) throw FormatError("missing version field");
    if (j.at("version").get<int>() != kGraphFormatVersion)
      throw FormatError("unsupported graph format version");
    HeteroGraph g;
    const json& meta = j.at("meta");
    g.meta.image_id = meta.at("image_id").get<std::string>();
    g.meta.group_id = meta.at("group_id").get<std::string>();
    g.meta.pixel_size_mm = meta.at("pixel_size_mm").get<double>();
    g.meta.width = meta.at("width").get<int>();
    g.meta.height = meta.at("height").get<int>();
    g.meta.feature_names[0] = meta.at("vessel_features").get<std::vector<std::string>>();
    g.meta.feature_names[1] = meta.at("ica_features").get<std::vector<std::string>>();
    g.meta.feature_names[2] = meta.at("faz_features").get<std::vector<std::string>>();
    g.meta.active_relations = {};
    for (const auto& name : meta.at("active_relations")) {
      const std::string s = name.get<std::string>();
      bool known = false;
      for (int r = 0; r < kNumRelations; ++r)
        if (s == relation_name(static_cast<Relation>(r))) {
          g.meta.active_relations[r] = true;
          known = true;
        }
      if (!known) throw FormatError("unknown relation name: " + s);
    }

    g.of(NodeType::Vessel) =
        nodeset_from_json(j.at("vessel_nodes"), static_cast<int32_t>(g.meta.feature_names[0].size()));
    g.of(NodeType::Ica) =
        nodeset_from_json(j.at("ica_nodes"), static_cast<int32_t>(g.meta.feature_names[1].size()));
    if (!j.at("faz").is_null()) {
      json faz_arr = json::array({j.at("faz")});
      g.of(NodeType::Faz) =
          nodeset_from_json(faz_arr, static_cast<int32_t>(g.meta.feature_names[2].size()));
    } else {
      g.of(NodeType::Faz).dim = static_cast<int32_t>(g.meta.feature_names[2].size());
    }

    const json& edges = j.at("edges");
    const int32_t nv = g.of(NodeType::Vessel).count;
    const int32_t ni = g.of(NodeType::Ica).count;
    const int32_t nf = g.of(NodeType::Faz).count;
    g.rel(Relation::VesVes) = edges_from_json(edges.at("ves_ves"), nv, nv);
    g.rel(Relation::IcaIca) = edges_from_json(edges.at("ica_ica"), ni, ni);
    g.rel(Relation::VesIca) = edges_from_json(edges.at("ves_ica"), nv, ni);
    g.rel(Relation::FazVes) = edges_from_json(edges.at("faz_ves"), nf, nv);
    g.rel(Relation::FazIca) = edges_from_json(edges.at("faz_ica"), nf, ni);

    if (!j.at("label").is_null()) g.label = parse_class_label(j.at("label").get<std::string>());
    return g;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
}

void save_graph(const HeteroGraph& graph, const std::string& path) {
  write_file_atomic(path, serialize(graph));
}

HeteroGraph load_graph(const std::string& path) { return deserialize(read_file_text(path)); }

}  // namespace retigraph
