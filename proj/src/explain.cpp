#include "retigraph/explain.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <nlohmann/json.hpp>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"

namespace retigraph {

using json = nlohmann::json;

void KdTree::build(std::vector<Point> points) {
  points_ = std::move(points);
  nodes_.clear();
  nodes_.reserve(points_.size());
  std::vector<int32_t> ids(points_.size());
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int32_t>(i);
  root_ = build_recursive(ids, 0, static_cast<int>(ids.size()), 0);
}

int32_t KdTree::build_recursive(std::vector<int32_t>& ids, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const uint8_t axis = static_cast<uint8_t>(depth % 2);
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(ids.begin() + lo, ids.begin() + mid, ids.begin() + hi,
                   [&](int32_t a, int32_t b) {
                     const double va = axis == 0 ? points_[a].x : points_[a].y;
                     const double vb = axis == 0 ? points_[b].x : points_[b].y;
                     return va != vb ? va < vb : a < b;
                   });
  Node node;
  node.point = ids[mid];
  node.axis = axis;
  const int32_t self = static_cast<int32_t>(nodes_.size());
  nodes_.push_back(node);
  const int32_t left = build_recursive(ids, lo, mid, depth + 1);
  const int32_t right = build_recursive(ids, mid + 1, hi, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

std::vector<int32_t> KdTree::knn(Point query, int k) const {
  if (k < 1) throw ArgumentError("knn: k must be positive");
  // Worst candidate on top: larger distance first, then later insertion.
  using Entry = std::pair<double, int32_t>;
  auto worse = [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);

  auto visit = [&](auto&& self, int32_t ni) -> void {
    if (ni < 0) return;
    const Node& n = nodes_[ni];
    const Point& p = points_[n.point];
    const double dx = query.x - p.x;
    const double dy = query.y - p.y;
    const Entry e{dx * dx + dy * dy, n.point};
    if (static_cast<int>(heap.size()) < k) {
      heap.push(e);
    } else if (worse(e, heap.top())) {
      heap.pop();
      heap.push(e);
    }
    const double axis_d = n.axis == 0 ? dx : dy;
    const int32_t near = axis_d <= 0 ? n.left : n.right;
    const int32_t far = axis_d <= 0 ? n.right : n.left;
    self(self, near);
    if (static_cast<int>(heap.size()) < k || axis_d * axis_d <= heap.top().first)
      self(self, far);
  };
  visit(visit, root_);

  std::vector<Entry> entries;
  while (!heap.empty()) {
    entries.push_back(heap.top());
    heap.pop();
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.first != b.first ? a.first < b.first : a.second < b.second;
  });
  std::vector<int32_t> out;
  out.reserve(entries.size());
  for (const Entry& e : entries) out.push_back(e.second);
  return out;
}

BaselineIndex build_baseline_index(const std::vector<HeteroGraph>& training_graphs,
                                   const NormStats& stats, int k) {
  if (training_graphs.empty()) throw ArgumentError("baseline index: empty training set");
  if (k < 1) throw ArgumentError("baseline index: k must be >= 1");
  BaselineIndex index;
  index.k = k;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    BaselineIndex::TypeIndex& ti = index.types[t];
    for (const HeteroGraph& g : training_graphs) {
      const NodeSet& ns = g.nodes[t];
      if (ns.count == 0) continue;
      ti.dim = ns.dim;
      const std::vector<double>* norm = &g.normalized[t];
      std::vector<double> local;
      if (norm->empty()) {
        local = normalize(g, stats).normalized[t];
        norm = &local;
      }
      ti.features.insert(ti.features.end(), norm->begin(), norm->end());
      ti.positions.insert(ti.positions.end(), ns.positions.begin(), ns.positions.end());
    }
    ti.tree.build(ti.positions);
  }
  return index;
}

std::vector<double> dynamic_baseline(Point position, NodeType type, const BaselineIndex& index) {
  const BaselineIndex::TypeIndex& ti = index.types[static_cast<int>(type)];
  if (ti.positions.empty())
    throw ArgumentError(std::string("baseline index has no entries for type ") +
                        node_type_name(type));
  const int k = std::min<int>(index.k, static_cast<int>(ti.positions.size()));
  const std::vector<int32_t> ids = ti.tree.knn(position, k);
  std::vector<double> baseline(ti.dim, 0.0);
  for (int32_t id : ids) {
    const double* row = ti.features.data() + static_cast<size_t>(id) * ti.dim;
    for (int32_t j = 0; j < ti.dim; ++j) baseline[j] += row[j];
  }
  for (double& v : baseline) v /= static_cast<double>(ids.size());
  return baseline;
}

Attribution integrated_gradients(const HeteroGraph& normalized_graph, ModelParams& params,
                                 const BaselineIndex& index, int target_class, int steps) {
  if (steps < 8) throw ArgumentError("integrated gradients: steps must be >= 8");
  if (target_class >= kNumClasses) throw ArgumentError("integrated gradients: bad target class");
  if (target_class < 0)
    target_class = static_cast<int>(predict(params, normalized_graph).predicted);

  Attribution attr;
  attr.target_class = target_class;
  attr.steps = steps;

  // Baseline graph: every node's features replaced by its dynamic baseline;
  // edges and masks stay.
  std::array<std::vector<double>, kNumNodeTypes> x, xbl;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const NodeSet& ns = normalized_graph.nodes[t];
    x[t] = normalized_graph.normalized[t];
    if (ns.count > 0 && x[t].empty())
      throw ArgumentError("integrated gradients: graph is not normalized");
    xbl[t].resize(x[t].size());
    for (int32_t i = 0; i < ns.count; ++i) {
      const std::vector<double> bl =
          dynamic_baseline(ns.positions[i], static_cast<NodeType>(t), index);
      if (static_cast<int32_t>(bl.size()) != ns.dim)
        throw ArgumentError("integrated gradients: baseline dimension mismatch");
      std::copy(bl.begin(), bl.end(), xbl[t].begin() + static_cast<size_t>(i) * ns.dim);
    }
    attr.baselines[t] = xbl[t];
  }

  GraphBatch batch = make_batch({&normalized_graph});
  auto eval_logit = [&](const std::array<std::vector<double>, kNumNodeTypes>& feats) {
    for (int t = 0; t < kNumNodeTypes; ++t)
      std::copy(feats[t].begin(), feats[t].end(), batch.x[t].v.begin());
    ad::Tape tape;
    const ForwardHandles fh = gnn_forward(tape, params, batch, false);
    return tape.val(fh.logits).at(0, target_class);
  };
  attr.f_input = eval_logit(x);
  attr.f_baseline = eval_logit(xbl);

  std::array<std::vector<double>, kNumNodeTypes> grad_sum;
  for (int t = 0; t < kNumNodeTypes; ++t) grad_sum[t].assign(x[t].size(), 0.0);

  std::array<std::vector<double>, kNumNodeTypes> point = x;
  for (int s = 0; s < steps; ++s) {
    const double alpha = (s + 0.5) / static_cast<double>(steps);
    for (int t = 0; t < kNumNodeTypes; ++t)
      for (size_t i = 0; i < x[t].size(); ++i)
        point[t][i] = xbl[t][i] + alpha * (x[t][i] - xbl[t][i]);
    for (int t = 0; t < kNumNodeTypes; ++t)
      std::copy(point[t].begin(), point[t].end(), batch.x[t].v.begin());

    ad::Tape tape;
    const ForwardHandles fh = gnn_forward(tape, params, batch, false, nullptr,
                                          /*inputs_require_grad=*/true);
    const int target = tape.pick(fh.logits, 0, target_class);
    tape.backward(target);
    for (int t = 0; t < kNumNodeTypes; ++t) {
      if (x[t].empty()) continue;
      const ad::Tensor& g = tape.grad(fh.inputs[t]);
      for (size_t i = 0; i < grad_sum[t].size(); ++i) {
        if (!std::isfinite(g.v[i]))
          throw NumericError(std::string("non-finite gradient in type ") +
                             node_type_name(static_cast<NodeType>(t)) + " input");
        grad_sum[t][i] += g.v[i];
      }
    }
  }

  double total = 0.0;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const NodeSet& ns = normalized_graph.nodes[t];
    attr.scores[t].assign(x[t].size(), 0.0);
    attr.node_importance[t].assign(ns.count, 0.0);
    for (int32_t i = 0; i < ns.count; ++i) {
      double imp = 0.0;
      for (int32_t j = 0; j < ns.dim; ++j) {
        const size_t idx = static_cast<size_t>(i) * ns.dim + j;
        const double a = (x[t][idx] - xbl[t][idx]) * grad_sum[t][idx] / steps;
        attr.scores[t][idx] = a;
        imp += a;
      }
      attr.node_importance[t][i] = imp;
      total += imp;
    }
  }
  attr.completeness_gap = std::abs(total - (attr.f_input - attr.f_baseline));
  return attr;
}

namespace {

std::vector<RankedNode> rank_nodes_impl(const Attribution& attr, int top_n,
                                        const std::vector<NodeType>& types) {
  std::vector<RankedNode> all;
  for (NodeType t : types) {
    const auto& imp = attr.node_importance[static_cast<int>(t)];
    for (size_t i = 0; i < imp.size(); ++i)
      all.push_back({t, static_cast<int32_t>(i), imp[i]});
  }
  std::sort(all.begin(), all.end(), [](const RankedNode& a, const RankedNode& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    if (a.type != b.type) return a.type < b.type;
    return a.id < b.id;
  });
  if (top_n >= 0 && static_cast<size_t>(top_n) < all.size()) all.resize(top_n);
  return all;
}

}  // namespace

std::vector<RankedNode> rank_nodes(const Attribution& attr, int top_n) {
  return rank_nodes_impl(attr, top_n, {NodeType::Vessel, NodeType::Ica, NodeType::Faz});
}

std::vector<RankedNode> rank_nodes(const Attribution& attr, int top_n, NodeType type) {
  return rank_nodes_impl(attr, top_n, {type});
}

std::vector<FeatureAttribution> top_features(const Attribution& attr, const HeteroGraph& graph,
                                             NodeType type, int32_t node, int j) {
  const int t = static_cast<int>(type);
  const NodeSet& ns = graph.nodes[t];
  if (node < 0 || node >= ns.count) throw ArgumentError("top_features: node out of range");
  std::vector<FeatureAttribution> feats;
  for (int32_t f = 0; f < ns.dim; ++f) {
    const size_t idx = static_cast<size_t>(node) * ns.dim + f;
    FeatureAttribution fa;
    fa.name = graph.meta.feature_names[t][f];
    fa.attribution = attr.scores[t][idx];
    fa.sd_deviation = graph.normalized[t].empty() ? 0.0 : graph.normalized[t][idx];
    fa.raw_value = ns.features[idx];
    feats.push_back(std::move(fa));
  }
  std::stable_sort(feats.begin(), feats.end(), [](const FeatureAttribution& a, const FeatureAttribution& b) {
    return std::abs(a.attribution) > std::abs(b.attribution);
  });
  if (j >= 0 && static_cast<size_t>(j) < feats.size()) feats.resize(j);
  return feats;
}

RgbImage render_overlay(const HeteroGraph& graph, const Attribution& attr,
                        const IntensityGrid& base, const OverlayOptions& opts) {
  if (base.width != graph.meta.width || base.height != graph.meta.height)
    throw ArgumentError("overlay: image dimensions differ from graph");
  RgbImage img(base.width, base.height);
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x) {
      const uint8_t g =
          static_cast<uint8_t>(std::lround(std::clamp(base.at(x, y), 0.0, 1.0) * 255.0));
      const size_t o = (static_cast<size_t>(y) * base.width + x) * 3;
      img.data[o] = img.data[o + 1] = img.data[o + 2] = g;
    }

  double max_pos = 0.0, max_neg = 0.0;
  for (int t = 0; t < kNumNodeTypes; ++t)
    for (double imp : attr.node_importance[t]) {
      max_pos = std::max(max_pos, imp);
      max_neg = std::max(max_neg, -imp);
    }

  std::vector<NodeType> types;
  if (opts.mode == OverlayMode::Vessel || opts.mode == OverlayMode::Combined)
    types.push_back(NodeType::Vessel);
  if (opts.mode == OverlayMode::IcaFaz || opts.mode == OverlayMode::Combined) {
    types.push_back(NodeType::Ica);
    types.push_back(NodeType::Faz);
  }

  for (NodeType t : types) {
    const NodeSet& ns = graph.nodes[static_cast<int>(t)];
    const auto& imp = attr.node_importance[static_cast<int>(t)];
    for (int32_t i = 0; i < ns.count; ++i) {
      double alpha = 0.0;
      bool negative = false;
      if (imp[i] > 0.0 && max_pos > 0.0) {
        alpha = imp[i] / max_pos;
      } else if (imp[i] < 0.0 && opts.render_negative && max_neg > 0.0) {
        alpha = -imp[i] / max_neg;
        negative = true;
      }
      if (alpha <= 0.0) continue;
      ns.masks[i].for_each_pixel([&](int x, int y) {
        const size_t o = (static_cast<size_t>(y) * base.width + x) * 3;
        const double g = img.data[o];
        const double tinted = (1.0 - alpha) * g + alpha * 255.0;
        const double dimmed = (1.0 - alpha) * g;
        img.data[o] = static_cast<uint8_t>(std::lround(negative ? dimmed : tinted));
        img.data[o + 1] = static_cast<uint8_t>(std::lround(dimmed));
        img.data[o + 2] = static_cast<uint8_t>(std::lround(negative ? tinted : dimmed));
      });
    }
  }
  return img;
}

std::string attribution_report_json(const HeteroGraph& graph, const Attribution& attr,
                                    const Prediction& prediction, int top_nodes, int top_feats) {
  json j;
  j["version"] = 1;
  j["image_id"] = graph.meta.image_id;
  j["target_class"] = class_label_name(static_cast<ClassLabel>(attr.target_class));
  j["predicted_class"] = class_label_name(prediction.predicted);
  j["probabilities"] = prediction.probabilities;
  j["steps"] = attr.steps;
  j["logit_input"] = attr.f_input;
  j["logit_baseline"] = attr.f_baseline;
  j["completeness_gap"] = attr.completeness_gap;

  json nodes = json::array();
  for (const RankedNode& rn : rank_nodes(attr, top_nodes)) {
    json node;
    node["node_type"] = node_type_name(rn.type);
    node["id"] = rn.id;
    node["importance"] = rn.importance;
    json feats = json::array();
    for (const FeatureAttribution& fa : top_features(attr, graph, rn.type, rn.id, top_feats)) {
      feats.push_back({{"name", fa.name},
                       {"attribution", fa.attribution},
                       {"sd_deviation", fa.sd_deviation},
                       {"raw_value", fa.raw_value}});
    }
    node["top_features"] = std::move(feats);
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);
  return j.dump(2);
}

void save_baseline_index(const BaselineIndex& index, const std::string& path) {
  json j;
  j["version"] = 1;
  j["k"] = index.k;
  json types = json::array();
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const BaselineIndex::TypeIndex& ti = index.types[t];
    json positions = json::array();
    for (const Point& p : ti.positions) positions.push_back({p.x, p.y});
    types.push_back({{"dim", ti.dim}, {"positions", std::move(positions)}, {"features", ti.features}});
  }
  j["types"] = std::move(types);
  write_file_atomic(path, j.dump());
}

BaselineIndex load_baseline_index(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed baseline index: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw FormatError("unsupported baseline index version");
    BaselineIndex index;
    index.k = j.at("k").get<int>();
    const json& types = j.at("types");
    for (int t = 0; t < kNumNodeTypes; ++t) {
      BaselineIndex::TypeIndex& ti = index.types[t];
      ti.dim = types.at(t).at("dim").get<int32_t>();
      for (const auto& p : types.at(t).at("positions"))
        ti.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      ti.features = types.at(t).at("features").get<std::vector<double>>();
      ti.tree.build(ti.positions);
    }
    return index;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed baseline index: ") + e.what());
  }
}

}  // namespace retigraph
