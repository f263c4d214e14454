#include "retigraph/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/metrics.hpp"
#include "retigraph/split.hpp"

namespace retigraph {

using json = nlohmann::json;

const std::array<DirectedRelation, kNumDirectedRelations> kDirectedRelations = {{
    {NodeType::Vessel, NodeType::Vessel, Relation::VesVes, false},
    {NodeType::Ica, NodeType::Ica, Relation::IcaIca, false},
    {NodeType::Vessel, NodeType::Ica, Relation::VesIca, false},
    {NodeType::Ica, NodeType::Vessel, Relation::VesIca, true},
    {NodeType::Faz, NodeType::Vessel, Relation::FazVes, false},
    {NodeType::Vessel, NodeType::Faz, Relation::FazVes, true},
    {NodeType::Faz, NodeType::Ica, Relation::FazIca, false},
    {NodeType::Ica, NodeType::Faz, Relation::FazIca, true},
}};

namespace {

const char* directed_relation_name(int r) {
  static const char* names[kNumDirectedRelations] = {"ves_ves", "ica_ica", "ves_ica", "ica_ves",
                                                     "faz_ves", "ves_faz", "faz_ica", "ica_faz"};
  return names[r];
}

LinearParams make_linear(int in_dim, int out_dim) {
  LinearParams p;
  p.W = ad::Tensor(in_dim, out_dim);
  p.b = ad::Tensor(1, out_dim);
  return p;
}

BatchNormParams make_bn(int dim) {
  BatchNormParams p;
  p.gamma = ad::Tensor(1, dim);
  std::fill(p.gamma.v.begin(), p.gamma.v.end(), 1.0);
  p.beta = ad::Tensor(1, dim);
  p.running.mean.assign(dim, 0.0);
  p.running.var.assign(dim, 1.0);
  return p;
}

MlpBlock make_block(int in_dim, int hidden) {
  MlpBlock b;
  b.lin1 = make_linear(in_dim, hidden);
  b.bn1 = make_bn(hidden);
  b.lin2 = make_linear(hidden, hidden);
  b.bn2 = make_bn(hidden);
  return b;
}

template <typename Params, typename Fn>
void visit_params(Params& params, Fn&& fn) {
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const std::string base = std::string("pre.") + node_type_name(static_cast<NodeType>(t));
    fn(base + ".lin1.W", params.pre[t].lin1.W);
    fn(base + ".lin1.b", params.pre[t].lin1.b);
    fn(base + ".bn1.gamma", params.pre[t].bn1.gamma);
    fn(base + ".bn1.beta", params.pre[t].bn1.beta);
    fn(base + ".lin2.W", params.pre[t].lin2.W);
    fn(base + ".lin2.b", params.pre[t].lin2.b);
    fn(base + ".bn2.gamma", params.pre[t].bn2.gamma);
    fn(base + ".bn2.beta", params.pre[t].bn2.beta);
  }
  for (size_t k = 0; k < params.message.size(); ++k)
    for (int r = 0; r < kNumDirectedRelations; ++r) {
      const std::string base =
          "message." + std::to_string(k) + "." + directed_relation_name(r);
      fn(base + ".W", params.message[k][r].W);
      fn(base + ".b", params.message[k][r].b);
    }
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const std::string base = std::string("post.") + node_type_name(static_cast<NodeType>(t));
    fn(base + ".lin1.W", params.post[t].lin1.W);
    fn(base + ".lin1.b", params.post[t].lin1.b);
    fn(base + ".bn1.gamma", params.post[t].bn1.gamma);
    fn(base + ".bn1.beta", params.post[t].bn1.beta);
    fn(base + ".lin2.W", params.post[t].lin2.W);
    fn(base + ".lin2.b", params.post[t].lin2.b);
    fn(base + ".bn2.gamma", params.post[t].bn2.gamma);
    fn(base + ".bn2.beta", params.post[t].bn2.beta);
  }
  fn("head1.W", params.head1.W);
  fn("head1.b", params.head1.b);
  fn("head2.W", params.head2.W);
  fn("head2.b", params.head2.b);
}

template <typename Params, typename Fn>
void visit_bn(Params& params, Fn&& fn) {
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const std::string base = std::string("pre.") + node_type_name(static_cast<NodeType>(t));
    fn(base + ".bn1", params.pre[t].bn1);
    fn(base + ".bn2", params.pre[t].bn2);
  }
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const std::string base = std::string("post.") + node_type_name(static_cast<NodeType>(t));
    fn(base + ".bn1", params.post[t].bn1);
    fn(base + ".bn2", params.post[t].bn2);
  }
}

}  // namespace

void for_each_param(ModelParams& params,
                    const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  visit_params(params, fn);
}

void for_each_param(const ModelParams& params,
                    const std::function<void(const std::string&, const ad::Tensor&)>& fn) {
  visit_params(params, fn);
}

int64_t param_count(const ModelParams& params) {
  int64_t n = 0;
  for_each_param(params, [&](const std::string&, const ad::Tensor& t) { n += t.numel(); });
  return n;
}

ModelParams init_model(const GnnConfig& config, uint64_t seed) {
  if (config.hidden_dim < 1 || config.message_passing_layers < 1)
    throw ArgumentError("model: hidden_dim and message_passing_layers must be positive");
  if (config.neighbor_aggregator != "mean" && config.neighbor_aggregator != "sum")
    throw ArgumentError("model: neighbor_aggregator must be mean or sum");
  if (config.relation_aggregator != "mean" && config.relation_aggregator != "sum")
    throw ArgumentError("model: relation_aggregator must be mean or sum");

  ModelParams p;
  p.config = config;
  const int h = config.hidden_dim;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    p.pre[t] = make_block(config.in_dims[t], h);
    p.post[t] = make_block(h, h);
  }
  p.message.resize(config.message_passing_layers);
  for (auto& layer : p.message)
    for (int r = 0; r < kNumDirectedRelations; ++r) layer[r] = make_linear(2 * h, h);
  p.head1 = make_linear(kNumNodeTypes * h, h);
  p.head2 = make_linear(h, kNumClasses);

  const int64_t count = param_count(p);
  if (count > kParamBudget)
    throw ArgumentError("model exceeds the parameter budget: " + std::to_string(count) + " > " +
                        std::to_string(kParamBudget));

  Rng rng(derive_seed(seed, 0xd1));
  for_each_param(p, [&](const std::string& name, ad::Tensor& t) {
    if (name.ends_with(".W")) {
      const double limit = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
      for (double& v : t.v) v = rng.uniform(-limit, limit);
    }
    // biases and batch-norm offsets keep their constant initialization
  });
  return p;
}

GraphBatch make_batch(const std::vector<const HeteroGraph*>& graphs) {
  if (graphs.empty()) throw ArgumentError("batch: no graphs");
  GraphBatch batch;
  batch.n_graphs = static_cast<int>(graphs.size());

  std::array<int64_t, kNumNodeTypes> total{};
  std::array<int, kNumNodeTypes> dims{};
  for (const HeteroGraph* g : graphs)
    for (int t = 0; t < kNumNodeTypes; ++t) {
      total[t] += g->nodes[t].count;
      if (g->nodes[t].count > 0) dims[t] = g->nodes[t].dim;
    }

  std::array<bool, kNumRelations> base_active;
  base_active.fill(true);
  for (const HeteroGraph* g : graphs)
    for (int r = 0; r < kNumRelations; ++r)
      base_active[r] = base_active[r] && g->meta.active_relations[r];

  for (int t = 0; t < kNumNodeTypes; ++t) {
    batch.x[t] = ad::Tensor(total[t], dims[t]);
    batch.graph_id[t].reserve(total[t]);
  }

  std::array<int32_t, kNumNodeTypes> offset{};
  for (int gi = 0; gi < batch.n_graphs; ++gi) {
    const HeteroGraph& g = *graphs[gi];
    for (int t = 0; t < kNumNodeTypes; ++t) {
      const NodeSet& ns = g.nodes[t];
      if (ns.count == 0) continue;
      if (ns.dim != dims[t]) throw ArgumentError("batch: feature dimensions differ across graphs");
      if (g.normalized[t].size() != ns.features.size())
        throw ArgumentError("batch: graph is not normalized");
      for (double v : g.normalized[t])
        if (!std::isfinite(v)) throw ArgumentError("batch: non-finite normalized feature");
      std::copy(g.normalized[t].begin(), g.normalized[t].end(),
                batch.x[t].v.begin() + static_cast<size_t>(offset[t]) * dims[t]);
      for (int32_t i = 0; i < ns.count; ++i) batch.graph_id[t].push_back(gi);
    }
    for (int r = 0; r < kNumDirectedRelations; ++r) {
      const DirectedRelation& dr = kDirectedRelations[r];
      if (!base_active[static_cast<int>(dr.base)]) continue;
      auto& [src_idx, dst_idx] = batch.edges[r];
      const int32_t so = offset[static_cast<int>(dr.src)];
      const int32_t do_ = offset[static_cast<int>(dr.dst)];
      for (const auto& [a, b] : g.rel(dr.base)) {
        const int32_t s = dr.reversed ? b : a;
        const int32_t d = dr.reversed ? a : b;
        src_idx.push_back(so + s);
        dst_idx.push_back(do_ + d);
        // Homogeneous relations share one weight set for both directions.
        if (dr.base == Relation::VesVes || dr.base == Relation::IcaIca) {
          src_idx.push_back(so + d);
          dst_idx.push_back(do_ + s);
        }
      }
    }
    for (int t = 0; t < kNumNodeTypes; ++t) offset[t] += g.nodes[t].count;

    batch.labels.push_back(g.label ? static_cast<int>(*g.label) : -1);
  }
  for (int r = 0; r < kNumDirectedRelations; ++r)
    batch.relation_active[r] = base_active[static_cast<int>(kDirectedRelations[r].base)];
  return batch;
}

ForwardHandles gnn_forward(ad::Tape& tape, ModelParams& params, const GraphBatch& batch,
                           bool train_mode, Rng* dropout_rng, bool inputs_require_grad) {
  if (train_mode && params.config.dropout_rate > 0.0 && dropout_rng == nullptr)
    throw ArgumentError("forward: train mode needs a dropout RNG");
  const bool mean_neighbors = params.config.neighbor_aggregator == "mean";
  const bool mean_relations = params.config.relation_aggregator == "mean";

  ForwardHandles handles;
  std::unordered_map<const ad::Tensor*, int> leaf_of;
  for_each_param(params, [&](const std::string&, ad::Tensor& t) {
    const int id = tape.leaf(t, train_mode);
    leaf_of[&t] = id;
    handles.param_leaves.push_back(id);
  });
  auto lp = [&](const ad::Tensor& t) { return leaf_of.at(&t); };

  auto run_block = [&](MlpBlock& blk, int x) {
    x = tape.linear(x, lp(blk.lin1.W), lp(blk.lin1.b));
    x = tape.batch_norm(x, lp(blk.bn1.gamma), lp(blk.bn1.beta), &blk.bn1.running, train_mode);
    x = tape.relu(x);
    x = tape.linear(x, lp(blk.lin2.W), lp(blk.lin2.b));
    x = tape.batch_norm(x, lp(blk.bn2.gamma), lp(blk.bn2.beta), &blk.bn2.running, train_mode);
    return tape.relu(x);
  };

  std::array<int, kNumNodeTypes> h{};
  for (int t = 0; t < kNumNodeTypes; ++t) {
    handles.inputs[t] = tape.leaf(batch.x[t], inputs_require_grad);
    h[t] = run_block(params.pre[t], handles.inputs[t]);
  }

  for (auto& layer : params.message) {
    std::array<int, kNumNodeTypes> acc = {-1, -1, -1};
    std::array<int, kNumNodeTypes> hits{};
    for (int r = 0; r < kNumDirectedRelations; ++r) {
      if (!batch.relation_active[r]) continue;
      const DirectedRelation& dr = kDirectedRelations[r];
      const int src_t = static_cast<int>(dr.src);
      const int dst_t = static_cast<int>(dr.dst);
      const auto& [src_idx, dst_idx] = batch.edges[r];
      const int64_t n_dst = tape.val(h[dst_t]).rows;
      const int agg = mean_neighbors
                          ? tape.scatter_mean(h[src_t], src_idx, dst_idx, n_dst)
                          : tape.scatter_sum(h[src_t], src_idx, dst_idx, n_dst);
      const int cat = tape.concat_cols(h[dst_t], agg);
      const int out = tape.relu(tape.linear(cat, lp(layer[r].W), lp(layer[r].b)));
      acc[dst_t] = acc[dst_t] < 0 ? out : tape.add(acc[dst_t], out);
      ++hits[dst_t];
    }
    for (int t = 0; t < kNumNodeTypes; ++t) {
      if (acc[t] < 0) continue;  // no incident relation: embeddings pass through
      h[t] = mean_relations ? tape.scale(acc[t], 1.0 / hits[t]) : acc[t];
    }
  }

  std::array<int, kNumNodeTypes> pooled{};
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const int post = run_block(params.post[t], h[t]);
    pooled[t] = tape.segment_mean(post, batch.graph_id[t], batch.n_graphs);
  }
  int z = tape.concat_cols(tape.concat_cols(pooled[0], pooled[1]), pooled[2]);
  z = tape.relu(tape.linear(z, lp(params.head1.W), lp(params.head1.b)));
  if (train_mode && params.config.dropout_rate > 0.0)
    z = tape.dropout(z, params.config.dropout_rate, *dropout_rng, true);
  handles.logits = tape.linear(z, lp(params.head2.W), lp(params.head2.b));
  return handles;
}

namespace {

Prediction prediction_from_logits(const ad::Tensor& logits, int64_t row) {
  Prediction p;
  double mx = logits.at(row, 0);
  for (int c = 1; c < kNumClasses; ++c) mx = std::max(mx, logits.at(row, c));
  double z = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    p.logits[c] = logits.at(row, c);
    z += std::exp(p.logits[c] - mx);
  }
  int best = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    p.probabilities[c] = std::exp(p.logits[c] - mx) / z;
    if (p.logits[c] > p.logits[best]) best = c;
  }
  p.predicted = static_cast<ClassLabel>(best);
  return p;
}

}  // namespace

Prediction predict(ModelParams& params, const HeteroGraph& normalized_graph) {
  ad::Tape tape;
  const GraphBatch batch = make_batch({&normalized_graph});
  const ForwardHandles fh = gnn_forward(tape, params, batch, /*train_mode=*/false);
  return prediction_from_logits(tape.val(fh.logits), 0);
}

namespace {

struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  int64_t t = 0;
};

}  // namespace

std::vector<Relation> relation_set(const std::string& name) {
  if (name == "all")
    return {Relation::VesVes, Relation::IcaIca, Relation::VesIca, Relation::FazVes,
            Relation::FazIca};
  if (name == "vessel") return {Relation::VesVes};
  if (name == "ica") return {Relation::IcaIca, Relation::FazIca};
  throw ArgumentError("unknown relation set: " + name + " (expected all, vessel or ica)");
}

HeteroGraph apply_relation_mask(const HeteroGraph& graph, const std::string& name) {
  if (name == "all") return graph;
  return mask_relations(graph, relation_set(name));
}

Checkpoint train(const std::vector<HeteroGraph>& graphs, const GnnConfig& model_cfg,
                 const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1) throw ArgumentError("train: bad epoch/batch settings");
  (void)relation_set(cfg.relations);  // validate early
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (const HeteroGraph& g : graphs) {
    if (!g.label) throw ArgumentError("train: every graph needs a label");
    labels.push_back(static_cast<int>(*g.label));
    groups.push_back(g.meta.group_id.empty() ? g.meta.image_id : g.meta.group_id);
  }
  std::array<int, kNumClasses> class_counts{};
  for (int l : labels) ++class_counts[l];
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) present += class_counts[c] > 0;
  if (present < 2) throw ArgumentError("train: need at least two classes");

  const std::vector<int> fold_of = group_stratified_split(labels, groups, cfg.folds, cfg.seed);
  std::vector<size_t> train_idx, val_idx;
  for (size_t i = 0; i < graphs.size(); ++i)
    (fold_of[i] == cfg.val_fold ? val_idx : train_idx).push_back(i);
  if (train_idx.empty()) throw ArgumentError("train: empty training split");

  // Masks are dead weight during training; normalized working copies drop them.
  auto prepare = [&](const HeteroGraph& g, const NormStats& stats) {
    HeteroGraph n = normalize(apply_relation_mask(g, cfg.relations), stats);
    for (NodeSet& ns : n.nodes)
      for (PixelMask& m : ns.masks) m.runs.clear();
    return n;
  };

  std::vector<HeteroGraph> train_graphs;
  for (size_t i : train_idx) train_graphs.push_back(apply_relation_mask(graphs[i], cfg.relations));
  const NormStats stats = fit_norm_stats(train_graphs);
  train_graphs.clear();

  GnnConfig mc = model_cfg;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    int dim = 0;
    for (const HeteroGraph& g : graphs)
      if (g.nodes[t].count > 0) dim = g.nodes[t].dim;
    if (dim > 0) mc.in_dims[t] = dim;
  }

  std::vector<HeteroGraph> train_norm, val_norm;
  for (size_t i : train_idx) train_norm.push_back(prepare(graphs[i], stats));
  for (size_t i : val_idx) val_norm.push_back(prepare(graphs[i], stats));

  // Class weights proportional to inverse frequency over the training split.
  std::vector<double> weights = cfg.class_weights;
  if (weights.empty()) {
    std::array<int, kNumClasses> train_counts{};
    for (size_t i : train_idx) ++train_counts[labels[i]];
    int present_train = 0;
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      present_train += train_counts[c] > 0;
      total += train_counts[c];
    }
    weights.resize(kNumClasses, 1.0);
    for (int c = 0; c < kNumClasses; ++c)
      if (train_counts[c] > 0) weights[c] = total / (present_train * train_counts[c]);
  }
  if (weights.size() != kNumClasses) throw ArgumentError("train: need one weight per class");

  ModelParams params = init_model(mc, derive_seed(cfg.seed, 1));

  AdamState adam;
  for_each_param(params, [&](const std::string&, ad::Tensor& t) {
    adam.m.emplace_back(t.rows, t.cols);
    adam.v.emplace_back(t.rows, t.cols);
  });
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  Rng dropout_rng(derive_seed(cfg.seed, 2));

  TrainHistory history;
  ModelParams best_params = params;
  double best_val = -1.0;

  auto evaluate_val = [&](ModelParams& p) {
    if (val_norm.empty()) return 0.0;
    std::vector<int> preds, truth;
    for (const HeteroGraph& g : val_norm) {
      preds.push_back(static_cast<int>(predict(p, g).predicted));
      truth.push_back(static_cast<int>(*g.label));
    }
    return balanced_agreement(preds, truth);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(train_norm.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 100 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    size_t loss_n = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const HeteroGraph*> chunk;
      std::vector<int> chunk_labels;
      for (size_t i = start; i < end; ++i) {
        chunk.push_back(&train_norm[order[i]]);
        chunk_labels.push_back(static_cast<int>(*train_norm[order[i]].label));
      }
      ad::Tape tape;
      const GraphBatch batch = make_batch(chunk);
      const ForwardHandles fh = gnn_forward(tape, params, batch, /*train_mode=*/true, &dropout_rng);
      const int loss = tape.softmax_cross_entropy(fh.logits, chunk_labels, weights);
      tape.backward(loss);
      loss_sum += tape.val(loss).v[0] * static_cast<double>(chunk.size());
      loss_n += chunk.size();

      ++adam.t;
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.t));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.t));
      size_t pi = 0;
      for_each_param(params, [&](const std::string&, ad::Tensor& theta) {
        const ad::Tensor& g_leaf = tape.grad(fh.param_leaves[pi]);
        ad::Tensor& m = adam.m[pi];
        ad::Tensor& v = adam.v[pi];
        for (size_t i = 0; i < theta.v.size(); ++i) {
          const double g = g_leaf.v[i] + cfg.weight_decay * theta.v[i];
          m.v[i] = kBeta1 * m.v[i] + (1.0 - kBeta1) * g;
          v.v[i] = kBeta2 * v.v[i] + (1.0 - kBeta2) * g * g;
          theta.v[i] -= cfg.learning_rate * (m.v[i] / bc1) / (std::sqrt(v.v[i] / bc2) + kEps);
        }
        ++pi;
      });
    }

    EpochStats es;
    es.train_loss = loss_n > 0 ? loss_sum / static_cast<double>(loss_n) : 0.0;
    es.val_balanced_agreement = evaluate_val(params);
    history.epochs.push_back(es);
    if (es.val_balanced_agreement > best_val) {
      best_val = es.val_balanced_agreement;
      best_params = params;
      history.best_epoch = epoch;
    }
  }
  if (history.best_epoch < 0) {
    best_params = params;
    history.best_epoch = cfg.epochs - 1;
  }

  Checkpoint ckpt;
  ckpt.params = std::move(best_params);
  ckpt.norm_stats = stats;
  for (int t = 0; t < kNumNodeTypes; ++t) {
    for (const HeteroGraph& g : graphs)
      if (g.nodes[t].count > 0) {
        ckpt.feature_names[t] = g.meta.feature_names[t];
        break;
      }
  }
  ckpt.train_config = cfg;
  ckpt.history = std::move(history);
  return ckpt;
}

// --- checkpoint serialization ------------------------------------------------

namespace {

json tensor_to_json(const ad::Tensor& t) {
  return json{{"rows", t.rows}, {"cols", t.cols}, {"v", t.v}};
}

ad::Tensor tensor_from_json(const json& j) {
  ad::Tensor t(j.at("rows").get<int64_t>(), j.at("cols").get<int64_t>());
  const auto& v = j.at("v");
  if (static_cast<int64_t>(v.size()) != t.numel())
    throw FormatError("checkpoint tensor size mismatch");
  for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = v[i].get<double>();
  return t;
}

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["version"] = kCheckpointVersion;
  json cfg;
  cfg["hidden_dim"] = ckpt.params.config.hidden_dim;
  cfg["message_passing_layers"] = ckpt.params.config.message_passing_layers;
  cfg["dropout_rate"] = ckpt.params.config.dropout_rate;
  cfg["neighbor_aggregator"] = ckpt.params.config.neighbor_aggregator;
  cfg["relation_aggregator"] = ckpt.params.config.relation_aggregator;
  cfg["in_dims"] = ckpt.params.config.in_dims;
  j["model_config"] = std::move(cfg);

  json tensors;
  for_each_param(ckpt.params, [&](const std::string& name, const ad::Tensor& t) {
    tensors[name] = tensor_to_json(t);
  });
  j["tensors"] = std::move(tensors);
  json running;
  visit_bn(ckpt.params, [&](const std::string& name, const BatchNormParams& bn) {
    running[name] = json{{"mean", bn.running.mean}, {"var", bn.running.var}};
  });
  j["running_stats"] = std::move(running);

  j["norm_stats"] = json{{"mean", ckpt.norm_stats.mean}, {"std", ckpt.norm_stats.stddev}};
  j["feature_names"] = ckpt.feature_names;

  json tc;
  tc["epochs"] = ckpt.train_config.epochs;
  tc["batch_size"] = ckpt.train_config.batch_size;
  tc["learning_rate"] = ckpt.train_config.learning_rate;
  tc["weight_decay"] = ckpt.train_config.weight_decay;
  tc["seed"] = ckpt.train_config.seed;
  tc["class_weights"] = ckpt.train_config.class_weights;
  tc["folds"] = ckpt.train_config.folds;
  tc["val_fold"] = ckpt.train_config.val_fold;
  tc["relations"] = ckpt.train_config.relations;
  j["train_config"] = std::move(tc);

  json hist;
  hist["best_epoch"] = ckpt.history.best_epoch;
  json epochs = json::array();
  for (const EpochStats& e : ckpt.history.epochs)
    epochs.push_back({{"train_loss", e.train_loss},
                      {"val_balanced_agreement", e.val_balanced_agreement}});
  hist["epochs"] = std::move(epochs);
  j["history"] = std::move(hist);

  write_file_atomic(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file_text(path));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version");
    GnnConfig cfg;
    const json& mc = j.at("model_config");
    cfg.hidden_dim = mc.at("hidden_dim").get<int>();
    cfg.message_passing_layers = mc.at("message_passing_layers").get<int>();
    cfg.dropout_rate = mc.at("dropout_rate").get<double>();
    cfg.neighbor_aggregator = mc.at("neighbor_aggregator").get<std::string>();
    cfg.relation_aggregator = mc.at("relation_aggregator").get<std::string>();
    cfg.in_dims = mc.at("in_dims").get<std::array<int, kNumNodeTypes>>();

    Checkpoint ckpt;
    ckpt.params = init_model(cfg, 0);
    const json& tensors = j.at("tensors");
    for_each_param(ckpt.params, [&](const std::string& name, ad::Tensor& t) {
      ad::Tensor loaded = tensor_from_json(tensors.at(name));
      if (loaded.rows != t.rows || loaded.cols != t.cols)
        throw FormatError("checkpoint tensor shape mismatch for " + name);
      t = std::move(loaded);
    });
    const json& running = j.at("running_stats");
    visit_bn(ckpt.params, [&](const std::string& name, BatchNormParams& bn) {
      bn.running.mean = running.at(name).at("mean").get<std::vector<double>>();
      bn.running.var = running.at(name).at("var").get<std::vector<double>>();
    });

    ckpt.norm_stats.mean =
        j.at("norm_stats").at("mean").get<std::array<std::vector<double>, kNumNodeTypes>>();
    ckpt.norm_stats.stddev =
        j.at("norm_stats").at("std").get<std::array<std::vector<double>, kNumNodeTypes>>();
    ckpt.feature_names =
        j.at("feature_names").get<std::array<std::vector<std::string>, kNumNodeTypes>>();

    const json& tc = j.at("train_config");
    ckpt.train_config.epochs = tc.at("epochs").get<int>();
    ckpt.train_config.batch_size = tc.at("batch_size").get<int>();
    ckpt.train_config.learning_rate = tc.at("learning_rate").get<double>();
    ckpt.train_config.weight_decay = tc.at("weight_decay").get<double>();
    ckpt.train_config.seed = tc.at("seed").get<uint64_t>();
    ckpt.train_config.class_weights = tc.at("class_weights").get<std::vector<double>>();
    ckpt.train_config.folds = tc.at("folds").get<int>();
    ckpt.train_config.val_fold = tc.at("val_fold").get<int>();
    ckpt.train_config.relations = tc.at("relations").get<std::string>();

    ckpt.history.best_epoch = j.at("history").at("best_epoch").get<int>();
    for (const auto& e : j.at("history").at("epochs"))
      ckpt.history.epochs.push_back({e.at("train_loss").get<double>(),
                                     e.at("val_balanced_agreement").get<double>()});
    return ckpt;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace retigraph
