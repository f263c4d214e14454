#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "retigraph/autodiff.hpp"
#include "retigraph/hetero_graph.hpp"
#include "retigraph/rng.hpp"

namespace retigraph {

// Hard ceiling on learnable parameters (the reference budget is ~0.04M).
inline constexpr int64_t kParamBudget = 60000;

struct GnnConfig {
  int hidden_dim = 32;
  int message_passing_layers = 2;
  double dropout_rate = 0.3;
  std::string neighbor_aggregator = "mean";  // per-relation neighbor pooling
  std::string relation_aggregator = "sum";   // combination across relations
  std::array<int, kNumNodeTypes> in_dims = {8, 9, 10};
  friend bool operator==(const GnnConfig&, const GnnConfig&) = default;
};

// Message passing runs once per directed relation; bidirectional edges give
// heterogeneous relations one weight set per direction.
struct DirectedRelation {
  NodeType src;
  NodeType dst;
  Relation base;
  bool reversed;  // edge pairs read (second, first)
};
inline constexpr int kNumDirectedRelations = 8;
extern const std::array<DirectedRelation, kNumDirectedRelations> kDirectedRelations;

struct LinearParams {
  ad::Tensor W;
  ad::Tensor b;
  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

struct BatchNormParams {
  ad::Tensor gamma;
  ad::Tensor beta;
  ad::RunningStats running;
  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

struct MlpBlock {
  LinearParams lin1, lin2;
  BatchNormParams bn1, bn2;
  friend bool operator==(const MlpBlock&, const MlpBlock&) = default;
};

struct ModelParams {
  GnnConfig config;
  std::array<MlpBlock, kNumNodeTypes> pre;
  // [layer][directed relation]; W is (2*hidden, hidden).
  std::vector<std::array<LinearParams, kNumDirectedRelations>> message;
  std::array<MlpBlock, kNumNodeTypes> post;
  LinearParams head1, head2;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Seeded initialization (Xavier-uniform weights). Throws when the learnable
// parameter count exceeds kParamBudget.
ModelParams init_model(const GnnConfig& config, uint64_t seed);
int64_t param_count(const ModelParams& params);

// Visits every learnable tensor in a fixed order (running stats excluded).
void for_each_param(ModelParams& params, const std::function<void(const std::string&, ad::Tensor&)>& fn);
void for_each_param(const ModelParams& params,
                    const std::function<void(const std::string&, const ad::Tensor&)>& fn);

struct Prediction {
  std::array<double, kNumClasses> logits{};
  std::array<double, kNumClasses> probabilities{};
  ClassLabel predicted = ClassLabel::Healthy;
};

// Disjoint union of normalized graphs with index offsets; graph_id drives the
// per-type global pooling.
struct GraphBatch {
  std::array<ad::Tensor, kNumNodeTypes> x;
  std::array<std::vector<int32_t>, kNumNodeTypes> graph_id;
  std::array<std::pair<std::vector<int32_t>, std::vector<int32_t>>, kNumDirectedRelations> edges;
  std::array<bool, kNumDirectedRelations> relation_active{};
  int n_graphs = 0;
  std::vector<int> labels;  // -1 when unlabeled
};

GraphBatch make_batch(const std::vector<const HeteroGraph*>& graphs);

struct ForwardHandles {
  int logits = -1;
  std::array<int, kNumNodeTypes> inputs = {-1, -1, -1};  // leaf ids of the feature tensors
  std::vector<int> param_leaves;  // leaf ids in for_each_param order
};

// Runs the network on the tape. In train mode batch-norm updates running
// statistics and dropout is active (dropout_rng required). When
// inputs_require_grad is set the feature leaves carry gradients (used by the
// attribution path).
ForwardHandles gnn_forward(ad::Tape& tape, ModelParams& params, const GraphBatch& batch,
                           bool train_mode, Rng* dropout_rng = nullptr,
                           bool inputs_require_grad = false);

Prediction predict(ModelParams& params, const HeteroGraph& normalized_graph);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
  std::vector<double> class_weights;  // empty = inverse class frequency
  int folds = 6;      // group-stratified validation split
  int val_fold = 0;   // fold held out for checkpoint selection
  // Relation-masking ablation baked into the checkpoint: "all", "vessel"
  // (VES_VES only) or "ica" (ICA_ICA + FAZ_ICA).
  std::string relations = "all";
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// The keep-set for a named ablation; throws on unknown names.
std::vector<Relation> relation_set(const std::string& name);
// Applies the checkpoint's relation mask ("all" is the identity).
HeteroGraph apply_relation_mask(const HeteroGraph& graph, const std::string& name);

struct EpochStats {
  double train_loss = 0.0;
  double val_balanced_agreement = 0.0;
  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = -1;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct Checkpoint {
  ModelParams params;
  NormStats norm_stats;
  std::array<std::vector<std::string>, kNumNodeTypes> feature_names;
  TrainConfig train_config;
  TrainHistory history;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Class-weighted cross-entropy training with Adam-style updates. Graphs carry
// raw features; normalization statistics are fitted on the training part of
// the internal group-stratified split and stored in the checkpoint. The
// best-validation-epoch parameters are returned. Deterministic under
// cfg.seed.
Checkpoint train(const std::vector<HeteroGraph>& graphs, const GnnConfig& model_cfg,
                 const TrainConfig& cfg);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace retigraph
