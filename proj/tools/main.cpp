#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include <nlohmann/json.hpp>

#include "retigraph/biomarkers.hpp"
#include "retigraph/config.hpp"
#include "retigraph/dataset.hpp"
#include "retigraph/errors.hpp"
#include "retigraph/explain.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/gnn.hpp"
#include "retigraph/metrics.hpp"
#include "retigraph/split.hpp"
#include "retigraph/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace retigraph;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonOpts {
  std::string config_path;
};

PipelineConfig load_config(const CommonOpts& common) {
  if (common.config_path.empty()) return PipelineConfig{};
  return load_pipeline_config(common.config_path);
}

// Loads the segmentation map (thresholded) and intensity image.
std::pair<BinaryGrid, IntensityGrid> load_pair(const std::string& seg_path,
                                               const std::string& img_path,
                                               const PipelineConfig& cfg) {
  const IntensityGrid seg_img = load_image(seg_path, cfg.pixel_size_mm);
  const IntensityGrid img = load_image(img_path, cfg.pixel_size_mm);
  if (seg_img.width != img.width || seg_img.height != img.height)
    throw ArgumentError("segmentation and image dimensions differ");
  return {threshold(seg_img, cfg.threshold), img};
}

json metrics_to_json(const MetricsReport& rep) {
  json j;
  j["balanced_agreement"] = rep.balanced_agreement;
  json f1;
  for (int c = 0; c < kNumClasses; ++c)
    if (rep.f1_defined[c]) f1[class_label_name(static_cast<ClassLabel>(c))] = rep.f1[c];
  j["f1"] = std::move(f1);
  json auc;
  for (int c = 0; c < kNumClasses; ++c)
    if (rep.auc_defined[c]) auc[class_label_name(static_cast<ClassLabel>(c))] = rep.auc_one_vs_rest[c];
  j["roc_auc_one_vs_rest"] = std::move(auc);
  j["roc_auc_macro"] = rep.roc_auc_macro;
  if (rep.binary_dr_defined) j["roc_auc_binary_dr"] = rep.roc_auc_binary_dr;
  j["missing_class_warning"] = rep.missing_class_warning;
  return j;
}

std::map<std::string, int> load_fold_file(const std::string& path) {
  std::map<std::string, int> out;
  const std::string text = read_file_text(path);
  size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      if (line != "id,fold") throw FormatError("fold file must start with 'id,fold'");
      header = false;
      continue;
    }
    const size_t comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("bad fold row: " + line);
    out[line.substr(0, comma)] = std::stoi(line.substr(comma + 1));
  }
  return out;
}

int cmd_build_graph(const CommonOpts& common, const std::string& seg_path,
                    const std::string& img_path, const std::string& out_path,
                    const std::string& label, const std::string& id, const std::string& group) {
  const PipelineConfig cfg = load_config(common);
  auto [seg, img] = load_pair(seg_path, img_path, cfg);
  AssembleOptions opts;
  opts.pixel_size_mm = cfg.pixel_size_mm;
  opts.include_coords = cfg.include_coords;
  opts.image_id = id.empty() ? fs::path(img_path).stem().string() : id;
  opts.group_id = group.empty() ? opts.image_id : group;
  HeteroGraph g = assemble(seg, img, opts);
  if (!label.empty()) g.label = parse_class_label(label);
  save_graph(g, out_path);
  json j;
  j["graph"] = out_path;
  j["vessel_nodes"] = g.of(NodeType::Vessel).count;
  j["ica_nodes"] = g.of(NodeType::Ica).count;
  for (int r = 0; r < kNumRelations; ++r)
    j["edges"][relation_name(static_cast<Relation>(r))] = g.edges[r].size();
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_train(const CommonOpts& common, const std::string& dataset_dir,
              const std::string& out_path, const std::string& relations,
              const std::string& index_out, int epochs_override, uint64_t seed_override,
              bool seed_set) {
  const PipelineConfig cfg = load_config(common);
  std::vector<HeteroGraph> graphs = load_dataset_graphs(dataset_dir);
  TrainConfig tc = cfg.train;
  tc.relations = relations;
  if (epochs_override >= 0) tc.epochs = epochs_override;
  if (seed_set) tc.seed = seed_override;
  const Checkpoint ckpt = train(graphs, cfg.model, tc);
  save_checkpoint(ckpt, out_path);

  if (!index_out.empty()) {
    // Index over the graphs the checkpoint was fitted on (training folds).
    const std::vector<int> folds = group_stratified_split(
        [&] {
          std::vector<int> l;
          for (const auto& g : graphs) l.push_back(static_cast<int>(*g.label));
          return l;
        }(),
        [&] {
          std::vector<std::string> gr;
          for (const auto& g : graphs)
            gr.push_back(g.meta.group_id.empty() ? g.meta.image_id : g.meta.group_id);
          return gr;
        }(),
        tc.folds, tc.seed);
    std::vector<HeteroGraph> train_graphs;
    for (size_t i = 0; i < graphs.size(); ++i)
      if (folds[i] != tc.val_fold)
        train_graphs.push_back(normalize(apply_relation_mask(graphs[i], tc.relations),
                                         ckpt.norm_stats));
    save_baseline_index(build_baseline_index(train_graphs, ckpt.norm_stats, cfg.explain_k),
                        index_out);
  }

  json j;
  j["checkpoint"] = out_path;
  j["graphs"] = graphs.size();
  j["best_epoch"] = ckpt.history.best_epoch;
  j["best_val_balanced_agreement"] =
      ckpt.history.best_epoch >= 0
          ? ckpt.history.epochs[ckpt.history.best_epoch].val_balanced_agreement
          : 0.0;
  j["final_train_loss"] =
      ckpt.history.epochs.empty() ? 0.0 : ckpt.history.epochs.back().train_loss;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& graph_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  const HeteroGraph g = normalize(
      apply_relation_mask(load_graph(graph_path), ckpt.train_config.relations), ckpt.norm_stats);
  const Prediction p = predict(ckpt.params, g);
  json j;
  j["class"] = class_label_name(p.predicted);
  json probs;
  for (int c = 0; c < kNumClasses; ++c)
    probs[class_label_name(static_cast<ClassLabel>(c))] = p.probabilities[c];
  j["probabilities"] = std::move(probs);
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_explain(const CommonOpts& common, const std::string& model_path,
                const std::string& graph_path, const std::string& index_path,
                const std::string& report_path, const std::string& overlay_path,
                const std::string& image_path, const std::string& target,
                int steps_override, const std::string& mode_name, int top_nodes, int top_feats) {
  const PipelineConfig cfg = load_config(common);
  Checkpoint ckpt = load_checkpoint(model_path);
  const HeteroGraph raw = apply_relation_mask(load_graph(graph_path), ckpt.train_config.relations);
  const HeteroGraph g = normalize(raw, ckpt.norm_stats);
  const BaselineIndex index = load_baseline_index(index_path);

  int target_class = -1;
  if (!target.empty()) target_class = static_cast<int>(parse_class_label(target));
  const int steps = steps_override > 0 ? steps_override : cfg.explain_steps;

  const Attribution attr = integrated_gradients(g, ckpt.params, index, target_class, steps);
  const Prediction pred = predict(ckpt.params, g);
  write_file_atomic(report_path, attribution_report_json(g, attr, pred, top_nodes, top_feats));

  if (!overlay_path.empty()) {
    IntensityGrid base;
    if (!image_path.empty()) {
      base = load_image(image_path, g.meta.pixel_size_mm);
    } else {
      // flat background when no base image is supplied
      base.width = g.meta.width;
      base.height = g.meta.height;
      base.values.assign(static_cast<size_t>(base.width) * base.height, 0.0);
    }
    OverlayOptions opts;
    if (mode_name == "vessel")
      opts.mode = OverlayMode::Vessel;
    else if (mode_name == "ica_faz")
      opts.mode = OverlayMode::IcaFaz;
    else if (mode_name == "combined")
      opts.mode = OverlayMode::Combined;
    else
      throw ArgumentError("unknown overlay mode: " + mode_name);
    save_png(render_overlay(g, attr, base, opts), overlay_path);
  }

  json j;
  j["report"] = report_path;
  j["target_class"] = class_label_name(static_cast<ClassLabel>(attr.target_class));
  j["completeness_gap"] = attr.completeness_gap;
  if (!overlay_path.empty()) j["overlay"] = overlay_path;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_build_index(const CommonOpts& common, const std::string& dataset_dir,
                    const std::string& model_path, const std::string& out_path, int k_override) {
  const PipelineConfig cfg = load_config(common);
  Checkpoint ckpt = load_checkpoint(model_path);
  std::vector<HeteroGraph> graphs = load_dataset_graphs(dataset_dir);
  std::vector<HeteroGraph> normalized;
  for (const HeteroGraph& g : graphs)
    normalized.push_back(
        normalize(apply_relation_mask(g, ckpt.train_config.relations), ckpt.norm_stats));
  const int k = k_override > 0 ? k_override : cfg.explain_k;
  save_baseline_index(build_baseline_index(normalized, ckpt.norm_stats, k), out_path);
  json j;
  j["index"] = out_path;
  j["k"] = k;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_biomarkers(const CommonOpts& common, const std::string& seg_path,
                   const std::string& img_path, const std::string& out_path, bool embeddings) {
  const PipelineConfig cfg = load_config(common);
  auto [seg, img] = load_pair(seg_path, img_path, cfg);
  const auto nodes = extract_ica_nodes(seg, img);
  const int32_t faz_id = identify_faz(nodes, {seg.width / 2.0, seg.height / 2.0});
  const BiomarkerRecord rec = extract_biomarkers(seg, img, make_faz_node(nodes[faz_id]));

  std::vector<std::string> names = biomarker_names();
  std::vector<double> values = biomarker_values(rec);
  if (embeddings) {
    AssembleOptions opts;
    opts.pixel_size_mm = cfg.pixel_size_mm;
    opts.image_id = fs::path(img_path).stem().string();
    const EmbeddingAggregate agg = aggregate_embeddings(assemble(seg, img, opts));
    names.insert(names.end(), agg.names.begin(), agg.names.end());
    values.insert(values.end(), agg.values.begin(), agg.values.end());
  }
  export_csv(names, {{fs::path(img_path).stem().string(), values}}, out_path);
  json j;
  j["csv"] = out_path;
  j["vessel_density"] = rec.vessel_density;
  j["fractal_dimension"] = rec.fractal_dimension;
  j["degenerate_faz"] = rec.degenerate_faz;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_synth(const CommonOpts& common, int per_class, uint64_t seed, const std::string& out_dir,
              int size) {
  const PipelineConfig cfg = load_config(common);
  const int n = size > 0 ? size : cfg.synth_size;
  const auto samples = make_dataset_samples(per_class, seed, n);
  write_dataset(samples, out_dir, /*with_graphs=*/true, cfg.threshold, cfg.include_coords);
  json j;
  j["dir"] = out_dir;
  j["samples"] = samples.size();
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_dir,
             const std::string& fold_file, int fold) {
  Checkpoint ckpt = load_checkpoint(model_path);
  const bool binary = dataset_is_binary(dataset_dir);
  std::vector<HeteroGraph> graphs = load_dataset_graphs(dataset_dir, binary);

  std::map<std::string, int> fold_of;
  if (!fold_file.empty()) fold_of = load_fold_file(fold_file);

  std::vector<std::array<double, kNumClasses>> probs;
  std::vector<int> labels;
  for (const HeteroGraph& raw : graphs) {
    if (!fold_file.empty()) {
      auto it = fold_of.find(raw.meta.image_id);
      if (it == fold_of.end()) throw ArgumentError("no fold for sample " + raw.meta.image_id);
      if (fold >= 0 && it->second != fold) continue;
    }
    const HeteroGraph g =
        normalize(apply_relation_mask(raw, ckpt.train_config.relations), ckpt.norm_stats);
    const Prediction p = predict(ckpt.params, g);
    probs.push_back(p.probabilities);
    labels.push_back(static_cast<int>(*raw.label));
  }
  if (probs.empty()) throw ArgumentError("no samples selected for evaluation");

  json j;
  j["samples"] = probs.size();
  if (binary) {
    // DR-vs-healthy schema: predictions pooled into a DR score.
    std::vector<double> scores;
    std::vector<int> dr_labels, dr_preds;
    for (size_t i = 0; i < probs.size(); ++i) {
      scores.push_back(probs[i][1] + probs[i][2]);
      dr_labels.push_back(labels[i] != 0);
      dr_preds.push_back(probs[i][1] + probs[i][2] > probs[i][0]);
    }
    std::array<double, 2> recall{}, count{};
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      count[dr_labels[i]] += 1.0;
      recall[dr_labels[i]] += dr_preds[i] == dr_labels[i];
      tp += dr_preds[i] && dr_labels[i];
      fp += dr_preds[i] && !dr_labels[i];
      fn += !dr_preds[i] && dr_labels[i];
      tn += !dr_preds[i] && !dr_labels[i];
    }
    double bal = 0.0;
    int present = 0;
    for (int c = 0; c < 2; ++c)
      if (count[c] > 0) {
        bal += recall[c] / count[c];
        ++present;
      }
    j["balanced_agreement"] = present ? bal / present : 0.0;
    j["f1_healthy"] = (2 * tn + fn + fp) > 0 ? 2.0 * tn / (2.0 * tn + fn + fp) : 0.0;
    j["f1_dr"] = (2 * tp + fp + fn) > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
    j["roc_auc"] = roc_auc(scores, dr_labels);
    j["pr_auc"] = average_precision(scores, dr_labels);
  } else {
    j["metrics"] = metrics_to_json(compute_metrics(probs, labels));
  }
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_split(const std::string& dataset_dir, int folds, uint64_t seed,
              const std::string& out_path) {
  const auto rows = load_labels_csv((fs::path(dataset_dir) / "labels.csv").string());
  std::vector<int> labels;
  std::vector<std::string> groups;
  for (const LabelRow& r : rows) {
    labels.push_back(r.label == "DR" ? 1 : static_cast<int>(parse_class_label(r.label)));
    groups.push_back(r.group.empty() ? r.id : r.group);
  }
  const std::vector<int> assignment = group_stratified_split(labels, groups, folds, seed);
  std::string csv = "id,fold\r\n";
  for (size_t i = 0; i < rows.size(); ++i)
    csv += rows[i].id + "," + std::to_string(assignment[i]) + "\r\n";
  const std::string path =
      out_path.empty() ? (fs::path(dataset_dir) / "splits.csv").string() : out_path;
  write_file_atomic(path, csv);

  json j;
  j["splits"] = path;
  j["folds"] = folds;
  std::vector<int> counts(folds, 0);
  for (int f : assignment) ++counts[f];
  j["fold_sizes"] = counts;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_feature_report(const std::string& dataset_dir, const std::string& out_path,
                       const std::string& csv_path) {
  const std::vector<HeteroGraph> graphs = load_dataset_graphs(dataset_dir);
  const FeatureDistributionReport rep = feature_distribution_report(graphs);
  write_file_atomic(out_path, distribution_report_json(rep));
  if (!csv_path.empty()) write_file_atomic(csv_path, distribution_report_csv(rep));
  json j;
  j["report"] = out_path;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Biology-informed heterogeneous vascular graphs: construction, staging, explanation"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--config", common.config_path, "TOML configuration file")
      ->check(CLI::ExistingFile);

  // build-graph
  std::string seg_path, img_path, out_path, label, sample_id, group;
  auto* build = app.add_subcommand("build-graph", "Convert a segmentation + image into a graph");
  build->add_option("seg", seg_path, "segmentation map (PGM/PNG)")->required();
  build->add_option("img", img_path, "intensity image (PGM/PNG)")->required();
  build->add_option("-o,--out", out_path, "output graph JSON")->required();
  build->add_option("--label", label, "class label (Healthy/NPDR/PDR)");
  build->add_option("--id", sample_id, "sample id (default: image stem)");
  build->add_option("--group", group, "group id for split leakage control");

  // train
  std::string dataset_dir, relations = "all", index_out;
  int epochs_override = -1;
  uint64_t seed_override = 0;
  auto* tr = app.add_subcommand("train", "Train the staging model on a dataset directory");
  tr->add_option("dataset", dataset_dir, "dataset directory")->required();
  tr->add_option("-o,--out", out_path, "output checkpoint")->required();
  tr->add_option("--relations", relations, "relation ablation: all|vessel|ica");
  tr->add_option("--index-out", index_out, "also write the explanation baseline index");
  tr->add_option("--epochs", epochs_override, "override configured epoch count");
  auto* seed_opt = tr->add_option("--seed", seed_override, "override configured seed");

  // predict
  std::string model_path, graph_path;
  auto* pr = app.add_subcommand("predict", "Predict the stage of one graph");
  pr->add_option("model", model_path, "checkpoint")->required();
  pr->add_option("graph", graph_path, "graph JSON")->required();

  // explain
  std::string index_path, report_path, overlay_path, base_image, target, mode_name = "combined";
  int steps_override = -1, top_nodes = 25, top_feats = 4;
  auto* ex = app.add_subcommand("explain", "Integrated-gradients explanation for one graph");
  ex->add_option("model", model_path, "checkpoint")->required();
  ex->add_option("graph", graph_path, "graph JSON")->required();
  ex->add_option("--index", index_path, "baseline index file")->required();
  ex->add_option("-o,--out", report_path, "attribution report JSON")->required();
  ex->add_option("--overlay", overlay_path, "overlay PNG output");
  ex->add_option("--image", base_image, "base image for the overlay");
  ex->add_option("--target", target, "explained class (default: predicted)");
  ex->add_option("--steps", steps_override, "integration steps");
  ex->add_option("--mode", mode_name, "overlay mode: vessel|ica_faz|combined");
  ex->add_option("--top-nodes", top_nodes, "nodes in the report");
  ex->add_option("--top-features", top_feats, "features per node in the report");

  // build-index
  int k_override = -1;
  auto* bi = app.add_subcommand("build-index", "Build the dynamic-baseline index from a dataset");
  bi->add_option("dataset", dataset_dir, "dataset directory")->required();
  bi->add_option("model", model_path, "checkpoint (for normalization stats)")->required();
  bi->add_option("-o,--out", out_path, "output index file")->required();
  bi->add_option("-k", k_override, "neighbor count");

  // biomarkers
  bool with_embeddings = false;
  auto* bm = app.add_subcommand("biomarkers", "Classical biomarker extraction to CSV");
  bm->add_option("seg", seg_path, "segmentation map")->required();
  bm->add_option("img", img_path, "intensity image")->required();
  bm->add_option("-o,--out", out_path, "output CSV")->required();
  bm->add_flag("--embeddings", with_embeddings, "append aggregated node embeddings");

  // synth
  int per_class = 10, synth_size = -1;
  uint64_t synth_seed = 0;
  auto* sy = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
  sy->add_option("--per-class", per_class, "samples per class")->required();
  sy->add_option("--seed", synth_seed, "generator seed")->required();
  sy->add_option("-o,--out", out_path, "output dataset directory")->required();
  sy->add_option("--size", synth_size, "image size in pixels");

  // eval
  std::string fold_file;
  int eval_fold = -1;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ev->add_option("model", model_path, "checkpoint")->required();
  ev->add_option("dataset", dataset_dir, "dataset directory")->required();
  ev->add_option("--fold-file", fold_file, "splits.csv restricting evaluation");
  ev->add_option("--fold", eval_fold, "evaluate only this fold");

  // split
  int folds = 6;
  uint64_t split_seed = 0;
  auto* sp = app.add_subcommand("split", "Group-stratified fold assignment");
  sp->add_option("dataset", dataset_dir, "dataset directory")->required();
  sp->add_option("--folds", folds, "number of folds");
  sp->add_option("--seed", split_seed, "split seed")->required();
  sp->add_option("-o,--out", out_path, "output CSV (default: dataset/splits.csv)");

  // feature-report
  std::string report_csv;
  auto* fr = app.add_subcommand("feature-report", "Per-class feature distribution summaries");
  fr->add_option("dataset", dataset_dir, "dataset directory")->required();
  fr->add_option("-o,--out", out_path, "output JSON")->required();
  fr->add_option("--csv", report_csv, "also write a CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (build->parsed())
      return cmd_build_graph(common, seg_path, img_path, out_path, label, sample_id, group);
    if (tr->parsed())
      return cmd_train(common, dataset_dir, out_path, relations, index_out, epochs_override,
                       seed_override, seed_opt->count() > 0);
    if (pr->parsed()) return cmd_predict(model_path, graph_path);
    if (ex->parsed())
      return cmd_explain(common, model_path, graph_path, index_path, report_path, overlay_path,
                         base_image, target, steps_override, mode_name, top_nodes, top_feats);
    if (bi->parsed()) return cmd_build_index(common, dataset_dir, model_path, out_path, k_override);
    if (bm->parsed()) return cmd_biomarkers(common, seg_path, img_path, out_path, with_embeddings);
    if (sy->parsed()) return cmd_synth(common, per_class, synth_seed, out_path, synth_size);
    if (ev->parsed()) return cmd_eval(model_path, dataset_dir, fold_file, eval_fold);
    if (sp->parsed()) return cmd_split(dataset_dir, folds, split_seed, out_path);
    if (fr->parsed()) return cmd_feature_report(dataset_dir, out_path, report_csv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
