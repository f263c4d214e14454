// Acceptance gate: runs every primary criterion end to end and prints one
// pass/fail line each. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "retigraph/biomarkers.hpp"
#include "retigraph/dataset.hpp"
#include "retigraph/explain.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/gnn.hpp"
#include "retigraph/ica_graph.hpp"
#include "retigraph/metrics.hpp"
#include "retigraph/split.hpp"
#include "retigraph/synth.hpp"
#include "retigraph/vessel_graph.hpp"

using namespace retigraph;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string name;
  std::function<bool(std::string&)> run;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

IntensityGrid flat_image(int w, int h, double v = 0.5) {
  IntensityGrid img;
  img.width = w;
  img.height = h;
  img.values.assign(static_cast<size_t>(w) * h, v);
  return img;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------

bool raster_oracles(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  // exhaustive 4x4 masks, both connectivities
  for (uint32_t bits = 0; bits < (1u << 16); ++bits) {
    BinaryGrid g(4, 4);
    for (int i = 0; i < 16; ++i) g.mask[i] = (bits >> i) & 1;
    for (int conn : {4, 8}) {
      const LabelGrid ours = connected_components(g, conn);
      const LabelGrid ref = oracle::flood_fill_components(g, conn);
      if (ours.labels != ref.labels || ours.num_labels != ref.num_labels) {
        detail = "mismatch on 4x4 mask " + std::to_string(bits);
        return false;
      }
    }
  }
  // 500 random 64x64 masks
  Rng rng(1);
  for (int it = 0; it < 500; ++it) {
    const BinaryGrid g = oracle::random_mask(64, rng, 0.3 + 0.4 * rng.uniform());
    for (int conn : {4, 8}) {
      const LabelGrid ours = connected_components(g, conn);
      const LabelGrid ref = oracle::flood_fill_components(g, conn);
      if (ours.labels != ref.labels) {
        detail = "mismatch on random mask " + std::to_string(it);
        return false;
      }
    }
  }
  // distance transform vs brute force
  for (int it = 0; it < 40; ++it) {
    const BinaryGrid g = it % 2 == 0 ? oracle::random_mask(64, rng, 0.75)
                                     : oracle::random_blobs(64, rng);
    const std::vector<double> fast = distance_transform(g);
    const std::vector<double> slow = oracle::brute_force_distance(g);
    for (size_t i = 0; i < fast.size(); ++i)
      if (std::abs(fast[i] - slow[i]) > 1e-9) {
        detail = "distance mismatch " + fmt(fast[i]) + " vs " + fmt(slow[i]);
        return false;
      }
  }
  const double dt = seconds_since(t0);
  detail = fmt(dt) + " s (budget 60 s)";
  return dt < 60.0;
}

bool skeleton_invariants(std::string& detail) {
  Rng rng(2);
  for (int it = 0; it < 200; ++it) {
    const BinaryGrid g = oracle::random_blobs(64, rng, 4 + static_cast<int>(rng.uniform_index(8)));
    const BinaryGrid skel = skeletonize(g);
    for (size_t i = 0; i < g.mask.size(); ++i)
      if (skel.mask[i] && !g.mask[i]) {
        detail = "skeleton escapes the foreground (mask " + std::to_string(it) + ")";
        return false;
      }
    if (oracle::component_count(skel, 8) != oracle::component_count(g, 8)) {
      detail = "component count changed (mask " + std::to_string(it) + ")";
      return false;
    }
    if (!(skeletonize(skel) == skel)) {
      detail = "not idempotent (mask " + std::to_string(it) + ")";
      return false;
    }
  }
  detail = "200 random blob masks";
  return true;
}

bool graph_construction_invariants(std::string& detail) {
  // wheel fixture
  {
    const int S = 128;
    BinaryGrid seg(S, S);
    const double cx = S / 2.0, cy = S / 2.0, ring_r = 24.0;
    auto stamp = [&](double px, double py, double r) {
      for (int y = std::max(0, static_cast<int>(py - r) - 1);
           y <= std::min(S - 1, static_cast<int>(py + r) + 1); ++y)
        for (int x = std::max(0, static_cast<int>(px - r) - 1);
             x <= std::min(S - 1, static_cast<int>(px + r) + 1); ++x) {
          const double dx = x - px, dy = y - py;
          if (dx * dx + dy * dy <= r * r) seg.set(x, y, true);
        }
    };
    const double pi = 3.14159265358979323846;
    for (int s = 0; s < 720; ++s)
      stamp(cx + ring_r * std::cos(2.0 * pi * s / 720.0),
            cy + ring_r * std::sin(2.0 * pi * s / 720.0), 1.5);
    for (int a = 0; a < 6; ++a) {
      const double theta = 2.0 * pi * a / 6.0 + pi / 6.0;
      for (double r = ring_r; r < S; r += 0.5)
        stamp(cx + r * std::cos(theta), cy + r * std::sin(theta), 1.5);
    }
    const HeteroGraph g = assemble(seg, flat_image(S, S));
    if (g.rel(Relation::FazIca).size() != 6 || g.rel(Relation::FazVes).size() != 6) {
      detail = "wheel: " + std::to_string(g.rel(Relation::FazIca).size()) + " FAZ_ICA, " +
               std::to_string(g.rel(Relation::FazVes).size()) + " FAZ_VES (want 6/6)";
      return false;
    }
  }

  for (uint64_t seed : {101ull, 102ull, 103ull, 104ull}) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.size = 192;
    cfg.dropout_rate = 0.15;
    cfg.aneurysm_count = 2;
    const SynthSample smp = generate(cfg);

    // slab-pixel partition
    const BinaryGrid skel = skeletonize(smp.seg);
    const SkeletonClassification cls = classify_skeleton(skel);
    const TraceResult tr = trace_segments(skel, cls);
    std::set<std::pair<int, int>> seen;
    size_t path_px = 0;
    for (const auto& path : tr.paths)
      for (const Pixel& p : path) {
        if (!seen.insert({p.x, p.y}).second) {
          detail = "pixel in two segments (seed " + std::to_string(seed) + ")";
          return false;
        }
        ++path_px;
      }
    size_t slab_px = 0;
    for (int y = 0; y < cls.height; ++y)
      for (int x = 0; x < cls.width; ++x) {
        const SkelClass c = cls.cls(x, y);
        if (c == SkelClass::Slab || c == SkelClass::Endpoint) {
          ++slab_px;
          if (!seen.count({x, y})) {
            detail = "slab pixel missing from all segments (seed " + std::to_string(seed) + ")";
            return false;
          }
        }
      }
    if (path_px != slab_px) {
      detail = "slab partition count mismatch";
      return false;
    }

    // assembled-graph invariants
    const HeteroGraph g = assemble(smp.seg, smp.img);
    if (g.of(NodeType::Faz).count != 1) {
      detail = "FAZ count != 1";
      return false;
    }
    const int nv = g.of(NodeType::Vessel).count, ni = g.of(NodeType::Ica).count;
    std::set<std::pair<int32_t, int32_t>> dedup;
    for (const auto& [a, b] : g.rel(Relation::VesVes)) {
      if (a >= b || b >= nv || !dedup.insert({a, b}).second) {
        detail = "VES_VES edge list broken";
        return false;
      }
    }
    dedup.clear();
    for (const auto& [a, b] : g.rel(Relation::IcaIca)) {
      if (a >= b || b >= ni || !dedup.insert({a, b}).second) {
        detail = "ICA_ICA edge list broken";
        return false;
      }
    }
    for (const auto& [f, v] : g.rel(Relation::FazVes))
      if (f != 0 || v < 0 || v >= nv) {
        detail = "FAZ_VES typing broken";
        return false;
      }
    for (const auto& [f, i] : g.rel(Relation::FazIca))
      if (f != 0 || i < 0 || i >= ni) {
        detail = "FAZ_ICA typing broken";
        return false;
      }
    for (const auto& [v, i] : g.rel(Relation::VesIca))
      if (v < 0 || v >= nv || i < 0 || i >= ni) {
        detail = "VES_ICA typing broken";
        return false;
      }

    // ICA + FAZ masks partition the background exactly
    BinaryGrid covered(g.meta.width, g.meta.height);
    size_t bg_count = 0;
    bool overlap = false;
    auto cover = [&](const PixelMask& m) {
      m.for_each_pixel([&](int x, int y) {
        if (covered.at(x, y)) overlap = true;
        covered.set(x, y, true);
        ++bg_count;
      });
    };
    for (const auto& m : g.of(NodeType::Ica).masks) cover(m);
    cover(g.of(NodeType::Faz).masks[0]);
    if (overlap || bg_count != smp.seg.mask.size() - smp.seg.count()) {
      detail = "ICA masks do not tile the background";
      return false;
    }
  }
  detail = "wheel fixture 6/6 + 4 synthetic images";
  return true;
}

bool gradient_correctness(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& check : gradcheck::run_layer_gradchecks(seed)) {
      worst = std::max(worst, check.max_err);
      if (check.max_err > 1e-4) {
        detail = check.name + " rel err " + fmt(check.max_err) + " (seed " +
                 std::to_string(seed) + ")";
        return false;
      }
    }
  }
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const double err = gradcheck::gnn_fd_check(seed);
    worst = std::max(worst, err);
    if (err > 1e-4) {
      detail = "full network rel err " + fmt(err) + " (seed " + std::to_string(seed) + ")";
      return false;
    }
  }
  const double dt = seconds_since(t0);
  detail = "worst rel err " + fmt(worst) + ", " + fmt(dt) + " s (budget 120 s)";
  return dt < 120.0;
}

bool ig_completeness(std::string& detail) {
  std::vector<HeteroGraph> raw;
  for (uint64_t s = 0; s < 4; ++s) {
    SynthConfig cfg;
    cfg.seed = 500 + s;
    cfg.size = 128;
    cfg.dropout_rate = 0.1;
    const SynthSample smp = generate(cfg);
    HeteroGraph g = assemble(smp.seg, smp.img);
    g.label = ClassLabel::Healthy;
    raw.push_back(std::move(g));
  }
  const NormStats stats = fit_norm_stats(raw);
  std::vector<HeteroGraph> train_norm;
  for (const HeteroGraph& g : raw) train_norm.push_back(normalize(g, stats));
  const BaselineIndex index = build_baseline_index(train_norm, stats, 25);

  GnnConfig cfg;
  cfg.in_dims = {raw[0].nodes[0].dim, raw[0].nodes[1].dim, raw[0].nodes[2].dim};
  ModelParams params = init_model(cfg, 3);

  double worst_ratio = 0.0;
  for (uint64_t s = 0; s < 10; ++s) {
    SynthConfig scfg;
    scfg.seed = 600 + s;
    scfg.size = 128;
    scfg.dropout_rate = 0.05 * (s % 3);
    scfg.aneurysm_count = static_cast<int>(s % 2);
    const SynthSample smp = generate(scfg);
    const HeteroGraph g = normalize(assemble(smp.seg, smp.img), stats);

    const Attribution a512 = integrated_gradients(g, params, index, -1, 512);
    const Attribution a32 = integrated_gradients(g, params, index, -1, 32);
    const double df = std::abs(a512.f_input - a512.f_baseline);
    const double tol = 1e-4 * df + 1e-6;
    worst_ratio = std::max(worst_ratio, a512.completeness_gap / tol);
    if (a512.completeness_gap > tol) {
      detail = "graph " + std::to_string(s) + ": gap " + fmt(a512.completeness_gap) + " > tol " +
               fmt(tol);
      return false;
    }
    if (!(a512.completeness_gap < a32.completeness_gap)) {
      detail = "graph " + std::to_string(s) + ": gap(512)=" + fmt(a512.completeness_gap) +
               " !< gap(32)=" + fmt(a32.completeness_gap);
      return false;
    }
  }
  detail = "10 graphs, worst gap at " + fmt(100.0 * worst_ratio) + "% of tolerance";
  return true;
}

bool dynamic_baseline_exactness(std::string& detail) {
  Rng rng(4);
  std::vector<Point> pts;
  for (int i = 0; i < 1500; ++i)
    pts.push_back({rng.uniform(0.0, 304.0), rng.uniform(0.0, 304.0)});
  KdTree tree;
  tree.build(pts);
  for (int q = 0; q < 100; ++q) {
    const Point query{rng.uniform(0.0, 304.0), rng.uniform(0.0, 304.0)};
    const int k = 1 + static_cast<int>(rng.uniform_index(30));
    std::vector<std::pair<double, int32_t>> d;
    for (size_t i = 0; i < pts.size(); ++i) {
      const double dx = query.x - pts[i].x, dy = query.y - pts[i].y;
      d.push_back({dx * dx + dy * dy, static_cast<int32_t>(i)});
    }
    std::sort(d.begin(), d.end());
    std::vector<int32_t> expect;
    for (int i = 0; i < k; ++i) expect.push_back(d[i].second);
    if (tree.knn(query, k) != expect) {
      detail = "kNN ids differ from linear scan (query " + std::to_string(q) + ")";
      return false;
    }
  }

  // k=1 at an indexed position returns that node's features exactly
  SynthConfig scfg;
  scfg.seed = 700;
  scfg.size = 128;
  const SynthSample smp = generate(scfg);
  HeteroGraph raw = assemble(smp.seg, smp.img);
  const NormStats stats = fit_norm_stats({raw});
  const HeteroGraph g = normalize(raw, stats);
  const BaselineIndex index = build_baseline_index({g}, stats, 1);
  for (int t = 0; t < kNumNodeTypes; ++t) {
    const NodeSet& ns = g.nodes[t];
    for (int32_t i = 0; i < ns.count; ++i) {
      const std::vector<double> bl =
          dynamic_baseline(ns.positions[i], static_cast<NodeType>(t), index);
      for (int32_t j = 0; j < ns.dim; ++j)
        if (bl[j] != g.normalized[t][static_cast<size_t>(i) * ns.dim + j]) {
          detail = "k=1 baseline differs from the node's own features";
          return false;
        }
    }
  }
  detail = "100 queries exact, k=1 locality exact";
  return true;
}

bool model_budget_and_invariance(std::string& detail) {
  GnnConfig cfg;
  const ModelParams params = init_model(cfg, 1);
  const int64_t count = param_count(params);
  if (count > kParamBudget) {
    detail = "parameter count " + std::to_string(count);
    return false;
  }

  // permutation invariance
  SynthConfig scfg;
  scfg.seed = 800;
  scfg.size = 128;
  scfg.dropout_rate = 0.15;
  const SynthSample smp = generate(scfg);
  HeteroGraph raw = assemble(smp.seg, smp.img);
  const NormStats stats = fit_norm_stats({raw});
  const HeteroGraph g = normalize(raw, stats);

  GnnConfig small;
  small.in_dims = {g.nodes[0].dim, g.nodes[1].dim, g.nodes[2].dim};
  ModelParams p2 = init_model(small, 5);
  const Prediction before = predict(p2, g);

  HeteroGraph permuted = g;
  const int nv = g.of(NodeType::Vessel).count;
  Rng rng(6);
  std::vector<int32_t> perm(nv);
  for (int i = 0; i < nv; ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<int32_t> inv(nv);
  for (int i = 0; i < nv; ++i) inv[perm[i]] = i;
  NodeSet& vn = permuted.of(NodeType::Vessel);
  const NodeSet& sv = g.of(NodeType::Vessel);
  for (int i = 0; i < nv; ++i) {
    std::copy(sv.row(perm[i]), sv.row(perm[i]) + sv.dim,
              vn.features.begin() + static_cast<size_t>(i) * sv.dim);
    std::copy(g.normalized[0].begin() + static_cast<size_t>(perm[i]) * sv.dim,
              g.normalized[0].begin() + static_cast<size_t>(perm[i] + 1) * sv.dim,
              permuted.normalized[0].begin() + static_cast<size_t>(i) * sv.dim);
    vn.positions[i] = sv.positions[perm[i]];
  }
  for (auto& [a, b] : permuted.rel(Relation::VesVes)) {
    a = inv[a];
    b = inv[b];
    if (a > b) std::swap(a, b);
  }
  for (auto& [v, i] : permuted.rel(Relation::VesIca)) v = inv[v];
  for (auto& [f, v] : permuted.rel(Relation::FazVes)) v = inv[v];
  const Prediction after = predict(p2, permuted);
  for (int c = 0; c < kNumClasses; ++c)
    if (std::abs(before.logits[c] - after.logits[c]) > 1e-9) {
      detail = "logit drift " + fmt(std::abs(before.logits[c] - after.logits[c]));
      return false;
    }

  // seeded training reproducibility
  const std::vector<HeteroGraph> data = make_dataset(4, 900, 128);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 11;
  tc.folds = 3;
  GnnConfig mc;
  mc.hidden_dim = 8;
  const Checkpoint a = train(data, mc, tc);
  const Checkpoint b = train(data, mc, tc);
  if (!(a == b)) {
    detail = "repeated training produced different checkpoints";
    return false;
  }
  detail = std::to_string(count) + " params <= 60000, invariance + reproducibility hold";
  return true;
}

struct StagingResult {
  double auc = 0.0;
  double bal = 0.0;
};

StagingResult eval_on_fold(Checkpoint& ckpt, const std::vector<HeteroGraph>& graphs,
                           const std::vector<int>& fold_of, int test_fold) {
  std::vector<std::array<double, kNumClasses>> probs;
  std::vector<int> labels;
  for (size_t i = 0; i < graphs.size(); ++i) {
    if (fold_of[i] != test_fold) continue;
    const HeteroGraph g = normalize(
        apply_relation_mask(graphs[i], ckpt.train_config.relations), ckpt.norm_stats);
    probs.push_back(predict(ckpt.params, g).probabilities);
    labels.push_back(static_cast<int>(*graphs[i].label));
  }
  const MetricsReport rep = compute_metrics(probs, labels);
  return {rep.roc_auc_macro, rep.balanced_agreement};
}

bool synthetic_staging(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<HeteroGraph> graphs = make_dataset(200, 7);
  const double gen_time = seconds_since(t0);

  std::vector<int> labels;
  std::vector<std::string> groups;
  for (const HeteroGraph& g : graphs) {
    labels.push_back(static_cast<int>(*g.label));
    groups.push_back(g.meta.group_id);
  }
  const std::vector<int> fold_of = group_stratified_split(labels, groups, 6, 7);
  const int test_fold = 5;
  std::vector<HeteroGraph> train_set;
  for (size_t i = 0; i < graphs.size(); ++i)
    if (fold_of[i] != test_fold) train_set.push_back(graphs[i]);

  TrainConfig tc;
  tc.epochs = 100;
  tc.batch_size = 16;
  tc.seed = 7;
  tc.folds = 5;
  tc.val_fold = 0;
  GnnConfig mc;

  const auto t1 = std::chrono::steady_clock::now();
  Checkpoint het = train(train_set, mc, tc);
  const StagingResult het_result = eval_on_fold(het, graphs, fold_of, test_fold);
  const double train_eval_time = seconds_since(t1);

  if (het_result.auc < 0.90 || het_result.bal < 0.75) {
    detail = "heterogeneous AUC " + fmt(het_result.auc) + ", bal " + fmt(het_result.bal);
    return false;
  }
  if (train_eval_time > 600.0) {
    detail = "train+eval took " + fmt(train_eval_time) + " s (budget 600 s)";
    return false;
  }

  std::ostringstream os;
  os << "AUC " << fmt(het_result.auc) << ", bal " << fmt(het_result.bal) << ", gen "
     << fmt(gen_time) << " s, train+eval " << fmt(train_eval_time) << " s";

  for (const std::string& rel : {std::string("vessel"), std::string("ica")}) {
    TrainConfig atc = tc;
    atc.relations = rel;
    Checkpoint abl = train(train_set, mc, atc);
    const StagingResult r = eval_on_fold(abl, graphs, fold_of, test_fold);
    os << "; " << rel << " AUC " << fmt(r.auc);
    if (std::abs(r.auc - het_result.auc) > 0.15) {
      detail = os.str() + " -- " + rel + "-only ablation outside 0.15 AUC";
      return false;
    }
  }
  detail = os.str();
  return true;
}

bool figure_trend_analogue(std::string& detail) {
  const int seeds = 50;
  std::array<std::vector<double>, kNumClasses> ica_median, vessel_q90, density;
  for (int c = 0; c < kNumClasses; ++c) {
    for (int s = 0; s < seeds; ++s) {
      SynthConfig cfg;
      cfg.seed = derive_seed(4242, static_cast<uint64_t>(c) * 1000 + s);
      cfg.size = 304;
      cfg.dropout_rate = kDefaultClassKnobs[c].dropout_rate;
      cfg.aneurysm_count = kDefaultClassKnobs[c].aneurysm_count;
      cfg.faz_scale = kDefaultClassKnobs[c].faz_scale;
      const SynthSample smp = generate(cfg);

      const auto nodes = extract_ica_nodes(smp.seg, smp.img);
      std::vector<double> areas;
      for (const auto& n : nodes) areas.push_back(n.area_mm2);
      ica_median[c].push_back(quantile(areas, 0.5));

      const VesselGraph vg = build_vessel_graph(smp.seg, smp.img);
      std::vector<double> seg_areas;
      for (const auto& sgm : vg.segments) seg_areas.push_back(sgm.features.area_mm2);
      vessel_q90[c].push_back(seg_areas.empty() ? 0.0 : quantile(seg_areas, 0.9));

      density[c].push_back(static_cast<double>(smp.seg.count()) /
                           static_cast<double>(smp.seg.mask.size()));
    }
  }
  auto center = [](std::vector<double> v) { return quantile(std::move(v), 0.5); };
  const double ica0 = center(ica_median[0]), ica1 = center(ica_median[1]),
               ica2 = center(ica_median[2]);
  const double v0 = center(vessel_q90[0]), v1 = center(vessel_q90[1]), v2 = center(vessel_q90[2]);
  const double d0 = center(density[0]), d1 = center(density[1]), d2 = center(density[2]);

  detail = "ICA median " + fmt(ica0) + "<" + fmt(ica1) + "<" + fmt(ica2) + "; vessel q90 " +
           fmt(v0) + "<" + fmt(v1) + "<" + fmt(v2) + "; density " + fmt(d0) + ">" + fmt(d1) + ">" +
           fmt(d2);
  return ica0 < ica1 && ica1 < ica2 && v0 < v1 && v1 < v2 && d0 > d1 && d1 > d2;
}

bool metrics_oracle(std::string& detail) {
  if (std::abs(roc_auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) - 0.75) > 1e-12) {
    detail = "4-sample AUC fixture";
    return false;
  }
  std::vector<std::array<double, kNumClasses>> constant(8, {0.9, 0.05, 0.05});
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  if (std::abs(compute_metrics(constant, labels).balanced_agreement - 0.5) > 1e-12) {
    detail = "constant predictor balanced agreement";
    return false;
  }
  detail = "pair-counting AUC 0.75, constant-predictor agreement 0.5";
  return true;
}

bool end_to_end_determinism(std::string& detail) {
  const fs::path base = fs::temp_directory_path() / "retigraph_acceptance_e2e";
  fs::remove_all(base);

  auto pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    // synth
    const auto samples = make_dataset_samples(4, 77, 128);
    write_dataset(samples, dir.string(), /*with_graphs=*/true);
    // train
    std::vector<HeteroGraph> graphs = load_dataset_graphs(dir.string());
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 8;
    tc.seed = 13;
    tc.folds = 3;
    GnnConfig mc;
    mc.hidden_dim = 16;
    Checkpoint ckpt = train(graphs, mc, tc);
    save_checkpoint(ckpt, (dir / "model.ckpt").string());
    // index from the training folds
    std::vector<HeteroGraph> normalized;
    for (const HeteroGraph& g : graphs) normalized.push_back(normalize(g, ckpt.norm_stats));
    const BaselineIndex index = build_baseline_index(normalized, ckpt.norm_stats, 10);
    save_baseline_index(index, (dir / "idx.json").string());
    // predict
    const HeteroGraph g0 = normalize(graphs[0], ckpt.norm_stats);
    const Prediction p = predict(ckpt.params, g0);
    std::string pred_text = class_label_name(p.predicted);
    for (double v : p.probabilities) pred_text += "," + fmt(v);
    write_file_atomic((dir / "prediction.txt").string(), pred_text);
    // explain
    const Attribution attr = integrated_gradients(g0, ckpt.params, index, -1, 64);
    write_file_atomic((dir / "report.json").string(),
                      attribution_report_json(g0, attr, p, 20, 4));
    const IntensityGrid img =
        load_image((dir / "images" / (graphs[0].meta.image_id + ".pgm")).string());
    save_png(render_overlay(g0, attr, img), (dir / "overlay.png").string());
  };

  pipeline(base / "a");
  pipeline(base / "b");

  for (const std::string rel :
       {std::string("graphs/synth_Healthy_0000.json"), std::string("graphs/synth_PDR_0002.json"),
        std::string("model.ckpt"), std::string("prediction.txt"), std::string("report.json"),
        std::string("overlay.png"), std::string("labels.csv")}) {
    if (read_file_bytes((base / "a" / rel).string()) !=
        read_file_bytes((base / "b" / rel).string())) {
      detail = rel + " differs between runs";
      return false;
    }
  }
  detail = "graphs, checkpoint, prediction, report and overlay byte-identical";
  return true;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"raster oracles (components + distance transform)", raster_oracles},
      {"skeleton invariants (subset, components, idempotence)", skeleton_invariants},
      {"graph construction invariants + wheel fixture", graph_construction_invariants},
      {"gradient correctness vs finite differences", gradient_correctness},
      {"integrated-gradients completeness axiom", ig_completeness},
      {"dynamic baseline exactness", dynamic_baseline_exactness},
      {"model budget, invariance, reproducibility", model_budget_and_invariance},
      {"synthetic staging quality + ablations", synthetic_staging},
      {"feature trend analogue across stages", figure_trend_analogue},
      {"metrics oracle fixtures", metrics_oracle},
      {"end-to-end determinism", end_to_end_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] %s (%.1f s)%s%s\n", ok ? "PASS" : "FAIL", c.name.c_str(),
                seconds_since(t0), detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    failures += !ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
