#include "retigraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "retigraph/errors.hpp"
#include "retigraph/rng.hpp"

namespace retigraph {

namespace {

constexpr double kBaseFazRadius = 15.0;

void stamp_disc(BinaryGrid& g, double cx, double cy, double r) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(g.width - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(g.height - 1, static_cast<int>(std::ceil(cy + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r * r) g.set(x, y, true);
    }
}

// Thick stroke: discs along the segment at sub-pixel steps.
void stamp_segment(BinaryGrid& g, Point a, Point b, double half_width) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::sqrt(dx * dx + dy * dy);
  const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    stamp_disc(g, a.x + t * dx, a.y + t * dy, half_width);
  }
}

void stamp_ring(BinaryGrid& g, double cx, double cy, double r, double half_width) {
  const double pi = 3.14159265358979323846;
  const int steps = std::max(16, static_cast<int>(std::ceil(2.0 * pi * r * 2.0)));
  for (int s = 0; s < steps; ++s) {
    const double t = 2.0 * pi * s / steps;
    stamp_disc(g, cx + r * std::cos(t), cy + r * std::sin(t), half_width);
  }
}

}  // namespace

SynthSample generate(const SynthConfig& cfg) {
  if (cfg.size < 64) throw ArgumentError("synth: size must be at least 64");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate > 1.0)
    throw ArgumentError("synth: dropout_rate must be in [0,1]");
  if (cfg.aneurysm_count < 0) throw ArgumentError("synth: aneurysm_count must be >= 0");
  if (cfg.faz_scale < 1.0) throw ArgumentError("synth: faz_scale must be >= 1");

  const int S = cfg.size;
  const double cx = S / 2.0, cy = S / 2.0;
  const double faz_r = kBaseFazRadius * cfg.faz_scale;
  Rng rng(derive_seed(cfg.seed, 0xa11));

  BinaryGrid seg(S, S);

  // Capillary ring enclosing the FAZ, with radial arterioles out to the edge.
  stamp_ring(seg, cx, cy, faz_r, 1.0);
  const double pi = 3.14159265358979323846;
  const int n_arterioles = 6;
  const double reach = std::sqrt(2.0) * S;
  for (int a = 0; a < n_arterioles; ++a) {
    const double theta = 2.0 * pi * a / n_arterioles + rng.uniform(-0.15, 0.15);
    const Point from{cx + (faz_r - 1.0) * std::cos(theta), cy + (faz_r - 1.0) * std::sin(theta)};
    const Point to{cx + reach * std::cos(theta), cy + reach * std::sin(theta)};
    stamp_segment(seg, from, to, 1.2);
  }

  // Jittered triangular capillary lattice.
  const double sx = cfg.mesh_spacing;
  const double sy = sx * 0.8660254037844386;
  const int rows = static_cast<int>(std::ceil(S / sy)) + 3;
  const int cols = static_cast<int>(std::ceil(S / sx)) + 3;
  struct Vertex {
    Point p;
    bool kept = false;
  };
  std::vector<Vertex> verts(static_cast<size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      Vertex& v = verts[static_cast<size_t>(r) * cols + c];
      const double jx = rng.uniform(-3.0, 3.0);
      const double jy = rng.uniform(-3.0, 3.0);
      v.p = {(c - 1) * sx + (r % 2 ? sx / 2.0 : 0.0) + jx, (r - 1) * sy + jy};
      const double dx = v.p.x - cx, dy = v.p.y - cy;
      v.kept = std::sqrt(dx * dx + dy * dy) > faz_r + 2.0;
    }

  struct MeshEdge {
    int32_t a, b;
    double width;
  };
  std::vector<MeshEdge> edges;
  auto vid = [&](int r, int c) { return static_cast<int32_t>(r) * cols + c; };
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const int targets[3][2] = {{r, c + 1},
                                 {r + 1, c + (r % 2 ? 0 : -1)},
                                 {r + 1, c + (r % 2 ? 1 : 0)}};
      for (const auto& t : targets) {
        if (t[0] < 0 || t[0] >= rows || t[1] < 0 || t[1] >= cols) continue;
        const Vertex& va = verts[vid(r, c)];
        const Vertex& vb = verts[vid(t[0], t[1])];
        const double width = rng.uniform() < 0.3 ? 1.0 : 0.6;
        if (!va.kept || !vb.kept) continue;
        // Keep the stroke only when it touches the visible crop.
        const bool a_in = va.p.x >= -sx && va.p.x < S + sx && va.p.y >= -sx && va.p.y < S + sx;
        const bool b_in = vb.p.x >= -sx && vb.p.x < S + sx && vb.p.y >= -sx && vb.p.y < S + sx;
        if (!a_in && !b_in) continue;
        edges.push_back({vid(r, c), vid(t[0], t[1]), width});
      }
    }

  // Capillary dropout: the disease knob that grows intercapillary areas.
  std::vector<MeshEdge> surviving;
  for (const MeshEdge& e : edges) {
    const double u = rng.uniform();
    if (u >= cfg.dropout_rate) surviving.push_back(e);
  }
  for (const MeshEdge& e : surviving)
    stamp_segment(seg, verts[e.a].p, verts[e.b].p, e.width);

  // Microaneurysm-like blobs on terminal capillaries.
  if (cfg.aneurysm_count > 0) {
    std::map<int32_t, int> degree;
    for (const MeshEdge& e : surviving) {
      ++degree[e.a];
      ++degree[e.b];
    }
    std::vector<int32_t> terminals;
    for (const auto& [v, d] : degree)
      if (d == 1 && verts[v].p.x >= 8 && verts[v].p.x < S - 8 && verts[v].p.y >= 8 &&
          verts[v].p.y < S - 8)
        terminals.push_back(v);
    rng.shuffle(terminals);
    const int n = std::min<int>(cfg.aneurysm_count, static_cast<int>(terminals.size()));
    for (int i = 0; i < n; ++i) {
      const double r = rng.uniform(3.0, 5.0);
      stamp_disc(seg, verts[terminals[i]].p.x, verts[terminals[i]].p.y, r);
    }
  }

  // The FAZ interior stays avascular whatever the strokes did.
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy < (faz_r - 1.0) * (faz_r - 1.0)) seg.set(x, y, false);
    }

  SynthSample sample;
  sample.seg = std::move(seg);
  sample.label = cfg.class_label;
  sample.img.width = S;
  sample.img.height = S;
  sample.img.pixel_size_mm = 3.0 / S;
  sample.img.values.resize(static_cast<size_t>(S) * S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double u = rng.uniform();
      sample.img.values[static_cast<size_t>(y) * S + x] =
          sample.seg.at(x, y) ? 0.6 + 0.4 * u : 0.15 * u;
    }
  return sample;
}

std::vector<DatasetSample> make_dataset_samples(int n_per_class, uint64_t seed, int size,
                                                const std::array<ClassKnobs, kNumClasses>& knobs) {
  if (n_per_class < 1) throw ArgumentError("make_dataset: n_per_class must be >= 1");
  std::vector<DatasetSample> out;
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassLabel label = static_cast<ClassLabel>(c);
    for (int i = 0; i < n_per_class; ++i) {
      SynthConfig cfg;
      cfg.seed = derive_seed(seed, static_cast<uint64_t>(c) * 1000003u + i);
      cfg.size = size;
      cfg.dropout_rate = knobs[c].dropout_rate;
      cfg.aneurysm_count = knobs[c].aneurysm_count;
      cfg.faz_scale = knobs[c].faz_scale;
      cfg.class_label = label;

      DatasetSample ds;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "synth_%s_%04d", class_label_name(label), i);
      ds.image_id = buf;
      // Every fifth pair of same-class samples models two eyes of one patient.
      const int pair = i / 2;
      if (pair % 5 == 0) {
        std::snprintf(buf, sizeof(buf), "patient_%s_%04d", class_label_name(label), pair);
      } else {
        std::snprintf(buf, sizeof(buf), "patient_%s_s%04d", class_label_name(label), i);
      }
      ds.group_id = buf;
      ds.sample = generate(cfg);
      out.push_back(std::move(ds));
    }
  }
  return out;
}

std::vector<HeteroGraph> make_dataset(int n_per_class, uint64_t seed, int size,
                                      const std::array<ClassKnobs, kNumClasses>& knobs) {
  std::vector<HeteroGraph> graphs;
  for (DatasetSample& ds : make_dataset_samples(n_per_class, seed, size, knobs)) {
    AssembleOptions opts;
    opts.image_id = ds.image_id;
    opts.group_id = ds.group_id;
    HeteroGraph g = assemble(ds.sample.seg, ds.sample.img, opts);
    g.label = ds.sample.label;
    graphs.push_back(std::move(g));
  }
  return graphs;
}

}  // namespace retigraph
