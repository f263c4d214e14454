#include "retigraph/biomarkers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"

namespace retigraph {

using json = nlohmann::json;

std::vector<std::string> biomarker_names() {
  return {"faz_area_mm2",   "faz_max_diameter_mm", "faz_mean_diameter_mm",
          "faz_acircularity", "vessel_density",    "vessel_perimeter_mm",
          "fractal_dimension"};
}

std::vector<double> biomarker_values(const BiomarkerRecord& rec) {
  return {rec.faz_area_mm2,    rec.faz_max_diameter_mm, rec.faz_mean_diameter_mm,
          rec.faz_acircularity, rec.vessel_density,     rec.vessel_perimeter_mm,
          rec.fractal_dimension};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ArgumentError("quantile of empty sample");
  if (q < 0.0 || q > 1.0) throw ArgumentError("quantile level must be in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = static_cast<size_t>(std::ceil(h));
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

double box_count_dimension(const BinaryGrid& grid) {
  static const int kSizes[] = {2, 4, 8, 16, 32, 64};
  std::vector<double> log_inv_s, log_n;
  for (int s : kSizes) {
    const int bx = (grid.width + s - 1) / s;
    const int by = (grid.height + s - 1) / s;
    std::vector<uint8_t> hit(static_cast<size_t>(bx) * by, 0);
    for (int y = 0; y < grid.height; ++y)
      for (int x = 0; x < grid.width; ++x)
        if (grid.at(x, y)) hit[static_cast<size_t>(y / s) * bx + x / s] = 1;
    size_t n = 0;
    for (uint8_t v : hit) n += v;
    if (n == 0) return 0.0;
    log_inv_s.push_back(-std::log(static_cast<double>(s)));
    log_n.push_back(std::log(static_cast<double>(n)));
  }
  const size_t m = log_inv_s.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) {
    mx += log_inv_s[i];
    my += log_n[i];
  }
  mx /= m;
  my /= m;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxy += (log_inv_s[i] - mx) * (log_n[i] - my);
    sxx += (log_inv_s[i] - mx) * (log_inv_s[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

namespace {

// Max and direction-averaged Feret diameters of a pixel set, from its hull.
std::pair<double, double> feret_diameters(const std::vector<Pixel>& pixels) {
  if (pixels.empty()) return {0.0, 0.0};
  std::vector<Point> hull = region_hull(pixels);
  if (hull.empty())
    for (const Pixel& p : pixels)
      hull.push_back({static_cast<double>(p.x), static_cast<double>(p.y)});

  double max_feret = 0.0;
  for (size_t i = 0; i < hull.size(); ++i)
    for (size_t j = i + 1; j < hull.size(); ++j) {
      const double dx = hull[i].x - hull[j].x;
      const double dy = hull[i].y - hull[j].y;
      max_feret = std::max(max_feret, std::sqrt(dx * dx + dy * dy));
    }

  const double pi = 3.14159265358979323846;
  double mean_feret = 0.0;
  for (int a = 0; a < 180; ++a) {
    const double theta = a * pi / 180.0;
    const double cx = std::cos(theta), sy = std::sin(theta);
    double lo = hull[0].x * cx + hull[0].y * sy, hi = lo;
    for (const Point& p : hull) {
      const double proj = p.x * cx + p.y * sy;
      lo = std::min(lo, proj);
      hi = std::max(hi, proj);
    }
    mean_feret += hi - lo;
  }
  mean_feret /= 180.0;
  return {max_feret, mean_feret};
}

}  // namespace

BiomarkerRecord extract_biomarkers(const BinaryGrid& seg, const IntensityGrid& img,
                                   const FAZNode& faz) {
  if (seg.width != img.width || seg.height != img.height)
    throw ArgumentError("segmentation and intensity grids differ in size");
  const double px = img.pixel_size_mm;
  BiomarkerRecord rec;
  rec.faz_area_mm2 = faz.area_mm2;
  rec.faz_acircularity = faz.acircularity;

  std::vector<Pixel> faz_pixels;
  faz.mask.for_each_pixel([&](int x, int y) { faz_pixels.push_back({x, y}); });
  rec.degenerate_faz = faz_pixels.size() < 4;
  const auto [max_f, mean_f] = feret_diameters(faz_pixels);
  rec.faz_max_diameter_mm = max_f * px;
  rec.faz_mean_diameter_mm = mean_f * px;

  const size_t fg = seg.count();
  rec.vessel_density = static_cast<double>(fg) / static_cast<double>(seg.mask.size());

  size_t boundary_edges = 0;
  for (int y = 0; y < seg.height; ++y)
    for (int x = 0; x < seg.width; ++x) {
      if (!seg.at(x, y)) continue;
      boundary_edges += !seg.at_safe(x - 1, y);
      boundary_edges += !seg.at_safe(x + 1, y);
      boundary_edges += !seg.at_safe(x, y - 1);
      boundary_edges += !seg.at_safe(x, y + 1);
    }
  rec.vessel_perimeter_mm = static_cast<double>(boundary_edges) * px;

  rec.fractal_dimension = box_count_dimension(skeletonize(seg));
  return rec;
}

EmbeddingAggregate aggregate_embeddings(const HeteroGraph& graph) {
  EmbeddingAggregate agg;
  static const char* kStats[] = {"median", "q90", "mean"};
  for (NodeType t : {NodeType::Vessel, NodeType::Ica}) {
    const NodeSet& ns = graph.of(t);
    const auto& names = graph.meta.feature_names[static_cast<int>(t)];
    agg.names.push_back(std::string(node_type_name(t)) + "_present");
    agg.values.push_back(ns.count > 0 ? 1.0 : 0.0);
    for (size_t f = 0; f < names.size(); ++f) {
      std::vector<double> column;
      for (int32_t i = 0; i < ns.count; ++i) column.push_back(ns.row(i)[f]);
      double stats[3] = {0.0, 0.0, 0.0};
      if (!column.empty()) {
        stats[0] = quantile(column, 0.5);
        stats[1] = quantile(column, 0.9);
        double mean = 0.0;
        for (double v : column) mean += v;
        stats[2] = mean / column.size();
      }
      for (int s = 0; s < 3; ++s) {
        agg.names.push_back(std::string(node_type_name(t)) + "_" + names[f] + "_" + kStats[s]);
        agg.values.push_back(stats[s]);
      }
    }
  }
  const NodeSet& faz = graph.of(NodeType::Faz);
  const auto& faz_names = graph.meta.feature_names[static_cast<int>(NodeType::Faz)];
  agg.names.push_back("faz_present");
  agg.values.push_back(faz.count > 0 ? 1.0 : 0.0);
  for (size_t f = 0; f < faz_names.size(); ++f) {
    agg.names.push_back("faz_" + faz_names[f]);
    agg.values.push_back(faz.count > 0 ? faz.row(0)[f] : 0.0);
  }
  return agg;
}

LogisticModel logistic_train(const std::vector<std::vector<double>>& vectors,
                             const std::vector<int>& labels, const LogisticConfig& cfg) {
  if (vectors.size() != labels.size()) throw ArgumentError("logistic: size mismatch");
  if (vectors.empty()) throw ArgumentError("logistic: empty training set");
  std::array<int, kNumClasses> counts{};
  for (int l : labels) {
    if (l < 0 || l >= kNumClasses) throw ArgumentError("logistic: label out of range");
    ++counts[l];
  }
  int present = 0;
  for (int c : counts) present += c > 0;
  if (present < 2) throw ArgumentError("logistic: need at least two classes");

  const int64_t n = static_cast<int64_t>(vectors.size());
  const int64_t d = static_cast<int64_t>(vectors[0].size());
  ad::Tensor X(n, d);
  for (int64_t i = 0; i < n; ++i) {
    if (static_cast<int64_t>(vectors[i].size()) != d)
      throw ArgumentError("logistic: inconsistent vector dimensions");
    std::copy(vectors[i].begin(), vectors[i].end(), X.v.begin() + i * d);
  }

  LogisticModel model;
  model.W = ad::Tensor(d, kNumClasses);
  model.b = ad::Tensor(1, kNumClasses);
  const std::vector<double> unit_weights(kNumClasses, 1.0);

  for (int it = 0; it < cfg.iterations; ++it) {
    ad::Tape tape;
    const int x = tape.leaf(X);
    const int W = tape.leaf(model.W, true);
    const int b = tape.leaf(model.b, true);
    const int logits = tape.linear(x, W, b);
    const int loss = tape.softmax_cross_entropy(logits, labels, unit_weights);
    tape.backward(loss);
    const ad::Tensor& gW = tape.grad(W);
    const ad::Tensor& gb = tape.grad(b);
    for (size_t i = 0; i < model.W.v.size(); ++i)
      model.W.v[i] -= cfg.learning_rate * (gW.v[i] + cfg.l2_penalty * model.W.v[i]);
    for (size_t i = 0; i < model.b.v.size(); ++i)
      model.b.v[i] -= cfg.learning_rate * gb.v[i];
  }
  return model;
}

Prediction logistic_predict(const LogisticModel& model, const std::vector<double>& vector) {
  if (static_cast<int64_t>(vector.size()) != model.W.rows)
    throw ArgumentError("logistic: vector dimension mismatch");
  Prediction p;
  for (int c = 0; c < kNumClasses; ++c) {
    double z = model.b.at(0, c);
    for (int64_t j = 0; j < model.W.rows; ++j) z += vector[j] * model.W.at(j, c);
    p.logits[c] = z;
  }
  double mx = p.logits[0];
  for (int c = 1; c < kNumClasses; ++c) mx = std::max(mx, p.logits[c]);
  double sum = 0.0;
  for (int c = 0; c < kNumClasses; ++c) sum += std::exp(p.logits[c] - mx);
  int best = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    p.probabilities[c] = std::exp(p.logits[c] - mx) / sum;
    if (p.logits[c] > p.logits[best]) best = c;
  }
  p.predicted = static_cast<ClassLabel>(best);
  return p;
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string csv_string(const std::vector<std::string>& names,
                       const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  for (const std::string& n : names)
    if (n.find(',') != std::string::npos)
      throw ArgumentError("manifest name contains a comma: " + n);
  std::string out = "id";
  for (const std::string& n : names) out += "," + csv_escape(n);
  out += "\r\n";

  std::vector<size_t> order(rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return rows[a].first < rows[b].first; });
  for (size_t i : order) {
    if (rows[i].second.size() != names.size())
      throw ArgumentError("csv row length differs from header");
    out += csv_escape(rows[i].first);
    for (double v : rows[i].second) out += "," + format_float(v);
    out += "\r\n";
  }
  return out;
}

void export_csv(const std::vector<std::string>& names,
                const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                const std::string& path) {
  write_file_atomic(path, csv_string(names, rows));
}

const std::vector<std::string> kGraphStatisticNames = {
    "vessel_tortuosity_q90", "vessel_area_q90",  "vessel_radius_variability_q90",
    "ica_area_median",       "ica_area_q90",     "ica_major_axis_median",
    "faz_solidity",          "faz_area",         "faz_minor_axis",
};

namespace {

int feature_index(const HeteroGraph& g, NodeType t, const std::string& name) {
  const auto& names = g.meta.feature_names[static_cast<int>(t)];
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw ArgumentError("feature not in manifest: " + name);
}

std::vector<double> feature_column(const HeteroGraph& g, NodeType t, const std::string& name) {
  const NodeSet& ns = g.of(t);
  const int f = feature_index(g, t, name);
  std::vector<double> col;
  for (int32_t i = 0; i < ns.count; ++i) col.push_back(ns.row(i)[f]);
  return col;
}

}  // namespace

double graph_statistic(const HeteroGraph& graph, size_t statistic) {
  auto q_of = [&](NodeType t, const char* name, double q) {
    std::vector<double> col = feature_column(graph, t, name);
    return col.empty() ? 0.0 : quantile(std::move(col), q);
  };
  auto faz_value = [&](const char* name) {
    const NodeSet& faz = graph.of(NodeType::Faz);
    if (faz.count == 0) return 0.0;
    return faz.row(0)[feature_index(graph, NodeType::Faz, name)];
  };
  switch (statistic) {
    case 0: return q_of(NodeType::Vessel, "tortuosity", 0.9);
    case 1: return q_of(NodeType::Vessel, "area_mm2", 0.9);
    case 2: return q_of(NodeType::Vessel, "radius_variability", 0.9);
    case 3: return q_of(NodeType::Ica, "area_mm2", 0.5);
    case 4: return q_of(NodeType::Ica, "area_mm2", 0.9);
    case 5: return q_of(NodeType::Ica, "major_axis_mm", 0.5);
    case 6: return faz_value("solidity");
    case 7: return faz_value("area_mm2");
    case 8: return faz_value("minor_axis_mm");
  }
  throw ArgumentError("unknown graph statistic index");
}

FeatureDistributionReport feature_distribution_report(const std::vector<HeteroGraph>& graphs) {
  FeatureDistributionReport rep;
  rep.statistic_names = kGraphStatisticNames;
  rep.per_class.resize(kGraphStatisticNames.size());
  rep.defined.resize(kGraphStatisticNames.size());

  for (size_t s = 0; s < kGraphStatisticNames.size(); ++s) {
    std::array<std::vector<double>, kNumClasses> per_class;
    for (const HeteroGraph& g : graphs) {
      if (!g.label) continue;
      per_class[static_cast<int>(*g.label)].push_back(graph_statistic(g, s));
    }
    for (int c = 0; c < kNumClasses; ++c) {
      rep.defined[s][c] = !per_class[c].empty();
      if (per_class[c].empty()) continue;
      DistributionSummary& d = rep.per_class[s][c];
      std::vector<double>& v = per_class[c];
      d.min = *std::min_element(v.begin(), v.end());
      d.max = *std::max_element(v.begin(), v.end());
      d.q25 = quantile(v, 0.25);
      d.median = quantile(v, 0.5);
      d.q75 = quantile(v, 0.75);
      double mean = 0.0;
      for (double x : v) mean += x;
      d.mean = mean / v.size();
    }
  }
  return rep;
}

std::string distribution_report_json(const FeatureDistributionReport& report) {
  json j;
  j["version"] = 1;
  json stats;
  for (size_t s = 0; s < report.statistic_names.size(); ++s) {
    json per_class;
    for (int c = 0; c < kNumClasses; ++c) {
      if (!report.defined[s][c]) continue;
      const DistributionSummary& d = report.per_class[s][c];
      per_class[class_label_name(static_cast<ClassLabel>(c))] = {
          {"min", d.min}, {"q25", d.q25},   {"median", d.median},
          {"q75", d.q75}, {"max", d.max},   {"mean", d.mean}};
    }
    stats[report.statistic_names[s]] = std::move(per_class);
  }
  j["statistics"] = std::move(stats);
  return j.dump(2);
}

std::string distribution_report_csv(const FeatureDistributionReport& report) {
  std::string out = "statistic,class,min,q25,median,q75,max,mean\r\n";
  for (size_t s = 0; s < report.statistic_names.size(); ++s)
    for (int c = 0; c < kNumClasses; ++c) {
      if (!report.defined[s][c]) continue;
      const DistributionSummary& d = report.per_class[s][c];
      out += report.statistic_names[s];
      out += ",";
      out += class_label_name(static_cast<ClassLabel>(c));
      for (double v : {d.min, d.q25, d.median, d.q75, d.max, d.mean})
        out += "," + format_float(v);
      out += "\r\n";
    }
  return out;
}

}  // namespace retigraph
