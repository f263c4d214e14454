#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "retigraph/biomarkers.hpp"
#include "retigraph/errors.hpp"
#include "retigraph/fsio.hpp"
#include "retigraph/synth.hpp"

using namespace retigraph;

namespace {

IntensityGrid flat_image(int w, int h, double v = 0.5) {
  IntensityGrid img;
  img.width = w;
  img.height = h;
  img.values.assign(static_cast<size_t>(w) * h, v);
  return img;
}

FAZNode faz_from_seg(const BinaryGrid& seg, const IntensityGrid& img) {
  const auto nodes = extract_ica_nodes(seg, img);
  return make_faz_node(nodes[identify_faz(nodes, {seg.width / 2.0, seg.height / 2.0})]);
}

}  // namespace

TEST_CASE("quantile uses linear interpolation") {
  std::vector<double> v = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK(quantile(v, 0.9) == doctest::Approx(9.1));
  CHECK(quantile(v, 0.5) == doctest::Approx(5.5));
  CHECK(quantile(v, 0.0) == doctest::Approx(1.0));
  CHECK(quantile(v, 1.0) == doctest::Approx(10.0));
  CHECK(quantile({42.0}, 0.9) == doctest::Approx(42.0));
  CHECK_THROWS_AS(quantile({}, 0.5), ArgumentError);
  CHECK_THROWS_AS(quantile({1.0}, 1.5), ArgumentError);
}

TEST_CASE("box counting calibration: line ~1, filled square ~2") {
  BinaryGrid line(256, 256);
  for (int x = 0; x < 256; ++x) line.set(x, 128, true);
  CHECK(box_count_dimension(line) == doctest::Approx(1.0).epsilon(0.1));

  BinaryGrid square(256, 256);
  for (auto& v : square.mask) v = 1;
  CHECK(box_count_dimension(square) == doctest::Approx(2.0).epsilon(0.1));

  CHECK(box_count_dimension(BinaryGrid(64, 64)) == 0.0);
}

TEST_CASE("vessel density of an all-background image is zero") {
  const int S = 64;
  BinaryGrid seg(S, S);
  // a tiny square "FAZ" carve is unnecessary: background everywhere
  const auto nodes = extract_ica_nodes(seg, flat_image(S, S));
  const FAZNode faz = make_faz_node(nodes[0]);
  const BiomarkerRecord rec = extract_biomarkers(seg, flat_image(S, S), faz);
  CHECK(rec.vessel_density == 0.0);
  CHECK(rec.vessel_perimeter_mm == 0.0);
}

TEST_CASE("Feret diameters of a disc match 2r") {
  const int S = 96;
  BinaryGrid seg(S, S);
  for (auto& v : seg.mask) v = 1;
  const double r = 20.0;
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      const double dx = x - S / 2.0, dy = y - S / 2.0;
      if (dx * dx + dy * dy <= r * r) seg.set(x, y, false);
    }
  IntensityGrid img = flat_image(S, S);
  img.pixel_size_mm = 1.0;  // report in pixels
  const FAZNode faz = faz_from_seg(seg, img);
  const BiomarkerRecord rec = extract_biomarkers(seg, img, faz);
  CHECK(rec.faz_max_diameter_mm == doctest::Approx(2.0 * r).epsilon(0.1));
  CHECK(rec.faz_mean_diameter_mm == doctest::Approx(2.0 * r).epsilon(0.1));
  CHECK(std::abs(rec.faz_max_diameter_mm - 2.0 * r) <= 2.0);
  CHECK(std::abs(rec.faz_mean_diameter_mm - 2.0 * r) <= 2.0);
  CHECK_FALSE(rec.degenerate_faz);
}

TEST_CASE("degenerate FAZ sets the warning flag") {
  const int S = 32;
  BinaryGrid seg(S, S);
  for (auto& v : seg.mask) v = 1;
  seg.set(16, 16, false);
  seg.set(17, 16, false);
  IntensityGrid img = flat_image(S, S);
  const FAZNode faz = faz_from_seg(seg, img);
  const BiomarkerRecord rec = extract_biomarkers(seg, img, faz);
  CHECK(rec.degenerate_faz);
  CHECK(rec.faz_max_diameter_mm > 0.0);
}

TEST_CASE("vessel density plus ICA fraction (incl. FAZ) is exactly one") {
  SynthConfig cfg;
  cfg.seed = 12;
  cfg.size = 128;
  cfg.dropout_rate = 0.2;
  const SynthSample s = generate(cfg);
  const auto nodes = extract_ica_nodes(s.seg, s.img);
  size_t bg = 0;
  for (const auto& n : nodes) bg += n.mask.pixel_count();
  const double density =
      static_cast<double>(s.seg.count()) / static_cast<double>(s.seg.mask.size());
  const double ica_fraction = static_cast<double>(bg) / static_cast<double>(s.seg.mask.size());
  CHECK(density + ica_fraction == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregate_embeddings shape is constant and honors single-node semantics") {
  SynthConfig cfg;
  cfg.seed = 5;
  cfg.size = 128;
  HeteroGraph a = [&] {
    const SynthSample s = generate(cfg);
    return assemble(s.seg, s.img);
  }();
  cfg.seed = 6;
  cfg.dropout_rate = 0.3;
  HeteroGraph b = [&] {
    const SynthSample s = generate(cfg);
    return assemble(s.seg, s.img);
  }();
  const EmbeddingAggregate ea = aggregate_embeddings(a);
  const EmbeddingAggregate eb = aggregate_embeddings(b);
  CHECK(ea.names == eb.names);
  CHECK(ea.values.size() == ea.names.size());

  // single vessel node: median = q90 = mean = that node's features
  HeteroGraph single = a;
  NodeSet& vn = single.of(NodeType::Vessel);
  vn.count = 1;
  vn.features.resize(vn.dim);
  vn.positions.resize(1);
  vn.masks.resize(1);
  const EmbeddingAggregate es = aggregate_embeddings(single);
  for (int f = 0; f < vn.dim; ++f) {
    const double want = vn.features[f];
    // names: vessel_present, then triples per feature
    const size_t base = 1 + static_cast<size_t>(f) * 3;
    CHECK(es.values[base + 0] == doctest::Approx(want));
    CHECK(es.values[base + 1] == doctest::Approx(want));
    CHECK(es.values[base + 2] == doctest::Approx(want));
  }
}

TEST_CASE("logistic baseline separates two 1-D classes at -1 and +1") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  Rng rng(2);
  for (int i = 0; i < 40; ++i) {
    const int cls = i % 2;
    x.push_back({(cls ? 1.0 : -1.0) + rng.normal(0.0, 0.1)});
    y.push_back(cls);
  }
  const LogisticModel model = logistic_train(x, y, {300, 0.5, 1e-4});
  int correct = 0;
  for (size_t i = 0; i < x.size(); ++i)
    correct += static_cast<int>(logistic_predict(model, x[i]).predicted) == y[i];
  CHECK(correct == 40);
  // decision boundary near 0
  const Prediction at0 = logistic_predict(model, {0.0});
  CHECK(std::abs(at0.probabilities[0] - at0.probabilities[1]) < 0.2);
}

TEST_CASE("logistic with zero iterations predicts uniformly") {
  const LogisticModel model = logistic_train({{1.0}, {2.0}}, {0, 1}, {0, 0.1, 0.0});
  const Prediction p = logistic_predict(model, {5.0});
  for (int c = 0; c < kNumClasses; ++c)
    CHECK(p.probabilities[c] == doctest::Approx(1.0 / kNumClasses));
}

TEST_CASE("logistic loss gradient matches finite differences") {
  // reuses the engine-level CE check with a linear model on top
  Rng rng(7);
  const auto X = gradcheck::random_tensor(6, 3, rng);
  std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  const double err = gradcheck::max_rel_error(
      {X, gradcheck::random_tensor(3, 3, rng), gradcheck::random_tensor(1, 3, rng)},
      [labels](ad::Tape& t, const std::vector<int>& in) {
        return t.softmax_cross_entropy(t.linear(in[0], in[1], in[2]), labels, {1.0, 1.0, 1.0});
      });
  CHECK(err <= 1e-4);
}

TEST_CASE("csv export round trip and schema validation") {
  const std::vector<std::string> names = {"alpha", "beta", "gamma"};
  const std::vector<std::pair<std::string, std::vector<double>>> rows = {
      {"b_sample", {1.0, 2.5, -3.125}},
      {"a_sample", {0.1234567891011, 2e-7, 1e9}},
  };
  const std::string csv = csv_string(names, rows);
  // header + deterministic id order (a before b) + CRLF
  CHECK(csv.substr(0, 20) == "id,alpha,beta,gamma\r");
  CHECK(csv.find("a_sample") < csv.find("b_sample"));
  CHECK(csv.find("\r\n") != std::string::npos);

  // parse back
  std::vector<std::vector<double>> parsed;
  size_t pos = csv.find('\n') + 1;
  while (pos < csv.size()) {
    size_t end = csv.find('\n', pos);
    if (end == std::string::npos) end = csv.size();
    std::string line = csv.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    if (line.empty()) continue;
    std::vector<double> vals;
    size_t c = line.find(',');
    while (c != std::string::npos) {
      const size_t next = line.find(',', c + 1);
      vals.push_back(std::stod(line.substr(c + 1, next - c - 1)));
      c = next;
    }
    parsed.push_back(vals);
  }
  REQUIRE(parsed.size() == 2);
  for (int j = 0; j < 3; ++j) {
    CHECK(parsed[0][j] == doctest::Approx(rows[1].second[j]).epsilon(1e-8));
    CHECK(parsed[1][j] == doctest::Approx(rows[0].second[j]).epsilon(1e-8));
  }

  CHECK_THROWS_AS(csv_string({"bad,name"}, {}), ArgumentError);

  // empty list -> header-only file
  const std::string path =
      (std::filesystem::temp_directory_path() / "retigraph_empty.csv").string();
  export_csv(names, {}, path);
  CHECK(read_file_text(path) == "id,alpha,beta,gamma\r\n");
}

TEST_CASE("feature distribution report reflects identical inputs and recomputes from CSV") {
  std::vector<HeteroGraph> graphs;
  for (uint64_t s : {1ull, 2ull, 3ull}) {
    SynthConfig cfg;
    cfg.seed = s;
    cfg.size = 128;
    const SynthSample smp = generate(cfg);
    HeteroGraph g = assemble(smp.seg, smp.img);
    g.label = ClassLabel::Healthy;
    graphs.push_back(g);
    g.label = ClassLabel::NPDR;
    graphs.push_back(g);
  }
  const FeatureDistributionReport rep = feature_distribution_report(graphs);
  for (size_t s = 0; s < rep.statistic_names.size(); ++s) {
    REQUIRE(rep.defined[s][0]);
    REQUIRE(rep.defined[s][1]);
    CHECK_FALSE(rep.defined[s][2]);  // no PDR graphs -> omitted
    CHECK(rep.per_class[s][0].median == doctest::Approx(rep.per_class[s][1].median));
    CHECK(rep.per_class[s][0].mean == doctest::Approx(rep.per_class[s][1].mean));
    CHECK(rep.per_class[s][0].min <= rep.per_class[s][0].median);
    CHECK(rep.per_class[s][0].median <= rep.per_class[s][0].max);
  }
  const std::string csv = distribution_report_csv(rep);
  // recompute one summary value from the CSV text
  const std::string key = rep.statistic_names[0] + ",Healthy,";
  const size_t at = csv.find(key);
  REQUIRE(at != std::string::npos);
  const size_t val_start = at + key.size();
  const double min_from_csv = std::stod(csv.substr(val_start));
  CHECK(min_from_csv == doctest::Approx(rep.per_class[0][0].min).epsilon(1e-8));

  const std::string js = distribution_report_json(rep);
  CHECK(js.find("vessel_tortuosity_q90") != std::string::npos);
}
