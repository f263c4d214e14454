#pragma once

#include <string>
#include <vector>

#include "retigraph/autodiff.hpp"
#include "retigraph/gnn.hpp"
#include "retigraph/hetero_graph.hpp"
#include "retigraph/ica_graph.hpp"
#include "retigraph/raster.hpp"

namespace retigraph {

struct BiomarkerRecord {
  double faz_area_mm2 = 0.0;
  double faz_max_diameter_mm = 0.0;   // max Feret
  double faz_mean_diameter_mm = 0.0;  // mean Feret over 180 directions
  double faz_acircularity = 1.0;
  double vessel_density = 0.0;    // foreground fraction
  double vessel_perimeter_mm = 0.0;
  double fractal_dimension = 0.0;  // box counting on the skeleton
  bool degenerate_faz = false;     // FAZ under 4 px; diameters from raw mask
};

std::vector<std::string> biomarker_names();
std::vector<double> biomarker_values(const BiomarkerRecord& rec);

BiomarkerRecord extract_biomarkers(const BinaryGrid& seg, const IntensityGrid& img,
                                   const FAZNode& faz);

// Box-count fractal dimension: least-squares slope of log(count) over
// log(1/size) for box sizes {2,4,8,16,32,64}.
double box_count_dimension(const BinaryGrid& grid);

// Linear-interpolation quantile (q in [0,1]) of an unsorted sample.
double quantile(std::vector<double> values, double q);

// Per-type feature-wise {median, q90, mean} concatenated with the raw FAZ
// vector; fixed dimensionality with presence flags for empty node sets.
struct EmbeddingAggregate {
  std::vector<std::string> names;
  std::vector<double> values;
};

EmbeddingAggregate aggregate_embeddings(const HeteroGraph& graph);

// Multinomial logistic regression on aggregate vectors, trained full-batch by
// gradient descent with an L2 penalty. Zero-initialized, so zero iterations
// predict the uniform distribution.
struct LogisticModel {
  ad::Tensor W;  // dim x classes
  ad::Tensor b;  // 1 x classes
};

struct LogisticConfig {
  int iterations = 500;
  double learning_rate = 0.1;
  double l2_penalty = 1e-4;
};

LogisticModel logistic_train(const std::vector<std::vector<double>>& vectors,
                             const std::vector<int>& labels, const LogisticConfig& cfg = {});
Prediction logistic_predict(const LogisticModel& model, const std::vector<double>& vector);

// RFC-4180 CSV: header from the manifest, CRLF rows in sample-id order,
// floats at 9 significant digits.
void export_csv(const std::vector<std::string>& names,
                const std::vector<std::pair<std::string, std::vector<double>>>& rows,
                const std::string& path);
std::string csv_string(const std::vector<std::string>& names,
                       const std::vector<std::pair<std::string, std::vector<double>>>& rows);

// Per-class distribution summaries of the staging-relevant graph statistics
// (vessel tortuosity/area/radius-variability q90, ICA area and major axis,
// FAZ solidity/area/minor axis).
struct DistributionSummary {
  double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0, mean = 0.0;
};

struct FeatureDistributionReport {
  std::vector<std::string> statistic_names;
  // [statistic][class]; defined flags false for classes with no graphs.
  std::vector<std::array<DistributionSummary, kNumClasses>> per_class;
  std::vector<std::array<bool, kNumClasses>> defined;
};

FeatureDistributionReport feature_distribution_report(const std::vector<HeteroGraph>& graphs);
std::string distribution_report_json(const FeatureDistributionReport& report);
std::string distribution_report_csv(const FeatureDistributionReport& report);

// The per-graph scalar used by the distribution report, by statistic index.
double graph_statistic(const HeteroGraph& graph, size_t statistic);
extern const std::vector<std::string> kGraphStatisticNames;

}  // namespace retigraph
