#pragma once

#include <array>
#include <vector>

#include "retigraph/hetero_graph.hpp"

namespace retigraph {

struct MetricsReport {
  double balanced_agreement = 0.0;  // unweighted mean of per-class recall
  std::array<double, kNumClasses> f1{};
  std::array<bool, kNumClasses> f1_defined{};
  std::array<double, kNumClasses> auc_one_vs_rest{};
  std::array<bool, kNumClasses> auc_defined{};
  double roc_auc_macro = 0.0;       // mean over defined one-vs-rest AUCs
  double roc_auc_binary_dr = 0.0;   // p(NPDR)+p(PDR) against DR-vs-healthy
  bool binary_dr_defined = false;
  bool missing_class_warning = false;
};

// ROC AUC via rank statistic with midrank tie handling. Returns NaN when one
// side is empty.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& binary_labels);

// Average precision (step interpolation); NaN when there are no positives.
double average_precision(const std::vector<double>& scores, const std::vector<int>& binary_labels);

MetricsReport compute_metrics(const std::vector<std::array<double, kNumClasses>>& probabilities,
                              const std::vector<int>& labels);

double balanced_agreement(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace retigraph
