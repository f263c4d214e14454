#include "retigraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "retigraph/errors.hpp"

namespace retigraph {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& binary_labels) {
  if (scores.size() != binary_labels.size())
    throw ArgumentError("roc_auc: scores and labels differ in length");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (int y : binary_labels) n_pos += y != 0;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return kNaN;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tied scores.
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (binary_labels[k] != 0) rank_sum_pos += rank[k];
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& binary_labels) {
  if (scores.size() != binary_labels.size())
    throw ArgumentError("average_precision: scores and labels differ in length");
  size_t n_pos = 0;
  for (int y : binary_labels) n_pos += y != 0;
  if (n_pos == 0) return kNaN;

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  double prev_recall = 0.0;
  size_t tp = 0;
  size_t seen = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    for (size_t k = i; k <= j; ++k) {
      tp += binary_labels[order[k]] != 0;
      ++seen;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j + 1;
  }
  return ap;
}

double balanced_agreement(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw ArgumentError("balanced_agreement: size mismatch");
  std::array<double, kNumClasses> correct{}, total{};
  for (size_t i = 0; i < labels.size(); ++i) {
    total[labels[i]] += 1.0;
    if (predictions[i] == labels[i]) correct[labels[i]] += 1.0;
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (total[c] == 0.0) continue;
    sum += correct[c] / total[c];
    ++present;
  }
  return present > 0 ? sum / present : 0.0;
}

MetricsReport compute_metrics(const std::vector<std::array<double, kNumClasses>>& probabilities,
                              const std::vector<int>& labels) {
  if (probabilities.size() != labels.size())
    throw ArgumentError("compute_metrics: size mismatch");
  const size_t n = labels.size();
  MetricsReport rep;

  std::vector<int> predictions(n);
  for (size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (probabilities[i][c] > probabilities[i][best]) best = c;
    predictions[i] = best;
  }
  rep.balanced_agreement = balanced_agreement(predictions, labels);

  double auc_sum = 0.0;
  int auc_n = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    size_t tp = 0, fp = 0, fn = 0, support = 0;
    std::vector<double> scores(n);
    std::vector<int> one_vs_rest(n);
    for (size_t i = 0; i < n; ++i) {
      scores[i] = probabilities[i][c];
      one_vs_rest[i] = labels[i] == c;
      support += labels[i] == c;
      if (predictions[i] == c && labels[i] == c) ++tp;
      if (predictions[i] == c && labels[i] != c) ++fp;
      if (predictions[i] != c && labels[i] == c) ++fn;
    }
    if (support == 0) {
      rep.missing_class_warning = true;
      continue;
    }
    rep.f1_defined[c] = true;
    rep.f1[c] = (2 * tp + fp + fn) > 0
                    ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn)
                    : 0.0;
    const double auc = roc_auc(scores, one_vs_rest);
    if (!std::isnan(auc)) {
      rep.auc_defined[c] = true;
      rep.auc_one_vs_rest[c] = auc;
      auc_sum += auc;
      ++auc_n;
    } else {
      rep.missing_class_warning = true;
    }
  }
  rep.roc_auc_macro = auc_n > 0 ? auc_sum / auc_n : kNaN;

  std::vector<double> dr_scores(n);
  std::vector<int> dr_labels(n);
  for (size_t i = 0; i < n; ++i) {
    dr_scores[i] = probabilities[i][1] + probabilities[i][2];
    dr_labels[i] = labels[i] != 0;
  }
  const double dr_auc = roc_auc(dr_scores, dr_labels);
  rep.binary_dr_defined = !std::isnan(dr_auc);
  rep.roc_auc_binary_dr = rep.binary_dr_defined ? dr_auc : kNaN;
  return rep;
}

}  // namespace retigraph
