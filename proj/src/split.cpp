#include "retigraph/split.hpp"

#include <algorithm>
#include <map>

#include "retigraph/errors.hpp"
#include "retigraph/rng.hpp"

namespace retigraph {

std::vector<int> group_stratified_split(const std::vector<int>& labels,
                                        const std::vector<std::string>& group_ids, int n_folds,
                                        uint64_t seed) {
  if (labels.size() != group_ids.size())
    throw ArgumentError("split: labels and group ids differ in length");
  if (n_folds < 2) throw ArgumentError("split: need at least 2 folds");
  int n_classes = 0;
  for (int l : labels) {
    if (l < 0) throw ArgumentError("split: negative label");
    n_classes = std::max(n_classes, l + 1);
  }

  struct Group {
    std::vector<size_t> samples;
    std::vector<double> class_counts;
    uint64_t priority = 0;
  };
  std::map<std::string, size_t> index;
  std::vector<Group> groups;
  for (size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = index.try_emplace(group_ids[i], groups.size());
    if (inserted) groups.push_back({{}, std::vector<double>(n_classes, 0.0), 0});
    groups[it->second].samples.push_back(i);
    groups[it->second].class_counts[labels[i]] += 1.0;
  }
  if (static_cast<int>(groups.size()) < n_folds)
    throw ArgumentError("split: fewer groups than folds");

  // Largest groups first; ties broken by a seeded random priority so repeated
  // runs with the same seed match exactly.
  Rng rng(derive_seed(seed, 0x5117));
  for (Group& g : groups) g.priority = rng.next_u64();
  std::vector<size_t> order(groups.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (groups[a].samples.size() != groups[b].samples.size())
      return groups[a].samples.size() > groups[b].samples.size();
    return groups[a].priority < groups[b].priority;
  });

  std::vector<double> total_per_class(n_classes, 0.0);
  for (int l : labels) total_per_class[l] += 1.0;

  std::vector<std::vector<double>> fold_counts(n_folds, std::vector<double>(n_classes, 0.0));
  std::vector<double> fold_sizes(n_folds, 0.0);
  std::vector<int> assignment(labels.size(), -1);

  for (size_t gi : order) {
    const Group& g = groups[gi];
    int best_fold = -1;
    double best_cost = 0.0;
    for (int f = 0; f < n_folds; ++f) {
      // Squared deviation from the proportional per-class target.
      double cost = 0.0;
      for (int c = 0; c < n_classes; ++c) {
        const double target = total_per_class[c] / n_folds;
        const double diff = fold_counts[f][c] + g.class_counts[c] - target;
        cost += diff * diff;
      }
      if (best_fold < 0 || cost < best_cost ||
          (cost == best_cost && fold_sizes[f] < fold_sizes[best_fold])) {
        best_fold = f;
        best_cost = cost;
      }
    }
    for (size_t s : g.samples) assignment[s] = best_fold;
    for (int c = 0; c < n_classes; ++c) fold_counts[best_fold][c] += g.class_counts[c];
    fold_sizes[best_fold] += static_cast<double>(g.samples.size());
  }
  return assignment;
}

}  // namespace retigraph
