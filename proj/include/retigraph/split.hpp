#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace retigraph {

// Group-aware stratified fold assignment: all samples of a group land in the
// same fold; per-fold class counts stay as close to the proportional target as
// the group structure allows. Deterministic under seed. Throws when there are
// fewer groups than folds.
std::vector<int> group_stratified_split(const std::vector<int>& labels,
                                        const std::vector<std::string>& group_ids, int n_folds,
                                        uint64_t seed);

}  // namespace retigraph
