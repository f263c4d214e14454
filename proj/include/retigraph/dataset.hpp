#pragma once

#include <optional>
#include <string>
#include <vector>

#include "retigraph/hetero_graph.hpp"
#include "retigraph/synth.hpp"

namespace retigraph {

// Dataset directory layout: {images/, segs/, graphs/, labels.csv}. Labels may
// carry the binary "DR" class for external validation sets; those rows cannot
// feed 3-class training.
struct LabelRow {
  std::string id;
  std::string label;  // Healthy / NPDR / PDR / DR
  std::string group;
};

std::vector<LabelRow> load_labels_csv(const std::string& path);
void save_labels_csv(const std::vector<LabelRow>& rows, const std::string& path);

void write_dataset(const std::vector<DatasetSample>& samples, const std::string& dir,
                   bool with_graphs, double threshold = 0.5, bool include_coords = false);

// Loads graphs/<id>.json for every labels.csv row, attaching label and group.
// Rows labeled "DR" are mapped to NPDR for binary evaluation when
// allow_binary is set, and rejected otherwise.
std::vector<HeteroGraph> load_dataset_graphs(const std::string& dir, bool allow_binary = false);

// True when any row uses the binary DR label.
bool dataset_is_binary(const std::string& dir);

}  // namespace retigraph
