#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "retigraph/hetero_graph.hpp"
#include "retigraph/raster.hpp"

namespace retigraph {

// Desk-scale synthetic retina: central avascular disc enclosed by a capillary
// ring, radial arterioles, and a jittered triangular capillary mesh. The
// pathology knobs mirror capillary dropout (larger intercapillary areas),
// microaneurysm-like blobs, and FAZ enlargement.
struct SynthConfig {
  uint64_t seed = 0;
  int size = 304;
  double dropout_rate = 0.0;   // fraction of capillary edges removed
  int aneurysm_count = 0;      // dilated blobs on terminal capillaries
  double faz_scale = 1.0;      // FAZ radius multiplier (base 15 px)
  double mesh_spacing = 26.0;  // capillary lattice pitch in px
  ClassLabel class_label = ClassLabel::Healthy;
};

struct SynthSample {
  BinaryGrid seg;
  IntensityGrid img;
  ClassLabel label = ClassLabel::Healthy;
};

SynthSample generate(const SynthConfig& cfg);

struct ClassKnobs {
  double dropout_rate;
  int aneurysm_count;
  double faz_scale;
};

// Repo calibration (not literature values): knobs chosen so the staging
// signal is strong enough for a linear probe.
inline constexpr std::array<ClassKnobs, kNumClasses> kDefaultClassKnobs = {{
    {0.00, 0, 1.00},  // Healthy
    {0.15, 2, 1.15},  // NPDR
    {0.35, 5, 1.40},  // PDR
}};

struct DatasetSample {
  std::string image_id;
  std::string group_id;
  SynthSample sample;
};

// n_per_class samples per class, deterministic under seed. Some consecutive
// same-class samples share a group id (two eyes of one synthetic patient).
std::vector<DatasetSample> make_dataset_samples(
    int n_per_class, uint64_t seed, int size = 304,
    const std::array<ClassKnobs, kNumClasses>& knobs = kDefaultClassKnobs);

// Same samples assembled into labeled heterogeneous graphs.
std::vector<HeteroGraph> make_dataset(
    int n_per_class, uint64_t seed, int size = 304,
    const std::array<ClassKnobs, kNumClasses>& knobs = kDefaultClassKnobs);

}  // namespace retigraph
