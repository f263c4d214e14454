#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>

#include "retigraph/gnn.hpp"
#include "retigraph/raster.hpp"

namespace retigraph {

// Minimal TOML subset: [section] headers, key = value with string / integer /
// float / boolean values, # comments. Enough for flat configuration files.
using TomlValue = std::variant<int64_t, double, bool, std::string>;
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

TomlTable parse_toml(const std::string& text);

// Whole-pipeline configuration with strict validation: unknown sections or
// keys are rejected.
struct PipelineConfig {
  double pixel_size_mm = kDefaultPixelSizeMm;
  double threshold = 0.5;
  bool include_coords = false;

  GnnConfig model;
  TrainConfig train;

  int explain_k = 25;
  int explain_steps = 128;

  int synth_size = 304;
  double synth_mesh_spacing = 26.0;
};

PipelineConfig parse_pipeline_config(const std::string& toml_text);
PipelineConfig load_pipeline_config(const std::string& path);

}  // namespace retigraph
