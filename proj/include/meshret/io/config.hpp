#pragma once

#include "meshret/augmentation.hpp"
#include "meshret/baselines/baselines.hpp"
#include "meshret/io/bvh.hpp"
#include "meshret/metrics.hpp"
#include "meshret/retarget.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace meshret {

enum class SourceFormat { Auto, Json, Bvh };

// Augmentation batch: an offset grid (z = 0) when grid_x and grid_y are
// set, otherwise `samples` random specs drawn from `ranges`.
struct BatchConfig {
  std::vector<double> grid_x;
  std::vector<double> grid_y;
  int samples = 0;
  SamplerRanges ranges;
};

struct PipelineConfig {
  std::filesystem::path model;
  std::filesystem::path source;
  SourceFormat source_format = SourceFormat::Auto;
  std::filesystem::path scene;  // empty: flat ground, robot-only task
  std::filesystem::path augmentation;
  std::filesystem::path output = "out";
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency, capped by MESH_RETARGET_THREADS
  BvhImport bvh;
  // Empty correspondence means identity over every model keypoint.
  RetargetOptions retarget;
  MetricOptions metrics;
  BaselineConfig baselines;
  BatchConfig batch;
};

// Relative paths resolve against `base_dir`.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
// Paths are written as given.
std::string config_to_json(const PipelineConfig& cfg);

SourceMotion load_source(const std::filesystem::path& path, SourceFormat format,
                         const BvhImport& bvh);

}  // namespace meshret
