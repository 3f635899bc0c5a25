#pragma once

#include "json.hpp"
#include "wearcap/calibrate.hpp"
#include "wearcap/fuse.hpp"
#include "wearcap/refine.hpp"
#include "wearcap/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wearcap {

struct PipelineConfig {
  std::uint64_t seed = 0;
  CalibrationOptions calibration;
  RegisterOptions registration;
  double dbscan_eps = 0.15;
  int dbscan_min_pts = 3;
  bool contact_offset = true;
  double contact_window = 1.0;  // seconds over which the root offset fades in and out
  BendOptions contact_bend;
  RefineOptions refine;
  std::vector<std::string> joint_mask;  // names; empty uses the body default
  bool report_timing = false;

  /// Tuned defaults used by the CLI when no config file is given.
  static PipelineConfig defaults();
};

/// Overlays the keys present in `j` onto `config`. Unknown keys throw
/// std::invalid_argument so that typos do not pass silently.
void apply_config(PipelineConfig& config, const nlohmann::json& j);
nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Scenario description: an optional "preset" name plus overrides.
ScenarioConfig scenario_from_json(const nlohmann::json& j, std::uint64_t seed);
nlohmann::json to_json(const ScenarioConfig& config);

}  // namespace wearcap
