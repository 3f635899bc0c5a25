#pragma once

#include "json.hpp"
#include "wearcap/config.hpp"
#include "wearcap/sequence_io.hpp"
#include "wearcap/sim.hpp"

#include <optional>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wearcap {

/// static: registered body, object held at its first anchor.
/// interpolate: registered body, anchors with linear pose interpolation across interactions.
/// full: contact offset, contact tracking and interaction refinement.
enum class Mode { static_object, interpolate, full };

std::string to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// A pipeline stage failed; `stage()` names it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct InteractionReport {
  std::string object_id;
  double start = 0.0;
  double end = 0.0;
  Vec3 contact_offset = Vec3::Zero();
  bool end_anchor_used = false;
  double start_residual = 0.0;
  double end_residual = 0.0;
};

struct PipelineResult {
  MotionEstimate estimate;
  CalibrationResult calibration;
  std::size_t drift_controls = 0;
  std::map<std::string, std::vector<Anchor>> anchors;
  std::vector<InteractionReport> interactions;
  std::vector<std::string> warnings;
  std::optional<ErrorMetrics> metrics;
  std::map<std::string, double> timing;  // seconds per stage
};

PipelineResult run_pipeline(const Sequence& seq, const PipelineConfig& config, Mode mode,
                            const GroundTruth* truth = nullptr);

/// Report document; timing is included only when config.report_timing is set.
nlohmann::json make_report(const PipelineResult& result, const PipelineConfig& config, Mode mode,
                           const GroundTruth* truth);

/// Writes trajectories.csv, objects.csv and errors.csv into `dir`. Every
/// table has a header; row count equals the frame count (times objects for
/// objects.csv). `report` may be empty.
void export_plots(const nlohmann::json& report, const MotionEstimate& estimate,
                  const BodyModel& body, const std::filesystem::path& dir);

}  // namespace wearcap
