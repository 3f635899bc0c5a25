#pragma once

#include "json.hpp"
#include "wearcap/body.hpp"
#include "wearcap/calibrate.hpp"
#include "wearcap/object.hpp"
#include "wearcap/sim.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace wearcap {

using Json = nlohmann::json;

inline constexpr int kSequenceVersion = 1;

/// Everything the pipeline consumes.
struct Sequence {
  double frame_rate = 30.0;
  BodyModel body = BodyModel::standard();
  std::vector<ObjectModel> objects;
  std::vector<InteractionLabel> interactions;
  SensorStreams streams;
};

Sequence sequence_from_scenario(const Scenario& scenario);

struct Diagnostic {
  std::size_t line = 0;  // 1-based; 0 when not tied to a line
  std::string message;
};

/// Malformed input; carries one diagnostic per offending line.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

// JSON building blocks.
Json to_json(const Vec3& v);
Json to_json(const RigidTransform3& t);  // {"R": 9 row-major values, "p": 3 values}
Json to_json(const BodyModel& body);
Json to_json(const CalibrationResult& calib);
BodyModel body_model_from_json(const Json& j);
RigidTransform3 transform_from_json(const Json& j);

/// JSON Lines sequence file: a header line followed by object, interaction,
/// imu, imu_head, localization and object_observation records.
void write_sequence(std::ostream& out, const Sequence& seq);
Sequence read_sequence(std::istream& in);
void write_sequence_file(const std::filesystem::path& path, const Sequence& seq);
Sequence read_sequence_file(const std::filesystem::path& path);

/// Ground-truth sidecar: header, interaction records and one frame record per frame.
void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::istream& in);
void write_truth_file(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth read_truth_file(const std::filesystem::path& path);

/// Pipeline outputs: body.jsonl (one line per frame) and objects.jsonl (one
/// line per frame and object).
void write_body(std::ostream& out, const BodySequence& body);
void write_objects(std::ostream& out, const MotionEstimate& estimate);
MotionEstimate read_estimate(std::istream& body_in, std::istream& objects_in);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace wearcap
