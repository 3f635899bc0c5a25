#pragma once

#include "wearcap/bending.hpp"
#include "wearcap/body.hpp"
#include "wearcap/object.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace wearcap {

enum class ObjectKind { door, table };

std::string to_string(ObjectKind kind);
ObjectKind parse_object_kind(std::string_view text);

struct InteractionScript {
  ObjectKind kind = ObjectKind::door;
  HandSet hands = HandSet::right;  // doors are pulled with one hand
  double duration = 4.0;           // seconds in contact
  double swing = 1.5707963267948966;  // door opening angle, radians
  double drag_distance = 2.5;         // table path length, meters
  double drag_turn = 0.9;             // table heading change, radians (sign randomised)
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  double frame_rate = 30.0;
  double drift_rate = 0.01;        // meters of drift per meter walked
  double drift_rot_rate = 0.001;   // heading drift, radians per second
  double loc_noise_sigma = 0.05;   // camera position noise, meters
  double loc_rot_noise_sigma = 0.01;  // camera orientation noise, radians
  double loc_period = 0.5;            // seconds between localizations
  double confidence_inside = 0.3;     // during interactions
  double confidence_outside = 0.9;
  double outlier_fraction = 0.0;
  double outlier_sigma = 1.0;
  double outlier_confidence = 0.2;
  double obs_noise_sigma = 0.02;      // object observation noise, meters
  double obs_rot_noise_sigma = 0.01;  // radians
  double obs_period = 0.5;
  double obs_outlier_fraction = 0.1;
  double visibility_range = 8.0;
  bool observe_objects = true;
  RigidTransform3 true_x_wz;
  RigidTransform3 true_x_ic;
  double time_offset = 0.0;  // IMU clock lags the camera clock by this much
  double walk_speed = 1.0;
  double pause = 1.0;          // standing time before and after each interaction
  double walk_length = 0.0;    // extra straight walk when there are no interactions
  std::vector<InteractionScript> interactions;

  /// "door", "table", "table_one_hand", "mixed" or "walk".
  static ScenarioConfig preset(std::string_view name, std::uint64_t seed = 0);
  /// Disables every noise, drift and outlier source.
  void make_noiseless();
  void validate() const;
};

struct GroundTruth {
  BodySequence body;  // scene frame, camera clock
  std::map<std::string, std::vector<RigidTransform3>> object_poses;  // per frame
  std::vector<InteractionLabel> interactions;
};

struct SensorStreams {
  BodySequence imu_body;              // IMU frame, IMU clock
  std::vector<TimedPose> imu_head;    // IMU frame, IMU clock
  std::vector<TimedPose> localizations;  // camera poses, camera clock
  std::vector<ObjectObservation> observations;
};

struct Scenario {
  double frame_rate = 30.0;
  BodyModel body = BodyModel::standard();
  std::vector<ObjectModel> objects;
  std::vector<InteractionLabel> interactions;
  SensorStreams streams;
  GroundTruth truth;
};

/// Scripts walk, approach, interact and depart phases for every interaction
/// and synthesises the sensor streams. Deterministic per config.
Scenario generate(const ScenarioConfig& config);

/// Estimated body and object motion on the camera clock.
struct MotionEstimate {
  BodySequence body;
  std::map<std::string, std::vector<RigidTransform3>> object_poses;  // per body frame
};

struct ErrorMetrics {
  double e_obj = 0.0;
  double e_body = 0.0;
  std::vector<double> obj_per_frame;   // per truth frame (mean over objects)
  std::vector<double> body_per_frame;  // per truth frame
};

/// Mean over points of the distance to the nearest point of `reference`.
double mean_nearest_distance(std::span<const Vec3> points, std::span<const Vec3> reference);

/// Chamfer-style errors averaged over truth frames. Estimated frames are
/// matched to truth frames by nearest time.
ErrorMetrics eval_errors(const MotionEstimate& estimate, const GroundTruth& truth,
                         const BodyModel& body, std::span<const ObjectModel> objects);

}  // namespace wearcap
