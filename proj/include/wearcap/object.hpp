#pragma once

#include "wearcap/bending.hpp"
#include "wearcap/body.hpp"
#include "wearcap/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wearcap {

enum class MotionModel { planar_free, hinged };

struct ObjectModel {
  std::string id;
  std::vector<Vec3> points;  // object frame, meters
  MotionModel motion = MotionModel::planar_free;
  Vec3 hinge_point = Vec3::Zero();  // floor projection of the hinge axis (hinged only)
  /// Pose from the prescanned scene, used when no observation survives.
  RigidTransform3 scan_pose;

  /// Throws std::invalid_argument on empty or non-finite geometry.
  void validate() const;
};

struct ObjectObservation {
  double time = 0.0;
  std::string object_id;
  RigidTransform3 pose;  // object-to-world
  double confidence = 1.0;
};

enum class HandSet { left, right, both };

struct InteractionLabel {
  double start = 0.0;
  double end = 0.0;
  HandSet hands = HandSet::right;
  std::string object_id;

  bool uses_left() const { return hands != HandSet::right; }
  bool uses_right() const { return hands != HandSet::left; }
};

/// "L", "R" or "LR".
std::string to_string(HandSet hands);
HandSet parse_hand_set(std::string_view text);
std::string to_string(MotionModel model);
MotionModel parse_motion_model(std::string_view text);

/// Throws unless every label has start < end and the labels are sorted and disjoint.
void validate_interactions(std::span<const InteractionLabel> labels);

/// Density clustering; labels are 0-based cluster ids in discovery order, -1 is noise.
/// Neighbourhoods include the point itself and use distance <= eps.
std::vector<int> dbscan(std::span<const Vec3> points, double eps, int min_pts);

struct Anchor {
  bool valid = false;
  RigidTransform3 pose;
  double span_start = 0.0;  // observation group covers [span_start, span_end]
  double span_end = 0.0;
  std::size_t support = 0;  // observations in the kept cluster
};

/// One anchor per gap around the interactions (K + 1 for K interactions).
/// `observations` must be sorted by time; observations inside an interaction
/// are ignored.
std::vector<Anchor> anchor_localize(std::span<const ObjectObservation> observations,
                                    std::span<const InteractionLabel> interactions, double eps,
                                    int min_pts);

struct ContactResult {
  Vec3 offset = Vec3::Zero();  // translation that brings the hands onto the object
  std::optional<Vec3> contact_left;
  std::optional<Vec3> contact_right;
};

/// Index of the point in `points` nearest to `query` (brute force, first wins ties).
std::size_t nearest_point(std::span<const Vec3> points, const Vec3& query);

ContactResult contact_offset(const BodyModel& body, const BodyParams& params,
                             const RigidTransform3& object_pose, const ObjectModel& object,
                             HandSet hands);

/// Object pose per frame driven by the hands. With both hands the object
/// follows the right hand and turns with the left-to-right hand vector about
/// the right hand. With one hand it follows that hand; `one_hand_yaw` (if
/// non-empty) gives the yaw change since the first frame, applied about the hand.
/// The z translation is held at the start value.
std::vector<RigidTransform3> track_dragged(const Trajectory2* left, const Trajectory2* right,
                                           const RigidTransform3& start_pose,
                                           std::span<const double> one_hand_yaw = {},
                                           double eps = 1e-9);

/// Cumulative signed angle of the hinge-to-hand vector added to start_angle.
std::vector<double> track_hinged(const Trajectory2& hand, const Vec2& hinge, double start_angle,
                                 double eps = 1e-9);

/// Rotation by `angle` about the vertical axis through the hinge point.
RigidTransform3 hinge_pose(const ObjectModel& object, double angle);

/// Object points in world coordinates for the given pose.
std::vector<Vec3> posed_points(const ObjectModel& object, const RigidTransform3& pose);

}  // namespace wearcap
