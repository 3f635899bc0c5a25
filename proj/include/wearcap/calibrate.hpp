#pragma once

#include "wearcap/body.hpp"
#include "wearcap/geometry.hpp"

#include <optional>
#include <span>
#include <vector>

namespace wearcap {

struct CalibrationOptions {
  RansacOptions ransac;
  /// Candidate offsets added to IMU timestamps to reach the camera clock.
  std::vector<double> offsets = offset_grid(-1.0, 1.0, 0.1);
  std::optional<double> time_offset_override;
  int local_k = 5;
  /// Alternations between the world and local estimates; later rounds align
  /// predicted camera positions instead of raw head positions.
  int rounds = 10;
  double confidence_threshold = 0.5;  // camera poses used for the local estimate
  /// Gauss-Newton iterations of the joint refinement after the alternation.
  int refine_iterations = 50;
  double rotation_weight = 1.0;  // meters per radian in the joint residual
};

struct WorldCalibration {
  RigidTransform3 x_wz;  // z-rotation plus translation
  double time_offset = 0.0;
  double inlier_ratio = 0.0;
  std::size_t matched_pairs = 0;
};

struct CalibrationResult {
  RigidTransform3 x_wz;
  RigidTransform3 x_ic;
  double time_offset = 0.0;
  double inlier_ratio = 0.0;
  int rounds = 0;
};

/// Planar RANSAC alignment of the IMU-side camera positions (head pose
/// composed with `x_ic`) onto the camera positions, with a time-offset grid
/// search unless an override is set. z translation is the mean inlier residual.
WorldCalibration calibrate_world(std::span<const TimedPose> imu_head,
                                 std::span<const TimedPoint3> cam,
                                 const CalibrationOptions& options,
                                 const RigidTransform3& x_ic = RigidTransform3::identity());

/// Averages H_k^-1 X_wz^-1 C_k over the K camera poses closest to their
/// predicted positions X_wz H_k x_ic_guess. Rotations use the chordal mean.
RigidTransform3 calibrate_local(std::span<const TimedPose> cam_poses,
                                std::span<const TimedPose> imu_head, const RigidTransform3& x_wz,
                                double time_offset, const CalibrationOptions& options,
                                const RigidTransform3& x_ic_guess = RigidTransform3::identity());

struct JointFit {
  RigidTransform3 x_wz;
  RigidTransform3 x_ic;
  double cost = 0.0;  // truncated squared position residual over matched poses
  std::size_t inliers = 0;
  std::size_t matched = 0;
};

/// Least-squares refinement of (yaw, translation of x_wz, x_ic) over the
/// confident camera poses whose position residual is below the RANSAC
/// threshold, re-selecting inliers after each solve.
JointFit refine_calibration(std::span<const TimedPose> cam_poses,
                            std::span<const TimedPose> imu_head, const RigidTransform3& x_wz,
                            const RigidTransform3& x_ic, double time_offset,
                            const CalibrationOptions& options);

/// For each candidate offset (or the override) alternates calibrate_world and
/// calibrate_local until both settle, then refines jointly. The offset with
/// the lowest truncated cost wins.
CalibrationResult calibrate(std::span<const TimedPose> imu_head,
                            std::span<const TimedPose> cam_poses,
                            const CalibrationOptions& options);

/// Expresses IMU-frame body parameters in the scene: gamma is mapped as a
/// point and the root rotation is pre-multiplied by the rotation of x_wz.
BodySequence map_body_to_scene(const BodySequence& params, const RigidTransform3& x_wz);
BodyParams map_body_to_scene(const BodyParams& params, const RigidTransform3& x_wz);

}  // namespace wearcap
