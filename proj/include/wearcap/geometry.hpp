#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <span>
#include <vector>

namespace wearcap {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Rotation about +z.
Mat3 rot_z(double angle);

/// Rodrigues map from an axis-angle vector to a rotation matrix.
Mat3 axis_angle_to_matrix(const Vec3& axis_angle);
Vec3 matrix_to_axis_angle(const Mat3& rotation);

/// Left Jacobian of SO(3): exp(phi + d) ~= exp(J_l(phi) d) exp(phi).
Mat3 so3_left_jacobian(const Vec3& phi);

/// Heading of a rotation: angle of its x-axis projected on the XY plane.
double yaw_of(const Mat3& rotation);

/// Geodesic angle between two rotations (radians).
double rotation_distance(const Mat3& a, const Mat3& b);

/// SE(3) element stored as rotation matrix + translation.
struct RigidTransform3 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform3 identity() { return {}; }
  static RigidTransform3 from_yaw(double yaw, const Vec3& translation = Vec3::Zero());

  RigidTransform3 inverse() const;
  Vec3 apply(const Vec3& point) const { return rotation * point + translation; }
  Eigen::Matrix4d matrix() const;

  /// Max deviation of R^T R from identity and |det R - 1|.
  double orthonormality_error() const;
};

/// a * b applies b first, then a.
RigidTransform3 compose(const RigidTransform3& a, const RigidTransform3& b);
inline RigidTransform3 operator*(const RigidTransform3& a, const RigidTransform3& b) {
  return compose(a, b);
}

/// Planar rigid motion; angle kept in (-pi, pi].
struct RigidTransform2 {
  double angle = 0.0;
  Vec2 translation = Vec2::Zero();

  RigidTransform2() = default;
  RigidTransform2(double a, const Vec2& t) : angle(wrap_angle(a)), translation(t) {}

  Vec2 apply(const Vec2& p) const;
  Eigen::Matrix2d rotation() const;
  /// Lifts to a z-rotation with the given z translation.
  RigidTransform3 lift(double z_translation = 0.0) const;
};

struct TimedPoint3 {
  double time = 0.0;
  Vec3 position = Vec3::Zero();
  double confidence = 1.0;
};

struct TimedPose {
  double time = 0.0;
  RigidTransform3 pose;
  double confidence = 1.0;
};

/// argmin over SO(3) of sum ||R - R_k||_F^2, by projecting the arithmetic mean
/// onto SO(3). Throws std::invalid_argument on an empty set and
/// std::domain_error("degenerate rotation set") when the minimiser is not unique.
Mat3 chordal_mean_rotation(std::span<const Mat3> rotations);

/// Closed-form least-squares planar rigid fit mapping source onto target.
RigidTransform2 procrustes_2d(std::span<const Vec2> source, std::span<const Vec2> target);

struct RansacOptions {
  double threshold = 0.15;       // inlier distance, meters
  int iterations = 200;
  double max_time_gap = 0.02;    // seconds, for temporal matching
  std::uint64_t seed = 0;
};

struct RansacResult {
  RigidTransform2 transform;
  /// One flag per source sample; unmatched samples are false.
  std::vector<bool> inlier_mask;
  std::size_t inlier_count = 0;
  std::size_t matched_pairs = 0;
  double z_offset = 0.0;          // mean (target.z - source.z) over inliers
  double inlier_rms = 0.0;        // xy residual over inliers
  bool translation_only = false;  // source points had no spatial extent
};

/// Index pairs (source, target) matched by nearest time within max_gap.
/// `source_time_shift` is added to source timestamps before matching.
std::vector<std::pair<std::size_t, std::size_t>> match_by_time(
    std::span<const TimedPoint3> source, std::span<const TimedPoint3> target, double max_gap,
    double source_time_shift = 0.0);

/// RANSAC planar alignment of source positions onto target positions after
/// projecting to the XY plane. Minimal sample is two pairs; the winning
/// consensus set is refined with closed-form Procrustes.
RansacResult ransac_align_2d(std::span<const TimedPoint3> source,
                             std::span<const TimedPoint3> target, const RansacOptions& options,
                             double source_time_shift = 0.0);

struct TimeOffsetResult {
  double offset = 0.0;
  RansacResult alignment;
};

/// Repeats RANSAC for each candidate offset (added to source times) and keeps
/// the one with the most inliers; ties go to the lower inlier RMS.
TimeOffsetResult grid_search_time_offset(std::span<const TimedPoint3> source,
                                         std::span<const TimedPoint3> target,
                                         std::span<const double> offsets,
                                         const RansacOptions& options);

/// Evenly spaced grid [lo, hi] with the given step (inclusive, rounded).
std::vector<double> offset_grid(double lo, double hi, double step);

}  // namespace wearcap
