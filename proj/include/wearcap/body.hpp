#pragma once

#include "wearcap/geometry.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace wearcap {

struct Joint {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();  // rest offset from the parent joint, meters
};

/// Kinematic tree with axis-angle joints. Joint 0 is the root (pelvis) and sits
/// at the translation parameter; every other joint hangs off its parent by a
/// fixed offset rotated by the parent's accumulated rotation.
class BodyModel {
 public:
  BodyModel(std::vector<Joint> joints, std::map<std::string, int> vertices);

  /// 14-joint chain with average adult segment lengths, facing +x, z up.
  static BodyModel standard();

  const std::vector<Joint>& joints() const { return joints_; }
  const std::map<std::string, int>& vertices() const { return vertices_; }
  std::size_t joint_count() const { return joints_.size(); }
  /// theta (3 per joint) followed by gamma (3).
  std::size_t parameter_count() const { return 3 * joints_.size() + 3; }

  int joint_index(std::string_view name) const;
  /// Resolves a named vertex (root, head, hand_L, hand_R) or a joint name.
  int vertex_joint(std::string_view vertex) const;
  /// True when `ancestor` lies strictly above `joint` in the tree.
  bool is_ancestor(int ancestor, int joint) const;

  /// Joints driving the named hands, arms, shoulders and pelvis.
  std::vector<int> default_interaction_mask() const;

 private:
  std::vector<Joint> joints_;
  std::map<std::string, int> vertices_;
};

struct BodyParams {
  Eigen::VectorXd theta;  // axis-angle per joint; first 3 = global root rotation
  Vec3 gamma = Vec3::Zero();

  static BodyParams zero(const BodyModel& body);
};

struct BodySequence {
  std::vector<double> times;
  std::vector<BodyParams> frames;

  std::size_t size() const { return frames.size(); }
};

/// World transform of every joint.
std::vector<RigidTransform3> joint_transforms(const BodyModel& body, const BodyParams& params);

Vec3 forward_kinematics(const BodyModel& body, const BodyParams& params, int joint);
Vec3 forward_kinematics(const BodyModel& body, const BodyParams& params, std::string_view vertex);

/// d position / d (theta, gamma), 3 x parameter_count().
Eigen::MatrixXd fk_jacobian(const BodyModel& body, const BodyParams& params, int joint);
Eigen::MatrixXd fk_jacobian(const BodyModel& body, const BodyParams& params,
                            std::string_view vertex);

/// Joint positions plus `per_segment` evenly spaced points on every bone.
std::vector<Vec3> body_surface_points(const BodyModel& body, const BodyParams& params,
                                      int per_segment = 3);

}  // namespace wearcap
