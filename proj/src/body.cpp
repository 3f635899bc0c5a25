#include "wearcap/body.hpp"

#include <cmath>
#include <stdexcept>

namespace wearcap {

BodyModel::BodyModel(std::vector<Joint> joints, std::map<std::string, int> vertices)
    : joints_(std::move(joints)), vertices_(std::move(vertices)) {
  if (joints_.empty()) throw std::invalid_argument("body model has no joints");
  if (joints_[0].parent != -1) throw std::invalid_argument("joint 0 must be the root");
  if (!joints_[0].offset.isZero(0.0)) {
    throw std::invalid_argument("root joint offset must be zero (root sits at gamma)");
  }
  for (std::size_t i = 1; i < joints_.size(); ++i) {
    // Parents precede children, so the parent array is a tree rooted at 0.
    if (joints_[i].parent < 0 || joints_[i].parent >= static_cast<int>(i)) {
      throw std::invalid_argument("joint '" + joints_[i].name + "' has an invalid parent");
    }
  }
  for (const auto& j : joints_) {
    if (!j.offset.allFinite()) throw std::invalid_argument("non-finite joint offset");
  }
  for (const char* required : {"root", "head", "hand_L", "hand_R"}) {
    auto it = vertices_.find(required);
    if (it == vertices_.end()) {
      throw std::invalid_argument(std::string("body model lacks vertex '") + required + "'");
    }
    if (it->second < 0 || it->second >= static_cast<int>(joints_.size())) {
      throw std::invalid_argument(std::string("vertex '") + required + "' maps to no joint");
    }
  }
}

BodyModel BodyModel::standard() {
  std::vector<Joint> joints = {
      {"pelvis", -1, {0.0, 0.0, 0.0}},
      {"spine", 0, {0.0, 0.0, 0.25}},
      {"neck", 1, {0.0, 0.0, 0.30}},
      {"head", 2, {0.0, 0.0, 0.15}},
      {"l_shoulder", 1, {0.0, 0.18, 0.25}},
      {"l_elbow", 4, {0.0, 0.0, -0.29}},
      {"l_wrist", 5, {0.0, 0.0, -0.27}},
      {"r_shoulder", 1, {0.0, -0.18, 0.25}},
      {"r_elbow", 7, {0.0, 0.0, -0.29}},
      {"r_wrist", 8, {0.0, 0.0, -0.27}},
      {"l_knee", 0, {0.0, 0.09, -0.45}},
      {"l_ankle", 10, {0.0, 0.0, -0.42}},
      {"r_knee", 0, {0.0, -0.09, -0.45}},
      {"r_ankle", 12, {0.0, 0.0, -0.42}},
  };
  std::map<std::string, int> vertices = {{"root", 0}, {"head", 3}, {"hand_L", 6}, {"hand_R", 9}};
  return BodyModel(std::move(joints), std::move(vertices));
}

int BodyModel::joint_index(std::string_view name) const {
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == name) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown joint '" + std::string(name) + "'");
}

int BodyModel::vertex_joint(std::string_view vertex) const {
  if (auto it = vertices_.find(std::string(vertex)); it != vertices_.end()) return it->second;
  for (std::size_t i = 0; i < joints_.size(); ++i) {
    if (joints_[i].name == vertex) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown vertex '" + std::string(vertex) + "'");
}

bool BodyModel::is_ancestor(int ancestor, int joint) const {
  for (int j = joints_.at(static_cast<std::size_t>(joint)).parent; j >= 0;
       j = joints_[static_cast<std::size_t>(j)].parent) {
    if (j == ancestor) return true;
  }
  return false;
}

std::vector<int> BodyModel::default_interaction_mask() const {
  std::vector<int> mask;
  for (const char* name :
       {"pelvis", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"}) {
    for (std::size_t i = 0; i < joints_.size(); ++i) {
      if (joints_[i].name == name) mask.push_back(static_cast<int>(i));
    }
  }
  return mask;
}

BodyParams BodyParams::zero(const BodyModel& body) {
  BodyParams p;
  p.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * body.joint_count()));
  return p;
}

namespace {

void check_params(const BodyModel& body, const BodyParams& params) {
  if (params.theta.size() != static_cast<Eigen::Index>(3 * body.joint_count())) {
    throw std::invalid_argument("theta length does not match the body model");
  }
}

int checked_joint(const BodyModel& body, int joint) {
  if (joint < 0 || joint >= static_cast<int>(body.joint_count())) {
    throw std::out_of_range("unknown vertex index " + std::to_string(joint));
  }
  return joint;
}

}  // namespace

std::vector<RigidTransform3> joint_transforms(const BodyModel& body, const BodyParams& params) {
  check_params(body, params);
  const auto& joints = body.joints();
  std::vector<RigidTransform3> world(joints.size());
  for (std::size_t i = 0; i < joints.size(); ++i) {
    const Mat3 local = axis_angle_to_matrix(params.theta.segment<3>(static_cast<Eigen::Index>(3 * i)));
    if (joints[i].parent < 0) {
      world[i] = {local, params.gamma};
    } else {
      const auto& parent = world[static_cast<std::size_t>(joints[i].parent)];
      world[i] = {parent.rotation * local, parent.apply(joints[i].offset)};
    }
  }
  return world;
}

Vec3 forward_kinematics(const BodyModel& body, const BodyParams& params, int joint) {
  checked_joint(body, joint);
  return joint_transforms(body, params)[static_cast<std::size_t>(joint)].translation;
}

Vec3 forward_kinematics(const BodyModel& body, const BodyParams& params, std::string_view vertex) {
  return forward_kinematics(body, params, body.vertex_joint(vertex));
}

Eigen::MatrixXd fk_jacobian(const BodyModel& body, const BodyParams& params, int joint) {
  checked_joint(body, joint);
  const auto world = joint_transforms(body, params);
  const auto& joints = body.joints();
  const Vec3 p = world[static_cast<std::size_t>(joint)].translation;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(3, static_cast<Eigen::Index>(body.parameter_count()));
  for (int a = joints[static_cast<std::size_t>(joint)].parent; a >= 0;
       a = joints[static_cast<std::size_t>(a)].parent) {
    const auto ua = static_cast<std::size_t>(a);
    const Mat3 parent_rot =
        joints[ua].parent < 0 ? Mat3::Identity()
                              : world[static_cast<std::size_t>(joints[ua].parent)].rotation;
    const Mat3 axes =
        parent_rot * so3_left_jacobian(params.theta.segment<3>(static_cast<Eigen::Index>(3 * ua)));
    const Vec3 lever = p - world[ua].translation;
    for (int k = 0; k < 3; ++k) {
      jac.col(static_cast<Eigen::Index>(3 * ua) + k) = axes.col(k).cross(lever);
    }
  }
  jac.rightCols<3>() = Mat3::Identity();
  return jac;
}

Eigen::MatrixXd fk_jacobian(const BodyModel& body, const BodyParams& params,
                            std::string_view vertex) {
  return fk_jacobian(body, params, body.vertex_joint(vertex));
}

std::vector<Vec3> body_surface_points(const BodyModel& body, const BodyParams& params,
                                      int per_segment) {
  const auto world = joint_transforms(body, params);
  std::vector<Vec3> pts;
  pts.reserve(world.size() * static_cast<std::size_t>(per_segment + 1));
  for (std::size_t i = 0; i < world.size(); ++i) {
    pts.push_back(world[i].translation);
    const int parent = body.joints()[i].parent;
    if (parent < 0) continue;
    const Vec3& a = world[static_cast<std::size_t>(parent)].translation;
    const Vec3& b = world[i].translation;
    for (int s = 1; s <= per_segment; ++s) {
      const double u = static_cast<double>(s) / (per_segment + 1);
      pts.push_back(a + u * (b - a));
    }
  }
  return pts;
}

}  // namespace wearcap
