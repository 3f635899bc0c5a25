#include "doctest.h"
#include "support.hpp"

#include "wearcap/calibrate.hpp"

using namespace wearcap;
using namespace wearcap::testing;

namespace {

// World position of a joint by walking the chain from the root.
Vec3 oracle_fk(const BodyModel& body, const BodyParams& p, int joint) {
  std::vector<int> chain;
  for (int j = joint; j >= 0; j = body.joints()[static_cast<std::size_t>(j)].parent) chain.push_back(j);
  std::reverse(chain.begin(), chain.end());
  Mat3 r = Mat3::Identity();
  Vec3 x = p.gamma;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const int j = chain[i];
    if (i > 0) x += r * body.joints()[static_cast<std::size_t>(j)].offset;
    r = r * axis_angle_to_matrix(p.theta.segment<3>(3 * j));
  }
  return x;
}

}  // namespace

TEST_CASE("standard body model") {
  const BodyModel body = BodyModel::standard();
  CHECK(body.joint_count() == 14);
  CHECK(body.parameter_count() == 45);
  CHECK(body.joint_index("pelvis") == 0);
  CHECK(body.vertex_joint("root") == 0);
  CHECK(body.vertex_joint("head") == body.joint_index("head"));
  CHECK(body.vertex_joint("hand_R") == body.joint_index("r_wrist"));
  CHECK(body.vertex_joint("l_elbow") == body.joint_index("l_elbow"));
  CHECK_THROWS(body.joint_index("tail"));
  CHECK_THROWS(body.vertex_joint("tail"));
  CHECK(body.is_ancestor(0, body.joint_index("r_wrist")));
  CHECK_FALSE(body.is_ancestor(body.joint_index("r_wrist"), 0));
  CHECK_FALSE(body.is_ancestor(3, 3));
  const auto mask = body.default_interaction_mask();
  CHECK(std::find(mask.begin(), mask.end(), body.joint_index("r_elbow")) != mask.end());
  CHECK(std::find(mask.begin(), mask.end(), body.joint_index("l_knee")) == mask.end());

  // Rest pose: hands hang below the shoulders.
  BodyParams rest = BodyParams::zero(body);
  rest.gamma = Vec3(0, 0, 0.92);
  const Vec3 hr = forward_kinematics(body, rest, "hand_R");
  CHECK(hr.z() == doctest::Approx(0.92 + 0.25 + 0.25 - 0.29 - 0.27));
  CHECK(hr.y() < 0.0);
}

TEST_CASE("invalid body models are rejected") {
  CHECK_THROWS(BodyModel({{"a", 0, Vec3::Zero()}}, {}));
  CHECK_THROWS(BodyModel({{"a", -1, Vec3::Zero()}, {"b", 5, Vec3::Zero()}}, {}));
  CHECK_THROWS(BodyModel({{"a", -1, Vec3::Zero()}}, {{"hand", 3}}));
}

TEST_CASE("forward kinematics matches a chain walk") {
  const BodyModel body = BodyModel::standard();
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_pose(rng, body, 1.5);
    const auto transforms = joint_transforms(body, p);
    for (int j = 0; j < static_cast<int>(body.joint_count()); ++j) {
      const Vec3 oracle = oracle_fk(body, p, j);
      CHECK((forward_kinematics(body, p, j) - oracle).norm() < 1e-12);
      CHECK((transforms[static_cast<std::size_t>(j)].translation - oracle).norm() < 1e-12);
    }
  }
}

TEST_CASE("FK Jacobian matches finite differences") {
  const BodyModel body = BodyModel::standard();
  Rng rng(22);
  for (int i = 0; i < 30; ++i) {
    const auto p = random_pose(rng, body, 1.2);
    for (const char* v : {"hand_L", "hand_R", "head"}) {
      const auto jac = fk_jacobian(body, p, v);
      REQUIRE(jac.cols() == static_cast<Eigen::Index>(body.parameter_count()));
      Eigen::MatrixXd fd(3, jac.cols());
      for (Eigen::Index c = 0; c < jac.cols(); ++c) {
        BodyParams a = p;
        BodyParams b = p;
        const double h = 1e-6;
        if (c < a.theta.size()) {
          a.theta[c] += h;
          b.theta[c] -= h;
        } else {
          a.gamma[c - a.theta.size()] += h;
          b.gamma[c - b.theta.size()] -= h;
        }
        fd.col(c) = (forward_kinematics(body, a, v) - forward_kinematics(body, b, v)) / (2 * h);
      }
      CHECK((jac - fd).norm() < 1e-7 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("body surface points") {
  const BodyModel body = BodyModel::standard();
  BodyParams p = BodyParams::zero(body);
  const auto pts = body_surface_points(body, p, 3);
  CHECK(pts.size() == body.joint_count() + 3 * (body.joint_count() - 1));
  CHECK(body_surface_points(body, p, 0).size() == body.joint_count());
}

TEST_CASE("map_body_to_scene") {
  const BodyModel body = BodyModel::standard();
  Rng rng(23);
  const auto p = random_pose(rng, body);
  SUBCASE("identity leaves parameters unchanged") {
    const auto q = map_body_to_scene(p, RigidTransform3::identity());
    CHECK((q.theta - p.theta).norm() < 1e-12);
    CHECK(q.gamma == p.gamma);
  }
  SUBCASE("pure translation") {
    const Vec3 d(1, -2, 0.5);
    const auto q = map_body_to_scene(p, RigidTransform3{Mat3::Identity(), d});
    CHECK((q.gamma - (p.gamma + d)).norm() < 1e-15);
    CHECK((q.theta - p.theta).norm() < 1e-12);
  }
  SUBCASE("commutes with FK") {
    for (int i = 0; i < 50; ++i) {
      const auto x = RigidTransform3::from_yaw(rng.uniform(-3, 3), rng.vec3(4));
      const auto pp = random_pose(rng, body, 1.0);
      const auto q = map_body_to_scene(pp, x);
      for (const char* v : {"root", "head", "hand_L"}) {
        CHECK((forward_kinematics(body, q, v) - x.apply(forward_kinematics(body, pp, v))).norm() < 1e-9);
      }
    }
  }
  SUBCASE("quarter turn about z") {
    const auto x = RigidTransform3::from_yaw(std::numbers::pi / 2, Vec3(0.5, 0, 0));
    const auto q = map_body_to_scene(p, x);
    const Vec3 head = forward_kinematics(body, p, "head");
    const Vec3 expect = Vec3(-head.y() + 0.5, head.x(), head.z());
    CHECK((forward_kinematics(body, q, "head") - expect).norm() < 1e-9);
  }
}
