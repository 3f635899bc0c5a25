#include "doctest.h"
#include "scenarios.hpp"

using namespace wearcap;
using namespace wearcap::testing;

TEST_CASE("end_contact follows the object motion") {
  Rng rng(51);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform3 o_s{rng.rotation(), rng.vec3(3)};
    const RigidTransform3 o_e{rng.rotation(), rng.vec3(3)};
    const Vec3 local = rng.vec3(1);
    const Vec3 c_s = o_s.apply(local);
    CHECK((end_contact(c_s, o_s, o_e) - o_e.apply(local)).norm() < 1e-12);
    CHECK((end_contact(c_s, o_s, o_s) - c_s).norm() < 1e-12);
  }
  const std::vector<Vec3> cs{Vec3(1, 0, 0), Vec3(0, 1, 0)};
  const auto ce = end_contacts(cs, RigidTransform3{}, RigidTransform3::from_yaw(std::numbers::pi / 2));
  CHECK((ce[0] - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((ce[1] - Vec3(-1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("interpolate_yaw takes the short way") {
  const auto y = interpolate_yaw(3.0, -3.0, 5);
  REQUIRE(y.size() == 5);
  CHECK(y.front() == 3.0);
  CHECK(wrap_angle(y.back()) == doctest::Approx(-3.0));
  for (std::size_t k = 1; k < y.size(); ++k) CHECK(y[k] > y[k - 1]);
  CHECK(interpolate_yaw(0.2, 0.4, 1) == std::vector<double>{0.2});
  const auto r = interpolate_one_hand_rotation(rot_z(0.1), rot_z(0.5), 3);
  CHECK(yaw_of(r[1]) == doctest::Approx(0.3));
}

TEST_CASE("interval_frames") {
  std::vector<double> t;
  for (int k = 0; k < 100; ++k) t.push_back(k / 30.0);
  const auto [a, b] = interval_frames(t, InteractionLabel{1.0, 2.0, HandSet::right, "o"});
  CHECK(a == 30);
  CHECK(b == 60);
  CHECK_THROWS(interval_frames(t, InteractionLabel{1.0, 1.03, HandSet::right, "o"}));
  CHECK_THROWS(interval_frames(t, InteractionLabel{1.0, 9.0, HandSet::right, "o"}));
  CHECK(lead_hand(HandSet::both) == "hand_R");
  CHECK(lead_hand(HandSet::left) == "hand_L");
}

TEST_CASE("tracking the true hands reproduces the true object motion") {
  for (const char* preset : {"door", "table"}) {
    const auto rc = make_refine_case(preset, 2);
    const auto& truth = rc.scenario.truth;
    const auto [first, last] = interval_frames(truth.body.times, rc.label);
    std::optional<Trajectory2> l;
    std::optional<Trajectory2> r;
    const bool hinged = rc.object.motion == MotionModel::hinged;
    if (rc.label.uses_left() && !hinged) l = hand_path(rc.scenario.body, truth.body, first, last, "hand_L");
    if (rc.label.uses_right()) r = hand_path(rc.scenario.body, truth.body, first, last, "hand_R");
    const auto poses = track_interaction(rc.object, l, r, rc.o_s);
    const auto& track = truth.object_poses.at(rc.label.object_id);
    for (std::size_t f = first; f <= last; ++f) CHECK(pose_distance(poses[f - first], track[f]) < 1e-9);
  }
}

TEST_CASE("refine_interaction meets the end anchor") {
  for (const char* preset : {"door", "table", "table_one_hand"}) {
    CAPTURE(preset);
    const auto rc = make_refine_case(preset, 3);
    const auto& truth = rc.scenario.truth;
    RefineOptions opt;
    const auto sol = refine_interaction(truth.body, rc.object, rc.o_s, rc.o_e, rc.label, rc.scenario.body, opt);
    CHECK(sol.end_anchor_used);
    CHECK(pose_distance(sol.object_poses.back(), rc.o_e) < 1e-6);
    CHECK(pose_distance(sol.object_poses.front(), rc.o_s) < 1e-9);
    CHECK(sol.end_residual < 1e-2);
    CHECK(sol.start_residual < 1e-2);
    const std::size_t lo = sol.first_frame > opt.window ? sol.first_frame - opt.window : 0;
    const std::size_t hi = sol.last_frame + opt.window;
    for (std::size_t f = 0; f < truth.body.size(); ++f) {
      if (f >= lo && f <= hi) continue;
      CHECK(sol.body.frames[f].theta == truth.body.frames[f].theta);
      CHECK(sol.body.frames[f].gamma == truth.body.frames[f].gamma);
    }
  }
}

TEST_CASE("refine_interaction without an end anchor keeps the body") {
  const auto rc = make_refine_case("table", 4);
  const auto& truth = rc.scenario.truth;
  const auto sol = refine_interaction(truth.body, rc.object, rc.o_s, std::nullopt, rc.label, rc.scenario.body, RefineOptions{});
  CHECK_FALSE(sol.end_anchor_used);
  for (std::size_t f = 0; f < truth.body.size(); ++f) CHECK(sol.body.frames[f].theta == truth.body.frames[f].theta);
  const auto& track = truth.object_poses.at(rc.label.object_id);
  CHECK(pose_distance(sol.object_poses.back(), track[sol.last_frame]) < 1e-9);
}

TEST_CASE("refine_interaction rejects a contact on the hinge axis") {
  auto rc = make_refine_case("door", 5);
  ObjectModel bad = rc.object;
  const auto [first, last] = interval_frames(rc.scenario.truth.body.times, rc.label);
  // Put the hinge under the hand at the start.
  const Vec3 hand = forward_kinematics(rc.scenario.body, rc.scenario.truth.body.frames[first], "hand_R");
  const Vec3 local = rc.o_s.inverse().apply(hand);
  bad.hinge_point = Vec3(hand.x(), hand.y(), 0.0);
  bad.points = {local};
  CHECK_THROWS_WITH(refine_interaction(rc.scenario.truth.body, bad, rc.o_s, rc.o_e, rc.label, rc.scenario.body, RefineOptions{}),
                    "degenerate hinge contact");
}
