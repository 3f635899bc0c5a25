#include "doctest.h"
#include "support.hpp"

using namespace wearcap;
using namespace wearcap::testing;

namespace {

ObjectModel door() {
  ObjectModel o;
  o.id = "door";
  o.motion = MotionModel::hinged;
  for (int i = 0; i <= 9; ++i) {
    for (int k = 0; k <= 4; ++k) o.points.emplace_back(1.0 + 0.1 * i, 2.0, 0.5 * k);
  }
  o.hinge_point = Vec3(1.0, 2.0, 0.0);
  return o;
}

ObjectModel box() {
  ObjectModel o;
  o.id = "box";
  for (double x : {-0.5, 0.5}) {
    for (double y : {-0.3, 0.3}) {
      for (double z : {0.0, 0.8}) o.points.emplace_back(x, y, z);
    }
  }
  return o;
}

Trajectory2 wander(Rng& rng, const std::vector<double>& times, Vec2 start, double step) {
  Trajectory2 tr;
  tr.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    tr.xy.push_back(start);
    tr.z.push_back(1.0);
    start += rng.vec2(step);
  }
  return tr;
}

}  // namespace

TEST_CASE("string forms") {
  CHECK(to_string(HandSet::both) == "LR");
  CHECK(parse_hand_set("L") == HandSet::left);
  CHECK(parse_hand_set("R") == HandSet::right);
  CHECK(parse_hand_set("LR") == HandSet::both);
  CHECK_THROWS(parse_hand_set("X"));
  CHECK(parse_motion_model(to_string(MotionModel::hinged)) == MotionModel::hinged);
  CHECK(parse_motion_model(to_string(MotionModel::planar_free)) == MotionModel::planar_free);
  CHECK_THROWS(parse_motion_model("spinning"));
}

TEST_CASE("object and interaction validation") {
  ObjectModel o = box();
  CHECK_NOTHROW(o.validate());
  o.points.clear();
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = box();
  o.points[0].x() = INFINITY;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);

  std::vector<InteractionLabel> labels{{1.0, 2.0, HandSet::right, "a"}, {3.0, 4.0, HandSet::both, "b"}};
  CHECK_NOTHROW(validate_interactions(labels));
  labels[1].start = 1.5;
  CHECK_THROWS_AS(validate_interactions(labels), std::invalid_argument);
  labels[1] = {3.0, 3.0, HandSet::both, "b"};
  CHECK_THROWS_AS(validate_interactions(labels), std::invalid_argument);
}

TEST_CASE("dbscan matches the reachability oracle") {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const int n = rng.integer(0, 50);
    std::vector<Vec3> pts;
    const int centres = rng.integer(1, 4);
    std::vector<Vec3> c;
    for (int k = 0; k < centres; ++k) c.push_back(rng.vec3(1.0));
    for (int k = 0; k < n; ++k) pts.push_back(c[static_cast<std::size_t>(rng.integer(0, centres - 1))] + rng.vec3(0.2));
    const double eps = rng.uniform(0.05, 0.3);
    const int min_pts = rng.integer(1, 5);
    CHECK(dbscan(pts, eps, min_pts) == oracle_dbscan(pts, eps, min_pts));
  }
  CHECK_THROWS(dbscan(std::vector<Vec3>{Vec3::Zero()}, -1.0, 2));
  CHECK_THROWS(dbscan(std::vector<Vec3>{Vec3::Zero()}, 0.1, 0));
}

TEST_CASE("dbscan border point goes to the first cluster") {
  // Two dense groups sharing one border point in the middle.
  std::vector<Vec3> pts;
  for (double x : {0.0, 0.05, 0.1, 0.2, 0.5, 0.8, 0.9, 0.95, 1.0}) pts.emplace_back(x, 0, 0);
  const auto labels = dbscan(pts, 0.31, 4);
  CHECK(labels == std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(labels == oracle_dbscan(pts, 0.31, 4));
}

TEST_CASE("anchor_localize") {
  Rng rng(32);
  const RigidTransform3 before = RigidTransform3::from_yaw(0.3, Vec3(1, 2, 0));
  const RigidTransform3 after = RigidTransform3::from_yaw(1.1, Vec3(3, 1, 0));
  std::vector<ObjectObservation> obs;
  for (int k = 0; k < 10; ++k) obs.push_back({k * 0.5, "o", before, 0.9});
  obs.push_back({5.2, "o", RigidTransform3::from_yaw(0.0, Vec3(9, 9, 0)), 0.9});  // outlier
  for (int k = 0; k < 8; ++k) obs.push_back({6.0 + k * 0.5, "o", before, 0.9});  // inside the interaction
  for (int k = 0; k < 6; ++k) obs.push_back({12.0 + k * 0.5, "o", after, 0.9});
  const std::vector<InteractionLabel> labels{{5.5, 11.0, HandSet::both, "o"}};
  const auto anchors = anchor_localize(obs, labels, 0.15, 3);
  REQUIRE(anchors.size() == 2);
  CHECK(anchors[0].valid);
  CHECK(anchors[0].support == 10);
  CHECK(pose_distance(anchors[0].pose, before) < 1e-12);
  CHECK(anchors[0].span_end == doctest::Approx(5.2));
  CHECK(anchors[1].valid);
  CHECK(anchors[1].support == 6);
  CHECK(pose_distance(anchors[1].pose, after) < 1e-12);

  SUBCASE("no observations after the last interaction") {
    obs.resize(11);
    const auto a = anchor_localize(obs, labels, 0.15, 3);
    CHECK_FALSE(a[1].valid);
  }
  SUBCASE("unsorted observations are rejected") {
    std::swap(obs[0], obs[3]);
    CHECK_THROWS_AS(anchor_localize(obs, labels, 0.15, 3), std::invalid_argument);
  }
  SUBCASE("noisy cluster averages") {
    std::vector<ObjectObservation> noisy;
    for (int k = 0; k < 40; ++k) {
      RigidTransform3 p = before;
      p.translation += rng.vec3(0.01);
      p.rotation = rot_z(rng.normal(0.01)) * p.rotation;
      noisy.push_back({k * 0.1, "o", p, 0.9});
    }
    const auto a = anchor_localize(noisy, {}, 0.15, 3);
    REQUIRE(a.size() == 1);
    CHECK((a[0].pose.translation - before.translation).norm() < 0.01);
    CHECK(rotation_distance(a[0].pose.rotation, before.rotation) < 0.01);
  }
}

TEST_CASE("nearest_point and contact_offset") {
  const std::vector<Vec3> pts{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 0, 0)};
  CHECK(nearest_point(pts, Vec3(0.9, 0.1, 0)) == 1);
  CHECK_THROWS(nearest_point(std::vector<Vec3>{}, Vec3::Zero()));

  const BodyModel body = BodyModel::standard();
  BodyParams p = BodyParams::zero(body);
  p.gamma = Vec3(0, 0, 0.92);
  const Vec3 hr = forward_kinematics(body, p, "hand_R");
  const Vec3 hl = forward_kinematics(body, p, "hand_L");
  ObjectModel o;
  o.id = "bar";
  o.points = {hr + Vec3(0.05, 0, 0), hl + Vec3(0.05, 0, 0)};
  const auto both = contact_offset(body, p, RigidTransform3::identity(), o, HandSet::both);
  CHECK((both.offset - Vec3(0.05, 0, 0)).norm() < 1e-12);
  REQUIRE(both.contact_left);
  REQUIRE(both.contact_right);
  CHECK((*both.contact_right - o.points[0]).norm() < 1e-12);
  const auto shifted = contact_offset(body, p, RigidTransform3{Mat3::Identity(), Vec3(0, 0.1, 0)}, o, HandSet::right);
  CHECK((shifted.offset - Vec3(0.05, 0.1, 0)).norm() < 1e-12);
  CHECK_FALSE(shifted.contact_left);
}

TEST_CASE("track_dragged matches per-frame oracles") {
  Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const auto times = random_times(rng, static_cast<std::size_t>(rng.integer(2, 60)));
    const RigidTransform3 start{rot_z(rng.uniform(-3, 3)), rng.vec3(3)};
    const Trajectory2 right = wander(rng, times, rng.vec2(3), 0.05);
    const Trajectory2 left = wander(rng, times, right.xy[0] + Vec2(0.4, 0.1), 0.05);
    const auto two = track_dragged(&left, &right, start);
    for (std::size_t k = 0; k < times.size(); ++k) {
      CHECK(pose_distance(two[k], oracle_drag_two(left.xy[0], right.xy[0], left.xy[k], right.xy[k], start)) < 1e-9);
    }
    std::vector<double> yaw(times.size());
    for (auto& y : yaw) y = rng.uniform(-2, 2);
    const auto one = track_dragged(&left, nullptr, start, yaw);
    const auto rigid = track_dragged(nullptr, &right, start);
    for (std::size_t k = 0; k < times.size(); ++k) {
      CHECK(pose_distance(one[k], oracle_drag_one(left.xy[0], left.xy[k], yaw[k], start)) < 1e-9);
      CHECK(pose_distance(rigid[k], oracle_drag_one(right.xy[0], right.xy[k], 0.0, start)) < 1e-9);
    }
  }
  CHECK_THROWS(track_dragged(nullptr, nullptr, RigidTransform3{}));
}

TEST_CASE("track_dragged holds the heading when the hands coincide") {
  std::vector<double> times{0, 1, 2};
  Trajectory2 l;
  l.times = times;
  l.xy = {Vec2(0, 0), Vec2(1, 1), Vec2(0, 1)};
  l.z.assign(3, 1.0);
  Trajectory2 r = l;
  r.xy = {Vec2(1, 0), Vec2(1, 1), Vec2(1, 1)};
  const auto poses = track_dragged(&l, &r, RigidTransform3{});
  CHECK(yaw_of(poses[1].rotation) == doctest::Approx(0.0));
  CHECK(yaw_of(poses[2].rotation) == doctest::Approx(0.0));
}

TEST_CASE("track_hinged and hinge_pose") {
  Rng rng(34);
  const ObjectModel d = door();
  const Vec2 j = d.hinge_point.head<2>();
  for (int i = 0; i < 50; ++i) {
    Trajectory2 hand;
    double a = rng.uniform(-3, 3);
    const double radius = rng.uniform(0.3, 1.0);
    for (int k = 0; k < 60; ++k) {
      hand.times.push_back(k);
      hand.xy.push_back(j + radius * rng.uniform(0.8, 1.2) * Vec2(std::cos(a), std::sin(a)));
      hand.z.push_back(1.0);
      a += rng.uniform(-0.3, 0.5);
    }
    const double s = rng.uniform(-1, 1);
    const auto got = track_hinged(hand, j, s);
    const auto want = oracle_hinge(hand, j, s);
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(std::abs(got[k] - want[k]) < 1e-9);

    const double x = rng.uniform(-5, 5);
    const double y = rng.uniform(-5, 5);
    CHECK(pose_distance(hinge_pose(d, x) * hinge_pose(d, y), hinge_pose(d, x + y)) < 1e-9);
    const Vec3 on_axis(j.x(), j.y(), rng.uniform(0, 2));
    CHECK((hinge_pose(d, x).apply(on_axis) - on_axis).norm() < 1e-9);
  }
  CHECK(pose_distance(hinge_pose(d, 0.0), RigidTransform3{}) < 1e-15);
  CHECK_THROWS(hinge_pose(box(), 0.3));
}

TEST_CASE("posed_points") {
  const ObjectModel b = box();
  const auto pose = RigidTransform3::from_yaw(0.5, Vec3(1, 2, 3));
  const auto pts = posed_points(b, pose);
  REQUIRE(pts.size() == b.points.size());
  for (std::size_t k = 0; k < pts.size(); ++k) CHECK((pts[k] - pose.apply(b.points[k])).norm() == 0.0);
}
