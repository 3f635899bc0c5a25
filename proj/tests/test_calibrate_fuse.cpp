#include "doctest.h"
#include "support.hpp"

#include "wearcap/calibrate.hpp"
#include "wearcap/fuse.hpp"
#include "wearcap/sim.hpp"

using namespace wearcap;
using namespace wearcap::testing;

namespace {

Scenario noiseless(const char* preset, std::uint64_t seed) {
  ScenarioConfig cfg = ScenarioConfig::preset(preset, seed);
  cfg.make_noiseless();
  return generate(cfg);
}

}  // namespace

TEST_CASE("calibration recovers the generator transforms without noise") {
  for (std::uint64_t seed : {1u, 2u}) {
    ScenarioConfig cfg = ScenarioConfig::preset("walk", seed);
    cfg.make_noiseless();
    Rng rng(seed);
    cfg.true_x_wz = RigidTransform3::from_yaw(rng.uniform(-3, 3), Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-0.2, 0.2)));
    cfg.true_x_ic = RigidTransform3{rng.rotation(0.2), rng.vec3(0.1)};
    cfg.time_offset = 0.1 * rng.integer(-5, 5);
    const Scenario sc = generate(cfg);
    const auto calib = calibrate(sc.streams.imu_head, sc.streams.localizations, CalibrationOptions{});
    CHECK(calib.time_offset == doctest::Approx(cfg.time_offset));
    CHECK(pose_distance(calib.x_wz, cfg.true_x_wz) < 1e-6);
    CHECK(pose_distance(calib.x_ic, cfg.true_x_ic) < 1e-6);
    CHECK(calib.inlier_ratio == 1.0);
    // H^W = X^WZ H^Z X^IC reproduces the camera poses.
    for (const auto& loc : sc.streams.localizations) {
      for (const auto& h : sc.streams.imu_head) {
        if (std::abs(h.time + calib.time_offset - loc.time) > 1e-9) continue;
        CHECK(pose_distance(calib.x_wz * h.pose * calib.x_ic, loc.pose) < 1e-6);
      }
    }
  }
}

TEST_CASE("calibration honours the time offset override") {
  const Scenario sc = noiseless("door", 3);
  CalibrationOptions opt;
  opt.time_offset_override = 0.0;
  const auto calib = calibrate(sc.streams.imu_head, sc.streams.localizations, opt);
  CHECK(calib.time_offset == 0.0);
  CHECK_THROWS_AS(calibrate(sc.streams.imu_head, {}, opt), std::invalid_argument);
}

TEST_CASE("world calibration on a synthesised camera path") {
  Rng rng(41);
  const RigidTransform3 x_wz = RigidTransform3::from_yaw(1.2, Vec3(2, -1, 0.3));
  std::vector<TimedPose> head;
  std::vector<TimedPoint3> cam;
  for (int k = 0; k < 200; ++k) {
    const double t = k / 30.0;
    const RigidTransform3 h = RigidTransform3::from_yaw(0.2 * t, Vec3(std::cos(t), std::sin(0.7 * t), 1.6));
    head.push_back({t, h, 1.0});
    if (k % 10 == 0) cam.push_back({t, x_wz.apply(h.translation), 0.9});
  }
  CalibrationOptions opt;
  opt.time_offset_override = 0.0;
  const auto w = calibrate_world(head, cam, opt);
  CHECK(pose_distance(w.x_wz, x_wz) < 1e-9);
  CHECK(w.inlier_ratio == 1.0);
}

TEST_CASE("local calibration averages the K best camera poses") {
  const RigidTransform3 x_ic{axis_angle_to_matrix(Vec3(0.05, -0.1, 0.02)), Vec3(0.09, 0, 0.04)};
  std::vector<TimedPose> head;
  std::vector<TimedPose> cam;
  Rng rng(42);
  for (int k = 0; k < 10; ++k) {
    const RigidTransform3 h{rng.rotation(0.3), rng.vec3(3)};
    head.push_back({k * 1.0, h, 1.0});
    RigidTransform3 c = h * x_ic;
    double conf = 0.9;
    if (k >= 7) {
      c.translation += Vec3(1, 0, 0);  // gross error, still confident
    }
    if (k == 0) conf = 0.1;
    cam.push_back({k * 1.0, c, conf});
  }
  CalibrationOptions opt;
  const auto got = calibrate_local(cam, head, RigidTransform3{}, 0.0, opt, x_ic);
  CHECK(pose_distance(got, x_ic) < 1e-9);
  opt.local_k = 0;
  CHECK_THROWS(calibrate_local(cam, head, RigidTransform3{}, 0.0, opt));
}

TEST_CASE("correct_drift") {
  Rng rng(43);
  const auto tr = random_trajectory(rng, 100);
  SUBCASE("localizations on the path leave it unchanged") {
    std::vector<TimedPose> locs;
    for (std::size_t k = 0; k < tr.size(); k += 10) {
      locs.push_back({tr.times[k], RigidTransform3{Mat3::Identity(), tr.point(k)}, 0.9});
    }
    std::size_t used = 0;
    const auto out = correct_drift(tr, locs, 0.5, BendOptions{}, &used);
    CHECK(used == 10);
    CHECK(out.xy == tr.xy);
  }
  SUBCASE("low confidence and out-of-span localizations are ignored") {
    std::vector<TimedPose> locs{{tr.times[5], RigidTransform3{Mat3::Identity(), Vec3(50, 50, 0)}, 0.2},
                                {tr.times.back() + 5.0, RigidTransform3{}, 0.9}};
    std::size_t used = 7;
    const auto out = correct_drift(tr, locs, 0.5, BendOptions{}, &used);
    CHECK(used == 0);
    CHECK(out.xy == tr.xy);
  }
  SUBCASE("a shifted localization pulls the path") {
    std::vector<TimedPose> locs{{tr.times[50], RigidTransform3{Mat3::Identity(), tr.point(50) + Vec3(0.3, 0, 0)}, 0.9}};
    const auto out = correct_drift(tr, locs, 0.5, BendOptions{}, nullptr);
    CHECK((out.xy[50] - tr.xy[50] - Vec2(0.3, 0)).norm() < 0.05);
    CHECK(out.z == tr.z);
  }
}

TEST_CASE("adapt_body_params") {
  const BodyModel body = BodyModel::standard();
  Rng rng(44);
  BodySequence seq;
  Trajectory2 original;
  for (int k = 0; k < 20; ++k) {
    auto p = random_pose(rng, body, 0.3);
    seq.times.push_back(k * 0.1);
    seq.frames.push_back(p);
    original.times.push_back(k * 0.1);
    original.xy.push_back(Vec2(0.1 * k, 0.02 * k * k) + Vec2(0.05, 0.0));
    original.z.push_back(1.5);
  }
  SUBCASE("identical trajectories change nothing") {
    const auto out = adapt_body_params(seq, original, original);
    for (std::size_t f = 0; f < seq.size(); ++f) {
      CHECK(out.frames[f].gamma == seq.frames[f].gamma);
      CHECK(out.frames[f].theta == seq.frames[f].theta);
    }
  }
  SUBCASE("pure translation shifts gamma") {
    const auto moved = transform_planar(original, 0.0, Vec2(1.0, -2.0));
    const auto out = adapt_body_params(seq, original, moved);
    for (std::size_t f = 0; f < seq.size(); ++f) {
      CHECK((out.frames[f].gamma - seq.frames[f].gamma - Vec3(1, -2, 0)).norm() < 1e-12);
      CHECK((out.frames[f].theta - seq.frames[f].theta).norm() < 1e-12);
    }
  }
  SUBCASE("a rigid rotation turns every later frame with the path") {
    const double a = 0.7;
    const auto moved = transform_planar(original, a, Vec2(0.3, 0.1));
    const auto out = adapt_body_params(seq, original, moved);
    const RigidTransform3 m = RigidTransform3::from_yaw(a, Vec3(0.3, 0.1, 0));
    for (std::size_t f = 1; f < seq.size(); ++f) {
      for (const char* v : {"root", "head", "hand_R"}) {
        const Vec3 want = m.apply(forward_kinematics(body, seq.frames[f], v));
        CHECK((forward_kinematics(body, out.frames[f], v) - want).norm() < 1e-9);
      }
    }
  }
  SUBCASE("length mismatch") {
    auto shorter = original;
    shorter.times.pop_back();
    shorter.xy.pop_back();
    shorter.z.pop_back();
    CHECK_THROWS(adapt_body_params(seq, original, shorter));
  }
}

TEST_CASE("registration of a noiseless sequence reproduces the truth") {
  const Scenario sc = noiseless("mixed", 5);
  const auto calib = calibrate(sc.streams.imu_head, sc.streams.localizations, CalibrationOptions{});
  const auto reg = register_human(sc.body, sc.streams.imu_body, sc.streams.localizations, calib, RegisterOptions{});
  REQUIRE(reg.params.size() == sc.truth.body.size());
  double worst = 0.0;
  for (std::size_t f = 0; f < reg.params.size(); ++f) {
    CHECK(reg.params.times[f] == doctest::Approx(sc.truth.body.times[f]).epsilon(1e-12));
    for (const char* v : {"root", "head", "hand_L", "hand_R"}) {
      worst = std::max(worst, (forward_kinematics(sc.body, reg.params.frames[f], v) -
                               forward_kinematics(sc.body, sc.truth.body.frames[f], v)).norm());
    }
  }
  CHECK(worst < 1e-6);
  // The camera path is the head composed with the lever arm.
  const auto cam = camera_trajectory(sc.body, sc.truth.body, sc.streams.localizations.empty() ? RigidTransform3{} : calib.x_ic);
  const auto& loc = sc.streams.localizations.front();
  const std::size_t f = snap_to_sample(sc.truth.body.times, loc.time);
  CHECK((cam.point(f) - loc.pose.translation).norm() < 1e-6);
}
