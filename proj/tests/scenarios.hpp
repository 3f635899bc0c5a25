#pragma once

// Scenario helpers shared by the unit tests and the acceptance suite.

#include "support.hpp"
#include "wearcap/refine.hpp"
#include "wearcap/sim.hpp"

#include <string>

namespace wearcap::testing {

struct RefineCase {
  Scenario scenario;
  ObjectModel object;
  InteractionLabel label;
  RigidTransform3 o_s;
  RigidTransform3 o_e;  // perturbed end anchor
};

/// Noiseless single-interaction scenario whose end anchor is moved away from
/// the truth; hinged objects stay on their hinge.
inline RefineCase make_refine_case(const std::string& preset, std::uint64_t seed) {
  ScenarioConfig cfg = ScenarioConfig::preset(preset, seed);
  cfg.make_noiseless();
  RefineCase rc;
  rc.scenario = generate(cfg);
  rc.label = rc.scenario.interactions.front();
  for (const auto& o : rc.scenario.objects) {
    if (o.id == rc.label.object_id) rc.object = o;
  }
  const auto& truth = rc.scenario.truth;
  const auto [first, last] = interval_frames(truth.body.times, rc.label);
  const auto& track = truth.object_poses.at(rc.label.object_id);
  rc.o_s = track[first];
  Rng rng(seed * 7919 + 13);
  const double dyaw = rng.uniform(-0.15, 0.15);
  if (rc.object.motion == MotionModel::hinged) {
    rc.o_e = hinge_pose(rc.object, yaw_of(track[last].rotation) + dyaw);
  } else {
    rc.o_e = track[last];
    rc.o_e.rotation = rot_z(dyaw) * rc.o_e.rotation;
    rc.o_e.translation += Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0);
  }
  return rc;
}

}  // namespace wearcap::testing
