#include "wearcap/fuse.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>

namespace wearcap {

Trajectory2 correct_drift(const Trajectory2& traj, std::span<const TimedPose> localizations,
                          double confidence_threshold, const BendOptions& options,
                          std::size_t* controls_used) {
  traj.validate();
  std::vector<ControlPoint2> controls;
  const double lo = traj.times.front();
  const double hi = traj.times.back();
  for (const auto& loc : localizations) {
    if (loc.confidence < confidence_threshold) continue;
    if (loc.time < lo || loc.time > hi) continue;
    controls.push_back({loc.time, loc.pose.translation.head<2>()});
  }
  if (controls_used != nullptr) *controls_used = controls.size();
  if (controls.empty()) {
    spdlog::warn("drift correction: no reliable localizations, trajectory left unchanged");
    return traj;
  }
  return bend_trajectory(traj, controls, options).trajectory;
}

BodySequence adapt_body_params(const BodySequence& params, const Trajectory2& original,
                               const Trajectory2& refined, double eps) {
  const std::size_t n = params.size();
  if (original.size() != n || refined.size() != n) {
    throw std::invalid_argument("adapt_body_params: sequence lengths differ");
  }
  BodySequence out = params;
  double dalpha = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const Vec2 v = original.xy[i] - original.xy[i - 1];
      const Vec2 w = refined.xy[i] - refined.xy[i - 1];
      if (v.norm() >= eps && w.norm() >= eps) {
        dalpha = std::atan2(v.x() * w.y() - v.y() * w.x(), v.dot(w));
      }
    }
    if (dalpha == 0.0 && refined.xy[i] == original.xy[i]) continue;
    const Mat3 rz = rot_z(dalpha);
    BodyParams& p = out.frames[i];
    const Vec2 rel = p.gamma.head<2>() - original.xy[i];
    const Vec2 moved = refined.xy[i] + rz.topLeftCorner<2, 2>() * rel;
    p.gamma.x() = moved.x();
    p.gamma.y() = moved.y();
    if (dalpha != 0.0) {
      p.theta.head<3>() = matrix_to_axis_angle(rz * axis_angle_to_matrix(p.theta.head<3>()));
    }
  }
  return out;
}

Trajectory2 camera_trajectory(const BodyModel& body, const BodySequence& params,
                              const RigidTransform3& x_ic) {
  const int head = body.vertex_joint("head");
  Trajectory2 t;
  t.times = params.times;
  t.xy.reserve(params.size());
  t.z.reserve(params.size());
  for (const auto& f : params.frames) {
    const Vec3 c = (joint_transforms(body, f)[static_cast<std::size_t>(head)] * x_ic).translation;
    t.xy.emplace_back(c.x(), c.y());
    t.z.push_back(c.z());
  }
  return t;
}

Registration register_human(const BodyModel& body, const BodySequence& raw,
                            std::span<const TimedPose> localizations,
                            const CalibrationResult& calib, const RegisterOptions& options) {
  Registration reg;
  BodySequence scene = map_body_to_scene(raw, calib.x_wz);
  for (double& t : scene.times) t += calib.time_offset;
  reg.original = camera_trajectory(body, scene, calib.x_ic);
  reg.corrected = correct_drift(reg.original, localizations, options.confidence_threshold,
                                options.drift, &reg.controls_used);
  reg.params = adapt_body_params(scene, reg.original, reg.corrected, options.adapt_eps);
  return reg;
}

}  // namespace wearcap
