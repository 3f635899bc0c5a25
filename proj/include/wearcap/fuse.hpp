#pragma once

#include "wearcap/bending.hpp"
#include "wearcap/body.hpp"
#include "wearcap/calibrate.hpp"

#include <span>

namespace wearcap {

/// Bends `traj` toward the xy of localizations with confidence >= threshold.
/// Localizations outside the trajectory's time span are ignored. Returns the
/// input unchanged (with a warning) when none qualifies.
Trajectory2 correct_drift(const Trajectory2& traj, std::span<const TimedPose> localizations,
                          double confidence_threshold, const BendOptions& options,
                          std::size_t* controls_used = nullptr);

/// Moves each frame so that original[i] lands on refined[i] and turns the body
/// about that point by the angle between the refined and original segment
/// directions. Frame 0 and frames with a segment shorter than eps (in either
/// trajectory) reuse the previous angle.
BodySequence adapt_body_params(const BodySequence& params, const Trajectory2& original,
                               const Trajectory2& refined, double eps = 1e-6);

/// Per-frame camera position (head transform composed with x_ic).
Trajectory2 camera_trajectory(const BodyModel& body, const BodySequence& params,
                              const RigidTransform3& x_ic);

struct RegisterOptions {
  double confidence_threshold = 0.5;
  BendOptions drift;
  double adapt_eps = 1e-6;
};

struct Registration {
  BodySequence params;    // scene frame, camera clock
  Trajectory2 original;   // camera path before drift correction
  Trajectory2 corrected;  // camera path after drift correction
  std::size_t controls_used = 0;
};

/// Scene mapping, drift correction against the localizations and parameter
/// adaptation. `raw` carries IMU-clock timestamps; the result is shifted by
/// the calibrated time offset.
Registration register_human(const BodyModel& body, const BodySequence& raw,
                            std::span<const TimedPose> localizations,
                            const CalibrationResult& calib, const RegisterOptions& options);

}  // namespace wearcap
