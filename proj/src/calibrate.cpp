#include "wearcap/calibrate.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wearcap {

namespace {

std::vector<TimedPoint3> predicted_camera_points(std::span<const TimedPose> imu_head,
                                                 const RigidTransform3& x_ic) {
  std::vector<TimedPoint3> pts;
  pts.reserve(imu_head.size());
  for (const auto& h : imu_head) {
    pts.push_back({h.time, (h.pose * x_ic).translation, h.confidence});
  }
  return pts;
}

double transform_change(const RigidTransform3& a, const RigidTransform3& b) {
  return std::max((a.translation - b.translation).norm(), rotation_distance(a.rotation, b.rotation));
}

}  // namespace

WorldCalibration calibrate_world(std::span<const TimedPose> imu_head,
                                 std::span<const TimedPoint3> cam,
                                 const CalibrationOptions& options, const RigidTransform3& x_ic) {
  const auto source = predicted_camera_points(imu_head, x_ic);
  TimeOffsetResult found;
  if (options.time_offset_override) {
    found.offset = *options.time_offset_override;
    found.alignment = ransac_align_2d(source, cam, options.ransac, found.offset);
  } else {
    found = grid_search_time_offset(source, cam, options.offsets, options.ransac);
  }
  WorldCalibration out;
  out.x_wz = found.alignment.transform.lift(found.alignment.z_offset);
  out.time_offset = found.offset;
  out.matched_pairs = found.alignment.matched_pairs;
  out.inlier_ratio = found.alignment.matched_pairs == 0
                         ? 0.0
                         : static_cast<double>(found.alignment.inlier_count) /
                               static_cast<double>(found.alignment.matched_pairs);
  return out;
}

RigidTransform3 calibrate_local(std::span<const TimedPose> cam_poses,
                                std::span<const TimedPose> imu_head, const RigidTransform3& x_wz,
                                double time_offset, const CalibrationOptions& options,
                                const RigidTransform3& x_ic_guess) {
  if (options.local_k < 1) throw std::invalid_argument("local calibration needs K >= 1");
  std::vector<TimedPoint3> head_pts;
  std::vector<TimedPoint3> cam_pts;
  head_pts.reserve(imu_head.size());
  for (const auto& h : imu_head) head_pts.push_back({h.time, h.pose.translation, 1.0});
  std::vector<std::size_t> cam_index;
  for (std::size_t i = 0; i < cam_poses.size(); ++i) {
    if (cam_poses[i].confidence >= options.confidence_threshold) {
      cam_pts.push_back({cam_poses[i].time, cam_poses[i].pose.translation, 1.0});
      cam_index.push_back(i);
    }
  }
  const auto pairs = match_by_time(head_pts, cam_pts, options.ransac.max_time_gap, time_offset);
  if (pairs.empty()) throw std::invalid_argument("local calibration has no camera poses");

  struct Candidate {
    double distance;
    double time;
    std::size_t head;
    std::size_t cam;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(pairs.size());
  for (const auto& [h, c] : pairs) {
    const TimedPose& cam = cam_poses[cam_index[c]];
    const Vec3 predicted = (x_wz * imu_head[h].pose * x_ic_guess).translation;
    candidates.push_back({(cam.pose.translation - predicted).norm(), cam.time, h, cam_index[c]});
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.time < b.time;
  });
  const auto k = static_cast<std::size_t>(options.local_k);
  if (candidates.size() < k) {
    spdlog::warn("local calibration: only {} camera poses available, wanted {}",
                 candidates.size(), k);
  }
  const std::size_t used = std::min(k, candidates.size());

  const RigidTransform3 wz_inv = x_wz.inverse();
  Vec3 mean = Vec3::Zero();
  std::vector<Mat3> rotations;
  rotations.reserve(used);
  for (std::size_t i = 0; i < used; ++i) {
    const auto& c = candidates[i];
    const RigidTransform3 est = imu_head[c.head].pose.inverse() * wz_inv * cam_poses[c.cam].pose;
    mean += est.translation;
    rotations.push_back(est.rotation);
  }
  RigidTransform3 out;
  out.translation = mean / static_cast<double>(used);
  out.rotation = chordal_mean_rotation(rotations);
  return out;
}

namespace {

struct PosePair {
  const RigidTransform3* head;
  const RigidTransform3* cam;
};

struct JointState {
  double yaw = 0.0;
  Vec3 t_wz = Vec3::Zero();
  Mat3 r_ic = Mat3::Identity();
  Vec3 t_ic = Vec3::Zero();

  JointState perturbed(const Eigen::Matrix<double, 10, 1>& d) const {
    JointState s = *this;
    s.yaw += d(0);
    s.t_wz += d.segment<3>(1);
    s.r_ic = axis_angle_to_matrix(d.segment<3>(4)) * r_ic;
    s.t_ic += d.segment<3>(7);
    return s;
  }
  RigidTransform3 x_wz() const { return {rot_z(yaw), t_wz}; }
  RigidTransform3 x_ic() const { return {r_ic, t_ic}; }
};

Vec3 position_residual(const JointState& s, const PosePair& p) {
  return rot_z(s.yaw) * (p.head->rotation * s.t_ic + p.head->translation) + s.t_wz -
         p.cam->translation;
}

Eigen::VectorXd joint_residuals(const JointState& s, std::span<const PosePair> pairs, double w) {
  Eigen::VectorXd r(6 * pairs.size());
  const Mat3 rz = rot_z(s.yaw);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    r.segment<3>(6 * i) = position_residual(s, pairs[i]);
    const Mat3 err = pairs[i].cam->rotation.transpose() * rz * pairs[i].head->rotation * s.r_ic;
    r.segment<3>(6 * i + 3) = w * matrix_to_axis_angle(err);
  }
  return r;
}

// Levenberg-Marquardt with a central-difference Jacobian.
JointState solve_joint(JointState s, std::span<const PosePair> pairs, const CalibrationOptions& o) {
  const double w = o.rotation_weight;
  Eigen::VectorXd r = joint_residuals(s, pairs, w);
  double cost = r.squaredNorm();
  double mu = 1e-6;
  constexpr double h = 1e-7;
  for (int it = 0; it < o.refine_iterations && cost > 0.0; ++it) {
    Eigen::MatrixXd jac(r.size(), 10);
    for (int k = 0; k < 10; ++k) {
      Eigen::Matrix<double, 10, 1> d = Eigen::Matrix<double, 10, 1>::Zero();
      d(k) = h;
      jac.col(k) = (joint_residuals(s.perturbed(d), pairs, w) -
                    joint_residuals(s.perturbed(-d), pairs, w)) /
                   (2.0 * h);
    }
    const Eigen::Matrix<double, 10, 10> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 10, 1> jtr = jac.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 10 && !accepted; ++tries) {
      Eigen::Matrix<double, 10, 10> a = jtj;
      a.diagonal() *= 1.0 + mu;
      a.diagonal().array() += mu;
      const Eigen::Matrix<double, 10, 1> step = a.ldlt().solve(-jtr);
      const JointState next = s.perturbed(step);
      const Eigen::VectorXd r_next = joint_residuals(next, pairs, w);
      const double c_next = r_next.squaredNorm();
      if (c_next < cost) {
        s = next;
        r = r_next;
        const double gain = cost - c_next;
        cost = c_next;
        mu = std::max(mu * 0.1, 1e-12);
        accepted = true;
        if (step.norm() < 1e-13 || gain < 1e-30) return s;
      } else {
        mu *= 10.0;
      }
    }
    if (!accepted) break;
  }
  return s;
}

}  // namespace

JointFit refine_calibration(std::span<const TimedPose> cam_poses,
                            std::span<const TimedPose> imu_head, const RigidTransform3& x_wz,
                            const RigidTransform3& x_ic, double time_offset,
                            const CalibrationOptions& options) {
  std::vector<TimedPoint3> head_pts;
  head_pts.reserve(imu_head.size());
  for (const auto& h : imu_head) head_pts.push_back({h.time, h.pose.translation, 1.0});
  std::vector<TimedPoint3> cam_pts;
  std::vector<std::size_t> cam_index;
  for (std::size_t i = 0; i < cam_poses.size(); ++i) {
    if (cam_poses[i].confidence >= options.confidence_threshold) {
      cam_pts.push_back({cam_poses[i].time, cam_poses[i].pose.translation, 1.0});
      cam_index.push_back(i);
    }
  }
  std::vector<PosePair> matched;
  for (const auto& [h, c] : match_by_time(head_pts, cam_pts, options.ransac.max_time_gap,
                                          time_offset)) {
    matched.push_back({&imu_head[h].pose, &cam_poses[cam_index[c]].pose});
  }
  JointState s;
  s.yaw = yaw_of(x_wz.rotation);
  s.t_wz = x_wz.translation;
  s.r_ic = x_ic.rotation;
  s.t_ic = x_ic.translation;

  const double thr = options.ransac.threshold;
  auto inliers_of = [&](const JointState& st) {
    std::vector<PosePair> in;
    for (const auto& p : matched) {
      if (position_residual(st, p).norm() < thr) in.push_back(p);
    }
    return in;
  };
  std::vector<PosePair> in = inliers_of(s);
  for (int round = 0; round < 5 && in.size() >= 3; ++round) {
    s = solve_joint(s, in, options);
    auto next = inliers_of(s);
    const bool same = next.size() == in.size() &&
                      std::equal(next.begin(), next.end(), in.begin(), [](const auto& a, const auto& b) {
                        return a.cam == b.cam;
                      });
    in = std::move(next);
    if (same) break;
  }

  JointFit fit;
  fit.x_wz = s.x_wz();
  fit.x_ic = s.x_ic();
  fit.inliers = in.size();
  fit.matched = matched.size();
  for (const auto& p : matched) fit.cost += std::min(position_residual(s, p).squaredNorm(), thr * thr);
  if (matched.empty()) fit.cost = INFINITY;
  return fit;
}

CalibrationResult calibrate(std::span<const TimedPose> imu_head,
                            std::span<const TimedPose> cam_poses,
                            const CalibrationOptions& options) {
  if (cam_poses.empty()) throw std::invalid_argument("calibration needs camera poses");
  std::vector<TimedPoint3> cam;
  cam.reserve(cam_poses.size());
  for (const auto& c : cam_poses) cam.push_back({c.time, c.pose.translation, c.confidence});

  std::vector<double> candidates = options.offsets;
  if (options.time_offset_override) candidates = {*options.time_offset_override};
  if (candidates.empty()) throw std::invalid_argument("time offset grid is empty");

  std::optional<CalibrationResult> best;
  double best_cost = INFINITY;
  std::exception_ptr last_error;
  for (double offset : candidates) {
    CalibrationOptions fixed = options;
    fixed.time_offset_override = offset;
    CalibrationResult result;
    double cost = INFINITY;
    try {
      RigidTransform3 x_ic = RigidTransform3::identity();
      const int rounds = std::max(1, options.rounds);
      for (int round = 0; round < rounds; ++round) {
        const WorldCalibration world = calibrate_world(imu_head, cam, fixed, x_ic);
        const RigidTransform3 next_ic =
            calibrate_local(cam_poses, imu_head, world.x_wz, offset, options, x_ic);
        const double change = round == 0 ? INFINITY
                                         : std::max(transform_change(world.x_wz, result.x_wz),
                                                    transform_change(next_ic, x_ic));
        result.x_wz = world.x_wz;
        result.inlier_ratio = world.inlier_ratio;
        result.rounds = round + 1;
        x_ic = next_ic;
        if (change < 1e-12) break;
      }
      const JointFit fit =
          refine_calibration(cam_poses, imu_head, result.x_wz, x_ic, offset, options);
      result.x_wz = fit.x_wz;
      result.x_ic = fit.x_ic;
      result.time_offset = offset;
      if (fit.matched > 0) {
        result.inlier_ratio = static_cast<double>(fit.inliers) / static_cast<double>(fit.matched);
      }
      cost = fit.matched > 0 ? fit.cost / static_cast<double>(fit.matched) : INFINITY;
    } catch (const std::invalid_argument&) {
      last_error = std::current_exception();
      continue;
    }
    spdlog::debug("calibration offset {:.3f}: cost {:.3e}", offset, cost);
    if (!best || cost < best_cost ||
        (cost == best_cost && std::abs(offset) < std::abs(best->time_offset))) {
      best = result;
      best_cost = cost;
    }
  }
  if (!best) std::rethrow_exception(last_error);
  return *best;
}

BodyParams map_body_to_scene(const BodyParams& params, const RigidTransform3& x_wz) {
  BodyParams out = params;
  out.gamma = x_wz.apply(params.gamma);
  const Mat3 root = x_wz.rotation * axis_angle_to_matrix(params.theta.head<3>());
  out.theta.head<3>() = matrix_to_axis_angle(root);
  return out;
}

BodySequence map_body_to_scene(const BodySequence& params, const RigidTransform3& x_wz) {
  BodySequence out;
  out.times = params.times;
  out.frames.reserve(params.frames.size());
  for (const auto& f : params.frames) out.frames.push_back(map_body_to_scene(f, x_wz));
  return out;
}

}  // namespace wearcap
