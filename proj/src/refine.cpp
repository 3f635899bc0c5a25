#include "wearcap/refine.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>

namespace wearcap {

Vec3 end_contact(const Vec3& c_s, const RigidTransform3& o_s, const RigidTransform3& o_e) {
  return (o_e * o_s.inverse()).apply(c_s);
}

std::vector<Vec3> end_contacts(std::span<const Vec3> c_s, const RigidTransform3& o_s,
                               const RigidTransform3& o_e) {
  const RigidTransform3 rel = o_e * o_s.inverse();
  std::vector<Vec3> out;
  out.reserve(c_s.size());
  for (const auto& c : c_s) out.push_back(rel.apply(c));
  return out;
}

std::vector<double> interpolate_yaw(double start, double end, std::size_t frames) {
  std::vector<double> out(frames, start);
  if (frames < 2) return out;
  const double delta = wrap_angle(end - start);
  for (std::size_t k = 0; k < frames; ++k) {
    out[k] = start + delta * static_cast<double>(k) / static_cast<double>(frames - 1);
  }
  return out;
}

std::vector<Mat3> interpolate_one_hand_rotation(const Mat3& start, const Mat3& end,
                                                std::size_t frames) {
  const double yaw_s = yaw_of(start);
  const auto yaws = interpolate_yaw(yaw_s, yaw_of(end), frames);
  std::vector<Mat3> out;
  out.reserve(frames);
  for (double y : yaws) out.push_back(rot_z(y - yaw_s) * start);
  return out;
}

std::pair<std::size_t, std::size_t> interval_frames(std::span<const double> times,
                                                    const InteractionLabel& label) {
  const std::size_t first = snap_to_sample(times, label.start);
  const std::size_t last = snap_to_sample(times, label.end);
  if (last < first + 2) throw std::invalid_argument("interaction spans fewer than 3 frames");
  return {first, last};
}

Trajectory2 hand_path(const BodyModel& body, const BodySequence& params, std::size_t first,
                      std::size_t last, std::string_view vertex) {
  const auto joint = static_cast<std::size_t>(body.vertex_joint(vertex));
  Trajectory2 t;
  for (std::size_t f = first; f <= last; ++f) {
    const Vec3 p = joint_transforms(body, params.frames[f])[joint].translation;
    t.times.push_back(params.times[f]);
    t.xy.emplace_back(p.x(), p.y());
    t.z.push_back(p.z());
  }
  return t;
}

std::string_view lead_hand(HandSet hands) {
  return hands == HandSet::left ? "hand_L" : "hand_R";
}

std::vector<RigidTransform3> track_interaction(const ObjectModel& object,
                                               const std::optional<Trajectory2>& left,
                                               const std::optional<Trajectory2>& right,
                                               const RigidTransform3& o_s,
                                               std::span<const double> one_hand_yaw) {
  if (object.motion == MotionModel::hinged) {
    const Trajectory2& hand = right ? *right : *left;
    const auto angles = track_hinged(hand, object.hinge_point.head<2>(), yaw_of(o_s.rotation));
    std::vector<RigidTransform3> poses;
    poses.reserve(angles.size());
    for (double a : angles) poses.push_back(hinge_pose(object, a));
    return poses;
  }
  const bool two = left && right;
  return track_dragged(left ? &*left : nullptr, right ? &*right : nullptr, o_s,
                       two ? std::span<const double>{} : one_hand_yaw);
}

namespace {

void snap_endpoints(Trajectory2& path, const Vec2& start, const Vec2& end) {
  const std::size_t n = path.size();
  const Vec2 r0 = start - path.xy.front();
  const Vec2 r1 = end - path.xy.back();
  const double t0 = path.times.front();
  const double span = path.times.back() - t0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (path.times[k] - t0) / span;
    path.xy[k] += (1.0 - u) * r0 + u * r1;
  }
  path.xy.front() = start;
  path.xy.back() = end;
}

void project_to_circle(Trajectory2& path, const Vec2& center, double radius) {
  Vec2 dir = Vec2::UnitX();
  for (auto& p : path.xy) {
    const Vec2 d = p - center;
    if (d.norm() > 1e-12) dir = d / d.norm();
    p = center + radius * dir;
  }
}

}  // namespace

InteractionSolution refine_interaction(const BodySequence& params, const ObjectModel& object,
                                       const RigidTransform3& o_s,
                                       const std::optional<RigidTransform3>& o_e,
                                       const InteractionLabel& label, const BodyModel& body,
                                       const RefineOptions& options) {
  object.validate();
  InteractionSolution sol;
  const auto [first, last] = interval_frames(params.times, label);
  sol.first_frame = first;
  sol.last_frame = last;
  sol.body = params;

  const bool hinged = object.motion == MotionModel::hinged;
  HandSet hands = label.hands;
  if (hinged) hands = lead_hand(label.hands) == "hand_R" ? HandSet::right : HandSet::left;
  const bool use_left = hands != HandSet::right;
  const bool use_right = hands != HandSet::left;
  if (use_left) sol.hand_left = hand_path(body, params, first, last, "hand_L");
  if (use_right) sol.hand_right = hand_path(body, params, first, last, "hand_R");

  const ContactResult contacts = contact_offset(body, params.frames[first], o_s, object, hands);
  if (use_left) sol.start_contacts.push_back(*contacts.contact_left);
  if (use_right) sol.start_contacts.push_back(*contacts.contact_right);
  const Vec2 hinge = object.hinge_point.head<2>();
  if (hinged && (sol.start_contacts.front().head<2>() - hinge).norm() < 1e-9) {
    throw std::invalid_argument("degenerate hinge contact");
  }

  if (!o_e) {
    spdlog::warn("interaction at t={:.3f}: no end anchor, keeping contact-tracked object",
                 label.start);
    sol.object_poses = track_interaction(object, sol.hand_left, sol.hand_right, o_s);
    return sol;
  }
  sol.end_anchor_used = true;
  sol.end_contacts = end_contacts(sol.start_contacts, o_s, *o_e);

  std::size_t slot = 0;
  for (auto* path : {&sol.hand_left, &sol.hand_right}) {
    if (!*path) continue;
    const Vec2 cs = sol.start_contacts[slot].head<2>();
    const Vec2 ce = sol.end_contacts[slot].head<2>();
    ++slot;
    const ControlPoint2 controls[] = {{(*path)->times.front(), cs}, {(*path)->times.back(), ce}};
    Trajectory2 bent = bend_trajectory(**path, controls, options.hand).trajectory;
    snap_endpoints(bent, cs, ce);
    if (hinged) project_to_circle(bent, hinge, (cs - hinge).norm());
    **path = std::move(bent);
  }

  std::vector<double> yaw;
  if (!hinged && !(use_left && use_right)) {
    const double ys = yaw_of(o_s.rotation);
    yaw = interpolate_yaw(ys, yaw_of(o_e->rotation), last - first + 1);
    for (double& y : yaw) y -= ys;
  }
  sol.object_poses = track_interaction(object, sol.hand_left, sol.hand_right, o_s, yaw);

  if (options.refit_body) {
    std::vector<PoseControlPoint> controls;
    const int jl = body.vertex_joint("hand_L");
    const int jr = body.vertex_joint("hand_R");
    for (std::size_t f = first; f <= last; ++f) {
      if (sol.hand_left) controls.push_back({params.times[f], jl, sol.hand_left->xy[f - first]});
      if (sol.hand_right) controls.push_back({params.times[f], jr, sol.hand_right->xy[f - first]});
    }
    Trajectory2 trans;
    trans.times = params.times;
    for (const auto& fr : params.frames) {
      trans.xy.emplace_back(fr.gamma.x(), fr.gamma.y());
      trans.z.push_back(fr.gamma.z());
    }
    const auto mask =
        options.joint_mask.empty() ? body.default_interaction_mask() : options.joint_mask;
    sol.body = deform_pose_trajectory(params, trans, controls, body, options.pose, mask,
                                      options.window)
                   .body;
  }

  for (const auto* path : {&sol.hand_left, &sol.hand_right}) {
    if (!*path) continue;
    const std::string_view vertex = path == &sol.hand_left ? "hand_L" : "hand_R";
    const Trajectory2 fk = hand_path(body, sol.body, first, last, vertex);
    sol.start_residual = std::max(sol.start_residual, (fk.xy.front() - (*path)->xy.front()).norm());
    sol.end_residual = std::max(sol.end_residual, (fk.xy.back() - (*path)->xy.back()).norm());
  }
  return sol;
}

}  // namespace wearcap
