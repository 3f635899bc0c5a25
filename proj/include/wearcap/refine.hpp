#pragma once

#include "wearcap/bending.hpp"
#include "wearcap/body.hpp"
#include "wearcap/object.hpp"

#include <optional>
#include <span>
#include <vector>

namespace wearcap {

/// c_e = O_e O_s^-1 c_s.
Vec3 end_contact(const Vec3& c_s, const RigidTransform3& o_s, const RigidTransform3& o_e);
std::vector<Vec3> end_contacts(std::span<const Vec3> c_s, const RigidTransform3& o_s,
                               const RigidTransform3& o_e);

/// Yaw per frame from `start` to `end` along the shortest arc, endpoints included.
std::vector<double> interpolate_yaw(double start, double end, std::size_t frames);

/// Start rotation turned by the interpolated yaw difference between the two
/// rotations (both assumed to rotate about z only).
std::vector<Mat3> interpolate_one_hand_rotation(const Mat3& start, const Mat3& end,
                                                std::size_t frames);

/// Inclusive frame range [first, last] covered by an interaction.
std::pair<std::size_t, std::size_t> interval_frames(std::span<const double> times,
                                                    const InteractionLabel& label);

/// FK path of a hand vertex over frames [first, last].
Trajectory2 hand_path(const BodyModel& body, const BodySequence& params, std::size_t first,
                      std::size_t last, std::string_view vertex);

/// The hand that drives a hinged object: right if in contact, else left.
std::string_view lead_hand(HandSet hands);

/// Object poses over an interaction from the hand paths under the object's
/// motion model. `one_hand_yaw` (yaw change since the first frame) is used for
/// one-hand drags only and may be empty.
std::vector<RigidTransform3> track_interaction(const ObjectModel& object,
                                               const std::optional<Trajectory2>& left,
                                               const std::optional<Trajectory2>& right,
                                               const RigidTransform3& o_s,
                                               std::span<const double> one_hand_yaw = {});

struct RefineOptions {
  BendOptions hand;
  PoseBendOptions pose;
  std::size_t window = 30;     // free frames before and after the interval
  std::vector<int> joint_mask;  // empty: the body's default interaction mask
  bool refit_body = true;
};

struct InteractionSolution {
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;
  std::vector<RigidTransform3> object_poses;  // frames [first_frame, last_frame]
  BodySequence body;                          // whole sequence
  std::optional<Trajectory2> hand_left;
  std::optional<Trajectory2> hand_right;
  std::vector<Vec3> start_contacts;  // per used hand, left first
  std::vector<Vec3> end_contacts;
  double start_residual = 0.0;  // max FK hand xy distance to the refined path
  double end_residual = 0.0;
  bool end_anchor_used = false;
};

/// Propagates the end anchor back through the contacts: bends the hand paths
/// onto the start and end contacts, projects them onto the hinge circle for
/// hinged objects, regenerates the object poses by tracking and re-fits the
/// body to the refined hands. Without an end anchor the contact-tracked object
/// is returned and the body is left unchanged.
InteractionSolution refine_interaction(const BodySequence& params, const ObjectModel& object,
                                       const RigidTransform3& o_s,
                                       const std::optional<RigidTransform3>& o_e,
                                       const InteractionLabel& label, const BodyModel& body,
                                       const RefineOptions& options);

}  // namespace wearcap
