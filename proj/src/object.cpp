#include "wearcap/object.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace wearcap {

void ObjectModel::validate() const {
  if (points.empty()) throw std::invalid_argument("object '" + id + "' has no points");
  for (const auto& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("object '" + id + "' has non-finite points");
  }
  if (motion == MotionModel::hinged && !hinge_point.allFinite()) {
    throw std::invalid_argument("object '" + id + "' has a non-finite hinge point");
  }
}

std::string to_string(HandSet hands) {
  switch (hands) {
    case HandSet::left: return "L";
    case HandSet::right: return "R";
    case HandSet::both: return "LR";
  }
  return "R";
}

HandSet parse_hand_set(std::string_view text) {
  if (text == "L") return HandSet::left;
  if (text == "R") return HandSet::right;
  if (text == "LR" || text == "RL") return HandSet::both;
  throw std::invalid_argument("hand set must be L, R or LR, got '" + std::string(text) + "'");
}

std::string to_string(MotionModel model) {
  return model == MotionModel::hinged ? "hinged" : "planar_free";
}

MotionModel parse_motion_model(std::string_view text) {
  if (text == "hinged") return MotionModel::hinged;
  if (text == "planar_free") return MotionModel::planar_free;
  throw std::invalid_argument("unknown motion model '" + std::string(text) + "'");
}

void validate_interactions(std::span<const InteractionLabel> labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!(labels[i].start < labels[i].end)) {
      throw std::invalid_argument("interaction must start before it ends");
    }
    if (i > 0 && !(labels[i - 1].end < labels[i].start)) {
      throw std::invalid_argument("interactions must be sorted and disjoint");
    }
  }
}

std::vector<int> dbscan(std::span<const Vec3> points, double eps, int min_pts) {
  if (!(eps > 0.0)) throw std::invalid_argument("dbscan eps must be positive");
  if (min_pts < 1) throw std::invalid_argument("dbscan min_pts must be >= 1");
  constexpr int unvisited = -2;
  const std::size_t n = points.size();
  std::vector<int> labels(n, unvisited);
  const double eps2 = eps * eps;
  auto neighbours = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j) {
      if ((points[j] - points[i]).squaredNorm() <= eps2) out.push_back(j);
    }
    return out;
  };

  int cluster = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] != unvisited) continue;
    const auto seed = neighbours(i);
    if (static_cast<int>(seed.size()) < min_pts) {
      labels[i] = -1;
      continue;
    }
    labels[i] = cluster;
    std::deque<std::size_t> queue(seed.begin(), seed.end());
    while (!queue.empty()) {
      const std::size_t q = queue.front();
      queue.pop_front();
      if (labels[q] == -1) labels[q] = cluster;  // border point
      if (labels[q] != unvisited) continue;
      labels[q] = cluster;
      const auto nq = neighbours(q);
      if (static_cast<int>(nq.size()) >= min_pts) queue.insert(queue.end(), nq.begin(), nq.end());
    }
    ++cluster;
  }
  return labels;
}

std::vector<Anchor> anchor_localize(std::span<const ObjectObservation> observations,
                                    std::span<const InteractionLabel> interactions, double eps,
                                    int min_pts) {
  validate_interactions(interactions);
  for (std::size_t i = 1; i < observations.size(); ++i) {
    if (observations[i].time < observations[i - 1].time) {
      throw std::invalid_argument("observations must be sorted by time");
    }
  }
  const std::size_t groups = interactions.size() + 1;
  std::vector<Anchor> anchors(groups);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < groups; ++g) {
    const double lo = g == 0 ? -inf : interactions[g - 1].end;
    const double hi = g == interactions.size() ? inf : interactions[g].start;
    std::vector<const ObjectObservation*> members;
    for (const auto& obs : observations) {
      if (obs.time >= lo && obs.time <= hi) members.push_back(&obs);
    }
    Anchor& anchor = anchors[g];
    if (members.empty()) continue;
    anchor.span_start = members.front()->time;
    anchor.span_end = members.back()->time;

    std::vector<Vec3> translations;
    translations.reserve(members.size());
    for (const auto* m : members) translations.push_back(m->pose.translation);
    const auto labels = dbscan(translations, eps, min_pts);
    const int clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    if (clusters == 0) continue;

    std::vector<std::size_t> size(static_cast<std::size_t>(clusters), 0);
    std::vector<double> latest(static_cast<std::size_t>(clusters), -inf);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0) continue;
      const auto c = static_cast<std::size_t>(labels[i]);
      ++size[c];
      latest[c] = std::max(latest[c], members[i]->time);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < size.size(); ++c) {
      if (size[c] > size[best] || (size[c] == size[best] && latest[c] > latest[best])) best = c;
    }

    Vec3 mean = Vec3::Zero();
    std::vector<Mat3> rotations;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != static_cast<int>(best)) continue;
      mean += members[i]->pose.translation;
      rotations.push_back(members[i]->pose.rotation);
    }
    anchor.valid = true;
    anchor.support = rotations.size();
    anchor.pose.translation = mean / static_cast<double>(rotations.size());
    anchor.pose.rotation = chordal_mean_rotation(rotations);
  }
  return anchors;
}

std::size_t nearest_point(std::span<const Vec3> points, const Vec3& query) {
  if (points.empty()) throw std::invalid_argument("nearest_point on an empty set");
  std::size_t best = 0;
  double best_d = (points[0] - query).squaredNorm();
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = (points[i] - query).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

ContactResult contact_offset(const BodyModel& body, const BodyParams& params,
                             const RigidTransform3& object_pose, const ObjectModel& object,
                             HandSet hands) {
  object.validate();
  const auto world = posed_points(object, object_pose);
  const auto joints = joint_transforms(body, params);
  ContactResult out;
  int used = 0;
  auto touch = [&](std::string_view vertex) {
    const Vec3 h = joints[static_cast<std::size_t>(body.vertex_joint(vertex))].translation;
    const Vec3 c = world[nearest_point(world, h)];
    out.offset += c - h;
    ++used;
    return c;
  };
  if (hands != HandSet::right) out.contact_left = touch("hand_L");
  if (hands != HandSet::left) out.contact_right = touch("hand_R");
  out.offset /= static_cast<double>(used);
  return out;
}

std::vector<RigidTransform3> track_dragged(const Trajectory2* left, const Trajectory2* right,
                                           const RigidTransform3& start_pose,
                                           std::span<const double> one_hand_yaw, double eps) {
  if (left == nullptr && right == nullptr) {
    throw std::invalid_argument("track_dragged needs at least one hand");
  }
  if (left != nullptr && right != nullptr && left->size() != right->size()) {
    throw std::invalid_argument("hand trajectories differ in length");
  }
  const Trajectory2& lead = right != nullptr ? *right : *left;
  const std::size_t n = lead.size();
  if (!one_hand_yaw.empty() && one_hand_yaw.size() != n) {
    throw std::invalid_argument("one-hand yaw track length mismatch");
  }
  const bool two_hands = left != nullptr && right != nullptr;

  std::vector<RigidTransform3> poses(n);
  if (n == 0) return poses;
  const Vec2 pivot0 = lead.xy[0];
  const Vec2 offset0 = start_pose.translation.head<2>() - pivot0;
  double yaw = 0.0;
  Vec2 prev_dir = Vec2::Zero();
  if (two_hands) prev_dir = right->xy[0] - left->xy[0];
  for (std::size_t k = 0; k < n; ++k) {
    if (two_hands) {
      const Vec2 dir = right->xy[k] - left->xy[k];
      if (k > 0 && dir.norm() >= eps && prev_dir.norm() >= eps) {
        yaw += std::atan2(prev_dir.x() * dir.y() - prev_dir.y() * dir.x(), prev_dir.dot(dir));
      }
      if (dir.norm() >= eps) prev_dir = dir;
    } else if (!one_hand_yaw.empty()) {
      yaw = one_hand_yaw[k];
    }
    const Mat3 rz = rot_z(yaw);
    const Vec2 t = lead.xy[k] + rz.topLeftCorner<2, 2>() * offset0;
    poses[k].rotation = rz * start_pose.rotation;
    poses[k].translation = Vec3(t.x(), t.y(), start_pose.translation.z());
  }
  return poses;
}

std::vector<double> track_hinged(const Trajectory2& hand, const Vec2& hinge, double start_angle,
                                 double eps) {
  std::vector<double> angles(hand.size());
  if (angles.empty()) return angles;
  double angle = start_angle;
  angles[0] = angle;
  for (std::size_t k = 1; k < hand.size(); ++k) {
    const Vec2 a = hand.xy[k - 1] - hinge;
    const Vec2 b = hand.xy[k] - hinge;
    if (a.norm() >= eps && b.norm() >= eps) {
      angle += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    }
    angles[k] = angle;
  }
  return angles;
}

RigidTransform3 hinge_pose(const ObjectModel& object, double angle) {
  if (object.motion != MotionModel::hinged) {
    throw std::invalid_argument("hinge_pose on an object without a hinge");
  }
  RigidTransform3 t;
  t.rotation = rot_z(angle);
  t.translation = object.hinge_point - t.rotation * object.hinge_point;
  t.translation.z() = 0.0;
  return t;
}

std::vector<Vec3> posed_points(const ObjectModel& object, const RigidTransform3& pose) {
  std::vector<Vec3> out;
  out.reserve(object.points.size());
  for (const auto& p : object.points) out.push_back(pose.apply(p));
  return out;
}

}  // namespace wearcap
