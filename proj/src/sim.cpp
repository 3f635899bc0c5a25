#include "wearcap/sim.hpp"

#include "wearcap/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace wearcap {

namespace {

constexpr double kPelvisHeight = 0.92;
constexpr double kHandForward = 0.33;  // hand ahead of the pelvis while in contact
constexpr double kHandSide = 0.18;
constexpr double kHandHeight = 1.05;
constexpr double kReachTime = 0.6;

double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

Vec2 rotate2(double angle, const Vec2& v) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

Vec2 heading(double yaw) { return {std::cos(yaw), std::sin(yaw)}; }

// Shoulder rotation and elbow flexion placing the wrist at `hand_local`
// (pelvis frame, spine unrotated).
struct ArmPose {
  Vec3 shoulder;
  Vec3 elbow;
};

ArmPose solve_arm(const BodyModel& body, bool left, const Vec3& hand_local) {
  const auto& j = body.joints();
  const int shoulder = body.joint_index(left ? "l_shoulder" : "r_shoulder");
  const int elbow = body.joint_index(left ? "l_elbow" : "r_elbow");
  const int wrist = body.joint_index(left ? "l_wrist" : "r_wrist");
  Vec3 s = Vec3::Zero();
  for (int k = shoulder; k > 0; k = j[static_cast<std::size_t>(k)].parent) {
    s += j[static_cast<std::size_t>(k)].offset;
  }
  const Vec3 u1 = j[static_cast<std::size_t>(elbow)].offset;
  const Vec3 u2 = j[static_cast<std::size_t>(wrist)].offset;
  const double l1 = u1.norm();
  const double l2 = u2.norm();
  const Vec3 w = hand_local - s;
  const double d = w.norm();
  if (d > l1 + l2 - 1e-6 || d < std::abs(l1 - l2) + 1e-6) {
    throw std::invalid_argument("infeasible script: hand cannot reach the contact");
  }
  const double cos_phi = std::clamp((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double phi = std::acos(cos_phi);
  const Mat3 elbow_rot = axis_angle_to_matrix(Vec3(0.0, -phi, 0.0));
  const Vec3 v = u1 + elbow_rot * u2;
  const Mat3 shoulder_rot = Eigen::Quaterniond::FromTwoVectors(v, w).toRotationMatrix();
  return {matrix_to_axis_angle(shoulder_rot), Vec3(0.0, -phi, 0.0)};
}

struct PlannedInteraction {
  InteractionScript script;
  ObjectModel object;
  Vec2 grip_position;  // pelvis xy when contact starts
  double grip_yaw = 0.0;
  double turn = 0.0;  // signed heading change (table)
  std::vector<Vec3> contacts_local;  // hand targets in the pelvis frame, left first
};

ObjectModel make_door(const std::string& id, const Vec2& p, double yaw, Vec3& handle) {
  const Vec2 f = heading(yaw);
  const Vec2 d = rotate2(std::numbers::pi / 2.0, f);  // along the panel, away from the hinge
  const Vec2 m = -f;                                  // panel normal toward the person
  // Pelvis = j + 0.90 d + (0.06 + hand reach) m puts the right hand on the handle.
  const Vec2 j = p - (0.72 + kHandSide) * d - (0.06 + kHandForward) * m;
  ObjectModel door;
  door.id = id;
  door.motion = MotionModel::hinged;
  door.hinge_point = Vec3(j.x(), j.y(), 0.0);
  const Vec2 h = j + 0.72 * d + 0.06 * m;
  handle = Vec3(h.x(), h.y(), kHandHeight);
  door.points.push_back(handle);
  const Vec2 stem = j + 0.72 * d + 0.03 * m;
  door.points.emplace_back(stem.x(), stem.y(), kHandHeight);
  for (int iu = 0; iu <= 6; ++iu) {
    for (int iz = 0; iz <= 8; ++iz) {
      for (double side : {-0.02, 0.02}) {
        const Vec2 q = j + (0.15 * iu) * d + side * m;
        door.points.emplace_back(q.x(), q.y(), 0.25 * iz);
      }
    }
  }
  return door;
}

ObjectModel make_table(const std::string& id, std::vector<Vec3>& handles) {
  ObjectModel table;
  table.id = id;
  table.motion = MotionModel::planar_free;
  handles = {Vec3(-0.45, kHandSide, kHandHeight), Vec3(-0.45, -kHandSide, kHandHeight)};
  table.points = handles;
  for (int k = -9; k <= 9; ++k) {
    if (std::abs(k) == 6) continue;  // the grips themselves
    table.points.emplace_back(-0.45, 0.03 * k, kHandHeight);
  }
  const double xs[] = {-0.4, 0.4};
  const double ys[] = {-0.3, 0.3};
  const double zs[] = {0.0, 0.9};
  for (int i = 0; i <= 8; ++i) {
    const double x = -0.4 + 0.1 * i;
    for (double y : ys) {
      for (double z : zs) table.points.emplace_back(x, y, z);
    }
  }
  for (int i = 1; i <= 5; ++i) {
    const double y = -0.3 + 0.1 * i;
    for (double x : xs) {
      for (double z : zs) table.points.emplace_back(x, y, z);
    }
  }
  for (int i = 1; i <= 8; ++i) {
    const double z = 0.1 * i;
    for (double x : xs) {
      for (double y : ys) table.points.emplace_back(x, y, z);
    }
  }
  return table;
}

// Per-frame human and object state, appended phase by phase.
class Timeline {
 public:
  Timeline(const BodyModel& body, double frame_rate, double speed)
      : body_(body), dt_(1.0 / frame_rate), speed_(speed) {
    theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(3 * body.joint_count()));
  }

  void start(const Vec2& p, double yaw, const std::map<std::string, RigidTransform3>& objects) {
    p_ = p;
    yaw_ = yaw;
    objects_ = objects;
    emit();
  }

  std::size_t frames(double seconds) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(seconds / dt_)));
  }

  void stand(double seconds) {
    for (std::size_t k = 0; k < frames(seconds); ++k) emit();
  }

  void turn_to(double yaw) {
    const double y0 = yaw_;
    const double delta = wrap_angle(yaw - y0);
    if (std::abs(delta) < 1e-9) return;
    const std::size_t n = frames(std::max(0.4, std::abs(delta) / (std::numbers::pi / 2.0)));
    for (std::size_t k = 1; k <= n; ++k) {
      yaw_ = y0 + delta * smoothstep(static_cast<double>(k) / static_cast<double>(n));
      emit();
    }
  }

  void walk_to(const Vec2& q) {
    const Vec2 p0 = p_;
    const double length = (q - p0).norm();
    if (length < 1e-9) return;
    const std::size_t n = frames(std::max(1.0, 1.5 * length / speed_));
    for (std::size_t k = 1; k <= n; ++k) {
      p_ = p0 + smoothstep(static_cast<double>(k) / static_cast<double>(n)) * (q - p0);
      emit();
    }
  }

  void blend_arms(const Eigen::VectorXd& target) {
    const Eigen::VectorXd start = theta_;
    const std::size_t n = frames(kReachTime);
    for (std::size_t k = 1; k <= n; ++k) {
      const double u = smoothstep(static_cast<double>(k) / static_cast<double>(n));
      theta_ = start + u * (target - start);
      emit();
    }
  }

  // Rigid motion of person and object: `pose_at(u)` gives the pelvis planar
  // pose for progress u in [0, 1]; the object follows rigidly.
  template <typename PoseFn>
  std::pair<double, double> interact(const std::string& id, double seconds, PoseFn pose_at) {
    const RigidTransform3 person0 = person();
    const RigidTransform3 rel = person0.inverse() * objects_.at(id);
    const std::size_t n = frames(seconds);
    const double t_start = static_cast<double>(times_.size() - 1) * dt_;
    for (std::size_t k = 1; k <= n; ++k) {
      const auto [p, yaw] = pose_at(smoothstep(static_cast<double>(k) / static_cast<double>(n)));
      p_ = p;
      yaw_ = yaw;
      objects_[id] = person() * rel;
      emit();
    }
    return {t_start, static_cast<double>(times_.size() - 1) * dt_};
  }

  RigidTransform3 person() const {
    return RigidTransform3::from_yaw(yaw_, Vec3(p_.x(), p_.y(), kPelvisHeight));
  }
  const Vec2& position() const { return p_; }
  double yaw() const { return yaw_; }
  const Eigen::VectorXd& theta() const { return theta_; }

  BodySequence body_sequence() const {
    BodySequence seq;
    seq.times = times_;
    seq.frames = frames_;
    return seq;
  }
  const std::map<std::string, std::vector<RigidTransform3>>& object_tracks() const {
    return tracks_;
  }

 private:
  void emit() {
    BodyParams params;
    params.theta = theta_;
    params.theta.head<3>() = Vec3(0.0, 0.0, wrap_angle(yaw_));
    params.gamma = Vec3(p_.x(), p_.y(), kPelvisHeight);
    // The wearer looks around; head tilt keeps the camera lever arm observable.
    const double t = static_cast<double>(times_.size()) * dt_;
    const auto neck = static_cast<Eigen::Index>(3 * body_.joint_index("neck"));
    params.theta.segment<3>(neck) =
        Vec3(0.4 * std::sin(2.3 * t + 1.0), 0.6 * std::sin(1.45 * t), 1.0 * std::sin(0.9 * t));
    times_.push_back(t);
    frames_.push_back(std::move(params));
    for (const auto& [id, pose] : objects_) tracks_[id].push_back(pose);
  }

  const BodyModel& body_;
  double dt_;
  double speed_;
  Vec2 p_ = Vec2::Zero();
  double yaw_ = 0.0;
  Eigen::VectorXd theta_;
  std::map<std::string, RigidTransform3> objects_;
  std::vector<double> times_;
  std::vector<BodyParams> frames_;
  std::map<std::string, std::vector<RigidTransform3>> tracks_;
};

Mat3 small_rotation(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return Mat3::Identity();
  std::normal_distribution<double> n(0.0, sigma);
  const double a = n(rng);
  const double b = n(rng);
  const double c = n(rng);
  return axis_angle_to_matrix(Vec3(a, b, c));
}

Vec3 gaussian3(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return Vec3::Zero();
  std::normal_distribution<double> n(0.0, sigma);
  const double a = n(rng);
  const double b = n(rng);
  const double c = n(rng);
  return {a, b, c};
}

bool inside_any(std::span<const InteractionLabel> labels, double t) {
  return std::any_of(labels.begin(), labels.end(),
                     [t](const auto& l) { return t >= l.start - 1e-9 && t <= l.end + 1e-9; });
}

std::size_t period_frames(double period, double frame_rate) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(period * frame_rate)));
}

}  // namespace

std::string to_string(ObjectKind kind) { return kind == ObjectKind::door ? "door" : "table"; }

ObjectKind parse_object_kind(std::string_view text) {
  if (text == "door") return ObjectKind::door;
  if (text == "table") return ObjectKind::table;
  throw std::invalid_argument("unknown object kind '" + std::string(text) + "'");
}

ScenarioConfig ScenarioConfig::preset(std::string_view name, std::uint64_t seed) {
  ScenarioConfig c;
  c.seed = seed;
  c.true_x_wz = RigidTransform3::from_yaw(0.6, Vec3(1.5, -0.8, 0.05));
  c.true_x_ic.rotation = axis_angle_to_matrix(Vec3(0.05, -0.1, 0.02));
  c.true_x_ic.translation = Vec3(0.09, 0.0, 0.04);
  c.time_offset = 0.3;
  InteractionScript door;
  door.kind = ObjectKind::door;
  door.hands = HandSet::right;
  door.duration = 4.0;
  InteractionScript table;
  table.kind = ObjectKind::table;
  table.hands = HandSet::both;
  table.duration = 5.0;
  if (name == "door") {
    c.interactions = {door};
  } else if (name == "table") {
    c.interactions = {table};
  } else if (name == "table_one_hand") {
    table.hands = HandSet::right;
    c.interactions = {table};
  } else if (name == "mixed") {
    c.interactions = {door, table};
  } else if (name == "walk") {
    c.walk_length = 20.0;
  } else {
    throw std::invalid_argument("unknown scenario preset '" + std::string(name) + "'");
  }
  return c;
}

void ScenarioConfig::make_noiseless() {
  drift_rate = 0.0;
  drift_rot_rate = 0.0;
  loc_noise_sigma = 0.0;
  loc_rot_noise_sigma = 0.0;
  outlier_fraction = 0.0;
  obs_noise_sigma = 0.0;
  obs_rot_noise_sigma = 0.0;
  obs_outlier_fraction = 0.0;
}

void ScenarioConfig::validate() const {
  auto fraction = [](double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must be in [0,1]");
  };
  if (!(frame_rate > 0.0)) throw std::invalid_argument("frame_rate must be positive");
  if (!(drift_rate >= 0.0)) throw std::invalid_argument("drift_rate must be >= 0");
  if (!(loc_period > 0.0) || !(obs_period > 0.0)) {
    throw std::invalid_argument("observation periods must be positive");
  }
  if (!(walk_speed > 0.0)) throw std::invalid_argument("walk_speed must be positive");
  if (pause < kReachTime) throw std::invalid_argument("pause must cover the reach time");
  fraction(outlier_fraction, "outlier_fraction");
  fraction(obs_outlier_fraction, "obs_outlier_fraction");
  fraction(confidence_inside, "confidence_inside");
  fraction(confidence_outside, "confidence_outside");
  fraction(outlier_confidence, "outlier_confidence");
  for (const auto& s : interactions) {
    if (!(s.duration > 0.0)) throw std::invalid_argument("interaction duration must be positive");
    if (s.kind == ObjectKind::door && s.hands != HandSet::right) {
      throw std::invalid_argument("door scripts use the right hand");
    }
  }
}

Scenario generate(const ScenarioConfig& config) {
  config.validate();
  Scenario sc;
  sc.frame_rate = config.frame_rate;
  const BodyModel& body = sc.body;

  // Layout: each contact pose is reached by a walk from the previous one.
  std::mt19937_64 layout = make_rng(config.seed, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(layout); };

  std::vector<PlannedInteraction> plan;
  Vec2 p = Vec2::Zero();
  double yaw = 0.0;
  std::map<std::string, RigidTransform3> initial_objects;
  for (std::size_t i = 0; i < config.interactions.size(); ++i) {
    PlannedInteraction pi;
    pi.script = config.interactions[i];
    const double dir = yaw + (i == 0 ? uniform(-0.4, 0.4) : std::numbers::pi + uniform(-1.0, 1.0));
    pi.grip_position = p + uniform(4.0, 6.0) * heading(dir);
    pi.grip_yaw = dir + uniform(-0.5, 0.5);
    const std::string id = to_string(pi.script.kind) + "_" + std::to_string(i);
    if (pi.script.kind == ObjectKind::door) {
      Vec3 handle;
      pi.object = make_door(id, pi.grip_position, pi.grip_yaw, handle);
      pi.object.scan_pose = RigidTransform3::identity();
      pi.contacts_local = {Vec3(kHandForward, -kHandSide, kHandHeight - kPelvisHeight)};
      const Vec2 j = pi.object.hinge_point.head<2>();
      p = j + rotate2(pi.script.swing, pi.grip_position - j);
      yaw = pi.grip_yaw + pi.script.swing;
    } else {
      std::vector<Vec3> handles;
      pi.object = make_table(id, handles);
      const Vec2 o = pi.grip_position + rotate2(pi.grip_yaw, Vec2(0.78, 0.0));
      pi.object.scan_pose = RigidTransform3::from_yaw(pi.grip_yaw, Vec3(o.x(), o.y(), 0.0));
      if (pi.script.hands != HandSet::right) {
        pi.contacts_local.emplace_back(kHandForward, kHandSide, kHandHeight - kPelvisHeight);
      }
      if (pi.script.hands != HandSet::left) {
        pi.contacts_local.emplace_back(kHandForward, -kHandSide, kHandHeight - kPelvisHeight);
      }
      pi.turn = (unit(layout) < 0.5 ? -1.0 : 1.0) * pi.script.drag_turn;
      const double d = pi.script.drag_distance;
      if (std::abs(pi.turn) < 1e-9) {
        p = pi.grip_position + d * heading(pi.grip_yaw);
      } else {
        const double r = d / pi.turn;
        p = pi.grip_position +
            rotate2(pi.grip_yaw, Vec2(r * std::sin(pi.turn), r * (1.0 - std::cos(pi.turn))));
      }
      yaw = pi.grip_yaw + pi.turn;
    }
    initial_objects[pi.object.id] = pi.object.scan_pose;
    sc.objects.push_back(pi.object);
    plan.push_back(std::move(pi));
  }

  Timeline tl(body, config.frame_rate, config.walk_speed);
  tl.start(Vec2::Zero(), 0.0, initial_objects);
  tl.stand(config.pause);
  for (const auto& pi : plan) {
    const Vec2 target = pi.grip_position;
    tl.turn_to(std::atan2(target.y() - tl.position().y(), target.x() - tl.position().x()));
    tl.walk_to(target);
    tl.turn_to(pi.grip_yaw);
    tl.stand(config.pause - kReachTime);

    Eigen::VectorXd arms = tl.theta();
    std::size_t slot = 0;
    if (pi.script.hands != HandSet::right) {
      const ArmPose a = solve_arm(body, true, pi.contacts_local[slot++]);
      arms.segment<3>(3 * body.joint_index("l_shoulder")) = a.shoulder;
      arms.segment<3>(3 * body.joint_index("l_elbow")) = a.elbow;
    }
    if (pi.script.hands != HandSet::left) {
      const ArmPose a = solve_arm(body, false, pi.contacts_local[slot++]);
      arms.segment<3>(3 * body.joint_index("r_shoulder")) = a.shoulder;
      arms.segment<3>(3 * body.joint_index("r_elbow")) = a.elbow;
    }
    tl.blend_arms(arms);

    const Vec2 p0 = tl.position();
    const double y0 = tl.yaw();
    std::pair<double, double> span;
    if (pi.script.kind == ObjectKind::door) {
      const Vec2 j = pi.object.hinge_point.head<2>();
      const double swing = pi.script.swing;
      span = tl.interact(pi.object.id, pi.script.duration, [&](double u) {
        return std::pair<Vec2, double>(j + rotate2(u * swing, p0 - j), y0 + u * swing);
      });
    } else {
      const double turn = pi.turn;
      const double d = pi.script.drag_distance;
      span = tl.interact(pi.object.id, pi.script.duration, [&](double u) {
        const double s = u * d;
        Vec2 local(s, 0.0);
        if (std::abs(turn) > 1e-9) {
          const double r = d / turn;
          const double a = s / r;
          local = Vec2(r * std::sin(a), r * (1.0 - std::cos(a)));
        }
        return std::pair<Vec2, double>(p0 + rotate2(y0, local), y0 + u * turn);
      });
    }
    InteractionLabel label;
    label.start = span.first;
    label.end = span.second;
    label.hands = pi.script.hands;
    label.object_id = pi.object.id;
    sc.interactions.push_back(label);

    Eigen::VectorXd rest = tl.theta();
    rest.tail(rest.size() - 3).setZero();
    tl.blend_arms(rest);
    tl.stand(config.pause);
  }
  if (plan.empty()) {
    tl.walk_to(tl.position() + std::max(config.walk_length, 1.0) * heading(tl.yaw()));
  } else {
    tl.turn_to(tl.yaw() + std::numbers::pi * 0.75);
    tl.walk_to(tl.position() + 3.0 * heading(tl.yaw()));
  }
  tl.stand(config.pause);

  sc.truth.body = tl.body_sequence();
  sc.truth.object_poses = tl.object_tracks();
  sc.truth.interactions = sc.interactions;
  const std::size_t n = sc.truth.body.size();

  // Contact consistency of the scripted truth.
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& label = sc.interactions[i];
    const auto& track = sc.truth.object_poses.at(label.object_id);
    const auto& obj = plan[i].object;
    for (std::size_t f = 0; f < n; ++f) {
      const double t = sc.truth.body.times[f];
      if (t < label.start - 1e-9 || t > label.end + 1e-9) continue;
      const auto joints = joint_transforms(body, sc.truth.body.frames[f]);
      for (const char* hand : {"hand_L", "hand_R"}) {
        if ((hand[5] == 'L' && !label.uses_left()) || (hand[5] == 'R' && !label.uses_right())) {
          continue;
        }
        const Vec3 h = joints[static_cast<std::size_t>(body.vertex_joint(hand))].translation;
        const auto pts = posed_points(obj, track[f]);
        if ((pts[nearest_point(pts, h)] - h).norm() > 1e-9) {
          throw std::logic_error("scripted hand lost contact with the object");
        }
      }
    }
  }

  // IMU: drifting integration of the true pelvis motion, expressed in the IMU frame.
  std::mt19937_64 drift_rng = make_rng(config.seed, 2);
  std::uniform_real_distribution<double> angle_dist(-std::numbers::pi, std::numbers::pi);
  const Vec2 drift_dir = heading(angle_dist(drift_rng));
  const double drift_sign = unit(drift_rng) < 0.5 ? -1.0 : 1.0;
  const RigidTransform3 wz_inv = config.true_x_wz.inverse();
  const int head = body.vertex_joint("head");
  sc.streams.imu_body.times.reserve(n);
  Vec2 drifted = sc.truth.body.frames.front().gamma.head<2>();
  for (std::size_t f = 0; f < n; ++f) {
    const double t = sc.truth.body.times[f];
    BodyParams world = sc.truth.body.frames[f];
    const double dpsi = drift_sign * config.drift_rot_rate * t;
    if (f > 0) {
      const Vec2 step = world.gamma.head<2>() - sc.truth.body.frames[f - 1].gamma.head<2>();
      drifted += rotate2(dpsi, step) + config.drift_rate * step.norm() * drift_dir;
    }
    world.gamma.x() = drifted.x();
    world.gamma.y() = drifted.y();
    world.theta.head<3>() =
        matrix_to_axis_angle(rot_z(dpsi) * axis_angle_to_matrix(world.theta.head<3>()));
    const BodyParams imu = map_body_to_scene(world, wz_inv);
    const double t_imu = t - config.time_offset;
    sc.streams.imu_body.times.push_back(t_imu);
    sc.streams.imu_body.frames.push_back(imu);
    sc.streams.imu_head.push_back(
        {t_imu, joint_transforms(body, imu)[static_cast<std::size_t>(head)], 1.0});
  }

  // Camera localizations from the true head pose.
  std::mt19937_64 loc_rng = make_rng(config.seed, 3);
  const std::size_t loc_step = period_frames(config.loc_period, config.frame_rate);
  for (std::size_t f = 0; f < n; f += loc_step) {
    const double t = sc.truth.body.times[f];
    RigidTransform3 cam =
        joint_transforms(body, sc.truth.body.frames[f])[static_cast<std::size_t>(head)] *
        config.true_x_ic;
    cam.translation += gaussian3(loc_rng, config.loc_noise_sigma);
    cam.rotation = small_rotation(loc_rng, config.loc_rot_noise_sigma) * cam.rotation;
    double confidence =
        inside_any(sc.interactions, t) ? config.confidence_inside : config.confidence_outside;
    if (config.outlier_fraction > 0.0 && unit(loc_rng) < config.outlier_fraction) {
      cam.translation += gaussian3(loc_rng, config.outlier_sigma);
      confidence = config.outlier_confidence;
    }
    sc.streams.localizations.push_back({t, cam, confidence});
  }

  // Object observations away from interactions, when the object is in range.
  if (config.observe_objects) {
    std::mt19937_64 obs_rng = make_rng(config.seed, 4);
    const std::size_t obs_step = period_frames(config.obs_period, config.frame_rate);
    for (std::size_t f = 0; f < n; f += obs_step) {
      const double t = sc.truth.body.times[f];
      if (inside_any(sc.interactions, t)) continue;
      const Vec3 viewer = joint_transforms(body, sc.truth.body.frames[f])[static_cast<std::size_t>(head)].translation;
      for (const auto& obj : sc.objects) {
        const RigidTransform3& truth_pose = sc.truth.object_poses.at(obj.id)[f];
        Vec3 centre = Vec3::Zero();
        for (const auto& q : posed_points(obj, truth_pose)) centre += q;
        centre /= static_cast<double>(obj.points.size());
        if ((centre - viewer).head<2>().norm() > config.visibility_range) continue;
        RigidTransform3 pose = truth_pose;
        pose.translation += gaussian3(obs_rng, config.obs_noise_sigma);
        pose.rotation = small_rotation(obs_rng, config.obs_rot_noise_sigma) * pose.rotation;
        if (config.obs_outlier_fraction > 0.0 && unit(obs_rng) < config.obs_outlier_fraction) {
          pose.translation += gaussian3(obs_rng, 1.0);
        }
        sc.streams.observations.push_back({t, obj.id, pose, 0.9});
      }
    }
  }
  return sc;
}

double mean_nearest_distance(std::span<const Vec3> points, std::span<const Vec3> reference) {
  if (points.empty() || reference.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : reference) best = std::min(best, (p - q).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(points.size());
}

ErrorMetrics eval_errors(const MotionEstimate& estimate, const GroundTruth& truth,
                         const BodyModel& body, std::span<const ObjectModel> objects) {
  ErrorMetrics m;
  const std::size_t n = truth.body.size();
  if (n == 0 || estimate.body.size() == 0) return m;
  double obj_sum = 0.0;
  double body_sum = 0.0;
  std::size_t obj_frames = 0;
  for (std::size_t f = 0; f < n; ++f) {
    const double t = truth.body.times[f];
    const std::size_t e = snap_to_sample(
        estimate.body.times, std::clamp(t, estimate.body.times.front(), estimate.body.times.back()));
    const auto est_pts = body_surface_points(body, estimate.body.frames[e]);
    const auto true_pts = body_surface_points(body, truth.body.frames[f]);
    const double be = mean_nearest_distance(est_pts, true_pts);
    m.body_per_frame.push_back(be);
    body_sum += be;

    double oe = 0.0;
    std::size_t count = 0;
    for (const auto& obj : objects) {
      const auto truth_it = truth.object_poses.find(obj.id);
      const auto est_it = estimate.object_poses.find(obj.id);
      if (truth_it == truth.object_poses.end() || est_it == estimate.object_poses.end()) continue;
      const auto est = posed_points(obj, est_it->second.at(e));
      const auto ref = posed_points(obj, truth_it->second.at(f));
      oe += mean_nearest_distance(est, ref);
      ++count;
    }
    if (count > 0) {
      oe /= static_cast<double>(count);
      obj_sum += oe;
      ++obj_frames;
    }
    m.obj_per_frame.push_back(oe);
  }
  m.e_body = body_sum / static_cast<double>(n);
  m.e_obj = obj_frames == 0 ? 0.0 : obj_sum / static_cast<double>(obj_frames);
  return m;
}

}  // namespace wearcap
