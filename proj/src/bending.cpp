#include "wearcap/bending.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace wearcap {

namespace {

constexpr double kDataEps = 1e-8;

// Tangent angle per segment of a flat xy array, plus the segment whose
// geometry actually defines it (-1 when no segment has any length).
struct SegmentAngles {
  std::vector<double> angle;
  std::vector<long> source;
};

SegmentAngles segment_angles(std::span<const double> xy, double eps) {
  const std::size_t n = xy.size() / 2;
  SegmentAngles out;
  if (n < 2) return out;
  const std::size_t m = n - 1;
  out.angle.assign(m, 0.0);
  out.source.assign(m, -1);
  long first_valid = -1;
  for (std::size_t k = 0; k < m; ++k) {
    const double dx = xy[2 * k + 2] - xy[2 * k];
    const double dy = xy[2 * k + 3] - xy[2 * k + 1];
    if (std::hypot(dx, dy) >= eps) {
      first_valid = static_cast<long>(k);
      break;
    }
  }
  if (first_valid < 0) return out;  // stationary: every angle stays 0

  double prev = 0.0;
  long prev_source = -1;
  for (std::size_t k = 0; k < m; ++k) {
    const double dx = xy[2 * k + 2] - xy[2 * k];
    const double dy = xy[2 * k + 3] - xy[2 * k + 1];
    if (std::hypot(dx, dy) >= eps) {
      const double raw = std::atan2(dy, dx);
      prev = prev_source < 0 ? raw : prev + wrap_angle(raw - prev);
      prev_source = static_cast<long>(k);
    } else if (prev_source < 0) {
      // Leading degenerate segments take the first real tangent.
      const auto f = static_cast<std::size_t>(first_valid);
      prev = std::atan2(xy[2 * f + 3] - xy[2 * f + 1], xy[2 * f + 2] - xy[2 * f]);
      prev_source = first_valid;
    }
    out.angle[k] = prev;
    out.source[k] = prev_source;
  }
  return out;
}

std::vector<double> inverse_half_spans(std::span<const double> times) {
  std::vector<double> inv;
  if (times.size() < 3) return inv;
  inv.resize(times.size() - 2);
  for (std::size_t k = 0; k + 2 < times.size(); ++k) {
    inv[k] = 2.0 / (times[k + 2] - times[k]);
  }
  return inv;
}

// Bending energy of the flat xy array against reference segment angles; when
// `grad` is non-empty accumulates scale * dE/dxy into it.
double angle_energy(std::span<const double> xy, std::span<const double> reference_angles,
                    std::span<const double> inv_tau, EnergyMode mode, double eps,
                    std::span<double> grad, double scale) {
  const SegmentAngles cand = segment_angles(xy, eps);
  const std::size_t m = cand.angle.size();
  if (m < 2) return 0.0;
  std::vector<double> dangle;
  if (!grad.empty()) dangle.assign(m, 0.0);
  double energy = 0.0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double delta = (cand.angle[k + 1] - reference_angles[k + 1]) -
                         (cand.angle[k] - reference_angles[k]);
    double d_e = 0.0;
    if (mode == EnergyMode::squared) {
      energy += delta * delta * inv_tau[k];
      d_e = 2.0 * delta * inv_tau[k];
    } else {
      energy += std::abs(delta);
      d_e = delta / std::sqrt(delta * delta + kDataEps * kDataEps);
    }
    if (!grad.empty()) {
      dangle[k + 1] += d_e;
      dangle[k] -= d_e;
    }
  }
  if (!grad.empty()) {
    for (std::size_t k = 0; k < m; ++k) {
      const long s = cand.source[k];
      if (s < 0 || dangle[k] == 0.0) continue;
      const auto su = static_cast<std::size_t>(s);
      const double dx = xy[2 * su + 2] - xy[2 * su];
      const double dy = xy[2 * su + 3] - xy[2 * su + 1];
      const double inv_len2 = 1.0 / (dx * dx + dy * dy);
      const double gx = scale * dangle[k] * (-dy) * inv_len2;
      const double gy = scale * dangle[k] * dx * inv_len2;
      grad[2 * su + 2] += gx;
      grad[2 * su + 3] += gy;
      grad[2 * su] -= gx;
      grad[2 * su + 1] -= gy;
    }
  }
  return energy;
}

std::vector<double> flatten(const std::vector<Vec2>& xy) {
  std::vector<double> flat(2 * xy.size());
  for (std::size_t k = 0; k < xy.size(); ++k) {
    flat[2 * k] = xy[k].x();
    flat[2 * k + 1] = xy[k].y();
  }
  return flat;
}

}  // namespace

void Trajectory2::validate() const {
  if (times.size() != xy.size() || times.size() != z.size()) {
    throw std::invalid_argument("trajectory channels differ in length");
  }
  if (times.size() < 3) throw std::invalid_argument("trajectory needs at least 3 samples");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || !xy[k].allFinite() || !std::isfinite(z[k])) {
      throw std::invalid_argument("trajectory contains non-finite values");
    }
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw std::invalid_argument("trajectory times must strictly increase");
    }
  }
}

Trajectory2 Trajectory2::from_points(std::span<const double> times, std::span<const Vec3> points) {
  if (times.size() != points.size()) throw std::invalid_argument("times/points length mismatch");
  Trajectory2 t;
  t.times.assign(times.begin(), times.end());
  t.xy.reserve(points.size());
  t.z.reserve(points.size());
  for (const auto& p : points) {
    t.xy.emplace_back(p.x(), p.y());
    t.z.push_back(p.z());
  }
  return t;
}

Trajectory2 Trajectory2::slice(std::size_t first, std::size_t last) const {
  Trajectory2 t;
  t.times.assign(times.begin() + static_cast<long>(first), times.begin() + static_cast<long>(last) + 1);
  t.xy.assign(xy.begin() + static_cast<long>(first), xy.begin() + static_cast<long>(last) + 1);
  t.z.assign(z.begin() + static_cast<long>(first), z.begin() + static_cast<long>(last) + 1);
  return t;
}

std::vector<double> tangent_angles(const Trajectory2& traj, double eps_angle) {
  traj.validate();
  return segment_angles(flatten(traj.xy), eps_angle).angle;
}

double bending_energy_tr(const Trajectory2& candidate, const Trajectory2& reference,
                         EnergyMode mode, double eps_angle) {
  candidate.validate();
  reference.validate();
  if (candidate.times != reference.times) {
    throw std::invalid_argument("bending energy needs identical time stamps");
  }
  const auto ref_angles = segment_angles(flatten(reference.xy), eps_angle).angle;
  const auto inv_tau = inverse_half_spans(reference.times);
  return angle_energy(flatten(candidate.xy), ref_angles, inv_tau, mode, eps_angle, {}, 0.0);
}

std::size_t snap_to_sample(std::span<const double> times, double time) {
  if (times.empty()) throw std::invalid_argument("no samples to snap to");
  constexpr double tol = 1e-9;
  if (time < times.front() - tol || time > times.back() + tol) {
    throw std::invalid_argument("control time outside trajectory span");
  }
  const auto it = std::lower_bound(times.begin(), times.end(), time);
  if (it == times.begin()) return 0;
  if (it == times.end()) return times.size() - 1;
  const auto hi = static_cast<std::size_t>(it - times.begin());
  return (time - times[hi - 1] <= times[hi] - time) ? hi - 1 : hi;
}

TrajectoryObjective::TrajectoryObjective(Trajectory2 reference,
                                         std::span<const ControlPoint2> controls,
                                         const BendOptions& options)
    : reference_(std::move(reference)), options_(options) {
  reference_.validate();
  if (options.rigidness < 0.0) throw std::invalid_argument("rigidness must be >= 0");
  for (const auto& c : controls) {
    if (!std::isfinite(c.time) || !c.target.allFinite()) {
      throw std::invalid_argument("non-finite control point");
    }
    samples_.push_back(snap_to_sample(reference_.times, c.time));
    targets_.push_back(c.target);
  }
  reference_angles_ = segment_angles(flatten(reference_.xy), options.eps_angle).angle;
  inv_tau_ = inverse_half_spans(reference_.times);
}

double TrajectoryObjective::data_term(std::span<const double> xy) const {
  double data = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const std::size_t s = samples_[i];
    data += std::hypot(xy[2 * s] - targets_[i].x(), xy[2 * s + 1] - targets_[i].y());
  }
  return data;
}

double TrajectoryObjective::energy_term(std::span<const double> xy) const {
  return angle_energy(xy, reference_angles_, inv_tau_, options_.energy, options_.eps_angle, {},
                      0.0);
}

double TrajectoryObjective::evaluate(std::span<const double> xy, std::span<double> grad) const {
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  double data = 0.0;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const std::size_t s = samples_[i];
    const double rx = xy[2 * s] - targets_[i].x();
    const double ry = xy[2 * s + 1] - targets_[i].y();
    const double r = std::hypot(rx, ry);
    data += r;
    if (!grad.empty()) {
      const double inv = 1.0 / std::sqrt(r * r + kDataEps * kDataEps);
      grad[2 * s] += rx * inv;
      grad[2 * s + 1] += ry * inv;
    }
  }
  const double energy = angle_energy(xy, reference_angles_, inv_tau_, options_.energy,
                                     options_.eps_angle, grad, options_.rigidness);
  return data + options_.rigidness * energy;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Gauss-Newton curvature of scale * E_tr for a flat xy slice. `index` maps a
// slice coordinate to its state variable, or -1 when the coordinate is fixed.
void add_angle_energy_hessian(std::span<const double> xy, std::span<const double> inv_tau,
                              double eps, double scale,
                              const std::function<long(std::size_t)>& index, Triplets& out) {
  const SegmentAngles cand = segment_angles(xy, eps);
  const std::size_t m = cand.angle.size();
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const double w = 2.0 * scale * inv_tau[k];
    if (w == 0.0) continue;
    std::array<std::pair<long, double>, 8> row{};
    std::size_t used = 0;
    for (std::size_t side = 0; side < 2; ++side) {
      const long s = cand.source[k + side];
      if (s < 0) continue;
      const auto su = static_cast<std::size_t>(s);
      const double dx = xy[2 * su + 2] - xy[2 * su];
      const double dy = xy[2 * su + 3] - xy[2 * su + 1];
      const double inv_len2 = 1.0 / (dx * dx + dy * dy);
      const double sign = side == 0 ? -1.0 : 1.0;
      const double gx = sign * -dy * inv_len2;
      const double gy = sign * dx * inv_len2;
      row[used++] = {index(2 * su + 2), gx};
      row[used++] = {index(2 * su + 3), gy};
      row[used++] = {index(2 * su), -gx};
      row[used++] = {index(2 * su + 1), -gy};
    }
    for (std::size_t i = 0; i < used; ++i) {
      if (row[i].first < 0) continue;
      for (std::size_t j = 0; j < used; ++j) {
        if (row[j].first < 0) continue;
        out.emplace_back(static_cast<int>(row[i].first), static_cast<int>(row[j].first),
                         w * row[i].second * row[j].second);
      }
    }
  }
}

// Damping in the H1 metric: first differences between variables `stride`
// apart keep steps smooth along the sequence and leave common shifts free.
Eigen::SparseMatrix<double> smooth_damping(std::size_t n, std::size_t stride) {
  Triplets d;
  for (std::size_t k = 0; k < n; ++k) d.emplace_back(static_cast<int>(k), static_cast<int>(k), 1e-6);
  for (std::size_t k = 0; k + stride < n; ++k) {
    const int a = static_cast<int>(k);
    const int b = static_cast<int>(k + stride);
    d.emplace_back(a, a, 1.0);
    d.emplace_back(b, b, 1.0);
    d.emplace_back(a, b, -1.0);
    d.emplace_back(b, a, -1.0);
  }
  Eigen::SparseMatrix<double> m(static_cast<int>(n), static_cast<int>(n));
  m.setFromTriplets(d.begin(), d.end());
  return m;
}

using Curvature = std::function<void(std::span<const double>, double, Triplets&)>;

constexpr double kMinAnneal = 1e-8;

// Levenberg-Marquardt style loop: solves (H + mu D) d = -g and keeps only
// steps that lower the true objective. The curvature callback receives an
// annealing factor that starts at 1 and halves per iteration down to
// kMinAnneal; reweighting floors scale with it so that terms sitting exactly
// at their kink do not freeze the first steps.
OptimizeResult damped_gauss_newton(const ObjectiveFn& objective, const Curvature& curvature,
                                   const Eigen::SparseMatrix<double>& damping,
                                   std::vector<double> x, int iterations) {
  const std::size_t n = x.size();
  OptimizeResult out;
  std::vector<double> grad(n);
  std::vector<double> trial(n);
  double f = objective(x, grad);
  out.initial_objective = f;
  double mu = -1.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  Triplets entries;
  double anneal = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const bool annealed = anneal <= kMinAnneal;
    entries.clear();
    curvature(x, anneal, entries);
    Eigen::SparseMatrix<double> h(static_cast<int>(n), static_cast<int>(n));
    h.setFromTriplets(entries.begin(), entries.end());
    if (mu < 0.0) mu = 1e-3;
    const Eigen::Map<const Eigen::VectorXd> g(grad.data(), static_cast<long>(n));

    bool accepted = false;
    double ft = f;
    for (int attempt = 0; attempt < 30 && !accepted; ++attempt) {
      solver.compute(h + mu * damping);
      if (solver.info() == Eigen::Success) {
        const Eigen::VectorXd d = solver.solve(-g);
        for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] + d[static_cast<long>(k)];
        ft = objective(trial, {});
        accepted = std::isfinite(ft) && ft < f;
      }
      mu = accepted ? std::max(mu / 3.0, 1e-15) : mu * 4.0;
    }
    out.iterations = it + 1;
    anneal = std::max(anneal * 0.5, kMinAnneal);
    if (!accepted) {
      if (annealed) break;
      mu = -1.0;
      continue;
    }
    const double gain = f - ft;
    x.swap(trial);
    f = objective(x, grad);
    if (annealed && gain <= 1e-8 * f + 1e-15) break;
  }
  out.final_objective = f;
  out.x = std::move(x);
  return out;
}

// Reweighted curvature of a norm term: 1 / max(|r|, floor).
double distance_weight(double r, double anneal) { return 1.0 / std::max(r, 0.1 * anneal); }

}  // namespace

OptimizeResult TrajectoryObjective::minimize_gauss_newton(std::vector<double> xy,
                                                          int iterations) const {
  const auto objective = [this](std::span<const double> x, std::span<double> g) {
    return evaluate(x, g);
  };
  const auto curvature = [this](std::span<const double> x, double anneal, Triplets& out) {
    add_angle_energy_hessian(x, inv_tau_, options_.eps_angle, options_.rigidness,
                             [](std::size_t i) { return static_cast<long>(i); }, out);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const std::size_t s = samples_[i];
      const double w =
          distance_weight(std::hypot(x[2 * s] - targets_[i].x(), x[2 * s + 1] - targets_[i].y()), anneal);
      out.emplace_back(static_cast<int>(2 * s), static_cast<int>(2 * s), w);
      out.emplace_back(static_cast<int>(2 * s + 1), static_cast<int>(2 * s + 1), w);
    }
  };
  const auto damping = smooth_damping(xy.size(), 2);
  return damped_gauss_newton(objective, curvature, damping, std::move(xy), iterations);
}

BendResult bend_trajectory(const Trajectory2& traj, std::span<const ControlPoint2> controls,
                           const BendOptions& options) {
  traj.validate();
  if (options.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  BendResult result;
  result.trajectory = traj;
  if (controls.empty()) return result;

  const TrajectoryObjective objective(traj, controls, options);
  const ObjectiveFn fn = [&objective](std::span<const double> x, std::span<double> g) {
    return objective.evaluate(x, g);
  };
  OptimizeResult opt;
  if (options.optimizer == OptimizerKind::gauss_newton && options.energy == EnergyMode::squared) {
    opt = objective.minimize_gauss_newton(flatten(traj.xy), options.iterations);
  } else if (options.optimizer != OptimizerKind::adam) {
    opt = minimize_sobolev(fn, flatten(traj.xy), 2,
                           {options.iterations, options.step_size, options.smoothing});
  } else {
    AdamSettings adam;
    adam.iterations = options.iterations;
    adam.step_size = options.step_size;
    opt = minimize_adam(fn, flatten(traj.xy), adam);
  }
  if (opt.final_objective > opt.initial_objective) {
    throw std::logic_error("bend_trajectory increased its objective");
  }
  for (std::size_t k = 0; k < traj.size(); ++k) {
    result.trajectory.xy[k] = Vec2(opt.x[2 * k], opt.x[2 * k + 1]);
  }
  result.initial_objective = opt.initial_objective;
  result.final_objective = opt.final_objective;
  result.iterations = opt.iterations;
  return result;
}

double bending_energy_pose(std::span<const Eigen::VectorXd> candidate,
                           std::span<const Eigen::VectorXd> reference) {
  if (candidate.size() != reference.size()) {
    throw std::invalid_argument("pose sequences differ in length");
  }
  double energy = 0.0;
  for (std::size_t k = 0; k + 1 < candidate.size(); ++k) {
    if (candidate[k].size() != reference[k].size() ||
        candidate[k + 1].size() != reference[k + 1].size() ||
        candidate[k].size() != candidate[k + 1].size()) {
      throw std::invalid_argument("pose dimension mismatch");
    }
    // ||(d_hat - d) / dt|| * dt: the step length cancels.
    energy += ((candidate[k + 1] - candidate[k]) - (reference[k + 1] - reference[k])).norm();
  }
  return energy;
}

PoseObjective::PoseObjective(const BodyModel& body, std::span<const double> times,
                             std::span<const Eigen::VectorXd> poses, const Trajectory2& trans,
                             std::span<const PoseControlPoint> controls,
                             std::span<const int> joint_mask, std::size_t window,
                             const PoseBendOptions& options)
    : body_(body),
      times_(times.begin(), times.end()),
      poses_(poses.begin(), poses.end()),
      trans_(trans),
      controls_(controls.begin(), controls.end()),
      mask_(joint_mask.begin(), joint_mask.end()),
      options_(options) {
  trans_.validate();
  if (poses_.size() != times_.size() || trans_.size() != times_.size()) {
    throw std::invalid_argument("pose, translation and time sequences differ in length");
  }
  if (controls_.empty()) throw std::invalid_argument("pose objective needs controls");
  std::sort(mask_.begin(), mask_.end());
  mask_.erase(std::unique(mask_.begin(), mask_.end()), mask_.end());
  for (int j : mask_) {
    if (j < 0 || j >= static_cast<int>(body.joint_count())) {
      throw std::invalid_argument("joint mask index out of range");
    }
  }
  std::size_t lo = times_.size();
  std::size_t hi = 0;
  for (const auto& c : controls_) {
    if (c.vertex < 0 || c.vertex >= static_cast<int>(body.joint_count())) {
      throw std::invalid_argument("control vertex out of range");
    }
    const int parent = body.joints()[static_cast<std::size_t>(c.vertex)].parent;
    if (parent < 0 || !std::binary_search(mask_.begin(), mask_.end(), parent)) {
      throw std::invalid_argument("unreachable control");
    }
    if (!c.target_xy.allFinite()) throw std::invalid_argument("non-finite control target");
    const std::size_t f = snap_to_sample(times_, c.time);
    control_frames_.push_back(f);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  first_ = lo > window ? lo - window : 0;
  last_ = std::min(times_.size() - 1, hi + window);
  energy_first_ = first_ >= 2 ? first_ - 2 : 0;
  energy_last_ = std::min(times_.size() - 1, last_ + 2);
  while (energy_last_ - energy_first_ < 2) {
    if (energy_first_ > 0) {
      --energy_first_;
    } else {
      ++energy_last_;
    }
  }
  std::vector<double> ref_xy;
  for (std::size_t k = energy_first_; k <= energy_last_; ++k) {
    ref_xy.push_back(trans_.xy[k].x());
    ref_xy.push_back(trans_.xy[k].y());
  }
  reference_angles_ = segment_angles(ref_xy, options_.eps_angle).angle;
  inv_tau_ = inverse_half_spans(std::span<const double>(times_).subspan(
      energy_first_, energy_last_ - energy_first_ + 1));
}

std::vector<double> PoseObjective::initial_state() const {
  std::vector<double> x;
  x.reserve((last_ - first_ + 1) * vars_per_frame());
  for (std::size_t f = first_; f <= last_; ++f) {
    for (int j : mask_) {
      for (int c = 0; c < 3; ++c) x.push_back(poses_[f](3 * j + c));
    }
    x.push_back(trans_.xy[f].x());
    x.push_back(trans_.xy[f].y());
  }
  return x;
}

std::vector<double> PoseObjective::step_scale() const {
  std::vector<double> s;
  const std::size_t frames = last_ - first_ + 1;
  s.reserve(frames * vars_per_frame());
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t j = 0; j < mask_.size() * 3; ++j) s.push_back(options_.rotation_step);
    s.push_back(options_.translation_step);
    s.push_back(options_.translation_step);
  }
  return s;
}

void PoseObjective::unpack(std::span<const double> x, std::vector<Eigen::VectorXd>& poses,
                           Trajectory2& trans) const {
  poses = poses_;
  trans = trans_;
  const std::size_t vpf = vars_per_frame();
  for (std::size_t f = first_; f <= last_; ++f) {
    const std::size_t base = (f - first_) * vpf;
    for (std::size_t m = 0; m < mask_.size(); ++m) {
      for (int c = 0; c < 3; ++c) poses[f](3 * mask_[m] + c) = x[base + 3 * m + static_cast<std::size_t>(c)];
    }
    trans.xy[f] = Vec2(x[base + vpf - 2], x[base + vpf - 1]);
  }
}

double PoseObjective::evaluate(std::span<const double> x, std::span<double> grad) const {
  const std::size_t vpf = vars_per_frame();
  const std::size_t nm = mask_.size();
  if (x.size() != (last_ - first_ + 1) * vpf) throw std::invalid_argument("state size mismatch");
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);

  auto frame_params = [&](std::size_t f) {
    BodyParams p;
    p.theta = poses_[f];
    p.gamma = Vec3(trans_.xy[f].x(), trans_.xy[f].y(), trans_.z[f]);
    if (f >= first_ && f <= last_) {
      const std::size_t base = (f - first_) * vpf;
      for (std::size_t m = 0; m < nm; ++m) {
        for (int c = 0; c < 3; ++c) p.theta(3 * mask_[m] + c) = x[base + 3 * m + static_cast<std::size_t>(c)];
      }
      p.gamma.x() = x[base + vpf - 2];
      p.gamma.y() = x[base + vpf - 1];
    }
    return p;
  };

  // Control-point distances.
  double data = 0.0;
  std::size_t cached_frame = times_.size();
  BodyParams params;
  std::vector<RigidTransform3> world;
  for (std::size_t i = 0; i < controls_.size(); ++i) {
    const std::size_t f = control_frames_[i];
    if (f != cached_frame) {
      params = frame_params(f);
      world = joint_transforms(body_, params);
      cached_frame = f;
    }
    const auto v = static_cast<std::size_t>(controls_[i].vertex);
    const Vec3 p = world[v].translation;
    const double rx = p.x() - controls_[i].target_xy.x();
    const double ry = p.y() - controls_[i].target_xy.y();
    const double r = std::hypot(rx, ry);
    data += r;
    if (grad.empty()) continue;
    const double inv = 1.0 / std::sqrt(r * r + kDataEps * kDataEps);
    const Vec2 g(rx * inv, ry * inv);
    const std::size_t base = (f - first_) * vpf;
    for (std::size_t m = 0; m < nm; ++m) {
      const int a = mask_[m];
      if (!body_.is_ancestor(a, static_cast<int>(v))) continue;
      const auto ua = static_cast<std::size_t>(a);
      const int pa = body_.joints()[ua].parent;
      const Mat3 parent_rot = pa < 0 ? Mat3::Identity() : world[static_cast<std::size_t>(pa)].rotation;
      const Mat3 axes = parent_rot * so3_left_jacobian(params.theta.segment<3>(3 * a));
      const Vec3 lever = p - world[ua].translation;
      for (int c = 0; c < 3; ++c) {
        const Vec3 col = axes.col(c).cross(lever);
        grad[base + 3 * m + static_cast<std::size_t>(c)] += g.x() * col.x() + g.y() * col.y();
      }
    }
    grad[base + vpf - 2] += g.x();
    grad[base + vpf - 1] += g.y();
  }

  // Pose bending energy over consecutive pairs touching a free frame.
  double pose_energy = 0.0;
  const double lambda = options_.rigidness;
  const std::size_t pair_lo = first_ > 0 ? first_ - 1 : 0;
  const std::size_t pair_hi = std::min(last_, times_.size() - 2);
  auto delta = [&](std::size_t f, std::size_t m, int c) {
    if (f < first_ || f > last_) return 0.0;
    return x[(f - first_) * vpf + 3 * m + static_cast<std::size_t>(c)] -
           poses_[f](3 * mask_[m] + c);
  };
  std::vector<double> diff(3 * nm);
  for (std::size_t k = pair_lo; k <= pair_hi && times_.size() >= 2; ++k) {
    double norm2 = 0.0;
    for (std::size_t m = 0; m < nm; ++m) {
      for (int c = 0; c < 3; ++c) {
        const double d = delta(k + 1, m, c) - delta(k, m, c);
        diff[3 * m + static_cast<std::size_t>(c)] = d;
        norm2 += d * d;
      }
    }
    pose_energy += std::sqrt(norm2);
    if (grad.empty()) continue;
    const double inv = lambda / std::sqrt(norm2 + kDataEps * kDataEps);
    for (std::size_t m = 0; m < nm; ++m) {
      for (int c = 0; c < 3; ++c) {
        const double g = diff[3 * m + static_cast<std::size_t>(c)] * inv;
        if (k + 1 >= first_ && k + 1 <= last_) grad[(k + 1 - first_) * vpf + 3 * m + static_cast<std::size_t>(c)] += g;
        if (k >= first_ && k <= last_) grad[(k - first_) * vpf + 3 * m + static_cast<std::size_t>(c)] -= g;
      }
    }
  }

  // Translation bending energy over the affected slice.
  const std::size_t ns = energy_last_ - energy_first_ + 1;
  std::vector<double> xy(2 * ns);
  for (std::size_t k = 0; k < ns; ++k) {
    const std::size_t f = energy_first_ + k;
    if (f >= first_ && f <= last_) {
      xy[2 * k] = x[(f - first_) * vpf + vpf - 2];
      xy[2 * k + 1] = x[(f - first_) * vpf + vpf - 1];
    } else {
      xy[2 * k] = trans_.xy[f].x();
      xy[2 * k + 1] = trans_.xy[f].y();
    }
  }
  std::vector<double> xy_grad;
  if (!grad.empty()) xy_grad.assign(2 * ns, 0.0);
  const double trans_energy = angle_energy(xy, reference_angles_, inv_tau_, EnergyMode::squared,
                                           options_.eps_angle, xy_grad, lambda);
  if (!grad.empty()) {
    for (std::size_t k = 0; k < ns; ++k) {
      const std::size_t f = energy_first_ + k;
      if (f < first_ || f > last_) continue;
      grad[(f - first_) * vpf + vpf - 2] += xy_grad[2 * k];
      grad[(f - first_) * vpf + vpf - 1] += xy_grad[2 * k + 1];
    }
  }
  return data + lambda * (pose_energy + trans_energy);
}

OptimizeResult PoseObjective::minimize_gauss_newton(std::vector<double> x0, int iterations) const {
  const std::size_t vpf = vars_per_frame();
  const std::size_t nm = mask_.size();
  const double lambda = options_.rigidness;
  const auto objective = [this](std::span<const double> x, std::span<double> g) {
    return evaluate(x, g);
  };
  const auto curvature = [&](std::span<const double> x, double anneal, Triplets& out) {
    // Control distances, one 2 x vpf Jacobian block per control.
    Eigen::MatrixXd jac(2, static_cast<long>(vpf));
    for (std::size_t i = 0; i < controls_.size(); ++i) {
      const std::size_t f = control_frames_[i];
      const std::size_t base = (f - first_) * vpf;
      BodyParams params;
      params.theta = poses_[f];
      for (std::size_t m = 0; m < nm; ++m) {
        for (int c = 0; c < 3; ++c) params.theta(3 * mask_[m] + c) = x[base + 3 * m + static_cast<std::size_t>(c)];
      }
      params.gamma = Vec3(x[base + vpf - 2], x[base + vpf - 1], trans_.z[f]);
      const auto world = joint_transforms(body_, params);
      const auto v = static_cast<std::size_t>(controls_[i].vertex);
      const Vec3 p = world[v].translation;
      jac.setZero();
      for (std::size_t m = 0; m < nm; ++m) {
        const int a = mask_[m];
        if (!body_.is_ancestor(a, static_cast<int>(v))) continue;
        const auto ua = static_cast<std::size_t>(a);
        const int pa = body_.joints()[ua].parent;
        const Mat3 parent_rot = pa < 0 ? Mat3::Identity() : world[static_cast<std::size_t>(pa)].rotation;
        const Mat3 axes = parent_rot * so3_left_jacobian(params.theta.segment<3>(3 * a));
        const Vec3 lever = p - world[ua].translation;
        for (int c = 0; c < 3; ++c) {
          const Vec3 col = axes.col(c).cross(lever);
          jac(0, static_cast<long>(3 * m) + c) = col.x();
          jac(1, static_cast<long>(3 * m) + c) = col.y();
        }
      }
      jac(0, static_cast<long>(vpf) - 2) = 1.0;
      jac(1, static_cast<long>(vpf) - 1) = 1.0;
      const double w = distance_weight(std::hypot(p.x() - controls_[i].target_xy.x(),
                                                  p.y() - controls_[i].target_xy.y()),
                                       anneal);
      const Eigen::MatrixXd block = w * jac.transpose() * jac;
      for (long r = 0; r < block.rows(); ++r) {
        for (long c = 0; c < block.cols(); ++c) {
          if (block(r, c) != 0.0) {
            out.emplace_back(static_cast<int>(base) + static_cast<int>(r),
                             static_cast<int>(base) + static_cast<int>(c), block(r, c));
          }
        }
      }
    }
    // Pose energy, reweighted per consecutive pair.
    const std::size_t pair_lo = first_ > 0 ? first_ - 1 : 0;
    const std::size_t pair_hi = std::min(last_, times_.size() - 2);
    auto value = [&](std::size_t f, std::size_t k) {
      if (f < first_ || f > last_) return poses_[f](3 * mask_[k / 3] + static_cast<long>(k % 3));
      return x[(f - first_) * vpf + k];
    };
    for (std::size_t k = pair_lo; k <= pair_hi && times_.size() >= 2; ++k) {
      double norm2 = 0.0;
      for (std::size_t q = 0; q < 3 * nm; ++q) {
        const double d = (value(k + 1, q) - poses_[k + 1](3 * mask_[q / 3] + static_cast<long>(q % 3))) -
                         (value(k, q) - poses_[k](3 * mask_[q / 3] + static_cast<long>(q % 3)));
        norm2 += d * d;
      }
      const double w = lambda * distance_weight(std::sqrt(norm2), anneal);
      const bool a_free = k >= first_ && k <= last_;
      const bool b_free = k + 1 >= first_ && k + 1 <= last_;
      for (std::size_t q = 0; q < 3 * nm; ++q) {
        const int ia = a_free ? static_cast<int>((k - first_) * vpf + q) : -1;
        const int ib = b_free ? static_cast<int>((k + 1 - first_) * vpf + q) : -1;
        if (ia >= 0) out.emplace_back(ia, ia, w);
        if (ib >= 0) out.emplace_back(ib, ib, w);
        if (ia >= 0 && ib >= 0) {
          out.emplace_back(ia, ib, -w);
          out.emplace_back(ib, ia, -w);
        }
      }
    }
    // Translation energy over the affected slice.
    const std::size_t ns = energy_last_ - energy_first_ + 1;
    std::vector<double> xy(2 * ns);
    for (std::size_t k = 0; k < ns; ++k) {
      const std::size_t f = energy_first_ + k;
      const bool free = f >= first_ && f <= last_;
      xy[2 * k] = free ? x[(f - first_) * vpf + vpf - 2] : trans_.xy[f].x();
      xy[2 * k + 1] = free ? x[(f - first_) * vpf + vpf - 1] : trans_.xy[f].y();
    }
    add_angle_energy_hessian(
        xy, inv_tau_, options_.eps_angle, lambda,
        [&](std::size_t i) -> long {
          const std::size_t f = energy_first_ + i / 2;
          if (f < first_ || f > last_) return -1;
          return static_cast<long>((f - first_) * vpf + vpf - 2 + i % 2);
        },
        out);
  };
  // Stationary stretches of the root path make the translation energy jump
  // as soon as a sample moves, so the joint rotations are solved first with
  // the translation held by stiff damping, then everything is polished.
  const auto damping = smooth_damping(x0.size(), vpf);
  Eigen::SparseMatrix<double> held = damping;
  for (std::size_t base = 0; base < x0.size(); base += vpf) {
    for (std::size_t c = vpf - 2; c < vpf; ++c) {
      held.coeffRef(static_cast<int>(base + c), static_cast<int>(base + c)) += 1e12;
    }
  }
  const int first_stage = std::max(1, iterations / 2);
  OptimizeResult out = damped_gauss_newton(objective, curvature, held, std::move(x0), first_stage);
  if (iterations > first_stage) {
    const OptimizeResult polish =
        damped_gauss_newton(objective, curvature, damping, out.x, iterations - first_stage);
    out.x = polish.x;
    out.final_objective = polish.final_objective;
    out.iterations += polish.iterations;
  }
  return out;
}

PoseBendResult deform_pose_trajectory(const BodySequence& poses, const Trajectory2& trans,
                                      std::span<const PoseControlPoint> controls,
                                      const BodyModel& body, const PoseBendOptions& options,
                                      std::span<const int> joint_mask, std::size_t window) {
  trans.validate();
  if (poses.size() != trans.size()) throw std::invalid_argument("pose/translation length mismatch");
  PoseBendResult result;
  result.body = poses;
  result.trans = trans;
  for (std::size_t f = 0; f < poses.size(); ++f) {
    result.body.frames[f].gamma = trans.point(f);
  }
  if (controls.empty()) return result;

  std::vector<Eigen::VectorXd> thetas;
  thetas.reserve(poses.size());
  for (const auto& p : poses.frames) thetas.push_back(p.theta);
  const PoseObjective objective(body, poses.times, thetas, trans, controls, joint_mask, window,
                                options);
  OptimizeResult opt;
  if (options.optimizer == OptimizerKind::adam) {
    AdamSettings adam;
    adam.iterations = options.iterations;
    adam.step_size = 1.0;
    const auto scale = objective.step_scale();
    opt = minimize_adam(
        [&objective](std::span<const double> x, std::span<double> g) {
          return objective.evaluate(x, g);
        },
        objective.initial_state(), adam, scale);
  } else {
    opt = objective.minimize_gauss_newton(objective.initial_state(), options.iterations);
  }
  if (opt.final_objective > opt.initial_objective) {
    throw std::logic_error("deform_pose_trajectory increased its objective");
  }
  std::vector<Eigen::VectorXd> new_thetas;
  objective.unpack(opt.x, new_thetas, result.trans);
  for (std::size_t f = objective.first_free(); f <= objective.last_free(); ++f) {
    result.body.frames[f].theta = new_thetas[f];
    result.body.frames[f].gamma = result.trans.point(f);
  }
  result.initial_objective = opt.initial_objective;
  result.final_objective = opt.final_objective;
  return result;
}

}  // namespace wearcap
