#pragma once

// Random generators and brute-force oracles shared by the unit tests and the
// acceptance suite. Oracles are written from first principles and do not call
// the library routine they check.

#include "wearcap/bending.hpp"
#include "wearcap/body.hpp"
#include "wearcap/geometry.hpp"
#include "wearcap/object.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

namespace wearcap::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  bool coin() { return integer(0, 1) == 1; }
  Vec2 vec2(double scale) { return {uniform(-scale, scale), uniform(-scale, scale)}; }
  Vec3 vec3(double scale) { return {uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)}; }
  Mat3 rotation(double max_angle = std::numbers::pi) {
    Vec3 axis(normal(), normal(), normal());
    axis.normalize();
    return axis_angle_to_matrix(axis * uniform(0.0, max_angle));
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

/// Strictly increasing times with jittered spacing.
inline std::vector<double> random_times(Rng& rng, std::size_t n, double dt = 1.0 / 30.0) {
  std::vector<double> t(n);
  double now = rng.uniform(-2.0, 2.0);
  for (auto& v : t) {
    v = now;
    now += dt * rng.uniform(0.5, 1.5);
  }
  return t;
}

/// Smooth-ish random walk with varying heading and step length.
inline Trajectory2 random_trajectory(Rng& rng, std::size_t n) {
  Trajectory2 tr;
  tr.times = random_times(rng, n);
  double heading = rng.uniform(-std::numbers::pi, std::numbers::pi);
  Vec2 p = rng.vec2(3.0);
  for (std::size_t k = 0; k < n; ++k) {
    tr.xy.push_back(p);
    tr.z.push_back(rng.uniform(-1.0, 2.0));
    heading += rng.normal(0.3);
    p += rng.uniform(0.01, 0.1) * Vec2(std::cos(heading), std::sin(heading));
  }
  return tr;
}

inline RigidTransform3 apply_planar(const RigidTransform3& m, const RigidTransform3& x) { return m * x; }

inline Trajectory2 transform_planar(const Trajectory2& tr, double angle, const Vec2& shift) {
  Trajectory2 out = tr;
  const Eigen::Matrix2d r = Eigen::Rotation2Dd(angle).toRotationMatrix();
  for (auto& p : out.xy) p = r * p + shift;
  return out;
}

/// Segment headings with degenerate segments taking the previous heading
/// (leading degenerate segments take the first valid one), unwrapped.
inline std::vector<double> oracle_headings(const Trajectory2& tr, double eps) {
  const std::size_t m = tr.size() - 1;
  std::vector<std::optional<double>> raw(m);
  for (std::size_t k = 0; k < m; ++k) {
    const Vec2 d = tr.xy[k + 1] - tr.xy[k];
    if (d.norm() >= eps) raw[k] = std::arg(std::complex<double>(d.x(), d.y()));
  }
  std::vector<double> out(m, 0.0);
  std::optional<double> prev;
  for (std::size_t k = 0; k < m; ++k) {
    if (raw[k]) {
      double a = *raw[k];
      if (prev) a = *prev + std::remainder(a - *prev, 2.0 * std::numbers::pi);
      out[k] = a;
      prev = a;
    } else if (prev) {
      out[k] = *prev;
    }
  }
  // Back-fill a degenerate prefix with the first valid heading.
  std::size_t first = 0;
  while (first < m && !raw[first]) ++first;
  for (std::size_t k = 0; k < first && first < m; ++k) out[k] = out[first];
  return out;
}

/// sum_k (delta_{k+1} - delta_k)^2 * 2 / (t_{k+2} - t_k), delta = heading difference.
inline double oracle_bending_energy(const Trajectory2& cand, const Trajectory2& ref, double eps = 1e-9) {
  const auto a = oracle_headings(cand, eps);
  const auto b = oracle_headings(ref, eps);
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < a.size(); ++k) {
    const double d = (a[k + 1] - b[k + 1]) - (a[k] - b[k]);
    e += d * d * 2.0 / (cand.times[k + 2] - cand.times[k]);
  }
  return e;
}

/// Central-difference gradient of f at x.
inline std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f(x);
    x[i] = keep - h;
    const double fm = f(x);
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

/// DBSCAN labels from the connected components of core points. Clusters are
/// numbered by their lowest core index; a border point joins the lowest
/// numbered cluster among its core neighbours.
inline std::vector<int> oracle_dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  auto near = [&](std::size_t i, std::size_t j) { return (pts[i] - pts[j]).norm() <= eps; };
  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) count += near(i, j) ? 1 : 0;
    core[i] = count >= min_pts;
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    return parent[i] == i ? i : parent[i] = find(parent[i]);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (core[i] && core[j] && near(i, j)) parent[find(i)] = find(j);
    }
  }
  std::vector<int> label(n, -1);
  std::map<std::size_t, int> id_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    const auto root = find(i);
    if (!id_of_root.count(root)) {
      const int id = static_cast<int>(id_of_root.size());
      id_of_root[root] = id;
    }
    label[i] = id_of_root[root];
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (core[j] && near(i, j) && (label[i] < 0 || label[j] < label[i])) label[i] = label[j];
    }
  }
  return label;
}

/// Two-hand drag computed directly against the first frame.
inline RigidTransform3 oracle_drag_two(const Vec2& l0, const Vec2& r0, const Vec2& l, const Vec2& r,
                                       const RigidTransform3& start) {
  const Vec2 v0 = r0 - l0;
  const Vec2 v = r - l;
  const double turn = std::arg(std::complex<double>(v.x(), v.y()) *
                               std::conj(std::complex<double>(v0.x(), v0.y())));
  RigidTransform3 out;
  out.rotation = rot_z(turn) * start.rotation;
  const Vec2 rel = Eigen::Rotation2Dd(turn).toRotationMatrix() * (start.translation.head<2>() - r0);
  out.translation = Vec3(r.x() + rel.x(), r.y() + rel.y(), start.translation.z());
  return out;
}

/// One-hand drag: translate with the hand and turn about it by `yaw`.
inline RigidTransform3 oracle_drag_one(const Vec2& h0, const Vec2& h, double yaw,
                                       const RigidTransform3& start) {
  RigidTransform3 out;
  out.rotation = rot_z(yaw) * start.rotation;
  const Vec2 rel = Eigen::Rotation2Dd(yaw).toRotationMatrix() * (start.translation.head<2>() - h0);
  out.translation = Vec3(h.x() + rel.x(), h.y() + rel.y(), start.translation.z());
  return out;
}

/// Hinge angle by accumulating complex ratios of successive hand vectors.
inline std::vector<double> oracle_hinge(const Trajectory2& hand, const Vec2& j, double start) {
  std::vector<double> out{start};
  for (std::size_t k = 1; k < hand.size(); ++k) {
    const Vec2 a = hand.xy[k - 1] - j;
    const Vec2 b = hand.xy[k] - j;
    out.push_back(out.back() + std::arg(std::complex<double>(b.x(), b.y()) *
                                        std::conj(std::complex<double>(a.x(), a.y()))));
  }
  return out;
}

inline double pose_distance(const RigidTransform3& a, const RigidTransform3& b) {
  return std::max((a.translation - b.translation).norm(), (a.rotation - b.rotation).norm());
}

/// Random body pose with moderate joint angles.
inline BodyParams random_pose(Rng& rng, const BodyModel& body, double scale = 0.6) {
  BodyParams p = BodyParams::zero(body);
  for (Eigen::Index i = 0; i < p.theta.size(); ++i) p.theta[i] = rng.uniform(-scale, scale);
  p.gamma = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.8, 1.0));
  return p;
}

}  // namespace wearcap::testing
