#include "wearcap/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace wearcap {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return k;
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Two-point model: rotation from the pair direction, translation through the midpoint.
RigidTransform2 fit_pair(const Vec2& s0, const Vec2& s1, const Vec2& d0, const Vec2& d1) {
  const Vec2 ds = s1 - s0;
  const Vec2 dd = d1 - d0;
  const double angle = std::atan2(cross2(ds, dd), ds.dot(dd));
  RigidTransform2 model(angle, Vec2::Zero());
  model.translation = 0.5 * (d0 + d1) - model.rotation() * (0.5 * (s0 + s1));
  return model;
}

std::vector<std::size_t> collect_inliers(const RigidTransform2& model, std::span<const Vec2> src,
                                         std::span<const Vec2> dst, double threshold) {
  std::vector<std::size_t> inliers;
  const Eigen::Matrix2d r = model.rotation();
  for (std::size_t k = 0; k < src.size(); ++k) {
    if ((r * src[k] + model.translation - dst[k]).norm() < threshold) inliers.push_back(k);
  }
  return inliers;
}

}  // namespace

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Mat3 axis_angle_to_matrix(const Vec3& axis_angle) {
  const double theta = axis_angle.norm();
  if (theta < 1e-8) {
    const Mat3 k = skew(axis_angle);
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  return Eigen::AngleAxisd(theta, axis_angle / theta).toRotationMatrix();
}

Vec3 matrix_to_axis_angle(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 k = skew(phi);
  if (theta < 1e-5) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / t2) * k +
         ((theta - std::sin(theta)) / (t2 * theta)) * k * k;
}

double yaw_of(const Mat3& rotation) { return std::atan2(rotation(1, 0), rotation(0, 0)); }

double rotation_distance(const Mat3& a, const Mat3& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle();
}

RigidTransform3 RigidTransform3::from_yaw(double yaw, const Vec3& translation) {
  return {rot_z(yaw), translation};
}

RigidTransform3 RigidTransform3::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

Eigen::Matrix4d RigidTransform3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

double RigidTransform3::orthonormality_error() const {
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation.determinant() - 1.0));
}

RigidTransform3 compose(const RigidTransform3& a, const RigidTransform3& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Vec2 RigidTransform2::apply(const Vec2& p) const { return rotation() * p + translation; }

Eigen::Matrix2d RigidTransform2::rotation() const {
  return Eigen::Rotation2Dd(angle).toRotationMatrix();
}

RigidTransform3 RigidTransform2::lift(double z_translation) const {
  return {rot_z(angle), Vec3(translation.x(), translation.y(), z_translation)};
}

Mat3 chordal_mean_rotation(std::span<const Mat3> rotations) {
  if (rotations.empty()) throw std::invalid_argument("chordal mean of an empty rotation set");
  Mat3 mean = Mat3::Zero();
  for (const auto& r : rotations) mean += r;
  mean /= static_cast<double>(rotations.size());

  const Eigen::JacobiSVD<Mat3> svd(mean, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  const Vec3 s = svd.singularValues();
  const double d = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  // The projection is unique iff s1 + d * s2 > 0 (singular values in descending order).
  if (s(1) + d * s(2) < 1e-9) throw std::domain_error("degenerate rotation set");
  return u * Eigen::Vector3d(1.0, 1.0, d).asDiagonal() * v.transpose();
}

RigidTransform2 procrustes_2d(std::span<const Vec2> source, std::span<const Vec2> target) {
  if (source.size() != target.size() || source.empty()) {
    throw std::invalid_argument("procrustes_2d needs equally sized, non-empty point sets");
  }
  Vec2 cs = Vec2::Zero();
  Vec2 ct = Vec2::Zero();
  for (std::size_t k = 0; k < source.size(); ++k) {
    cs += source[k];
    ct += target[k];
  }
  cs /= static_cast<double>(source.size());
  ct /= static_cast<double>(source.size());
  double sin_sum = 0.0;
  double cos_sum = 0.0;
  for (std::size_t k = 0; k < source.size(); ++k) {
    const Vec2 a = source[k] - cs;
    const Vec2 b = target[k] - ct;
    sin_sum += cross2(a, b);
    cos_sum += a.dot(b);
  }
  RigidTransform2 out(std::atan2(sin_sum, cos_sum), Vec2::Zero());
  out.translation = ct - out.rotation() * cs;
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> match_by_time(
    std::span<const TimedPoint3> source, std::span<const TimedPoint3> target, double max_gap,
    double source_time_shift) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (source.empty() || target.empty()) return pairs;
  // Targets are assumed sorted by time; for each target take the nearest source.
  std::size_t cursor = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const double t = target[j].time;
    while (cursor + 1 < source.size() &&
           std::abs(source[cursor + 1].time + source_time_shift - t) <=
               std::abs(source[cursor].time + source_time_shift - t)) {
      ++cursor;
    }
    if (std::abs(source[cursor].time + source_time_shift - t) <= max_gap) {
      pairs.emplace_back(cursor, j);
    }
  }
  return pairs;
}

RansacResult ransac_align_2d(std::span<const TimedPoint3> source,
                             std::span<const TimedPoint3> target, const RansacOptions& options,
                             double source_time_shift) {
  const auto pairs = match_by_time(source, target, options.max_time_gap, source_time_shift);
  if (pairs.size() < 2) {
    throw std::invalid_argument("ransac_align_2d needs at least two temporally matched pairs");
  }
  std::vector<Vec2> src;
  std::vector<Vec2> dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    src.push_back(source[i].position.head<2>());
    dst.push_back(target[j].position.head<2>());
  }

  double extent = 0.0;
  for (const auto& p : src) extent = std::max(extent, (p - src.front()).norm());

  RansacResult result;
  result.matched_pairs = pairs.size();
  std::vector<std::size_t> inliers;

  if (extent < 1e-9) {
    // All source samples coincide: rotation is unobservable.
    result.translation_only = true;
    auto translation_fit = [&](std::span<const std::size_t> idx) {
      Vec2 t = Vec2::Zero();
      for (auto k : idx) t += dst[k] - src[k];
      return RigidTransform2(0.0, t / static_cast<double>(idx.size()));
    };
    std::vector<std::size_t> all(src.size());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    // Each pair proposes a translation; keep the one with the widest support.
    std::size_t best = 0;
    for (std::size_t k = 0; k < src.size(); ++k) {
      const RigidTransform2 candidate(0.0, dst[k] - src[k]);
      auto support = collect_inliers(candidate, src, dst, options.threshold);
      if (support.size() > best) {
        best = support.size();
        inliers = std::move(support);
      }
    }
    if (inliers.empty()) inliers = all;
    result.transform = translation_fit(inliers);
    inliers = collect_inliers(result.transform, src, dst, options.threshold);
    if (inliers.empty()) inliers = all;
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
    RigidTransform2 best_model;
    std::size_t best_count = 0;
    bool found = false;
    for (int it = 0; it < options.iterations; ++it) {
      const std::size_t a = pick(rng);
      const std::size_t b = pick(rng);
      if (a == b || (src[a] - src[b]).norm() < 1e-9) continue;
      const RigidTransform2 model = fit_pair(src[a], src[b], dst[a], dst[b]);
      const std::size_t count = collect_inliers(model, src, dst, options.threshold).size();
      if (!found || count > best_count) {
        best_model = model;
        best_count = count;
        found = true;
      }
    }
    if (!found) best_model = procrustes_2d(src, dst);

    RigidTransform2 model = best_model;
    inliers = collect_inliers(model, src, dst, options.threshold);
    // Refit on the consensus set until it stops changing.
    for (int round = 0; round < 10 && inliers.size() >= 2; ++round) {
      std::vector<Vec2> s_in;
      std::vector<Vec2> d_in;
      for (auto k : inliers) {
        s_in.push_back(src[k]);
        d_in.push_back(dst[k]);
      }
      const RigidTransform2 refined = procrustes_2d(s_in, d_in);
      auto next = collect_inliers(refined, src, dst, options.threshold);
      if (next.size() < 2) break;
      model = refined;
      if (next == inliers) break;
      inliers = std::move(next);
    }
    result.transform = model;
  }

  result.inlier_mask.assign(source.size(), false);
  double z_sum = 0.0;
  for (auto k : inliers) {
    const auto [i, j] = pairs[k];
    result.inlier_mask[i] = true;
    z_sum += target[j].position.z() - source[i].position.z();
  }
  result.inlier_count = inliers.size();
  if (!inliers.empty()) {
    const Eigen::Matrix2d r = result.transform.rotation();
    double sq = 0.0;
    for (auto k : inliers) sq += (r * src[k] + result.transform.translation - dst[k]).squaredNorm();
    result.inlier_rms = std::sqrt(sq / static_cast<double>(inliers.size()));
  }
  result.z_offset = inliers.empty() ? 0.0 : z_sum / static_cast<double>(inliers.size());
  return result;
}

TimeOffsetResult grid_search_time_offset(std::span<const TimedPoint3> source,
                                         std::span<const TimedPoint3> target,
                                         std::span<const double> offsets,
                                         const RansacOptions& options) {
  if (offsets.empty()) throw std::invalid_argument("time offset grid is empty");
  TimeOffsetResult best;
  bool have = false;
  std::exception_ptr last_error;
  for (double offset : offsets) {
    RansacResult r;
    try {
      r = ransac_align_2d(source, target, options, offset);
    } catch (const std::invalid_argument&) {
      last_error = std::current_exception();
      continue;
    }
    const bool better = !have || r.inlier_count > best.alignment.inlier_count ||
                        (r.inlier_count == best.alignment.inlier_count &&
                         (r.inlier_rms < best.alignment.inlier_rms ||
                          (r.inlier_rms == best.alignment.inlier_rms && std::abs(offset) < std::abs(best.offset))));
    if (better) {
      best.offset = offset;
      best.alignment = std::move(r);
      have = true;
    }
  }
  if (!have) std::rethrow_exception(last_error);
  return best;
}

std::vector<double> offset_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw std::invalid_argument("invalid offset grid");
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) {
    // Round to 1e-9 so grid points like 0.3 compare cleanly.
    grid.push_back(std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9);
  }
  return grid;
}

}  // namespace wearcap
