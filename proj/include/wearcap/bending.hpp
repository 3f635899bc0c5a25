#pragma once

#include "wearcap/body.hpp"
#include "wearcap/geometry.hpp"
#include "wearcap/optimize.hpp"

#include <span>
#include <vector>

namespace wearcap {

/// Planar curve l(t) = (x(t), y(t)) with a carried-through z channel.
struct Trajectory2 {
  std::vector<double> times;
  std::vector<Vec2> xy;
  std::vector<double> z;

  std::size_t size() const { return times.size(); }
  /// Throws std::invalid_argument unless times strictly increase, channels
  /// have equal length >= 3 and every value is finite.
  void validate() const;
  Vec3 point(std::size_t k) const { return {xy[k].x(), xy[k].y(), z[k]}; }

  static Trajectory2 from_points(std::span<const double> times, std::span<const Vec3> points);
  /// Samples [first, last] inclusive.
  Trajectory2 slice(std::size_t first, std::size_t last) const;
};

struct ControlPoint2 {
  double time = 0.0;
  Vec2 target = Vec2::Zero();
};

enum class EnergyMode { squared, absolute };
enum class OptimizerKind { gauss_newton, sobolev, adam };

struct BendOptions {
  double rigidness = 0.01;  // lambda
  int iterations = 300;
  double step_size = 0.05;
  double eps_angle = 1e-9;  // segments shorter than this reuse the previous tangent
  EnergyMode energy = EnergyMode::squared;
  OptimizerKind optimizer = OptimizerKind::gauss_newton;  // squared energy only; else sobolev
  double smoothing = 8.0;   // H1 gradient correlation length in samples (sobolev only)
};

/// Unwrapped tangent angle of every segment [t_k, t_k+1] (n - 1 values).
std::vector<double> tangent_angles(const Trajectory2& traj, double eps_angle = 1e-9);

/// Discretised integral of the squared (or absolute) difference between the
/// tangent-angle rates of `candidate` and `reference`.
double bending_energy_tr(const Trajectory2& candidate, const Trajectory2& reference,
                         EnergyMode mode = EnergyMode::squared, double eps_angle = 1e-9);

/// Index of the sample nearest to `time`; throws if outside the span.
std::size_t snap_to_sample(std::span<const double> times, double time);

/// sum_i ||l(t_i) - p_i|| + lambda * E_tr(l, reference) over the xy samples of l.
class TrajectoryObjective {
 public:
  TrajectoryObjective(Trajectory2 reference, std::span<const ControlPoint2> controls,
                      const BendOptions& options);

  /// `xy` holds 2 values per sample; `grad` may be empty.
  double evaluate(std::span<const double> xy, std::span<double> grad) const;
  double data_term(std::span<const double> xy) const;
  double energy_term(std::span<const double> xy) const;

  const Trajectory2& reference() const { return reference_; }
  const std::vector<std::size_t>& control_samples() const { return samples_; }

  /// Damped Gauss-Newton on the squared energy with reweighted least squares
  /// for the distance term. Accepts only decreasing steps.
  OptimizeResult minimize_gauss_newton(std::vector<double> xy, int iterations) const;

 private:
  Trajectory2 reference_;
  std::vector<std::size_t> samples_;
  std::vector<Vec2> targets_;
  std::vector<double> reference_angles_;
  std::vector<double> inv_tau_;
  BendOptions options_;
};

struct BendResult {
  Trajectory2 trajectory;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
};

/// Minimally bends the xy channel of `traj` toward the control points; z is
/// copied verbatim. An empty control set returns the input unchanged.
BendResult bend_trajectory(const Trajectory2& traj, std::span<const ControlPoint2> controls,
                           const BendOptions& options);

/// sum_k ||(d theta_hat_k - d theta_k) / dt_k|| dt_k over consecutive frames.
double bending_energy_pose(std::span<const Eigen::VectorXd> candidate,
                           std::span<const Eigen::VectorXd> reference);

struct PoseControlPoint {
  double time = 0.0;
  int vertex = 0;  // joint index
  Vec2 target_xy = Vec2::Zero();
};

struct PoseBendOptions {
  double rigidness = 0.1;
  int iterations = 200;
  double rotation_step = 2e-3;     // radians per iteration (adam only)
  double translation_step = 2e-3;  // meters per iteration (adam only)
  double eps_angle = 1e-9;
  OptimizerKind optimizer = OptimizerKind::gauss_newton;  // gauss_newton or adam
};

/// Free variables: masked joint rotations and root xy of frames within the
/// control span +- window. Laid out frame-major: [theta(mask)..., gamma_x, gamma_y].
class PoseObjective {
 public:
  PoseObjective(const BodyModel& body, std::span<const double> times,
                std::span<const Eigen::VectorXd> poses, const Trajectory2& trans,
                std::span<const PoseControlPoint> controls, std::span<const int> joint_mask,
                std::size_t window, const PoseBendOptions& options);

  double evaluate(std::span<const double> x, std::span<double> grad) const;
  std::vector<double> initial_state() const;
  std::size_t first_free() const { return first_; }
  std::size_t last_free() const { return last_; }
  std::size_t vars_per_frame() const { return mask_.size() * 3 + 2; }
  /// Step multiplier per variable (rotation vs translation).
  std::vector<double> step_scale() const;
  /// Damped Gauss-Newton with reweighted distance and pose-energy terms.
  OptimizeResult minimize_gauss_newton(std::vector<double> x0, int iterations) const;

  /// Writes the free variables back into copies of the inputs.
  void unpack(std::span<const double> x, std::vector<Eigen::VectorXd>& poses,
              Trajectory2& trans) const;

 private:
  const BodyModel& body_;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> poses_;
  Trajectory2 trans_;
  std::vector<PoseControlPoint> controls_;
  std::vector<std::size_t> control_frames_;
  std::vector<int> mask_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  // Slice of the translation trajectory whose bending energy can change.
  std::size_t energy_first_ = 0;
  std::size_t energy_last_ = 0;
  std::vector<double> reference_angles_;
  std::vector<double> inv_tau_;
  PoseBendOptions options_;
};

struct PoseBendResult {
  BodySequence body;
  Trajectory2 trans;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

/// Deforms pose parameters and root translation so that control vertices reach
/// their xy targets while bending the pose and translation trajectories as
/// little as possible. Throws std::invalid_argument("unreachable control") if
/// a control vertex is not driven by a masked joint.
PoseBendResult deform_pose_trajectory(const BodySequence& poses, const Trajectory2& trans,
                                      std::span<const PoseControlPoint> controls,
                                      const BodyModel& body, const PoseBendOptions& options,
                                      std::span<const int> joint_mask, std::size_t window);

}  // namespace wearcap
