#pragma once

#include <functional>
#include <span>
#include <vector>

namespace wearcap {

/// Objective callback: returns f(x) and, when `grad` is non-empty, writes df/dx into it.
using ObjectiveFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct OptimizeResult {
  std::vector<double> x;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
};

struct AdamSettings {
  int iterations = 500;
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Step size decays linearly to step_size * final_step_fraction.
  double final_step_fraction = 0.05;
};

/// Adam with a per-parameter step multiplier. Returns the best iterate seen,
/// so the final objective never exceeds the initial one.
OptimizeResult minimize_adam(const ObjectiveFn& objective, std::vector<double> x0,
                             const AdamSettings& settings,
                             std::span<const double> step_scale = {});

struct SobolevSettings {
  int iterations = 500;
  double step_size = 0.05;
  /// Correlation length (in samples) of the H1 gradient smoothing.
  double smoothing = 10.0;
};

/// Gradient descent in the H1 metric along a sampled curve: the raw gradient
/// is smoothed by solving (I + L^2 D^T D) s = g with D the first difference
/// operator, then an Armijo backtracking step is taken along -s.
/// `x0` is sample-major with `dims` values per sample.
OptimizeResult minimize_sobolev(const ObjectiveFn& objective, std::vector<double> x0,
                                std::size_t dims, const SobolevSettings& settings);

}  // namespace wearcap
