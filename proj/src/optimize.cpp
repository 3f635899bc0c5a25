#include "wearcap/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wearcap {

namespace {

// Solves the symmetric tridiagonal system (I + mu * D^T D) s = g for each of
// `dims` interleaved columns (Thomas algorithm).
class H1Smoother {
 public:
  H1Smoother(std::size_t n, double mu) : n_(n), mu_(mu), c_(n), inv_pivot_(n) {
    if (n == 0) return;
    auto diag = [&](std::size_t k) {
      if (n == 1) return 1.0;
      return 1.0 + mu * ((k == 0 || k + 1 == n) ? 1.0 : 2.0);
    };
    const double off = -mu;
    double pivot = diag(0);
    inv_pivot_[0] = 1.0 / pivot;
    c_[0] = off * inv_pivot_[0];
    for (std::size_t k = 1; k < n; ++k) {
      pivot = diag(k) - off * c_[k - 1];
      inv_pivot_[k] = 1.0 / pivot;
      c_[k] = off * inv_pivot_[k];
    }
  }

  void solve(std::span<const double> g, std::span<double> s, std::size_t dims) const {
    const double off = -mu_;
    for (std::size_t d = 0; d < dims; ++d) {
      double prev = 0.0;
      for (std::size_t k = 0; k < n_; ++k) {
        const double rhs = g[k * dims + d] - (k > 0 ? off * prev : 0.0);
        prev = rhs * inv_pivot_[k];
        s[k * dims + d] = prev;
      }
      for (std::size_t k = n_ - 1; k-- > 0;) {
        s[k * dims + d] -= c_[k] * s[(k + 1) * dims + d];
      }
    }
  }

 private:
  std::size_t n_;
  double mu_;
  std::vector<double> c_;
  std::vector<double> inv_pivot_;
};

}  // namespace

OptimizeResult minimize_adam(const ObjectiveFn& objective, std::vector<double> x0,
                             const AdamSettings& settings, std::span<const double> step_scale) {
  const std::size_t n = x0.size();
  if (!step_scale.empty() && step_scale.size() != n) {
    throw std::invalid_argument("step_scale size mismatch");
  }
  OptimizeResult out;
  std::vector<double> grad(n);
  std::vector<double> m(n, 0.0);
  std::vector<double> v(n, 0.0);
  std::vector<double> x = x0;

  double f = objective(x, grad);
  out.initial_objective = f;
  out.final_objective = f;
  out.x = x;
  if (n == 0) return out;

  double b1t = 1.0;
  double b2t = 1.0;
  const int iters = std::max(0, settings.iterations);
  for (int it = 0; it < iters; ++it) {
    const double progress = iters > 1 ? static_cast<double>(it) / (iters - 1) : 0.0;
    const double lr =
        settings.step_size * (1.0 - (1.0 - settings.final_step_fraction) * progress);
    b1t *= settings.beta1;
    b2t *= settings.beta2;
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = settings.beta1 * m[k] + (1.0 - settings.beta1) * grad[k];
      v[k] = settings.beta2 * v[k] + (1.0 - settings.beta2) * grad[k] * grad[k];
      const double mhat = m[k] / (1.0 - b1t);
      const double vhat = v[k] / (1.0 - b2t);
      const double scale = step_scale.empty() ? 1.0 : step_scale[k];
      x[k] -= lr * scale * mhat / (std::sqrt(vhat) + 1e-12);
    }
    f = objective(x, grad);
    out.iterations = it + 1;
    if (std::isfinite(f) && f < out.final_objective) {
      out.final_objective = f;
      out.x = x;
    }
  }
  return out;
}

OptimizeResult minimize_sobolev(const ObjectiveFn& objective, std::vector<double> x0,
                                std::size_t dims, const SobolevSettings& settings) {
  if (dims == 0 || x0.size() % dims != 0) throw std::invalid_argument("bad sample layout");
  const std::size_t n = x0.size();
  const std::size_t samples = n / dims;
  const H1Smoother smoother(samples, settings.smoothing * settings.smoothing);

  OptimizeResult out;
  std::vector<double> x = std::move(x0);
  std::vector<double> grad(n);
  std::vector<double> dir(n);
  std::vector<double> trial(n);

  double f = objective(x, grad);
  out.initial_objective = f;
  double step = settings.step_size;
  for (int it = 0; it < settings.iterations; ++it) {
    smoother.solve(grad, dir, dims);
    double slope = 0.0;
    for (std::size_t k = 0; k < n; ++k) slope += grad[k] * dir[k];
    if (!(slope > 1e-30)) break;

    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] - step * dir[k];
      const double ft = objective(trial, {});
      if (std::isfinite(ft) && ft <= f - 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    out.iterations = it + 1;
    if (!accepted) break;
    x.swap(trial);
    f = objective(x, grad);
    step = std::min(step * 1.5, settings.step_size * 1e3);
  }
  out.final_objective = f;
  out.x = std::move(x);
  return out;
}

}  // namespace wearcap
