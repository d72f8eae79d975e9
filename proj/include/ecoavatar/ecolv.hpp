#pragma once

// Lotka-Volterra predator-prey laboratory: RK4 simulation, linear
// least-squares parameter recovery from sampled populations, forward
// prediction with fitted parameters.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ecoavatar/numlin.hpp"

namespace ecoavatar::ecolv {

struct LVParams {
  double alpha = 0.0;  ///< prey growth rate without predators (1/time)
  double beta = 0.0;   ///< predator attack rate (1/(predator*time))
  double gamma = 0.0;  ///< predator death rate without prey (1/time)
  double delta = 0.0;  ///< prey-induced predator birth rate (1/(prey*time))
  bool clamped = false;

  [[nodiscard]] bool finite() const noexcept {
    return std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) &&
           std::isfinite(delta);
  }
  [[nodiscard]] std::array<double, 4> as_array() const { return {alpha, beta, gamma, delta}; }
};

struct PopulationTrajectory {
  std::vector<double> times;
  std::vector<double> prey;
  std::vector<double> predators;
  double dt = 0.0;

  [[nodiscard]] std::size_t size() const noexcept { return times.size(); }
};

/// Right-hand side of the predator-prey system at (r, f).
inline std::array<double, 2> lv_derivative(const LVParams& p, double r, double f) noexcept {
  return {p.alpha * r - p.beta * r * f, p.delta * r * f - p.gamma * f};
}

/// Conserved quantity H = δr − γ ln r + βf − α ln f (r, f > 0).
inline double first_integral(const LVParams& p, double r, double f) {
  return p.delta * r - p.gamma * std::log(r) + p.beta * f - p.alpha * std::log(f);
}

/// Classical fixed-step RK4 integration; returns steps + 1 samples.
inline PopulationTrajectory simulate_lv(const LVParams& p, double r0, double f0, double dt,
                                        std::size_t steps, double t0 = 0.0) {
  require(p.finite(), ErrorCode::non_finite, "simulate_lv: non-finite parameters");
  require(std::isfinite(r0) && std::isfinite(f0), ErrorCode::non_finite,
          "simulate_lv: non-finite initial populations");
  require(r0 >= 0.0 && f0 >= 0.0, ErrorCode::invalid_argument,
          "simulate_lv: initial populations must be nonnegative");
  require(std::isfinite(dt) && dt > 0.0, ErrorCode::invalid_argument,
          "simulate_lv: dt must be positive");

  PopulationTrajectory traj;
  traj.dt = dt;
  traj.times.reserve(steps + 1);
  traj.prey.reserve(steps + 1);
  traj.predators.reserve(steps + 1);

  double r = r0;
  double f = f0;
  traj.times.push_back(t0);
  traj.prey.push_back(r);
  traj.predators.push_back(f);
  for (std::size_t i = 1; i <= steps; ++i) {
    const auto k1 = lv_derivative(p, r, f);
    const auto k2 = lv_derivative(p, r + 0.5 * dt * k1[0], f + 0.5 * dt * k1[1]);
    const auto k3 = lv_derivative(p, r + 0.5 * dt * k2[0], f + 0.5 * dt * k2[1]);
    const auto k4 = lv_derivative(p, r + dt * k3[0], f + dt * k3[1]);
    r += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
    f += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    traj.times.push_back(t0 + static_cast<double>(i) * dt);
    traj.prey.push_back(r);
    traj.predators.push_back(f);
  }
  return traj;
}

/// Forward prediction from a (fitted) parameter set; same integrator as simulate_lv.
inline PopulationTrajectory predict_lv(const LVParams& p, double r, double f, double dt,
                                       std::size_t steps, double t0 = 0.0) {
  return simulate_lv(p, r, f, dt, steps, t0);
}

struct FitOptions {
  bool clamp_nonneg = false;
  numlin::InverseConfig inverse = numlin::InverseConfig::exact();
  /// Stacked G with sigma_min / sigma_max below this is reported as degenerate.
  double degeneracy_tolerance = 1e-10;
};

/// Least-squares solve of G p = d where each sample contributes the rows
///   [ r  -rf   0   0 ] p = dr/dt
///   [ 0    0  -f  rf ] p = df/dt
/// for p = (α, β, γ, δ).
inline LVParams fit_lv_from_derivatives(std::span<const double> prey,
                                        std::span<const double> predators,
                                        std::span<const double> prey_rate,
                                        std::span<const double> predator_rate,
                                        const FitOptions& opts = {}) {
  const std::size_t n = prey_rate.size();
  require(predator_rate.size() == n && prey.size() >= n && predators.size() >= n,
          ErrorCode::dimension_mismatch, "fit_lv: population and rate lengths disagree");
  require(n >= 2, ErrorCode::invalid_argument, "fit_lv: need at least 2 rate samples");

  Matrix g = Matrix::Zero(static_cast<Eigen::Index>(2 * n), 4);
  Vector d(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    const double r = prey[i];
    const double f = predators[i];
    const auto row = static_cast<Eigen::Index>(2 * i);
    g(row, 0) = r;
    g(row, 1) = -r * f;
    g(row + 1, 2) = -f;
    g(row + 1, 3) = r * f;
    d(row) = prey_rate[i];
    d(row + 1) = predator_rate[i];
  }
  require(g.allFinite() && d.allFinite(), ErrorCode::non_finite,
          "fit_lv: non-finite populations or rates");

  const Vector sigma = Eigen::JacobiSVD<Matrix>(g).singularValues();
  if (!(sigma(0) > 0.0) || sigma(3) <= opts.degeneracy_tolerance * sigma(0)) {
    fail(ErrorCode::degenerate_fit,
         "fit_lv: stacked system is rank deficient (trajectory carries no dynamics)");
  }

  const Vector p = numlin::pseudo_inverse(g, opts.inverse) * d;
  LVParams out{p(0), p(1), p(2), p(3), false};
  if (opts.clamp_nonneg) {
    out.alpha = std::max(out.alpha, 0.0);
    out.beta = std::max(out.beta, 0.0);
    out.gamma = std::max(out.gamma, 0.0);
    out.delta = std::max(out.delta, 0.0);
    out.clamped = true;
  }
  return out;
}

/// Recovers (α, β, γ, δ) from a sampled trajectory using forward-difference
/// rates evaluated at the left sample of each consecutive pair.
inline LVParams fit_lv(const PopulationTrajectory& traj, const FitOptions& opts = {}) {
  require(traj.size() >= 3, ErrorCode::invalid_argument,
          "fit_lv: trajectory needs at least 3 samples");
  require(traj.prey.size() == traj.size() && traj.predators.size() == traj.size(),
          ErrorCode::dimension_mismatch, "fit_lv: trajectory columns have unequal lengths");
  const auto dr = numlin::finite_difference(traj.prey, traj.dt);
  const auto df = numlin::finite_difference(traj.predators, traj.dt);
  return fit_lv_from_derivatives(traj.prey, traj.predators, dr, df, opts);
}

/// Keeps every `stride`-th sample (the first sample is always kept).
inline PopulationTrajectory subsample(const PopulationTrajectory& traj, std::size_t stride) {
  require(stride >= 1, ErrorCode::invalid_argument, "subsample stride must be >= 1");
  PopulationTrajectory out;
  out.dt = traj.dt * static_cast<double>(stride);
  for (std::size_t i = 0; i < traj.size(); i += stride) {
    out.times.push_back(traj.times[i]);
    out.prey.push_back(traj.prey[i]);
    out.predators.push_back(traj.predators[i]);
  }
  return out;
}

}  // namespace ecoavatar::ecolv
