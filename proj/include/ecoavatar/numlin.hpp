#pragma once

// Regularized dense linear algebra: pseudo-inverses, ridge solves,
// spectral radius estimation and forward differences.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ecoavatar/error.hpp"

namespace ecoavatar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace numlin {

enum class InverseMode { exact_svd, truncated_svd, tikhonov };

/// Default relative cutoff under which a singular value counts as zero.
inline constexpr double default_svd_cutoff = 1e-12;

/// Selects how a pseudo-inverse is regularized. Only the fields of the
/// active mode are read.
struct InverseConfig {
  InverseMode mode = InverseMode::exact_svd;
  /// truncated: keep at most this many singular values; 0 means use `threshold`.
  std::size_t rank = 0;
  /// truncated: singular values below threshold * sigma_max are dropped.
  double threshold = default_svd_cutoff;
  /// tikhonov: ridge parameter.
  double lambda = 0.0;

  static InverseConfig exact() { return {}; }
  static InverseConfig truncated_rank(std::size_t k) {
    return {InverseMode::truncated_svd, k, default_svd_cutoff, 0.0};
  }
  static InverseConfig truncated_threshold(double relative) {
    return {InverseMode::truncated_svd, 0, relative, 0.0};
  }
  static InverseConfig tikhonov(double ridge) {
    return {InverseMode::tikhonov, 0, default_svd_cutoff, ridge};
  }

  /// Ridge parameter actually in effect (zero outside tikhonov mode).
  [[nodiscard]] double ridge() const noexcept {
    return mode == InverseMode::tikhonov ? lambda : 0.0;
  }

  void validate(Eigen::Index rows, Eigen::Index cols) const {
    switch (mode) {
      case InverseMode::exact_svd:
        break;
      case InverseMode::truncated_svd:
        require(rank <= static_cast<std::size_t>(std::min(rows, cols)),
                ErrorCode::invalid_argument,
                "truncation rank " + std::to_string(rank) + " exceeds min(rows, cols)");
        require(std::isfinite(threshold) && threshold >= 0.0, ErrorCode::invalid_argument,
                "truncation threshold must be a nonnegative real");
        break;
      case InverseMode::tikhonov:
        require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
                "tikhonov lambda must be a nonnegative real");
        break;
    }
  }
};

inline std::string to_string(InverseMode mode) {
  switch (mode) {
    case InverseMode::exact_svd: return "exact-svd";
    case InverseMode::truncated_svd: return "truncated-svd";
    case InverseMode::tikhonov: return "tikhonov";
  }
  return "exact-svd";
}

inline InverseMode inverse_mode_from_string(const std::string& name) {
  if (name == "exact-svd" || name == "exact") return InverseMode::exact_svd;
  if (name == "truncated-svd" || name == "truncated") return InverseMode::truncated_svd;
  if (name == "tikhonov") return InverseMode::tikhonov;
  fail(ErrorCode::invalid_argument, "unknown inverse mode '" + name + "'");
}

struct SpectralEstimate {
  double radius = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

namespace detail {

inline void require_finite(const Matrix& a, const char* what) {
  require(a.allFinite(), ErrorCode::non_finite, std::string(what) + " has non-finite entries");
}

// Filtered inverse of one singular value; zero means "drop this direction".
inline double invert_singular_value(double sigma, double sigma_max, std::size_t index,
                                    const InverseConfig& cfg) {
  const double floor = default_svd_cutoff * sigma_max;
  switch (cfg.mode) {
    case InverseMode::exact_svd:
      return sigma > floor ? 1.0 / sigma : 0.0;
    case InverseMode::truncated_svd:
      if (cfg.rank > 0 && index >= cfg.rank) return 0.0;
      if (sigma <= cfg.threshold * sigma_max || sigma <= floor) return 0.0;
      return 1.0 / sigma;
    case InverseMode::tikhonov:
      // lambda == 0 degrades to the exact Moore-Penrose filter
      if (cfg.lambda == 0.0) return sigma > floor ? 1.0 / sigma : 0.0;
      return sigma / (sigma * sigma + cfg.lambda);
  }
  return 0.0;
}

// Largest-modulus eigenvalue of a real 2x2 matrix.
inline double dominant_modulus_2x2(double a, double b, double c, double d) {
  const double half_trace = 0.5 * (a + d);
  const double det = a * d - b * c;
  const double disc = half_trace * half_trace - det;
  if (disc >= 0.0) {
    const double root = std::sqrt(disc);
    return std::max(std::abs(half_trace + root), std::abs(half_trace - root));
  }
  // complex pair: |lambda|^2 = det
  return std::sqrt(std::max(det, 0.0));
}

}  // namespace detail

/// Moore-Penrose inverse of `a`, optionally regularized by truncation or
/// Tikhonov damping. All three modes share one thin SVD.
inline Matrix pseudo_inverse(const Matrix& a, const InverseConfig& cfg = {}) {
  require(a.size() > 0, ErrorCode::invalid_argument, "pseudo_inverse of an empty matrix");
  detail::require_finite(a, "pseudo_inverse input");
  cfg.validate(a.rows(), a.cols());

  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;

  Vector filtered(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    filtered(i) = detail::invert_singular_value(sigma(i), sigma_max,
                                                static_cast<std::size_t>(i), cfg);
  }
  return svd.matrixV() * filtered.asDiagonal() * svd.matrixU().transpose();
}

/// Ridge solution of U x = D with samples along the rows of `design`:
/// returns [UᵀU + λI]⁻¹ Uᵀ D (the exact least-squares solution when λ = 0).
inline Matrix solve_ridge(const Matrix& design, const Matrix& targets, double lambda) {
  require(design.rows() == targets.rows(), ErrorCode::dimension_mismatch,
          "solve_ridge: design has " + std::to_string(design.rows()) + " samples, targets " +
              std::to_string(targets.rows()));
  detail::require_finite(targets, "solve_ridge targets");
  return pseudo_inverse(design, InverseConfig::tikhonov(lambda)) * targets;
}

/// Estimates max |eigenvalue| of a square matrix by two-column subspace
/// power iteration: the 2x2 Rayleigh-Ritz projection resolves dominant
/// complex-conjugate and ±λ pairs that defeat the single-vector ratio.
inline SpectralEstimate spectral_radius(const Matrix& m, double tol = 1e-10, int max_iter = 10000,
                                        std::uint64_t seed = 0) {
  require(m.rows() == m.cols(), ErrorCode::dimension_mismatch,
          "spectral_radius needs a square matrix, got " + std::to_string(m.rows()) + "x" +
              std::to_string(m.cols()));
  require(m.size() > 0, ErrorCode::invalid_argument, "spectral_radius of an empty matrix");
  require(tol > 0.0, ErrorCode::invalid_argument, "spectral_radius tolerance must be positive");
  detail::require_finite(m, "spectral_radius input");

  const Eigen::Index n = m.rows();
  if (n == 1) return {std::abs(m(0, 0)), 0, true};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix block(n, 2);
  for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = normal(rng);

  auto orthonormalize = [n](const Matrix& z) {
    Eigen::HouseholderQR<Matrix> qr(z);
    return Matrix(qr.householderQ() * Matrix::Identity(n, 2));
  };

  Matrix q = orthonormalize(block);
  SpectralEstimate est;
  double previous = -1.0;
  int stable_steps = 0;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix z = m * q;
    const Matrix ritz = q.transpose() * z;
    est.radius = detail::dominant_modulus_2x2(ritz(0, 0), ritz(0, 1), ritz(1, 0), ritz(1, 1));
    est.iterations_used = it;
    if (previous >= 0.0 && std::abs(est.radius - previous) < tol) {
      if (++stable_steps >= 2) {
        est.converged = true;
        break;
      }
    } else {
      stable_steps = 0;
    }
    previous = est.radius;
    q = orthonormalize(z);
  }
  return est;
}

/// Forward differences (x[i+1] - x[i]) / dt.
inline std::vector<double> finite_difference(std::span<const double> series, double dt) {
  require(series.size() >= 2, ErrorCode::invalid_argument,
          "finite_difference needs at least 2 samples");
  require(std::isfinite(dt) && dt > 0.0, ErrorCode::invalid_argument,
          "finite_difference step must be positive");
  std::vector<double> out(series.size() - 1);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    out[i] = (series[i + 1] - series[i]) / dt;
  }
  return out;
}

}  // namespace numlin
}  // namespace ecoavatar
