#pragma once

// Shallow learners ("bricks") that a stacked predictor is built from.
//
// Every brick maps an input column x to an output column y and is trained
// in closed form from input columns U and target columns V:
//
//   linear          y = V U⁺ x
//   dsn             y = V σ(WU)⁺ σ(Wx)
//   kernel          y = V (K(U,U) + λI)⁻¹ k(U,x)           Gaussian K
//   tensor          y = V [σ(W₁U) ⊗ σ(W₂U)]⁺ [σ(W₁x) ⊗ σ(W₂x)]
//   kernel-tensor   kernel brick with the Hadamard product K₁ ∘ K₂
//
// The kernel forms are the dual (kernel-trick) reading of V G(U)⁺ G(x):
// with K = GᵀG the ridge pseudo-inverse pushes through to the Gram matrix.
// The kernel-tensor brick uses the fact that a tensor product of two
// feature maps induces the elementwise product of their kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "ecoavatar/numlin.hpp"

namespace ecoavatar::bricks {

using numlin::InverseConfig;

// ---------------------------------------------------------------------------
// Activations

/// `identity` is the degenerate activation under which a DSN brick
/// collapses to the linear predictor.
enum class ActivationKind { identity, step, sigmoid, relu };

struct Activation {
  ActivationKind kind = ActivationKind::sigmoid;

  [[nodiscard]] double operator()(double x) const noexcept {
    switch (kind) {
      case ActivationKind::identity: return x;
      case ActivationKind::step: return x >= 0.0 ? 1.0 : 0.0;  // step(0) = 1
      case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
      case ActivationKind::relu: return std::max(0.0, x);
    }
    return x;
  }

  /// Almost-everywhere derivative (step has zero slope, relu'(0) = 0).
  [[nodiscard]] double derivative(double x) const noexcept {
    switch (kind) {
      case ActivationKind::identity: return 1.0;
      case ActivationKind::step: return 0.0;
      case ActivationKind::sigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      }
      case ActivationKind::relu: return x > 0.0 ? 1.0 : 0.0;
    }
    return 1.0;
  }
};

inline std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity: return "identity";
    case ActivationKind::step: return "step";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::relu: return "relu";
  }
  return "identity";
}

inline ActivationKind activation_from_string(const std::string& name) {
  if (name == "identity") return ActivationKind::identity;
  if (name == "step") return ActivationKind::step;
  if (name == "sigmoid") return ActivationKind::sigmoid;
  if (name == "relu") return ActivationKind::relu;
  fail(ErrorCode::invalid_argument, "unknown activation '" + name + "'");
}

inline Vector activate(Activation a, const Vector& x) { return x.unaryExpr(a); }
inline Matrix activate(Activation a, const Matrix& x) { return x.unaryExpr(a); }

// ---------------------------------------------------------------------------
// Gaussian kernel over dataset slices

struct KernelSlice {
  std::size_t begin = 0;
  std::size_t end = 0;
  double rho = 1.0;  ///< may be +inf: the slice then never contributes distance
};

/// Per-dataset length scales. Slices are contiguous, ordered, and must
/// cover [0, dimension) exactly.
struct KernelSpec {
  std::vector<KernelSlice> slices;

  static KernelSpec uniform(std::size_t dimension, double rho = 1.0) {
    return KernelSpec{{KernelSlice{0, dimension, rho}}};
  }

  [[nodiscard]] std::size_t dimension() const noexcept {
    return slices.empty() ? 0 : slices.back().end;
  }

  void validate() const {
    require(!slices.empty(), ErrorCode::invalid_argument, "kernel spec has no slices");
    std::size_t expected = 0;
    for (const auto& s : slices) {
      require(s.begin == expected && s.end > s.begin, ErrorCode::invalid_argument,
              "kernel spec slices must partition the input contiguously");
      require(!std::isnan(s.rho) && s.rho > 0.0, ErrorCode::invalid_argument,
              "kernel scale factors must be positive");
      expected = s.end;
    }
  }

  /// Per-entry 1/ρ weights.
  [[nodiscard]] Vector inverse_scales() const {
    Vector w(static_cast<Eigen::Index>(dimension()));
    for (const auto& s : slices) {
      for (std::size_t i = s.begin; i < s.end; ++i) w(static_cast<Eigen::Index>(i)) = 1.0 / s.rho;
    }
    return w;
  }
};

/// exp(−Σ_d ‖(x_d − z_d)/ρ_d‖²) over the dataset slices d of `spec`.
inline double gaussian_kernel(const Vector& x, const Vector& z, const KernelSpec& spec) {
  spec.validate();
  require(static_cast<std::size_t>(x.size()) == spec.dimension() && x.size() == z.size(),
          ErrorCode::dimension_mismatch, "gaussian_kernel: input dimensions disagree with spec");
  double dist2 = 0.0;
  for (const auto& s : spec.slices) {
    const auto b = static_cast<Eigen::Index>(s.begin);
    const auto n = static_cast<Eigen::Index>(s.end - s.begin);
    if (std::isinf(s.rho)) continue;
    dist2 += ((x.segment(b, n) - z.segment(b, n)) / s.rho).squaredNorm();
  }
  return std::exp(-dist2);
}

/// Cross-Gram matrix K(i, j) = k(a_i, b_j) over the columns of `a` and `b`.
inline Matrix gram(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  spec.validate();
  require(static_cast<std::size_t>(a.rows()) == spec.dimension() && a.rows() == b.rows(),
          ErrorCode::dimension_mismatch, "gram: input dimensions disagree with spec");
  const Vector w = spec.inverse_scales();
  const Matrix sa = w.asDiagonal() * a;
  const Matrix sb = w.asDiagonal() * b;
  Matrix k(a.cols(), b.cols());
  // explicit differences keep k(x, x) exactly 1
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    k.col(j) = (sa.colwise() - sb.col(j)).colwise().squaredNorm().transpose();
  }
  return k.unaryExpr([](double d2) { return std::exp(-d2); });
}

inline Vector cross_kernel(const Matrix& a, const Vector& x, const KernelSpec& spec) {
  return gram(a, Matrix(x), spec).col(0);
}

// ---------------------------------------------------------------------------
// Brick types

enum class BrickKind { linear, dsn, kernel, tensor, kernel_tensor };

inline std::string to_string(BrickKind kind) {
  switch (kind) {
    case BrickKind::linear: return "linear";
    case BrickKind::dsn: return "dsn";
    case BrickKind::kernel: return "kernel";
    case BrickKind::tensor: return "tensor";
    case BrickKind::kernel_tensor: return "kernel-tensor";
  }
  return "linear";
}

inline BrickKind brick_kind_from_string(const std::string& name) {
  if (name == "linear") return BrickKind::linear;
  if (name == "dsn") return BrickKind::dsn;
  if (name == "kernel") return BrickKind::kernel;
  if (name == "tensor") return BrickKind::tensor;
  if (name == "kernel-tensor" || name == "kt" || name == "dual-kernel") return BrickKind::kernel_tensor;
  fail(ErrorCode::invalid_argument, "unknown brick kind '" + name + "'");
}

struct LinearBrick {
  Matrix map;
};

struct RefinementInfo {
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  ///< Q(W) after each accepted step, starting at W⁰
};

struct DsnBrick {
  Matrix hidden;  ///< W, hidden_size x input_dim
  Matrix output;  ///< V_out, output_dim x hidden_size
  Activation activation;
  RefinementInfo refinement;
};

struct KernelBrick {
  Matrix inputs;  ///< retained training columns U
  Matrix dual;    ///< C, so that y = C k(U, x)
  KernelSpec spec;
  double lambda = 0.0;
};

struct TensorBrick {
  Matrix hidden1;
  Matrix hidden2;
  Matrix output;  ///< output_dim x (h1 * h2)
  Activation activation;
};

struct KernelTensorBrick {
  Matrix inputs;
  Matrix dual;
  KernelSpec spec1;
  KernelSpec spec2;
  double lambda = 0.0;
};

using Brick = std::variant<LinearBrick, DsnBrick, KernelBrick, TensorBrick, KernelTensorBrick>;

namespace detail {

inline void check_training_pair(const Matrix& u, const Matrix& v) {
  require(u.cols() == v.cols(), ErrorCode::dimension_mismatch,
          "brick training: " + std::to_string(u.cols()) + " input columns vs " +
              std::to_string(v.cols()) + " target columns");
  require(u.cols() >= 1 && u.rows() >= 1 && v.rows() >= 1, ErrorCode::invalid_argument,
          "brick training: empty training set");
  require(u.allFinite() && v.allFinite(), ErrorCode::non_finite,
          "brick training: non-finite training data");
}

inline void check_input(Eigen::Index expected, const Vector& x) {
  require(x.size() == expected, ErrorCode::dimension_mismatch,
          "brick input has " + std::to_string(x.size()) + " entries, expected " +
              std::to_string(expected));
}

inline void check_input_columns(Eigen::Index expected, const Matrix& x) {
  require(x.rows() == expected, ErrorCode::dimension_mismatch,
          "brick input has " + std::to_string(x.rows()) + " rows, expected " +
              std::to_string(expected));
}

/// Dual coefficients C = V (K + λI)⁻¹ for a symmetric Gram matrix; falls
/// back to the Moore-Penrose inverse when K + λI is singular.
inline Matrix solve_dual(const Matrix& k, const Matrix& v, double lambda) {
  require(std::isfinite(lambda) && lambda >= 0.0, ErrorCode::invalid_argument,
          "kernel ridge lambda must be nonnegative");
  const Eigen::Index n = k.rows();
  // a Cholesky solve has a much smaller residual than multiplying by an
  // explicit inverse; the SVD path only catches singular Gram matrices
  Eigen::LLT<Matrix> llt(k + lambda * Matrix::Identity(n, n));
  const Vector pivots = llt.matrixLLT().diagonal();
  const bool well_posed = llt.info() == Eigen::Success &&
                          pivots.minCoeff() > 1e-7 * std::sqrt(k.diagonal().maxCoeff() + lambda);
  if (well_posed) {
    Matrix c = llt.solve(v.transpose()).transpose();
    if (c.allFinite()) {
      const Matrix residual = v - c * (k + lambda * Matrix::Identity(n, n));
      c += llt.solve(residual.transpose()).transpose();
      if (c.allFinite()) return c;
    }
  }
  if (lambda > 0.0) return v * numlin::pseudo_inverse(k, InverseConfig::tikhonov(lambda));
  return v * numlin::pseudo_inverse(k, InverseConfig::exact());
}

inline Matrix tensor_features(const Matrix& a, const Matrix& b) {
  // column j holds the row-major flattening of a_j b_jᵀ: index i * h2 + l
  const Eigen::Index h1 = a.rows();
  const Eigen::Index h2 = b.rows();
  Matrix f(h1 * h2, a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < h1; ++i) f.col(j).segment(i * h2, h2) = a(i, j) * b.col(j);
  }
  return f;
}

}  // namespace detail

/// Uniform weights in [−1/√n, 1/√n] with n = cols, drawn row-major from `rng`.
inline Matrix random_weights(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
  return w;
}

// ---------------------------------------------------------------------------
// Linear brick

inline LinearBrick train_linear_brick(const Matrix& u, const Matrix& v,
                                      const InverseConfig& cfg = {}) {
  detail::check_training_pair(u, v);
  return LinearBrick{v * numlin::pseudo_inverse(u, cfg)};
}

inline Vector apply_linear_brick(const LinearBrick& b, const Vector& x) {
  detail::check_input(b.map.cols(), x);
  return b.map * x;
}

// ---------------------------------------------------------------------------
// DSN brick

enum class DsnMode { fixed_random, gradient_refined };

inline std::string to_string(DsnMode mode) {
  return mode == DsnMode::fixed_random ? "fixed-random" : "gradient-refined";
}

inline DsnMode dsn_mode_from_string(const std::string& name) {
  if (name == "fixed-random") return DsnMode::fixed_random;
  if (name == "gradient-refined") return DsnMode::gradient_refined;
  fail(ErrorCode::invalid_argument, "unknown DSN mode '" + name + "'");
}

struct RefineOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-8;
  int max_backtracks = 60;
};

struct DsnOptions {
  std::size_t hidden_size = 32;
  Activation activation{ActivationKind::sigmoid};
  DsnMode mode = DsnMode::fixed_random;
  InverseConfig inverse = InverseConfig::exact();
  std::uint64_t seed = 0;
  RefineOptions refine{};
};

/// Closed-form output weights V_out = V σ(WU)⁺ for a given hidden map W.
inline DsnBrick train_dsn_brick_with_weights(const Matrix& u, const Matrix& v, const Matrix& w,
                                             Activation a, const InverseConfig& cfg = {}) {
  detail::check_training_pair(u, v);
  require(w.cols() == u.rows() && w.rows() >= 1, ErrorCode::dimension_mismatch,
          "DSN hidden weights do not match the input dimension");
  const Matrix h = activate(a, Matrix(w * u));
  return DsnBrick{w, v * numlin::pseudo_inverse(h, cfg), a, {}};
}

/// Q(W) = ‖V_out(W) σ(WU) − V‖² (+ λ‖V_out‖² under Tikhonov), with V_out
/// re-solved in closed form for W.
inline double dsn_objective(const Matrix& u, const Matrix& v, const Matrix& w, Activation a,
                            const InverseConfig& cfg) {
  const Matrix h = activate(a, Matrix(w * u));
  const Matrix out = v * numlin::pseudo_inverse(h, cfg);
  return (out * h - v).squaredNorm() + cfg.ridge() * out.squaredNorm();
}

/// ∇_W Q. Because V_out minimizes Q for fixed W, only the explicit
/// dependence through σ(WU) contributes:
///   ∇_W Q = [2 V_outᵀ (V_out H − V) ⊙ σ'(WU)] Uᵀ.
/// Exact for exact-svd (full-row-rank H) and tikhonov modes.
inline Matrix dsn_gradient(const Matrix& u, const Matrix& v, const Matrix& w, Activation a,
                           const InverseConfig& cfg) {
  const Matrix pre = w * u;
  const Matrix h = activate(a, pre);
  const Matrix out = v * numlin::pseudo_inverse(h, cfg);
  const Matrix d_hidden = 2.0 * out.transpose() * (out * h - v);
  const Matrix d_pre = d_hidden.cwiseProduct(pre.unaryExpr([a](double z) { return a.derivative(z); }));
  return d_pre * u.transpose();
}

/// Gradient descent with Armijo backtracking on Q(W), accepting only
/// improving steps, so the returned W is the best visited.
inline DsnBrick refine_dsn_brick(const Matrix& u, const Matrix& v, Matrix w, Activation a,
                                 const InverseConfig& cfg, const RefineOptions& opts = {}) {
  RefinementInfo info;
  double q = dsn_objective(u, v, w, a, cfg);
  info.objective_trace.push_back(q);
  double step = 1.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Matrix g = dsn_gradient(u, v, w, a, cfg);
    const double g2 = g.squaredNorm();
    if (!(g2 > 0.0) || !std::isfinite(g2)) {
      info.converged = true;
      break;
    }
    bool accepted = false;
    double q_new = q;
    Matrix w_new;
    step *= 2.0;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      w_new = w - step * g;
      q_new = dsn_objective(u, v, w_new, a, cfg);
      if (std::isfinite(q_new) && q_new <= q - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no descent along the gradient at machine precision: stationary
      info.converged = true;
      break;
    }
    const double improvement = (q - q_new) / std::max(q, std::numeric_limits<double>::min());
    w = std::move(w_new);
    q = q_new;
    info.iterations = it + 1;
    info.objective_trace.push_back(q);
    if (improvement < opts.relative_tolerance) {
      info.converged = true;
      break;
    }
  }
  DsnBrick brick = train_dsn_brick_with_weights(u, v, w, a, cfg);
  brick.refinement = std::move(info);
  return brick;
}

inline DsnBrick train_dsn_brick(const Matrix& u, const Matrix& v, const DsnOptions& opts) {
  require(opts.hidden_size >= 1, ErrorCode::invalid_argument, "DSN hidden size must be >= 1");
  detail::check_training_pair(u, v);
  std::mt19937_64 rng(opts.seed);
  Matrix w = random_weights(static_cast<Eigen::Index>(opts.hidden_size), u.rows(), rng);
  if (opts.mode == DsnMode::gradient_refined) {
    return refine_dsn_brick(u, v, std::move(w), opts.activation, opts.inverse, opts.refine);
  }
  return train_dsn_brick_with_weights(u, v, w, opts.activation, opts.inverse);
}

inline Vector apply_dsn_brick(const DsnBrick& b, const Vector& x) {
  detail::check_input(b.hidden.cols(), x);
  return b.output * activate(b.activation, Vector(b.hidden * x));
}

// ---------------------------------------------------------------------------
// Kernel brick

inline KernelBrick train_kernel_brick(const Matrix& u, const Matrix& v, const KernelSpec& spec,
                                      double lambda) {
  detail::check_training_pair(u, v);
  spec.validate();
  require(static_cast<std::size_t>(u.rows()) == spec.dimension(), ErrorCode::dimension_mismatch,
          "kernel spec dimension does not match the training inputs");
  const Matrix k = gram(u, u, spec);
  return KernelBrick{u, detail::solve_dual(k, v, lambda), spec, lambda};
}

inline Vector apply_kernel_brick(const KernelBrick& b, const Vector& x) {
  detail::check_input(b.inputs.rows(), x);
  return b.dual * cross_kernel(b.inputs, x, b.spec);
}

// ---------------------------------------------------------------------------
// Tensor brick

struct TensorOptions {
  std::size_t h1 = 8;
  std::size_t h2 = 8;
  Activation activation{ActivationKind::sigmoid};
  InverseConfig inverse = InverseConfig::exact();
  std::uint64_t seed = 0;
};

inline Matrix tensor_hidden(const TensorBrick& b, const Matrix& x) {
  return detail::tensor_features(activate(b.activation, Matrix(b.hidden1 * x)),
                                 activate(b.activation, Matrix(b.hidden2 * x)));
}

inline TensorBrick train_tensor_brick_with_weights(const Matrix& u, const Matrix& v,
                                                   const Matrix& w1, const Matrix& w2,
                                                   Activation a, const InverseConfig& cfg = {}) {
  detail::check_training_pair(u, v);
  require(w1.cols() == u.rows() && w2.cols() == u.rows() && w1.rows() >= 1 && w2.rows() >= 1,
          ErrorCode::dimension_mismatch, "tensor hidden weights do not match the input dimension");
  TensorBrick b{w1, w2, Matrix(), a};
  b.output = v * numlin::pseudo_inverse(tensor_hidden(b, u), cfg);
  return b;
}

inline TensorBrick train_tensor_brick(const Matrix& u, const Matrix& v, const TensorOptions& opts) {
  require(opts.h1 >= 1 && opts.h2 >= 1, ErrorCode::invalid_argument,
          "tensor hidden sizes must be >= 1");
  detail::check_training_pair(u, v);
  std::mt19937_64 rng(opts.seed);
  Matrix w1 = random_weights(static_cast<Eigen::Index>(opts.h1), u.rows(), rng);
  Matrix w2 = random_weights(static_cast<Eigen::Index>(opts.h2), u.rows(), rng);
  return train_tensor_brick_with_weights(u, v, w1, w2, opts.activation, opts.inverse);
}

inline Vector apply_tensor_brick(const TensorBrick& b, const Vector& x) {
  detail::check_input(b.hidden1.cols(), x);
  return b.output * tensor_hidden(b, Matrix(x)).col(0);
}

// ---------------------------------------------------------------------------
// Kernel-tensor brick

inline Matrix product_gram(const Matrix& a, const Matrix& b, const KernelSpec& s1,
                           const KernelSpec& s2) {
  return gram(a, b, s1).cwiseProduct(gram(a, b, s2));
}

inline KernelTensorBrick train_kt_brick(const Matrix& u, const Matrix& v, const KernelSpec& spec1,
                                        const KernelSpec& spec2, double lambda) {
  detail::check_training_pair(u, v);
  spec1.validate();
  spec2.validate();
  require(static_cast<std::size_t>(u.rows()) == spec1.dimension() &&
              spec1.dimension() == spec2.dimension(),
          ErrorCode::dimension_mismatch, "kernel specs do not match the training inputs");
  const Matrix k = product_gram(u, u, spec1, spec2);
  return KernelTensorBrick{u, detail::solve_dual(k, v, lambda), spec1, spec2, lambda};
}

inline Vector apply_kt_brick(const KernelTensorBrick& b, const Vector& x) {
  detail::check_input(b.inputs.rows(), x);
  return b.dual * product_gram(b.inputs, Matrix(x), b.spec1, b.spec2).col(0);
}

// ---------------------------------------------------------------------------
// Uniform access

inline BrickKind kind_of(const Brick& b) {
  return static_cast<BrickKind>(b.index());
}

inline Eigen::Index input_dim(const Brick& b) {
  return std::visit(
      [](const auto& x) -> Eigen::Index {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, LinearBrick>) return x.map.cols();
        else if constexpr (std::is_same_v<T, DsnBrick>) return x.hidden.cols();
        else if constexpr (std::is_same_v<T, TensorBrick>) return x.hidden1.cols();
        else return x.inputs.rows();
      },
      b);
}

inline Eigen::Index output_dim(const Brick& b) {
  return std::visit(
      [](const auto& x) -> Eigen::Index {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, LinearBrick>) return x.map.rows();
        else if constexpr (std::is_same_v<T, KernelBrick> || std::is_same_v<T, KernelTensorBrick>)
          return x.dual.rows();
        else return x.output.rows();
      },
      b);
}

/// Applies a brick to each column of `x`.
inline Matrix apply_columns(const Brick& b, const Matrix& x) {
  detail::check_input_columns(input_dim(b), x);
  return std::visit(
      [&x](const auto& br) -> Matrix {
        using T = std::decay_t<decltype(br)>;
        if constexpr (std::is_same_v<T, LinearBrick>) {
          return br.map * x;
        } else if constexpr (std::is_same_v<T, DsnBrick>) {
          return br.output * activate(br.activation, Matrix(br.hidden * x));
        } else if constexpr (std::is_same_v<T, KernelBrick>) {
          return br.dual * gram(br.inputs, x, br.spec);
        } else if constexpr (std::is_same_v<T, TensorBrick>) {
          return br.output * tensor_hidden(br, x);
        } else {
          return br.dual * product_gram(br.inputs, x, br.spec1, br.spec2);
        }
      },
      b);
}

inline Vector apply(const Brick& b, const Vector& x) {
  return apply_columns(b, Matrix(x)).col(0);
}

}  // namespace ecoavatar::bricks
