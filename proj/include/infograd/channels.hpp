#pragma once

// Parametric front-ends f_eta, input distributions, task maps and the additive
// Gaussian channel Y_t = f_eta(X) + Z_t, Z_t ~ N(0, t I_m).

#include <optional>
#include <string_view>
#include <vector>

#include "infograd/core_math.hpp"

namespace infograd {

enum class FrontEndKind {
  ScalarGain,         // f(x) = alpha x, n = m, eta = (alpha)
  ScaledFixedLinear,  // f(x) = alpha A x, A fixed, eta = (alpha)
  LinearMatrix,       // f(x) = A x, eta = vec(A) row-major
  TanhLinear,         // f(x) = tanh(A x), eta = vec(A) row-major
};

std::string_view to_string(FrontEndKind kind) noexcept;

// Immutable after construction; with_params() returns an updated copy.
class FrontEnd {
 public:
  // Placeholder: a zero-dimensional scalar gain.
  FrontEnd() : FrontEnd(FrontEndKind::ScalarGain, 0, 0, Vector::Zero(1), Matrix()) {}
  static FrontEnd scalar_gain(Index dim, double alpha);
  static FrontEnd scaled_fixed_linear(Matrix a, double alpha);
  static FrontEnd linear_matrix(Matrix a);
  static FrontEnd tanh_linear(Matrix a);

  FrontEndKind kind() const noexcept { return kind_; }
  Index input_dim() const noexcept { return n_; }
  Index output_dim() const noexcept { return m_; }
  Index param_count() const noexcept { return params_.size(); }
  const Vector& params() const noexcept { return params_; }
  FrontEnd with_params(const Vector& eta) const;

  bool is_linear() const noexcept { return kind_ != FrontEndKind::TanhLinear; }
  // The m x n matrix applied to x (before tanh for TanhLinear).
  Matrix matrix() const;
  // The fixed A of ScaledFixedLinear; empty otherwise.
  const Matrix& fixed_matrix() const noexcept { return fixed_; }

  // Row-wise f(x) for a B x n batch.
  Matrix forward(const Matrix& x) const;

  // grad_eta <f_eta(x), v> for one sample.
  Vector param_vjp(const Vector& x, const Vector& v) const;
  // Per-sample VJPs, one row per sample (B x |eta|).
  Matrix param_vjp_rows(const Matrix& x, const Matrix& v) const;
  // (1/B) sum_i grad_eta <f_eta(x_i), v_i>.
  Vector param_vjp_mean(const Matrix& x, const Matrix& v) const;

 private:
  FrontEnd(FrontEndKind kind, Index n, Index m, Vector params, Matrix fixed);
  void check_batch(const Matrix& x, const Matrix& v) const;

  FrontEndKind kind_;
  Index n_;
  Index m_;
  Vector params_;
  Matrix fixed_;
};

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  Matrix cov;
};

class InputDistribution {
 public:
  static InputDistribution isotropic(double sigma, Index n);
  static InputDistribution mixture(std::vector<GaussianComponent> components);

  Index dim() const noexcept { return n_; }
  bool is_isotropic() const noexcept { return isotropic_; }
  double sigma() const noexcept { return sigma_; }
  const std::vector<GaussianComponent>& components() const noexcept { return components_; }

  Vector mean() const;
  Matrix covariance() const;
  Matrix sample(Rng& rng, Index count) const;

 private:
  InputDistribution() = default;

  bool isotropic_ = true;
  double sigma_ = 1.0;
  Index n_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<PsdFactor> factors_;
};

// Deterministic linear task T = W X, W in R^{k x n}.
struct TaskMap {
  Matrix w;

  explicit TaskMap(Matrix w_);
  Index task_dim() const noexcept { return w.rows(); }
  Matrix apply(const Matrix& x) const { return x * w.transpose(); }
};

struct ChannelBatch {
  Matrix x;  // B x n
  Matrix w;  // B x m, f_eta(x)
  Matrix z;  // B x m, noise
  Matrix y;  // B x m, w + z
  std::optional<Matrix> tau;  // B x k, computed from clean x
  double t = 0.0;

  Index size() const noexcept { return x.rows(); }
};

ChannelBatch sample_channel(const FrontEnd& fe, const InputDistribution& dist, double t,
                            Index count, Rng& rng, const TaskMap* task = nullptr);

// A = U diag(s) V^T, U and V from QR of Gaussian matrices, s geometric with
// s_max / s_min = cond_ratio, scaled so that ||A||_F = sqrt(m). Returns m x n.
Matrix generate_test_matrix(Index n, Index m, double cond_ratio, Rng& rng);

// Gaussian matrix rescaled to the given Frobenius norm.
Matrix random_matrix_with_norm(Index rows, Index cols, double frobenius, Rng& rng);

}  // namespace infograd
