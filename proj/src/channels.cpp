#include "infograd/channels.hpp"

#include <cmath>
#include <string>

namespace infograd {

std::string_view to_string(FrontEndKind kind) noexcept {
  switch (kind) {
    case FrontEndKind::ScalarGain: return "scalar_gain";
    case FrontEndKind::ScaledFixedLinear: return "scaled_fixed_linear";
    case FrontEndKind::LinearMatrix: return "linear_matrix";
    case FrontEndKind::TanhLinear: return "tanh_linear";
  }
  return "unknown";
}

FrontEnd::FrontEnd(FrontEndKind kind, Index n, Index m, Vector params, Matrix fixed)
    : kind_(kind), n_(n), m_(m), params_(std::move(params)), fixed_(std::move(fixed)) {
  require_finite(params_, "front-end parameters");
}

FrontEnd FrontEnd::scalar_gain(Index dim, double alpha) {
  return FrontEnd(FrontEndKind::ScalarGain, dim, dim, Vector::Constant(1, alpha), Matrix());
}

FrontEnd FrontEnd::scaled_fixed_linear(Matrix a, double alpha) {
  require_finite(a, "fixed matrix");
  const Index n = a.cols(), m = a.rows();
  return FrontEnd(FrontEndKind::ScaledFixedLinear, n, m, Vector::Constant(1, alpha), std::move(a));
}

FrontEnd FrontEnd::linear_matrix(Matrix a) {
  const Index n = a.cols(), m = a.rows();
  Vector eta = Eigen::Map<const Vector>(a.data(), a.size());
  return FrontEnd(FrontEndKind::LinearMatrix, n, m, std::move(eta), Matrix());
}

FrontEnd FrontEnd::tanh_linear(Matrix a) {
  const Index n = a.cols(), m = a.rows();
  Vector eta = Eigen::Map<const Vector>(a.data(), a.size());
  return FrontEnd(FrontEndKind::TanhLinear, n, m, std::move(eta), Matrix());
}

FrontEnd FrontEnd::with_params(const Vector& eta) const {
  if (eta.size() != params_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter vector has length " + std::to_string(eta.size()) +
                                              ", expected " + std::to_string(params_.size()));
  }
  return FrontEnd(kind_, n_, m_, eta, fixed_);
}

Matrix FrontEnd::matrix() const {
  switch (kind_) {
    case FrontEndKind::ScalarGain:
      return params_[0] * Matrix::Identity(m_, n_);
    case FrontEndKind::ScaledFixedLinear:
      return params_[0] * fixed_;
    case FrontEndKind::LinearMatrix:
    case FrontEndKind::TanhLinear:
      return Eigen::Map<const Matrix>(params_.data(), m_, n_);
  }
  return {};
}

Matrix FrontEnd::forward(const Matrix& x) const {
  require_cols(x, n_, "front-end input");
  switch (kind_) {
    case FrontEndKind::ScalarGain:
      return params_[0] * x;
    case FrontEndKind::ScaledFixedLinear:
      return params_[0] * (x * fixed_.transpose());
    case FrontEndKind::LinearMatrix:
      return x * Eigen::Map<const Matrix>(params_.data(), m_, n_).transpose();
    case FrontEndKind::TanhLinear: {
      Matrix pre = x * Eigen::Map<const Matrix>(params_.data(), m_, n_).transpose();
      return pre.array().tanh().matrix();
    }
  }
  return {};
}

void FrontEnd::check_batch(const Matrix& x, const Matrix& v) const {
  require_cols(x, n_, "VJP input x");
  require_cols(v, m_, "VJP cotangent v");
  if (x.rows() != v.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "VJP: x and v have different batch sizes");
  }
}

Vector FrontEnd::param_vjp(const Vector& x, const Vector& v) const {
  Matrix xr = x.transpose();
  Matrix vr = v.transpose();
  return param_vjp_rows(xr, vr).row(0).transpose();
}

Matrix FrontEnd::param_vjp_rows(const Matrix& x, const Matrix& v) const {
  check_batch(x, v);
  const Index b = x.rows();
  switch (kind_) {
    case FrontEndKind::ScalarGain:
      return x.cwiseProduct(v).rowwise().sum();
    case FrontEndKind::ScaledFixedLinear:
      return (x * fixed_.transpose()).cwiseProduct(v).rowwise().sum();
    case FrontEndKind::LinearMatrix:
    case FrontEndKind::TanhLinear: {
      Matrix cot = v;
      if (kind_ == FrontEndKind::TanhLinear) {
        const Matrix pre = x * Eigen::Map<const Matrix>(params_.data(), m_, n_).transpose();
        cot.array() *= 1.0 - pre.array().tanh().square();
      }
      // Row i holds vec(cot_i x_i^T) in row-major order: index r * n + c.
      Matrix out(b, m_ * n_);
      for (Index i = 0; i < b; ++i) {
        for (Index r = 0; r < m_; ++r) {
          out.row(i).segment(r * n_, n_) = cot(i, r) * x.row(i);
        }
      }
      return out;
    }
  }
  return {};
}

Vector FrontEnd::param_vjp_mean(const Matrix& x, const Matrix& v) const {
  check_batch(x, v);
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  switch (kind_) {
    case FrontEndKind::ScalarGain:
    case FrontEndKind::ScaledFixedLinear:
      return param_vjp_rows(x, v).colwise().sum().transpose() * inv_b;
    case FrontEndKind::LinearMatrix:
    case FrontEndKind::TanhLinear: {
      Matrix cot = v;
      if (kind_ == FrontEndKind::TanhLinear) {
        const Matrix pre = x * Eigen::Map<const Matrix>(params_.data(), m_, n_).transpose();
        cot.array() *= 1.0 - pre.array().tanh().square();
      }
      Matrix g = cot.transpose() * x * inv_b;  // m x n
      return Eigen::Map<const Vector>(g.data(), g.size());
    }
  }
  return {};
}

InputDistribution InputDistribution::isotropic(double sigma, Index n) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::ConfigInvalid, "isotropic input needs sigma > 0");
  }
  if (n < 1) throw Error(ErrorCode::ShapeMismatch, "input dimension must be positive");
  InputDistribution d;
  d.isotropic_ = true;
  d.sigma_ = sigma;
  d.n_ = n;
  return d;
}

InputDistribution InputDistribution::mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) throw Error(ErrorCode::ConfigInvalid, "mixture needs a component");
  InputDistribution d;
  d.isotropic_ = false;
  d.n_ = components.front().mean.size();
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw Error(ErrorCode::ConfigInvalid, "mixture weights must be positive");
    if (c.mean.size() != d.n_ || c.cov.rows() != d.n_ || c.cov.cols() != d.n_) {
      throw Error(ErrorCode::ShapeMismatch, "mixture component dimensions disagree");
    }
    total += c.weight;
    d.factors_.push_back(cholesky(c.cov));
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::ConfigInvalid, "mixture weights must sum to 1");
  }
  d.components_ = std::move(components);
  return d;
}

Vector InputDistribution::mean() const {
  if (isotropic_) return Vector::Zero(n_);
  Vector mu = Vector::Zero(n_);
  for (const auto& c : components_) mu += c.weight * c.mean;
  return mu;
}

Matrix InputDistribution::covariance() const {
  if (isotropic_) return sigma_ * sigma_ * Matrix::Identity(n_, n_);
  const Vector mu = mean();
  Matrix cov = Matrix::Zero(n_, n_);
  for (const auto& c : components_) {
    const Vector d = c.mean - mu;
    cov += c.weight * (c.cov + d * d.transpose());
  }
  return cov;
}

Matrix InputDistribution::sample(Rng& rng, Index count) const {
  if (isotropic_) return sample_gaussian(rng, count, n_, sigma_);
  Matrix out(count, n_);
  for (Index i = 0; i < count; ++i) {
    double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < components_.size() && u >= components_[k].weight) {
      u -= components_[k].weight;
      ++k;
    }
    Vector eps(n_);
    for (Index j = 0; j < n_; ++j) eps[j] = rng.normal();
    out.row(i) = (components_[k].mean + factors_[k].lower * eps).transpose();
  }
  return out;
}

TaskMap::TaskMap(Matrix w_) : w(std::move(w_)) {
  require_finite(w, "task matrix");
  if (w.rows() > w.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "task dimension k must not exceed input dimension n");
  }
}

ChannelBatch sample_channel(const FrontEnd& fe, const InputDistribution& dist, double t,
                            Index count, Rng& rng, const TaskMap* task) {
  if (dist.dim() != fe.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "input distribution and front-end dimensions differ");
  }
  if (task != nullptr && task->w.cols() != fe.input_dim()) {
    throw Error(ErrorCode::ShapeMismatch, "task matrix and front-end input dimensions differ");
  }
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "noise variance t must be positive");
  ChannelBatch b;
  b.t = t;
  b.x = dist.sample(rng, count);
  b.w = fe.forward(b.x);
  b.z = sample_gaussian(rng, count, fe.output_dim(), std::sqrt(t));
  b.y = b.w + b.z;
  if (task != nullptr) b.tau = task->apply(b.x);
  return b;
}

Matrix generate_test_matrix(Index n, Index m, double cond_ratio, Rng& rng) {
  if (!(cond_ratio >= 1.0)) throw Error(ErrorCode::ConfigInvalid, "cond_ratio must be >= 1");
  const Index r = std::min(n, m);
  const Matrix gu = sample_gaussian(rng, m, m, 1.0);
  const Matrix gv = sample_gaussian(rng, n, n, 1.0);
  const Matrix u = Eigen::HouseholderQR<Matrix>(gu).householderQ();
  const Matrix v = Eigen::HouseholderQR<Matrix>(gv).householderQ();
  Vector s(r);
  for (Index i = 0; i < r; ++i) {
    const double frac = r > 1 ? static_cast<double>(i) / static_cast<double>(r - 1) : 0.0;
    s[i] = std::pow(cond_ratio, -frac);
  }
  s *= std::sqrt(static_cast<double>(m)) / s.norm();
  return u.leftCols(r) * s.asDiagonal() * v.leftCols(r).transpose();
}

Matrix random_matrix_with_norm(Index rows, Index cols, double frobenius, Rng& rng) {
  Matrix g = sample_gaussian(rng, rows, cols, 1.0);
  return g * (frobenius / g.norm());
}

}  // namespace infograd
