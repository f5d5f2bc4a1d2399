#include "infograd/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace infograd {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or Inf");
  }
}

void require_finite(const Vector& v, std::string_view what) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains NaN or Inf");
  }
}

void require_cols(const Matrix& m, Index cols, std::string_view what) {
  if (m.cols() != cols) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": expected " + std::to_string(cols) +
                                              " columns, got " + shape_str(m));
  }
}

std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

PsdFactor cholesky(const Matrix& m, double ridge) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "cholesky needs a square matrix, got " + shape_str(m));
  }
  require_finite(m, "cholesky input");
  if (ridge < 0.0) {
    throw Error(ErrorCode::NotPositiveDefinite, "negative ridge");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::NotPositiveDefinite, "matrix is not symmetric");
  }

  Matrix a = m;
  a.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPositiveDefinite, "non-positive pivot");
  }
  PsdFactor f;
  f.lower = llt.matrixL();
  const auto diag = f.lower.diagonal().array();
  if (!(diag > 0.0).all() || !diag.allFinite()) {
    throw Error(ErrorCode::NotPositiveDefinite, "non-positive pivot");
  }
  f.log_det = 2.0 * diag.log().sum();
  return f;
}

Matrix solve_psd(const PsdFactor& factor, const Matrix& b) {
  if (b.rows() != factor.dim()) {
    throw Error(ErrorCode::ShapeMismatch,
                "solve_psd: rhs has " + std::to_string(b.rows()) + " rows, factor dim " +
                    std::to_string(factor.dim()));
  }
  const auto lower = factor.lower.triangularView<Eigen::Lower>();
  Matrix y = lower.solve(b);
  return lower.transpose().solve(y);
}

Matrix solve_psd_rows(const PsdFactor& factor, const Matrix& rows) {
  require_cols(rows, factor.dim(), "solve_psd_rows");
  // X^T = M^{-1} R^T  <=>  X = R M^{-1} (M symmetric): solve on the right.
  Matrix x = rows;
  const auto lower = factor.lower.triangularView<Eigen::Lower>();
  lower.transpose().solveInPlace<Eigen::OnTheRight>(x);
  lower.solveInPlace<Eigen::OnTheRight>(x);
  return x;
}

Vector singular_values(const Matrix& a) {
  require_finite(a, "singular_values input");
  if (a.size() == 0) return Vector();
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues();
}

double frobenius_norm(const Matrix& a) { return a.norm(); }

Matrix frobenius_project(const Matrix& a, double radius) {
  const double norm = a.norm();
  if (norm <= radius) return a;
  return a * (radius / norm);
}

Vector trapezoid_cumulative(const Vector& xs, const Vector& ys) {
  if (xs.size() != ys.size() || xs.size() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "trapezoid_cumulative: grid and values differ in length");
  }
  Vector out(xs.size());
  out[0] = 0.0;
  for (Index k = 1; k < xs.size(); ++k) {
    const double h = xs[k] - xs[k - 1];
    if (!(h > 0.0)) {
      throw Error(ErrorCode::NonMonotonicGrid,
                  "grid not strictly increasing at index " + std::to_string(k));
    }
    out[k] = out[k - 1] + 0.5 * (ys[k - 1] + ys[k]) * h;
  }
  return out;
}

Matrix sample_gaussian(Rng& rng, Index rows, Index dim, double scale) {
  if (scale == 0.0) return Matrix::Zero(rows, dim);
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::NonFiniteInput, "sample_gaussian: scale must be positive");
  }
  Matrix out(rows, dim);
  double* data = out.data();
  for (Index i = 0; i < out.size(); ++i) data[i] = scale * rng.normal();
  return out;
}

Matrix sample_covariance(const Matrix& samples) {
  const Index n = samples.rows();
  if (n < 2) throw Error(ErrorCode::DegenerateSample, "covariance needs at least two samples");
  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Matrix centered = samples.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

Whitening whiten(const Matrix& samples, double ridge) {
  if (samples.rows() <= samples.cols()) {
    throw Error(ErrorCode::DegenerateSample, "whiten needs more samples than dimensions");
  }
  require_finite(samples, "whiten input");
  Whitening w;
  w.mean = samples.colwise().mean().transpose();
  Matrix centered = samples.rowwise() - w.mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
  cov = 0.5 * (cov + cov.transpose());
  const PsdFactor f = cholesky(cov, ridge);
  // u_i = L^{-1} (y_i - mean), applied row-wise: U = Y_c L^{-T}.
  f.lower.triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(centered);
  w.whitened = std::move(centered);
  w.log_det_transform = -0.5 * f.log_det;
  w.lower = f.lower;
  return w;
}

double log_sum_exp(const Eigen::Ref<const Vector>& values) {
  if (values.size() == 0) return -std::numeric_limits<double>::infinity();
  const double mx = values.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((values.array() - mx).exp().sum());
}

}  // namespace infograd
