#include "infograd/estimators.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace infograd {

namespace {

constexpr Index kChunk = 4096;

// Mean and M2 (sum of squared deviations) per column, merged chunk by chunk.
struct Moments {
  Vector mean;
  Vector m2;
  Index count = 0;

  void merge(const Matrix& rows) {
    const Index nb = rows.rows();
    if (nb == 0) return;
    const Vector mb = rows.colwise().mean().transpose();
    const Vector m2b = (rows.rowwise() - mb.transpose()).array().square().colwise().sum().transpose();
    if (count == 0) {
      mean = mb;
      m2 = m2b;
      count = nb;
      return;
    }
    const double na = static_cast<double>(count), nbd = static_cast<double>(nb);
    const double total = na + nbd;
    const Vector delta = mb - mean;
    mean += delta * (nbd / total);
    m2 += m2b + delta.cwiseAbs2() * (na * nbd / total);
    count += nb;
  }

  Vector stderr_of_mean() const {
    if (count < 2) return Vector::Zero(mean.size());
    const double n = static_cast<double>(count);
    return (m2.array() / (n - 1.0) / n).sqrt().matrix();
  }
};

void require_tau(const ChannelBatch& batch) {
  if (!batch.tau) throw Error(ErrorCode::MissingCondition, "batch carries no task values tau");
}

}  // namespace

GradientEstimate vjp_estimate(const FrontEnd& fe, const Matrix& x, const Matrix& v) {
  require_cols(x, fe.input_dim(), "VJP input x");
  require_cols(v, fe.output_dim(), "VJP cotangent v");
  if (x.rows() != v.rows()) throw Error(ErrorCode::ShapeMismatch, "x and v batch sizes differ");
  if (x.rows() == 0) throw Error(ErrorCode::DegenerateSample, "empty batch");
  Moments mom;
  for (Index start = 0; start < x.rows(); start += kChunk) {
    const Index len = std::min(kChunk, x.rows() - start);
    mom.merge(fe.param_vjp_rows(x.middleRows(start, len), v.middleRows(start, len)));
  }
  return {mom.mean, mom.stderr_of_mean(), mom.count};
}

GradientEstimate info_gradient(const FrontEnd& fe, const ScoreModel& score, const ChannelBatch& batch) {
  if (score.is_conditional()) {
    throw Error(ErrorCode::ShapeMismatch, "info_gradient needs an unconditional score");
  }
  const Matrix v = -score.eval(batch.y);
  return vjp_estimate(fe, batch.x, v);
}

GradientEstimate ib_gradient(const FrontEnd& fe, const ScoreModel& cond_score,
                             const ScoreModel& uncond_score, double beta, const ChannelBatch& batch) {
  if (!(beta >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "beta must be nonnegative");
  require_tau(batch);
  if (uncond_score.is_conditional() || !cond_score.is_conditional()) {
    throw Error(ErrorCode::ShapeMismatch, "expected one conditional and one unconditional score");
  }
  Matrix v = cond_score.eval(batch.y, &*batch.tau);
  v += (beta - 1.0) * uncond_score.eval(batch.y);
  return vjp_estimate(fe, batch.x, v);
}

GradientEstimate task_info_gradient(const FrontEnd& fe, const ScoreModel& cond_score,
                                    const ScoreModel& uncond_score, const ChannelBatch& batch) {
  return ib_gradient(fe, cond_score, uncond_score, 0.0, batch);
}

ScalarEstimate fisher_information(const ScoreModel& score, const Matrix& y, const Matrix* tau) {
  if (y.rows() < 2) throw Error(ErrorCode::DegenerateSample, "Fisher estimate needs at least 2 samples");
  const Vector sq = score.eval(y, tau).rowwise().squaredNorm();
  const double n = static_cast<double>(sq.size());
  const double mean = sq.mean();
  const double var = (sq.array() - mean).square().sum() / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

MiCurve path_integral_mi(const Vector& grid, const Vector& grads, double anchor_value) {
  MiCurve c;
  c.grid = grid;
  c.values = trapezoid_cumulative(grid, grads).array() + anchor_value;
  c.meaning = CurveMeaning::Mi;
  return c;
}

Vector log_spaced_grid(double t_star, double ratio, Index points) {
  if (!(t_star > 0.0) || !(ratio > 1.0) || points < 2) {
    throw Error(ErrorCode::ConfigInvalid, "log grid needs t_star > 0, ratio > 1, points >= 2");
  }
  Vector g(points);
  const double step = std::log(ratio) / static_cast<double>(points - 1);
  for (Index i = 0; i < points; ++i) g[i] = t_star * std::exp(step * static_cast<double>(i));
  g[points - 1] = t_star * ratio;
  return g;
}

double fisher_integral_mi(const Vector& t_grid, const Vector& j_values, Index m) {
  if (t_grid.size() != j_values.size()) throw Error(ErrorCode::ShapeMismatch, "grid and J lengths differ");
  const Vector integrand = static_cast<double>(m) * t_grid.cwiseInverse() - j_values;
  require_finite(integrand, "Fisher integrand");
  const Vector cum = trapezoid_cumulative(t_grid, integrand);
  return 0.5 * cum[cum.size() - 1];
}

double fisher_integral_task_mi(const Vector& t_grid, const Vector& j_uncond, const Vector& j_cond) {
  if (t_grid.size() != j_uncond.size() || t_grid.size() != j_cond.size()) {
    throw Error(ErrorCode::ShapeMismatch, "grid and J lengths differ");
  }
  const Vector integrand = j_cond - j_uncond;
  require_finite(integrand, "task Fisher integrand");
  const Vector cum = trapezoid_cumulative(t_grid, integrand);
  return 0.5 * cum[cum.size() - 1];
}

double mi_closed_form_gaussian(const Matrix& a, const Matrix& sigma_x, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t must be positive");
  Matrix s = a * sigma_x * a.transpose() / t;
  s = 0.5 * (s + s.transpose());
  s.diagonal().array() += 1.0;
  return 0.5 * cholesky(s, 0.0).log_det;
}

double mi_closed_form_linear(const Matrix& a, double sigma_x2, double t) {
  return mi_closed_form_gaussian(a, sigma_x2 * Matrix::Identity(a.cols(), a.cols()), t);
}

double mi_singular_sum(const Matrix& a, double alpha, double sigma_x2, double t) {
  const Vector s = singular_values(a);
  const double c = alpha * alpha * sigma_x2 / t;
  return 0.5 * (c * s.array().square()).log1p().sum();
}

double grad_alpha_closed_form(const Matrix& a, double alpha, double sigma_x2, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t must be positive");
  const Vector s2 = singular_values(a).array().square();
  return (alpha * sigma_x2 * s2.array() / (t + alpha * alpha * sigma_x2 * s2.array())).sum();
}

Vector grad_matrix_closed_form(const Matrix& a, const Matrix& sigma_x, double t) {
  Matrix sy = a * sigma_x * a.transpose();
  sy = 0.5 * (sy + sy.transpose());
  sy.diagonal().array() += t;
  const Matrix g = solve_psd(cholesky(sy, 0.0), a * sigma_x);
  return Eigen::Map<const Vector>(g.data(), g.size());
}

double task_mi_closed_form(const Matrix& a, const Matrix& w, const Matrix& sigma_x, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t must be positive");
  if (w.cols() != a.cols()) throw Error(ErrorCode::ShapeMismatch, "W and A input dimensions differ");
  Matrix sy = a * sigma_x * a.transpose();
  sy = 0.5 * (sy + sy.transpose());
  sy.diagonal().array() += t;
  Matrix st = w * sigma_x * w.transpose();
  st = 0.5 * (st + st.transpose());
  const Matrix syt = a * sigma_x * w.transpose();
  // Sigma_Y >= t I and Sigma_{Y|T} >= t I need no ridge; a ridge on Sigma_T would bias the
  // result, so rank deficiency of W is detected from the pivots instead.
  const PsdFactor ft = cholesky(st, 0.0);
  const auto piv = ft.lower.diagonal().array().square();
  if (piv.minCoeff() <= 1e-12 * piv.maxCoeff()) {
    throw Error(ErrorCode::NotPositiveDefinite, "task covariance W Sigma_x W^T is singular");
  }
  Matrix cond = sy - syt * solve_psd(ft, syt.transpose());
  cond = 0.5 * (cond + cond.transpose());
  return 0.5 * (cholesky(sy, 0.0).log_det - cholesky(cond, 0.0).log_det);
}

double ib_objective_closed_form(const Matrix& a, const Matrix& w, const Matrix& sigma_x, double t,
                                double beta) {
  return task_mi_closed_form(a, w, sigma_x, t) - beta * mi_closed_form_gaussian(a, sigma_x, t);
}

double optimum_mi_frobenius(Index m, double sigma_x2, double t, double radius) {
  const double md = static_cast<double>(m);
  return 0.5 * md * std::log1p(sigma_x2 * radius * radius / (t * md));
}

std::vector<double> default_bandwidth_multipliers() {
  return {0.5, 1.0 / std::numbers::sqrt2, 1.0, std::numbers::sqrt2, 2.0};
}

KdeEntropy kde_loo_entropy(const Matrix& samples, const std::vector<double>& multipliers) {
  const Index n = samples.rows(), m = samples.cols();
  if (m > kKdeMaxDim) throw Error(ErrorCode::ConfigInvalid, "KDE entropy is limited to m <= 16");
  if (n > kKdeMaxSamples) throw Error(ErrorCode::ConfigInvalid, "KDE entropy is limited to N <= 50000");
  if (n <= m + 1) throw Error(ErrorCode::DegenerateSample, "KDE entropy needs N > m + 1");
  if (multipliers.empty()) throw Error(ErrorCode::ConfigInvalid, "empty bandwidth grid");
  require_finite(samples, "KDE samples");

  const Whitening wh = whiten(samples);
  const Matrix& u = wh.whitened;
  const Vector sq = u.rowwise().squaredNorm();
  const double scott = std::pow(static_cast<double>(n), -1.0 / static_cast<double>(m + 4));
  const std::size_t nh = multipliers.size();
  std::vector<double> inv2h2(nh);
  for (std::size_t h = 0; h < nh; ++h) {
    const double bw = multipliers[h] * scott;
    if (!(bw > 0.0)) throw Error(ErrorCode::ConfigInvalid, "bandwidth multipliers must be positive");
    inv2h2[h] = 0.5 / (bw * bw);
  }

  // per_row(i, h) = log sum_{j != i} exp(-|u_i - u_j|^2 / (2 h^2))
  Matrix per_row(n, static_cast<Index>(nh));
  constexpr Index kBlock = 128;
  const double inf = std::numeric_limits<double>::infinity();
  for (Index start = 0; start < n; start += kBlock) {
    const Index len = std::min(kBlock, n - start);
    Matrix d2 = -2.0 * (u.middleRows(start, len) * u.transpose());
    d2.colwise() += sq.segment(start, len);
    d2.rowwise() += sq.transpose();
    d2 = d2.cwiseMax(0.0);
    for (Index r = 0; r < len; ++r) d2(r, start + r) = inf;
    for (Index r = 0; r < len; ++r) {
      const auto row = d2.row(r).array();
      const double dmin = row.minCoeff();
      for (std::size_t h = 0; h < nh; ++h) {
        const double s = (-(row - dmin) * inv2h2[h]).exp().sum();
        per_row(start + r, static_cast<Index>(h)) = -dmin * inv2h2[h] + std::log(s);
      }
    }
  }

  KdeEntropy best;
  best.loo_loglik = -inf;
  const double log_nm1 = std::log(static_cast<double>(n - 1));
  for (std::size_t h = 0; h < nh; ++h) {
    const double bw = multipliers[h] * scott;
    const double norm = 0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi * bw * bw);
    const double ll = per_row.col(static_cast<Index>(h)).mean() - log_nm1 - norm;
    if (ll > best.loo_loglik) {
      best.loo_loglik = ll;
      best.bandwidth = bw;
      best.multiplier = multipliers[h];
    }
  }
  if (!std::isfinite(best.loo_loglik)) {
    throw Error(ErrorCode::DegenerateSample, "LOO log-likelihood is not finite");
  }
  best.entropy = -best.loo_loglik - wh.log_det_transform;
  return best;
}

KdeMi mi_kde(const Matrix& y, double t, const std::vector<double>& multipliers) {
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t must be positive");
  KdeMi out;
  out.entropy = kde_loo_entropy(y, multipliers);
  const double noise_entropy =
      0.5 * static_cast<double>(y.cols()) * std::log(2.0 * std::numbers::pi * std::numbers::e * t);
  out.mi = out.entropy.entropy - noise_entropy;
  return out;
}

GradientEstimate utility_scaled_gradient(const GradientEstimate& g, double u_prime) {
  if (!std::isfinite(u_prime)) throw Error(ErrorCode::NonFiniteInput, "utility derivative is not finite");
  return {g.grad * u_prime, g.stderr_ * std::abs(u_prime), g.samples};
}

}  // namespace infograd
