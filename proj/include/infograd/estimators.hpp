#pragma once

// Information-gradient estimators, Fisher-information and MI estimators, and the
// closed-form linear-Gaussian references they are checked against.

#include <vector>

#include "infograd/channels.hpp"
#include "infograd/scores.hpp"

namespace infograd {

struct GradientEstimate {
  Vector grad;
  Vector stderr_;  // per-coordinate standard error of the mean; zero when samples < 2
  Index samples = 0;
};

// Mean of grad_eta <f(x_i), v_i> over the batch with per-coordinate standard errors.
// Accumulates in fixed-size chunks in row order, so results are bit-stable.
GradientEstimate vjp_estimate(const FrontEnd& fe, const Matrix& x, const Matrix& v);

// -(1/B) sum_i Df(x_i)^T s(y_i). The score is only evaluated, never differentiated.
GradientEstimate info_gradient(const FrontEnd& fe, const ScoreModel& score, const ChannelBatch& batch);

// (1/B) sum_i Df(x_i)^T (s_cond(y_i | tau_i) + (beta - 1) s_unc(y_i)).
GradientEstimate ib_gradient(const FrontEnd& fe, const ScoreModel& cond_score,
                             const ScoreModel& uncond_score, double beta, const ChannelBatch& batch);

// (1/B) sum_i Df(x_i)^T (s_cond(y_i | tau_i) - s_unc(y_i)); the beta = 0 case of ib_gradient.
GradientEstimate task_info_gradient(const FrontEnd& fe, const ScoreModel& cond_score,
                                    const ScoreModel& uncond_score, const ChannelBatch& batch);

struct ScalarEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

// Mean and standard error of ||s(y_i)||^2.
ScalarEstimate fisher_information(const ScoreModel& score, const Matrix& y, const Matrix* tau = nullptr);

enum class CurveMeaning { Gradient, Mi, Fisher };

struct MiCurve {
  Vector grid;
  Vector values;
  CurveMeaning meaning = CurveMeaning::Mi;
};

// anchor + cumulative trapezoid of grads over grid.
MiCurve path_integral_mi(const Vector& grid, const Vector& grads, double anchor_value);

// `points` log-spaced values from t_star to ratio * t_star.
Vector log_spaced_grid(double t_star, double ratio = 1e4, Index points = 400);

// 1/2 int (m / t - J(t)) dt over the grid; the grid starts at the target noise level.
double fisher_integral_mi(const Vector& t_grid, const Vector& j_values, Index m);
// Task form: 1/2 int (E_T[J(Y_t | T)] - J(Y_t)) dt.
double fisher_integral_task_mi(const Vector& t_grid, const Vector& j_uncond, const Vector& j_cond);

// 1/2 log det(I + (sigma_x2 / t) A A^T).
double mi_closed_form_linear(const Matrix& a, double sigma_x2, double t);
// 1/2 log det(I + A Sigma_x A^T / t).
double mi_closed_form_gaussian(const Matrix& a, const Matrix& sigma_x, double t);
// 1/2 sum_i log(1 + alpha^2 sigma_x2 s_i^2 / t) over the singular values of A.
double mi_singular_sum(const Matrix& a, double alpha, double sigma_x2, double t);
// d/d alpha of I(alpha A): sum_i alpha sigma_x2 s_i^2 / (t + alpha^2 sigma_x2 s_i^2).
double grad_alpha_closed_form(const Matrix& a, double alpha, double sigma_x2, double t);
// grad_A I(A) = Sigma_Y^{-1} A Sigma_x, returned flattened row-major like a LinearMatrix eta.
Vector grad_matrix_closed_form(const Matrix& a, const Matrix& sigma_x, double t);

// I(T;Y) = 1/2 [log det Sigma_Y - log det Sigma_{Y|T}] for T = W X, Y = A X + Z.
double task_mi_closed_form(const Matrix& a, const Matrix& w, const Matrix& sigma_x, double t);
// I(T;Y) - beta I(X;Y).
double ib_objective_closed_form(const Matrix& a, const Matrix& w, const Matrix& sigma_x, double t,
                                double beta);

// (m/2) log(1 + sigma_x2 P^2 / (t m)).
double optimum_mi_frobenius(Index m, double sigma_x2, double t, double radius);

inline constexpr Index kKdeMaxSamples = 50000;
inline constexpr Index kKdeMaxDim = 16;

std::vector<double> default_bandwidth_multipliers();

struct KdeEntropy {
  double entropy = 0.0;     // nats, in the original coordinates
  double bandwidth = 0.0;   // chosen h in whitened coordinates
  double multiplier = 0.0;  // chosen kappa, h = kappa N^{-1/(m+4)}
  double loo_loglik = 0.0;  // mean LOO log-likelihood at the chosen h
};

KdeEntropy kde_loo_entropy(const Matrix& samples,
                           const std::vector<double>& multipliers = default_bandwidth_multipliers());

struct KdeMi {
  double mi = 0.0;
  KdeEntropy entropy;
};

// H_kde(Y) - (m/2) log(2 pi e t).
KdeMi mi_kde(const Matrix& y, double t,
             const std::vector<double>& multipliers = default_bandwidth_multipliers());

// Chain rule for a utility U(I): grad scaled by U'(I), standard error by |U'(I)|.
GradientEstimate utility_scaled_gradient(const GradientEstimate& g, double u_prime);

}  // namespace infograd
