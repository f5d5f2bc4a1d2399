#include "infograd/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>

#include <json.hpp>

#include "infograd/experiments.hpp"

namespace infograd {

namespace {

struct Measure {
  double value;
  std::string detail;
};

struct Check {
  std::string name;
  std::vector<std::string> tags;
  double threshold;
  std::function<Measure(Rng&)> run;
};

double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

Matrix random_spd(Index d, Rng& rng) {
  const Matrix g = sample_gaussian(rng, d, d, 1.0);
  Matrix s = g * g.transpose() / static_cast<double>(d);
  s.diagonal().array() += 0.5;
  return s;
}

FrontEnd random_front_end(FrontEndKind kind, Rng& rng) {
  switch (kind) {
    case FrontEndKind::ScalarGain: return FrontEnd::scalar_gain(3, 0.5 + rng.uniform());
    case FrontEndKind::ScaledFixedLinear:
      return FrontEnd::scaled_fixed_linear(sample_gaussian(rng, 4, 3, 1.0), 0.5 + rng.uniform());
    case FrontEndKind::LinearMatrix: return FrontEnd::linear_matrix(sample_gaussian(rng, 4, 3, 0.7));
    case FrontEndKind::TanhLinear: return FrontEnd::tanh_linear(sample_gaussian(rng, 4, 3, 0.7));
  }
  return FrontEnd::scalar_gain(1, 1.0);
}

// Central differences of eta -> F(eta).
Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& eta, double h) {
  Vector g(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    Vector p = eta, q = eta;
    p[i] += h;
    q[i] -= h;
    g[i] = (f(p) - f(q)) / (2.0 * h);
  }
  return g;
}

double inner_forward(const FrontEnd& fe, const Vector& eta, const Vector& x, const Vector& v) {
  return (fe.with_params(eta).forward(x.transpose()).row(0).transpose()).dot(v);
}

// max_i |est_i - ref_i| / max(3 se_i, rel ref_i); <= 1 means agreement.
double band_ratio(const GradientEstimate& est, const Vector& ref, double rel) {
  double worst = 0.0;
  for (Index i = 0; i < ref.size(); ++i) {
    const double band = std::max(3.0 * est.stderr_[i], rel * std::abs(ref[i]));
    worst = std::max(worst, std::abs(est.grad[i] - ref[i]) / std::max(band, 1e-300));
  }
  return worst;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<Check> build_checks() {
  std::vector<Check> c;

  // ---------------------------------------------------------------- core
  c.push_back({"cholesky_solve_roundtrip", {"core"}, 1e-8, [](Rng& rng) {
    double worst = 0.0;
    for (Index d = 1; d <= 16; ++d) {
      const Matrix m = random_spd(d, rng);
      const Matrix b = sample_gaussian(rng, d, 3, 1.0);
      const Matrix x = solve_psd(cholesky(m), b);
      worst = std::max(worst, (m * x - b).norm() / b.norm());
    }
    return Measure{worst, "max relative residual over dims 1..16"};
  }});
  c.push_back({"trapezoid_linearity_additivity", {"core"}, 1e-12, [](Rng& rng) {
    const Index n = 41;
    Vector xs = Vector::LinSpaced(n, 0.0, 2.0);
    const Matrix ys = sample_gaussian(rng, 2, n, 1.0);
    const Vector y1 = ys.row(0).transpose(), y2 = ys.row(1).transpose();
    const Vector lin = trapezoid_cumulative(xs, 2.0 * y1 - 3.0 * y2) -
                       (2.0 * trapezoid_cumulative(xs, y1) - 3.0 * trapezoid_cumulative(xs, y2));
    const Vector whole = trapezoid_cumulative(xs, y1);
    const Vector left = trapezoid_cumulative(xs.head(21), y1.head(21));
    const Vector right = trapezoid_cumulative(xs.tail(21), y1.tail(21));
    const double add = std::abs(whole[n - 1] - (left[20] + right[20]));
    return Measure{std::max(lin.cwiseAbs().maxCoeff(), add), "linearity and split-grid additivity"};
  }});
  c.push_back({"sample_gaussian_ks", {"core"}, 0.01, [](Rng& rng) {
    const Matrix s = sample_gaussian(rng, 100000, 1, 1.0);
    std::vector<double> v(s.data(), s.data() + s.size());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double f = normal_cdf(v[i]);
      d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return Measure{d, "Kolmogorov-Smirnov statistic, N = 1e5"};
  }});
  c.push_back({"frobenius_projection_idempotent", {"projection", "core"}, 1e-12, [](Rng& rng) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Matrix a = sample_gaussian(rng, 5, 4, 0.5 + 2.0 * rng.uniform());
      const double p = 0.5 + 3.0 * rng.uniform();
      const Matrix once = frobenius_project(a, p);
      worst = std::max(worst, (frobenius_project(once, p) - once).norm());
      worst = std::max(worst, once.norm() - std::min(p, a.norm()));
    }
    return Measure{worst, "|P(P(A)) - P(A)| and ||P(A)|| - min(P, ||A||)"};
  }});

  // ---------------------------------------------------------------- channels
  for (FrontEndKind kind : {FrontEndKind::ScalarGain, FrontEndKind::ScaledFixedLinear, FrontEndKind::LinearMatrix,
                            FrontEndKind::TanhLinear}) {
    c.push_back({"vjp_finite_difference_" + std::string(to_string(kind)), {"vjp"}, 1e-6, [kind](Rng& rng) {
      double worst = 0.0;
      for (int trial = 0; trial < 20; ++trial) {
        const FrontEnd fe = random_front_end(kind, rng);
        const Vector x = sample_gaussian(rng, fe.input_dim(), 1, 1.0);
        const Vector v = sample_gaussian(rng, fe.output_dim(), 1, 1.0);
        const Vector fd = fd_gradient([&](const Vector& e) { return inner_forward(fe, e, x, v); }, fe.params(), 1e-5);
        worst = std::max(worst, rel_err(fe.param_vjp(x, v), fd));
      }
      return Measure{worst, "max relative error over 20 random (x, v, eta)"};
    }});
  }
  c.push_back({"vjp_batch_linearity", {"vjp"}, 1e-12, [](Rng& rng) {
    double worst = 0.0;
    for (FrontEndKind kind : {FrontEndKind::ScalarGain, FrontEndKind::ScaledFixedLinear,
                              FrontEndKind::LinearMatrix, FrontEndKind::TanhLinear}) {
      const FrontEnd fe = random_front_end(kind, rng);
      const Matrix x = sample_gaussian(rng, 64, fe.input_dim(), 1.0);
      const Matrix v = sample_gaussian(rng, 64, fe.output_dim(), 1.0);
      Vector sum = Vector::Zero(fe.param_count());
      for (Index i = 0; i < 64; ++i) sum += fe.param_vjp(x.row(i).transpose(), v.row(i).transpose());
      worst = std::max(worst, (fe.param_vjp_mean(x, v) - sum / 64.0).cwiseAbs().maxCoeff());
    }
    return Measure{worst, "batched mean VJP minus per-sample average"};
  }});
  c.push_back({"vjp_tanh_small_signal", {"vjp"}, 1e-7, [](Rng& rng) {
    Matrix a = sample_gaussian(rng, 4, 3, 1.0);
    const Vector x = sample_gaussian(rng, 3, 1, 1.0);
    a *= 1e-4 / (a * x).cwiseAbs().maxCoeff();
    const Vector v = sample_gaussian(rng, 4, 1, 1.0);
    const Vector lin = FrontEnd::linear_matrix(a).param_vjp(x, v);
    return Measure{rel_err(FrontEnd::tanh_linear(a).param_vjp(x, v), lin), "||Ax||_inf = 1e-4"};
  }});
  c.push_back({"channel_moments", {"channels"}, 3.0, [](Rng& rng) {
    const Matrix a = sample_gaussian(rng, 4, 3, 0.8);
    const double t = 0.5;
    const FrontEnd fe = FrontEnd::linear_matrix(a);
    const ChannelBatch b = sample_channel(fe, InputDistribution::isotropic(1.0, 3), t, 100000, rng);
    Matrix cov = a * a.transpose();
    cov.diagonal().array() += t;
    const double n = static_cast<double>(b.size());
    double worst = 0.0;
    const Vector mean = b.y.colwise().mean().transpose();
    const Matrix emp = sample_covariance(b.y);
    for (Index i = 0; i < 4; ++i) {
      worst = std::max(worst, std::abs(mean[i]) / std::sqrt(cov(i, i) / n));
      for (Index j = i; j < 4; ++j) {
        const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
        worst = std::max(worst, std::abs(emp(i, j) - cov(i, j)) / se);
      }
    }
    return Measure{worst, "max |z| of output mean and covariance entries, N = 1e5"};
  }});

  // ---------------------------------------------------------------- scores
  c.push_back({"score_mean_zero", {"scores"}, 3.0, [](Rng& rng) {
    const Matrix cov = random_spd(3, rng);
    const ScoreModel s = ScoreModel::analytic_gaussian(cov);
    const Matrix y = sample_gaussian(rng, 100000, 3, 1.0) * cholesky(cov).lower.transpose();
    const Matrix v = s.eval(y);
    const Vector mean = v.colwise().mean().transpose();
    const Vector sd = ((v.rowwise() - mean.transpose()).array().square().colwise().sum() / (1e5 - 1.0)).sqrt();
    return Measure{(mean.array().abs() / (sd.array() / std::sqrt(1e5))).maxCoeff(), "max |z| of mean score"};
  }});
  c.push_back({"stein_identity_exact_score", {"scores"}, 3.0, [](Rng& rng) {
    const Matrix cov = random_spd(3, rng);
    const ScoreModel s = ScoreModel::analytic_gaussian(cov);
    const Matrix y = sample_gaussian(rng, 100000, 3, 1.0) * cholesky(cov).lower.transpose();
    const Vector inner = y.cwiseProduct(s.eval(y)).rowwise().sum();
    const double mean = inner.mean();
    const double se = std::sqrt((inner.array() - mean).square().sum() / (1e5 - 1.0) / 1e5);
    return Measure{std::abs(mean + 3.0) / se, "|mean y^T s(y) + m| / stderr"};
  }});
  c.push_back({"mixture_single_component", {"scores"}, 1e-12, [](Rng& rng) {
    const Matrix a = sample_gaussian(rng, 3, 3, 1.0);
    const Matrix sx = random_spd(3, rng);
    const double t = 0.5;
    const ScoreModel mix = ScoreModel::gaussian_mixture({{1.0, Vector::Zero(3), sx}}, a, Vector(), t);
    const ScoreModel gauss = linear_gaussian_marginal_score(a, sx, t);
    const Matrix y = sample_gaussian(rng, 200, 3, 2.0);
    return Measure{(mix.eval(y) - gauss.eval(y)).cwiseAbs().maxCoeff(), "max |difference|"};
  }});
  c.push_back({"mlp_gradient_check", {"mlp", "scores"}, 1e-5, [](Rng& rng) {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const Index din = 2 + static_cast<Index>(rng.uniform() * 6), h = 4 + static_cast<Index>(rng.uniform() * 12);
      const Index dout = 1 + static_cast<Index>(rng.uniform() * 5);
      MlpNet net({din, h, h, dout}, rng);
      for (auto& l : net.layers()) {
        l.weight = sample_gaussian(rng, l.weight.rows(), l.weight.cols(), 0.5);
        l.bias = sample_gaussian(rng, l.bias.size(), 1, 0.5);
      }
      const Matrix in = sample_gaussian(rng, 7, din, 1.0);
      const Matrix up = sample_gaussian(rng, 7, dout, 1.0);
      const Vector analytic = flatten(net.forward_backward(in, up).param_grads);
      const Vector p0 = net.flat_params();
      MlpNet probe = net;
      const Vector fd = fd_gradient(
          [&](const Vector& p) {
            probe.set_flat_params(p);
            return probe.forward(in).cwiseProduct(up).sum() / 7.0;
          },
          p0, 1e-6);
      worst = std::max(worst, rel_err(analytic, fd));
    }
    return Measure{worst, "max relative error over 10 random nets"};
  }});
  c.push_back({"dsm_shift_invariance", {"dsm", "scores"}, 0.05, [](Rng& rng) {
    DsmConfig cfg;
    cfg.mode = DsmMode::PerturbY;
    cfg.sigma = 0.3;
    cfg.batch = 512;
    const double t = 0.25;
    auto trained_loss = [&](const Vector& shift, std::uint64_t tag) {
      Rng r = rng.substream(tag);
      const auto dist = InputDistribution::mixture({{1.0, shift, Matrix::Identity(2, 2)}});
      const FrontEnd fe = FrontEnd::scalar_gain(2, 1.0);
      MlpNet net({2, 32, 32, 2}, r);
      AdamW opt(net, cfg.optimizer);
      for (int s = 0; s < 1500; ++s) dsm_step(net, sample_channel(fe, dist, t, cfg.batch, r), cfg, opt, r);
      double loss = 0.0;
      for (int s = 0; s < 20; ++s) loss += dsm_loss(net, sample_channel(fe, dist, t, 4096, r), cfg, r);
      return loss / 20.0;
    };
    const double base = trained_loss(Vector::Zero(2), 1);
    const double shifted = trained_loss(Vector::Constant(2, 1.5), 2);
    return Measure{std::abs(shifted - base) / base,
                   "final DSM loss, shift 0 vs 1.5: " + format_double(base) + " vs " + format_double(shifted)};
  }});

  // ---------------------------------------------------------------- gradients
  for (FrontEndKind kind : {FrontEndKind::ScalarGain, FrontEndKind::ScaledFixedLinear, FrontEndKind::LinearMatrix}) {
    c.push_back({"info_gradient_oracle_" + std::string(to_string(kind)), {"gradients"}, 1.0, [kind](Rng& rng) {
      const FrontEnd fe = random_front_end(kind, rng);
      const Matrix sx = random_spd(fe.input_dim(), rng);
      const double t = 0.5;
      const GaussianComponent comp{1.0, Vector::Zero(fe.input_dim()), sx};
      const auto dist = InputDistribution::mixture({comp});
      const ChannelBatch b = sample_channel(fe, dist, t, 100000, rng);
      const GradientEstimate g = info_gradient(fe, linear_gaussian_marginal_score(fe.matrix(), sx, t), b);
      const Vector ref = fd_gradient(
          [&](const Vector& e) { return mi_closed_form_gaussian(fe.with_params(e).matrix(), sx, t); }, fe.params(),
          1e-5);
      return Measure{band_ratio(g, ref, 0.02), "max |est - fd| / max(3 se, 2% |fd|), N = 1e5"};
    }});
  }
  c.push_back({"task_gradient_reduction_T_equals_X", {"gradients"}, 3.0, [](Rng& rng) {
    const FrontEnd fe = FrontEnd::linear_matrix(sample_gaussian(rng, 3, 3, 0.8));
    const double t = 0.5;
    const TaskMap task(Matrix::Identity(3, 3));
    const ChannelBatch b = sample_channel(fe, InputDistribution::isotropic(1.0, 3), t, 100000, rng, &task);
    const ScoreModel cond = ScoreModel::conditional_given_x(fe, t);
    const ScoreModel unc = linear_gaussian_marginal_score(fe.matrix(), Matrix::Identity(3, 3), t);
    const Vector diff = task_info_gradient(fe, cond, unc, b).grad - info_gradient(fe, unc, b).grad;
    const GradientEstimate spread = vjp_estimate(fe, b.x, cond.eval(b.y, &*b.tau));
    return Measure{(diff.array().abs() / spread.stderr_.array()).maxCoeff(), "max |z| of task - plain gradient"};
  }});
  c.push_back({"ib_beta_zero_equals_task", {"gradients", "ib"}, 1e-12, [](Rng& rng) {
    const FrontEnd fe = FrontEnd::linear_matrix(sample_gaussian(rng, 4, 4, 0.8));
    const Matrix w = sample_gaussian(rng, 2, 4, 1.0);
    const TaskMap task(w);
    const Matrix sx = Matrix::Identity(4, 4);
    const ChannelBatch b = sample_channel(fe, InputDistribution::isotropic(1.0, 4), 0.5, 5000, rng, &task);
    const ScoreModel cond = linear_gaussian_task_score(fe.matrix(), w, sx, 0.5);
    const ScoreModel unc = linear_gaussian_marginal_score(fe.matrix(), sx, 0.5);
    const Vector d = ib_gradient(fe, cond, unc, 0.0, b).grad - task_info_gradient(fe, cond, unc, b).grad;
    return Measure{d.cwiseAbs().maxCoeff(), "max |ib(beta=0) - task|"};
  }});
  for (const double beta : {0.0, 0.5}) {
    const std::string name = beta == 0.0 ? "task_gradient_oracle" : "ib_gradient_oracle";
    c.push_back({name, {"gradients"}, 1.0, [beta](Rng& rng) {
      const FrontEnd fe = FrontEnd::linear_matrix(sample_gaussian(rng, 4, 4, 0.6));
      const Matrix w = sample_gaussian(rng, 2, 4, 1.0);
      const TaskMap task(w);
      const Matrix sx = Matrix::Identity(4, 4);
      const double t = 0.5;
      const ChannelBatch b = sample_channel(fe, InputDistribution::isotropic(1.0, 4), t, 200000, rng, &task);
      const ScoreModel cond = linear_gaussian_task_score(fe.matrix(), w, sx, t);
      const ScoreModel unc = linear_gaussian_marginal_score(fe.matrix(), sx, t);
      const GradientEstimate g = ib_gradient(fe, cond, unc, beta, b);
      const Vector ref = fd_gradient(
          [&](const Vector& e) { return ib_objective_closed_form(fe.with_params(e).matrix(), w, sx, t, beta); },
          fe.params(), 1e-5);
      return Measure{band_ratio(g, ref, 0.05), "max |est - fd| / max(3 se, 5% |fd|), N = 2e5"};
    }});
  }

  // ---------------------------------------------------------------- MI
  c.push_back({"fisher_information_gaussian", {"mi"}, 3.0, [](Rng& rng) {
    const Matrix y = sample_gaussian(rng, 100000, 2, std::sqrt(3.0));
    const ScalarEstimate j = fisher_information(ScoreModel::analytic_gaussian(3.0 * Matrix::Identity(2, 2)), y);
    return Measure{std::abs(j.value - 2.0 / 3.0) / j.stderr_, "|J - 2/3| / stderr"};
  }});
  c.push_back({"fisher_integral_scalar", {"mi"}, 0.01, [](Rng&) {
    const Vector grid = log_spaced_grid(0.5);
    const Vector j = (1.0 + grid.array()).inverse();
    const double est = fisher_integral_mi(grid, j, 1);
    const double ref = 0.5 * std::log(3.0);
    return Measure{std::abs(est - ref) / ref, "relative error vs 1/2 log 3"};
  }});
  c.push_back({"path_integral_consistency", {"mi"}, 0.02, [](Rng& rng) {
    ExperimentConfig cfg = ExperimentConfig::defaults("e1_scalar_gradient");
    cfg.set_seed(rng.next_u64());
    const E1Result r = run_e1(cfg);
    return Measure{(r.mi_path - r.mi_analytic).cwiseAbs().maxCoeff(), "max |path MI - closed form|, 61 points"};
  }});
  c.push_back({"task_mi_data_processing", {"mi"}, 1e-9, [](Rng& rng) {
    const Matrix a = sample_gaussian(rng, 5, 5, 0.8);
    const Matrix sx = random_spd(5, rng);
    return Measure{std::abs(task_mi_closed_form(a, Matrix::Identity(5, 5), sx, 0.5) - mi_closed_form_gaussian(a, sx, 0.5)),
                   "|I(T;Y) at W = I - I(X;Y)|"};
  }});
  c.push_back({"closed_form_singular_sum", {"mi"}, 1e-10, [](Rng& rng) {
    const Matrix a = sample_gaussian(rng, 8, 8, 1.0);
    const double alpha = 0.7;
    return Measure{std::abs(mi_singular_sum(a, alpha, 1.0, 0.5) - mi_closed_form_linear(alpha * a, 1.0, 0.5)),
                   "log-det vs singular-value sum"};
  }});
  c.push_back({"optimum_uniform_allocation", {"mi"}, 1e-9, [](Rng&) {
    const double p = 5.0;
    const Matrix a = (p / std::sqrt(8.0)) * Matrix::Identity(8, 8);
    return Measure{std::abs(optimum_mi_frobenius(8, 1.0, 0.5, p) - mi_closed_form_linear(a, 1.0, 0.5)),
                   "I* vs MI at (P / sqrt m) I"};
  }});

  // ---------------------------------------------------------------- KDE
  c.push_back({"kde_entropy_1d", {"kde"}, 0.03, [](Rng& rng) {
    const double h = kde_loo_entropy(sample_gaussian(rng, 10000, 1, 1.0)).entropy;
    return Measure{std::abs(h - 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)), "N = 1e4"};
  }});
  c.push_back({"kde_entropy_2d", {"kde"}, 0.05, [](Rng& rng) {
    const double h = kde_loo_entropy(sample_gaussian(rng, 10000, 2, 1.0)).entropy;
    return Measure{std::abs(h - std::log(2.0 * std::numbers::pi * std::numbers::e)), "N = 1e4"};
  }});
  c.push_back({"kde_entropy_affine_shift", {"kde"}, 0.02, [](Rng& rng) {
    const Matrix u = sample_gaussian(rng, 5000, 2, 1.0);
    Matrix s(2, 2);
    s << 2.0, 0.5, -0.3, 1.5;
    const double h0 = kde_loo_entropy(u).entropy;
    const double h1 = kde_loo_entropy(u * s.transpose()).entropy;
    return Measure{std::abs(h1 - h0 - std::log(std::abs(s.determinant()))), "H(S u) - H(u) - log|det S|"};
  }});
  c.push_back({"kde_mi_linear_gaussian", {"kde", "mi"}, 0.1, [](Rng& rng) {
    const Matrix a = sample_gaussian(rng, 4, 4, 0.6);
    const double t = 0.5;
    const ChannelBatch b =
        sample_channel(FrontEnd::linear_matrix(a), InputDistribution::isotropic(1.0, 4), t, 20000, rng);
    const double est = mi_kde(b.y, t).mi, ref = mi_closed_form_linear(a, 1.0, t);
    return Measure{std::abs(est - ref), "KDE " + format_double(est) + " vs closed form " + format_double(ref)};
  }});

  // ---------------------------------------------------------------- optimize
  c.push_back({"ascent_determinism", {"optimize"}, 0.0, [](Rng& rng) {
    AscentConfig cfg;
    cfg.iterations = 3;
    cfg.score_steps = 40;
    cfg.estimation_samples = 500;
    cfg.radius = 2.0;
    cfg.dsm.batch = 128;
    cfg.dsm.hidden = 16;
    cfg.seed = rng.next_u64();
    const FrontEnd fe = FrontEnd::linear_matrix(sample_gaussian(rng, 2, 2, 1.0));
    const auto dist = InputDistribution::isotropic(1.0, 2);
    const AscentResult r1 = alternating_optimize(fe, dist, 0.5, nullptr, cfg);
    const AscentResult r2 = alternating_optimize(fe, dist, 0.5, nullptr, cfg);
    double diff = (r1.final_front_end.params() - r2.final_front_end.params()).cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < r1.trace.records.size(); ++i) {
      const auto &a = r1.trace.records[i], &b = r2.trace.records[i];
      diff = std::max({diff, std::abs(a.grad_norm - b.grad_norm), std::abs(a.dsm_loss - b.dsm_loss),
                       std::abs(a.stein_c - b.stein_c), std::abs(a.frob_norm - b.frob_norm)});
    }
    return Measure{diff, "max difference between two identical learned runs"};
  }});
  c.push_back({"oracle_ascent_monotone_feasible", {"optimize", "projection"}, 0.0, [](Rng& rng) {
    AscentConfig cfg;
    cfg.iterations = 30;
    cfg.lr_eta = 0.1;
    cfg.estimation_samples = 20000;
    cfg.radius = 3.0;
    cfg.scores = ScoreSource::Analytic;
    cfg.seed = rng.next_u64();
    const FrontEnd fe = FrontEnd::linear_matrix(random_matrix_with_norm(4, 4, 3.0, rng));
    const auto hook = [](const FrontEnd& f, Index) -> std::vector<Metric> {
      return {{"mi", mi_closed_form_linear(f.matrix(), 1.0, 0.5)}};
    };
    const AscentResult r = alternating_optimize(fe, InputDistribution::isotropic(1.0, 4), 0.5, nullptr, cfg, hook);
    double worst = -1.0;
    double prev = metric(r.trace.initial, "mi");
    for (const auto& rec : r.trace.records) {
      const double cur = metric(rec.metrics, "mi");
      const double allowance = 3.0 * cfg.lr_eta * rec.grad_stderr_norm * rec.grad_norm;
      worst = std::max({worst, prev - cur - allowance, rec.frob_norm - (*cfg.radius + 1e-12)});
      prev = cur;
    }
    return Measure{std::max(worst, 0.0), "MI decrease beyond 3-stderr allowance, or radius excess"};
  }});
  c.push_back({"scalar_ascent_monotone", {"optimize"}, 0.0, [](Rng& rng) {
    AscentConfig cfg;
    cfg.iterations = 50;
    cfg.lr_eta = 0.1;
    cfg.estimation_samples = 20000;
    cfg.scores = ScoreSource::Analytic;
    cfg.seed = rng.next_u64();
    const AscentResult r = alternating_optimize(FrontEnd::scalar_gain(1, 0.2), InputDistribution::isotropic(1.0, 1),
                                                0.5, nullptr, cfg, [](const FrontEnd& f, Index) {
                                                  return std::vector<Metric>{{"alpha", f.params()[0]}};
                                                });
    double decreases = 0.0, prev = 0.2;
    for (const auto& rec : r.trace.records) {
      const double a = metric(rec.metrics, "alpha");
      if (a <= prev) decreases += 1.0;
      prev = a;
    }
    return Measure{decreases, "number of non-increasing alpha steps"};
  }});
  c.push_back({"regularizer_finite_difference", {"optimize"}, 1e-8, [](Rng& rng) {
    const Vector eta = sample_gaussian(rng, 6, 1, 1.0);
    const Regularizer reg{Regularizer::Kind::SquaredFrobenius, 0.3};
    const Vector fd = fd_gradient([&](const Vector& e) { return regularizer_grad(reg, e).value; }, eta, 1e-5);
    return Measure{rel_err(regularizer_grad(reg, eta).grad, fd), "relative error of grad C"};
  }});

  // ---------------------------------------------------------------- harness
  c.push_back({"config_echo_roundtrip", {"cli"}, 0.0, [](Rng&) {
    double mismatches = 0.0;
    for (const auto& id : experiment_ids()) {
      ExperimentConfig cfg = ExperimentConfig::defaults(id);
      cfg.set_seed(99);
      const ExperimentConfig back = ExperimentConfig::parse(id, cfg.echo());
      if (back.values() != cfg.values()) mismatches += 1.0;
    }
    return Measure{mismatches, "experiments whose echoed config does not parse back identically"};
  }});
  c.push_back({"csv_byte_stable", {"cli"}, 0.0, [](Rng& rng) {
    ExperimentConfig cfg = ExperimentConfig::defaults("e1_scalar_gradient");
    cfg.set("alpha_points", "7");
    cfg.set("samples", "2000");
    cfg.set_seed(rng.next_u64());
    const std::string a = e1_table(run_e1(cfg)).str(), b = e1_table(run_e1(cfg)).str();
    return Measure{a == b ? 0.0 : 1.0, "two runs with identical config and seed"};
  }});
  c.push_back({"config_rejects_unknown_key", {"cli"}, 0.0, [](Rng&) {
    ExperimentConfig cfg = ExperimentConfig::defaults("e3_mi_maximize");
    try {
      cfg.set("no_such_key", "1");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigInvalid) return Measure{0.0, "rejected"};
    }
    return Measure{1.0, "unknown key accepted"};
  }});
  return c;
}

bool selected(const Check& c, const std::string& tag) {
  if (tag.empty() || c.name == tag) return true;
  return std::find(c.tags.begin(), c.tags.end(), tag) != c.tags.end();
}

}  // namespace

std::vector<std::string> validation_tags() {
  std::vector<std::string> tags;
  for (const auto& c : build_checks()) {
    for (const auto& t : c.tags) {
      if (std::find(tags.begin(), tags.end(), t) == tags.end()) tags.push_back(t);
    }
  }
  return tags;
}

std::vector<CheckResult> run_validation_suite(const ValidationOptions& options) {
  if (!(options.tolerance_scale >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "tolerance_scale must be >= 0");
  const Rng root = Rng(options.seed).substream("validation");
  std::vector<CheckResult> out;
  for (const auto& c : build_checks()) {
    if (!selected(c, options.tag)) continue;
    CheckResult r;
    r.name = c.name;
    r.tags = c.tags;
    r.threshold = c.threshold * options.tolerance_scale;
    Rng rng = root.substream(c.name);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Measure m = c.run(rng);
      r.measured = m.value;
      r.detail = m.detail;
      r.passed = std::isfinite(m.value) && m.value <= r.threshold;
    } catch (const std::exception& e) {
      r.measured = std::numeric_limits<double>::infinity();
      r.detail = std::string("exception: ") + e.what();
      r.passed = false;
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::ConfigInvalid, "no validation check matches '" + options.tag + "'");
  return out;
}

std::string validation_report_json(const std::vector<CheckResult>& results, const ValidationOptions& options) {
  nlohmann::json j;
  j["seed"] = options.seed;
  j["tag"] = options.tag;
  j["tolerance_scale"] = options.tolerance_scale;
  std::size_t failed = 0;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& r : results) {
    failed += r.passed ? 0 : 1;
    checks.push_back({{"name", r.name},
                      {"tags", r.tags},
                      {"measured", std::isfinite(r.measured) ? nlohmann::json(r.measured) : nlohmann::json("inf")},
                      {"threshold", r.threshold},
                      {"passed", r.passed},
                      {"detail", r.detail},
                      {"seconds", r.seconds}});
  }
  j["checks"] = checks;
  j["total"] = results.size();
  j["failed"] = failed;
  return j.dump(2);
}

}  // namespace infograd
