#include <doctest.h>

#include "infograd/errors.hpp"
#include "infograd/optimize.hpp"
#include "oracles.hpp"

using namespace infograd;

namespace {

AscentConfig analytic_config(Index iterations, double lr, Index samples) {
  AscentConfig cfg;
  cfg.iterations = iterations;
  cfg.lr_eta = lr;
  cfg.estimation_samples = samples;
  cfg.scores = ScoreSource::Analytic;
  cfg.seed = 5;
  return cfg;
}

AscentConfig tiny_learned_config() {
  AscentConfig cfg;
  cfg.iterations = 3;
  cfg.score_steps = 40;
  cfg.estimation_samples = 500;
  cfg.radius = 2.0;
  cfg.dsm.batch = 128;
  cfg.dsm.hidden = 16;
  cfg.dsm.sigma = 0.2;
  cfg.seed = 99;
  return cfg;
}

MetricHook closed_form_hook(double sigma2, double t) {
  return [=](const FrontEnd& fe, Index) -> std::vector<Metric> {
    return {{"mi", mi_closed_form_linear(fe.matrix(), sigma2, t)}};
  };
}

}  // namespace

TEST_CASE("projected ascent step") {
  Vector eta(2);
  eta << 3, 4;
  CHECK(projected_ascent_step(eta, Vector::Zero(2), 0.7, 5.0) == eta);
  CHECK(projected_ascent_step(eta, eta, 1.0, 5.0).isApprox(eta, 1e-15));
  CHECK(projected_ascent_step(eta, eta / 5.0, 5.0, 5.0).isApprox(eta, 1e-15));
  CHECK(projected_ascent_step(eta, eta, 1.0, std::nullopt) == 2.0 * eta);
  CHECK_THROWS_AS(projected_ascent_step(eta, Vector::Zero(3), 1.0, 5.0), Error);
}

TEST_CASE("regularizer") {
  const Regularizer sq{Regularizer::Kind::SquaredFrobenius, 0.1};
  const RegularizerValue z = regularizer_grad(sq, Vector::Zero(2));
  CHECK(z.value == 0.0);
  CHECK(z.grad.isZero(0.0));
  Vector eta(2);
  eta << 1, 2;
  const RegularizerValue r = regularizer_grad(sq, eta);
  CHECK(r.value == 5.0);
  CHECK(r.grad == Vector(2.0 * eta));
  CHECK(regularizer_grad(Regularizer{}, eta).grad.isZero(0.0));

  Rng rng(3);
  const Vector e = sample_gaussian(rng, 6, 1, 1.0).col(0);
  const Vector fd = oracle::fd_gradient([&](const Vector& v) { return regularizer_grad(sq, v).value; }, e, 1e-4);
  CHECK(oracle::rel_err(regularizer_grad(sq, e).grad, fd) <= 1e-8);
}

TEST_CASE("zero iterations leave the front-end unchanged") {
  const auto fe = FrontEnd::scalar_gain(2, 0.4);
  AscentConfig cfg = analytic_config(0, 0.1, 100);
  const AscentResult r = alternating_optimize(fe, InputDistribution::isotropic(1.0, 2), 0.5, nullptr, cfg);
  CHECK(r.trace.records.empty());
  CHECK(r.final_front_end.params() == fe.params());
  CHECK(!r.truncated);
}

TEST_CASE("scalar ascent with the exact score increases the gain") {
  const auto fe = FrontEnd::scalar_gain(1, 0.3);
  const AscentResult r =
      alternating_optimize(fe, InputDistribution::isotropic(1.0, 1), 0.5, nullptr, analytic_config(50, 0.1, 20000));
  REQUIRE(r.trace.records.size() == 50);
  double prev = 0.3;
  for (const auto& rec : r.trace.records) {
    CHECK(rec.frob_norm > prev);
    prev = rec.frob_norm;
  }
}

TEST_CASE("matrix ascent with exact scores approaches the optimum") {
  Rng rng(7);
  const auto fe = FrontEnd::linear_matrix(random_matrix_with_norm(8, 8, 5.0, rng));
  AscentConfig cfg = analytic_config(100, 0.05, 50000);
  cfg.radius = 5.0;
  const AscentResult r =
      alternating_optimize(fe, InputDistribution::isotropic(1.0, 8), 0.5, nullptr, cfg, closed_form_hook(1.0, 0.5));
  double best = 0.0;
  for (const auto& rec : r.trace.records) {
    best = std::max(best, rec.metrics.front().value);
    CHECK(rec.frob_norm <= 5.0 + 1e-12);
  }
  CHECK(best >= 0.98 * oracle::kIStar);
}

TEST_CASE("oracle ascent does not decrease the objective beyond noise") {
  Rng rng(9);
  const auto fe = FrontEnd::linear_matrix(random_matrix_with_norm(4, 4, 1.0, rng));
  AscentConfig cfg = analytic_config(30, 0.05, 100000);
  cfg.radius = 3.0;
  const AscentResult r =
      alternating_optimize(fe, InputDistribution::isotropic(1.0, 4), 0.5, nullptr, cfg, closed_form_hook(1.0, 0.5));
  double prev = mi_closed_form_linear(fe.matrix(), 1.0, 0.5);
  for (const auto& rec : r.trace.records) {
    const double cur = rec.metrics.front().value;
    // first-order size of a 3-sigma gradient error after one step
    const double slack = 3.0 * cfg.lr_eta * rec.grad_stderr_norm * rec.grad_norm;
    CHECK(cur >= prev - slack);
    prev = cur;
  }
}

TEST_CASE("ib with beta zero follows the task-MI ascent exactly") {
  Rng rng(11);
  const auto dist = InputDistribution::isotropic(1.0, 4);
  const TaskMap task(sample_gaussian(rng, 2, 4, 1.0));
  const auto fe = FrontEnd::linear_matrix(random_matrix_with_norm(4, 4, 2.0, rng));
  AscentConfig cfg = analytic_config(5, 0.05, 2000);
  cfg.radius = 5.0;
  cfg.mode = AscentMode::TaskMI;
  const AscentResult task_run = alternating_optimize(fe, dist, 0.5, &task, cfg);
  cfg.mode = AscentMode::IB;
  cfg.beta = 0.0;
  const AscentResult ib_run = alternating_optimize(fe, dist, 0.5, &task, cfg);
  CHECK(task_run.final_front_end.params() == ib_run.final_front_end.params());

  cfg.mode = AscentMode::TaskMI;
  CHECK_THROWS_AS(alternating_optimize(fe, dist, 0.5, nullptr, cfg), Error);
}

TEST_CASE("learned ascent is reproducible and feasible") {
  Rng rng(13);
  const auto dist = InputDistribution::isotropic(1.0, 3);
  const auto fe = FrontEnd::linear_matrix(random_matrix_with_norm(3, 3, 1.0, rng));
  const AscentConfig cfg = tiny_learned_config();
  const AscentResult a = alternating_optimize(fe, dist, 0.5, nullptr, cfg);
  const AscentResult b = alternating_optimize(fe, dist, 0.5, nullptr, cfg);
  REQUIRE(a.trace.records.size() == 3);
  REQUIRE(b.trace.records.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& x = a.trace.records[i];
    const auto& y = b.trace.records[i];
    CHECK(x.grad_norm == y.grad_norm);
    CHECK(x.dsm_loss == y.dsm_loss);
    CHECK(x.stein_c == y.stein_c);
    CHECK(x.frob_norm == y.frob_norm);
    CHECK(x.frob_norm <= 2.0 + 1e-12);
  }
  CHECK(a.final_front_end.params() == b.final_front_end.params());
}

TEST_CASE("config validation") {
  const auto fe = FrontEnd::scalar_gain(1, 1.0);
  const auto dist = InputDistribution::isotropic(1.0, 1);
  AscentConfig cfg = analytic_config(1, 0.1, 100);
  cfg.lr_eta = 0.0;
  CHECK_THROWS_AS(alternating_optimize(fe, dist, 0.5, nullptr, cfg), Error);
  cfg = analytic_config(1, 0.1, 100);
  cfg.beta = -1.0;
  CHECK_THROWS_AS(alternating_optimize(fe, dist, 0.5, nullptr, cfg), Error);
  cfg = analytic_config(1, 0.1, 100);
  cfg.regularizer.lambda = -0.5;
  CHECK_THROWS_AS(alternating_optimize(fe, dist, 0.5, nullptr, cfg), Error);
}

TEST_CASE("mode and source names round trip") {
  for (auto m : {AscentMode::PlainMI, AscentMode::TaskMI, AscentMode::IB}) CHECK(parse_ascent_mode(to_string(m)) == m);
  for (auto s : {ScoreSource::Analytic, ScoreSource::Learned}) CHECK(parse_score_source(to_string(s)) == s);
  CHECK_THROWS_AS(parse_ascent_mode("bogus"), Error);
}

TEST_CASE("kde monitor reports on schedule") {
  const auto dist = InputDistribution::isotropic(1.0, 2);
  const MetricHook hook = kde_monitor(dist, 0.5, 500, 5, 12, 1);
  const auto fe = FrontEnd::linear_matrix(Matrix::Identity(2, 2));
  CHECK(hook(fe, 3).empty());
  CHECK(hook(fe, 5).size() == 2);
  CHECK(hook(fe, 12).size() == 2);
  CHECK(hook(fe, 10).front().value == hook(fe, 10).front().value);
}
