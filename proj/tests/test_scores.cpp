#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "infograd/errors.hpp"
#include "infograd/scores.hpp"
#include "oracles.hpp"

using namespace infograd;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

double net_inner(const MlpNet& net, const Matrix& in, const Matrix& up) {
  return (net.forward(in).array() * up.array()).sum() / static_cast<double>(in.rows());
}

// A batch whose y rows are the given samples; w = y so both perturbation modes see them.
ChannelBatch batch_from(const Matrix& y, double t) {
  ChannelBatch b;
  b.x = y;
  b.w = y;
  b.z = Matrix::Zero(y.rows(), y.cols());
  b.y = y;
  b.t = t;
  return b;
}

}  // namespace

TEST_CASE("analytic gaussian score") {
  ScoreModel s = ScoreModel::analytic_gaussian(Matrix::Identity(2, 2));
  Matrix y(1, 2);
  y << 2, -1;
  Matrix want(1, 2);
  want << -2, 1;
  CHECK(s.eval(y) == want);
  CHECK(!s.is_conditional());
  CHECK(code_of([&] { s.eval(Matrix::Ones(1, 3)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("single-component mixture reduces to the gaussian score") {
  Rng rng(3);
  const double sigma2 = 0.8, t = 0.5;
  GaussianComponent c{1.0, Vector::Zero(3), sigma2 * Matrix::Identity(3, 3)};
  const ScoreModel mix = ScoreModel::gaussian_mixture({c}, Matrix::Identity(3, 3), Vector(), t);
  const Matrix y = sample_gaussian(rng, 50, 3, 1.0);
  CHECK((mix.eval(y) + y / (sigma2 + t)).cwiseAbs().maxCoeff() < 1e-12);

  const Matrix a = sample_gaussian(rng, 3, 3, 1.0);
  const ScoreModel mix_a = ScoreModel::gaussian_mixture({c}, a, Vector(), t);
  const ScoreModel gauss = linear_gaussian_marginal_score(a, sigma2 * Matrix::Identity(3, 3), t);
  CHECK((mix_a.eval(y) - gauss.eval(y)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mixture score matches the gradient of the mixture log-density") {
  GaussianComponent c1{0.4, Vector::Constant(2, 1.5), 0.3 * Matrix::Identity(2, 2)};
  GaussianComponent c2{0.6, Vector::Constant(2, -1.0), Matrix::Identity(2, 2)};
  const double t = 0.2;
  const ScoreModel mix = ScoreModel::gaussian_mixture({c1, c2}, Matrix::Identity(2, 2), Vector(), t);
  auto logp = [&](const Vector& y) {
    double p = 0.0;
    for (const auto* c : {&c1, &c2}) {
      const Matrix cov = c->cov + t * Matrix::Identity(2, 2);
      const Vector d = y - c->mean;
      p += c->weight * std::exp(-0.5 * d.dot(cov.inverse() * d)) / (2.0 * M_PI * std::sqrt(cov.determinant()));
    }
    return std::log(p);
  };
  Rng rng(5);
  const Matrix y = sample_gaussian(rng, 10, 2, 1.5);
  const Matrix s = mix.eval(y);
  for (Index i = 0; i < y.rows(); ++i) {
    const Vector fd = oracle::fd_gradient(logp, y.row(i).transpose());
    CHECK(oracle::rel_err(s.row(i).transpose(), fd) < 1e-6);
  }
}

TEST_CASE("conditional score given x") {
  Rng rng(7);
  const auto fe = FrontEnd::linear_matrix(sample_gaussian(rng, 3, 3, 1.0));
  const ChannelBatch b = sample_channel(fe, InputDistribution::isotropic(1.0, 3), 0.5, 20, rng);
  const ScoreModel s = ScoreModel::conditional_given_x(fe, 0.5);
  CHECK(s.is_conditional());
  CHECK((s.eval(b.y, &b.x) + b.z / 0.5).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(code_of([&] { s.eval(b.y); }) == ErrorCode::MissingCondition);
}

TEST_CASE("linear gaussian task score matches the joint-density gradient") {
  Rng rng(9);
  const Matrix a = sample_gaussian(rng, 3, 4, 1.0);
  const Matrix w = sample_gaussian(rng, 2, 4, 1.0);
  const Matrix sx = Matrix::Identity(4, 4);
  const double t = 0.5;
  const ScoreModel s = linear_gaussian_task_score(a, w, sx, t);
  // grad_y log p(y, tau) for the joint Gaussian, by finite differences.
  Matrix joint(5, 5);
  joint << a * sx * a.transpose() + t * Matrix::Identity(3, 3), a * sx * w.transpose(), w * sx * a.transpose(),
      w * sx * w.transpose();
  const Matrix prec = joint.inverse();
  Matrix y = sample_gaussian(rng, 5, 3, 1.0), tau = sample_gaussian(rng, 5, 2, 1.0);
  const Matrix got = s.eval(y, &tau);
  for (Index i = 0; i < 5; ++i) {
    auto logp = [&](const Vector& yy) {
      Vector z(5);
      z << yy, tau.row(i).transpose();
      return -0.5 * z.dot(prec * z);
    };
    CHECK(oracle::rel_err(got.row(i).transpose(), oracle::fd_gradient(logp, y.row(i).transpose())) < 1e-6);
  }

  const ScoreModel zero_task = linear_gaussian_task_score(a, Matrix::Zero(2, 4), sx, t);
  const ScoreModel marg = linear_gaussian_marginal_score(a, sx, t);
  CHECK((zero_task.eval(y, &tau) - marg.eval(y)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("exact scores have zero mean and satisfy the Stein identity") {
  Rng rng(11);
  const Matrix a = sample_gaussian(rng, 4, 4, 0.7);
  const auto fe = FrontEnd::linear_matrix(a);
  const ChannelBatch b = sample_channel(fe, InputDistribution::isotropic(1.0, 4), 0.5, 100000, rng);
  const ScoreModel s = linear_gaussian_marginal_score(a, Matrix::Identity(4, 4), 0.5);
  const Matrix sy = s.eval(b.y);
  const double n = static_cast<double>(sy.rows());
  for (Index j = 0; j < 4; ++j) {
    const double mean = sy.col(j).mean();
    const double se = std::sqrt((sy.col(j).array() - mean).square().sum() / (n - 1) / n);
    CHECK(std::abs(mean) <= 3.0 * se);
  }
  const Vector ip = (b.y.array() * sy.array()).rowwise().sum();
  const double se = std::sqrt((ip.array() - ip.mean()).square().sum() / (n - 1) / n);
  CHECK(std::abs(ip.mean() + 4.0) <= 3.0 * se);
}

TEST_CASE("mlp gradients match central differences") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Index din = 2 + trial % 3, h = 4 + trial, dout = 1 + trial % 4;
    MlpNet net({din, h, h, dout}, rng);
    for (auto& layer : net.layers()) layer.weight += 0.3 * sample_gaussian(rng, layer.weight.rows(), layer.weight.cols(), 1.0);
    const Matrix in = sample_gaussian(rng, 7, din, 1.0);
    const Matrix up = sample_gaussian(rng, 7, dout, 1.0);
    const MlpNet::Pass pass = net.forward_backward(in, up);
    CHECK(pass.output.isApprox(net.forward(in), 1e-14));

    const Vector theta = net.flat_params();
    auto f = [&](const Vector& p) {
      MlpNet probe = net;
      probe.set_flat_params(p);
      return net_inner(probe, in, up);
    };
    CHECK(oracle::rel_err(flatten(pass.param_grads), oracle::fd_gradient(f, theta)) <= 1e-5);

    for (Index i = 0; i < in.rows(); ++i) {
      auto fi = [&](const Vector& x) {
        Matrix probe = in;
        probe.row(i) = x.transpose();
        return net_inner(net, probe, up);
      };
      const Vector fd = oracle::fd_gradient(fi, in.row(i).transpose());
      CHECK(oracle::rel_err(pass.input_grads.row(i).transpose(), fd) <= 1e-5);
    }
  }
}

TEST_CASE("zero network outputs zero and bias gradients are the upstream mean") {
  const MlpNet net = MlpNet::zeros({3, 5, 2});
  Rng rng(15);
  const Matrix up = sample_gaussian(rng, 9, 2, 1.0);
  const MlpNet::Pass pass = net.forward_backward(Matrix::Ones(9, 3), up);
  CHECK(pass.output.isZero(0.0));
  CHECK((pass.param_grads.back().bias - up.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-15);

  DenseLayer id{Matrix::Identity(3, 3), Vector::Zero(3)};
  const MlpNet linear(std::vector<DenseLayer>{id});
  const Matrix in = sample_gaussian(rng, 4, 3, 1.0);
  CHECK(linear.forward(in) == in);
}

TEST_CASE("dsm loss at initialization") {
  Rng rng(17);
  const Index m = 3;
  const MlpNet net({m, 16, 16, m}, rng);  // output layer starts at zero
  const ChannelBatch b = batch_from(sample_gaussian(rng, 100000, m, 1.0), 0.5);
  DsmConfig cfg;
  cfg.mode = DsmMode::PerturbY;
  cfg.sigma = 0.2;
  const double loss = dsm_loss(net, b, cfg, rng);
  const double want = m / (cfg.sigma * cfg.sigma);
  // ||eps||^2 / sigma^2 has variance 2m / sigma^4.
  CHECK(std::abs(loss - want) <= 3.0 * std::sqrt(2.0 * m / 100000.0) / (cfg.sigma * cfg.sigma));
}

TEST_CASE("dsm training recovers a smoothed gaussian score") {
  Rng rng(19);
  const Index m = 2;
  DsmConfig cfg;
  cfg.mode = DsmMode::PerturbY;
  cfg.sigma = 0.3;
  cfg.batch = 256;
  cfg.hidden = 32;
  MlpNet net({m, cfg.hidden, cfg.hidden, m}, rng);
  AdamW opt(net, cfg.optimizer);
  for (int s = 0; s < 2000; ++s) dsm_step(net, batch_from(sample_gaussian(rng, cfg.batch, m, 1.0), 0.0), cfg, opt, rng);

  Matrix y = sample_gaussian(rng, 2000, m, 1.0);
  std::vector<double> errs;
  const Matrix got = net.forward(y);
  for (Index i = 0; i < y.rows(); ++i) {
    if (y.row(i).norm() > 2.0) continue;
    const Vector want = -y.row(i).transpose() / (1.0 + cfg.sigma * cfg.sigma);
    errs.push_back((got.row(i).transpose() - want).norm() / want.norm());
  }
  std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
  CHECK(errs[errs.size() / 2] <= 0.10);
}

TEST_CASE("dsm training is deterministic") {
  auto trace = [] {
    Rng rng(21);
    DsmConfig cfg;
    cfg.batch = 64;
    cfg.hidden = 8;
    MlpNet net({2, 8, 8, 2}, rng);
    AdamW opt(net, cfg.optimizer);
    std::vector<double> losses;
    for (int s = 0; s < 30; ++s) {
      losses.push_back(dsm_step(net, batch_from(sample_gaussian(rng, 64, 2, 1.0), 0.0), cfg, opt, rng));
    }
    return losses;
  };
  CHECK(trace() == trace());
}

TEST_CASE("dsm rejects a conditional net without tau") {
  Rng rng(23);
  MlpNet net({3, 4, 4, 2}, rng);
  DsmConfig cfg;
  AdamW opt(net, cfg.optimizer);
  CHECK(code_of([&] { dsm_step(net, batch_from(Matrix::Ones(8, 2), 0.5), cfg, opt, rng); }) ==
        ErrorCode::MissingCondition);
}

TEST_CASE("stein calibration") {
  Rng rng(25);
  const Matrix y = sample_gaussian(rng, 100000, 3, std::sqrt(2.0));
  ScoreModel exact = ScoreModel::analytic_gaussian(2.0 * Matrix::Identity(3, 3));
  CHECK(std::abs(stein_calibrate(exact, y) - 1.0) <= 0.03);

  ScoreModel doubled = ScoreModel::analytic_gaussian(1.0 * Matrix::Identity(3, 3));  // 2x the exact score
  const double c = stein_calibrate(doubled, y);
  CHECK(std::abs(c - 0.5) <= 0.015);
  CHECK(doubled.calibration() == c);
  CHECK(doubled.eval(y.topRows(5)).isApprox(c * doubled.eval_raw(y.topRows(5)), 1e-15));

  ScoreModel zero = ScoreModel::mlp(MlpNet::zeros({3, 4, 3}));
  CHECK(code_of([&] { stein_calibrate(zero, y); }) == ErrorCode::DegenerateDenominator);
  CHECK(code_of([&] { stein_calibrate(exact, y.topRows(50)); }) == ErrorCode::DegenerateSample);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(27);
  MlpNet net({5, 6, 6, 3}, rng);
  for (auto& layer : net.layers()) layer.weight += sample_gaussian(rng, layer.weight.rows(), layer.weight.cols(), 0.2);
  ScoreModel model = ScoreModel::conditional_mlp(net, 2);
  model.set_calibration(0.8125);
  DsmConfig cfg;
  cfg.mode = DsmMode::PerturbW;
  cfg.steps = 200;

  const auto dir = std::filesystem::temp_directory_path() / "infograd_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "s.txt", model, cfg);
  const ScoreCheckpoint back = load_checkpoint(dir / "s.txt");
  CHECK(back.model.condition_dim() == 2);
  CHECK(back.model.calibration() == 0.8125);
  CHECK(back.dsm.mode == DsmMode::PerturbW);
  CHECK(back.dsm.steps == 200);
  const Matrix y = sample_gaussian(rng, 4, 3, 1.0), tau = sample_gaussian(rng, 4, 2, 1.0);
  CHECK(back.model.eval(y, &tau) == model.eval(y, &tau));

  std::ofstream(dir / "bad.txt") << "not-a-checkpoint\n";
  CHECK(code_of([&] { load_checkpoint(dir / "bad.txt"); }) == ErrorCode::Io);
  std::filesystem::remove_all(dir);
}
