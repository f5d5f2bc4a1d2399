#include <doctest.h>

#include <cmath>

#include "infograd/core_math.hpp"
#include "infograd/errors.hpp"
#include "oracles.hpp"

using namespace infograd;

namespace {

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("cholesky log-determinants") {
  const PsdFactor id = cholesky(Matrix::Identity(3, 3), 0.0);
  CHECK(id.lower.isIdentity(0.0));
  CHECK(id.log_det == 0.0);
  CHECK(cholesky(mat2(4, 0, 0, 9), 0.0).log_det == doctest::Approx(oracle::kLog36).epsilon(1e-12));
  CHECK(cholesky(mat2(2, 1, 1, 2), 0.0).log_det == doctest::Approx(oracle::kLog3).epsilon(1e-12));
}

TEST_CASE("cholesky rejects indefinite and asymmetric input") {
  CHECK(code_of([] { cholesky(mat2(1, 2, 2, 1), 0.0); }) == ErrorCode::NotPositiveDefinite);
  CHECK(code_of([] { cholesky(mat2(1, 0.5, 0, 1), 0.0); }) == ErrorCode::NotPositiveDefinite);
  CHECK(code_of([] { cholesky(Matrix::Zero(2, 2), 0.0); }) == ErrorCode::NotPositiveDefinite);
  CHECK(code_of([] { cholesky(Matrix::Ones(2, 3)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("solve_psd") {
  const Matrix b = Matrix::Random(3, 2);
  CHECK(solve_psd(cholesky(Matrix::Identity(3, 3), 0.0), b).isApprox(b, 1e-14));

  Matrix rhs(2, 1);
  rhs << 4, 9;
  const Matrix x = solve_psd(cholesky(mat2(4, 0, 0, 9), 0.0), rhs);
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));

  Rng rng(7);
  const Matrix g = sample_gaussian(rng, 5, 5, 1.0);
  const Matrix spd = g * g.transpose() + 0.5 * Matrix::Identity(5, 5);
  const Matrix b5 = sample_gaussian(rng, 5, 3, 1.0);
  const Matrix x5 = solve_psd(cholesky(spd, 0.0), b5);
  CHECK((spd * x5 - b5).norm() / b5.norm() < 1e-8);

  const Matrix rows = solve_psd_rows(cholesky(spd, 0.0), b5.transpose());
  CHECK(rows.isApprox(x5.transpose(), 1e-12));

  CHECK(code_of([&] { solve_psd(cholesky(spd, 0.0), Matrix::Ones(4, 1)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("singular values") {
  CHECK(singular_values(Matrix::Identity(3, 3)).isApprox(Vector::Ones(3)));
  Vector d(2);
  d << 3, 2;
  CHECK(singular_values(Matrix(d.asDiagonal())).isApprox(d));

  const auto [l1, l2] = oracle::sym2x2_eigen(2, 1, 1);  // A A^T for [[1,1],[0,1]]
  const Vector s = singular_values(mat2(1, 1, 0, 1));
  CHECK(s[0] == doctest::Approx(std::sqrt(l1)).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(std::sqrt(l2)).epsilon(1e-12));
  CHECK(s[0] == doctest::Approx(oracle::kGolden).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(oracle::kGoldenConj).epsilon(1e-12));

  Rng rng(3);
  const Matrix a = sample_gaussian(rng, 4, 7, 1.0);
  const Vector sv = singular_values(a);
  CHECK(sv.size() == 4);
  CHECK(std::abs(sv.squaredNorm() - a.squaredNorm()) / a.squaredNorm() < 1e-8);
  for (Index i = 1; i < sv.size(); ++i) CHECK(sv[i] <= sv[i - 1]);
}

TEST_CASE("frobenius projection") {
  Matrix a(1, 2);
  a << 3, 4;
  const Matrix p = frobenius_project(a, 1.0);
  CHECK(p(0, 0) == doctest::Approx(0.6));
  CHECK(p(0, 1) == doctest::Approx(0.8));

  Rng rng(11);
  Matrix big = sample_gaussian(rng, 3, 3, 1.0);
  big *= 10.0 / big.norm();
  CHECK(frobenius_project(big, 5.0).isApprox(0.5 * big, 1e-14));
  Matrix small = big * 0.3;
  CHECK(frobenius_project(small, 5.0) == small);
  const Matrix once = frobenius_project(big, 5.0);
  CHECK(frobenius_project(once, 5.0) == once);
  CHECK(frobenius_norm(once) <= 5.0 + 1e-12);
}

TEST_CASE("trapezoid_cumulative") {
  Vector x2(2), y2(2);
  x2 << 0, 1;
  y2 << 0, 1;
  const Vector c2 = trapezoid_cumulative(x2, y2);
  CHECK(c2[0] == 0.0);
  CHECK(c2[1] == doctest::Approx(0.5));

  Vector x3(3);
  x3 << 0, 1, 2;
  const Vector c3 = trapezoid_cumulative(x3, Vector::Ones(3));
  CHECK(c3[1] == doctest::Approx(1.0));
  CHECK(c3[2] == doctest::Approx(2.0));

  const Vector xs = Vector::LinSpaced(101, 0.0, 1.0);
  const Vector ys = xs.array().square();
  CHECK(trapezoid_cumulative(xs, ys)[100] == doctest::Approx(oracle::kTrapezoidX2).epsilon(1e-9));

  Vector bad(3);
  bad << 0, 2, 1;
  CHECK(code_of([&] { trapezoid_cumulative(bad, Vector::Ones(3)); }) == ErrorCode::NonMonotonicGrid);
  CHECK(code_of([&] { trapezoid_cumulative(x3, Vector::Ones(2)); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("trapezoid is additive and linear") {
  Rng rng(5);
  const Vector xs = Vector::LinSpaced(31, -1.0, 2.0);
  const Vector f = sample_gaussian(rng, 31, 1, 1.0).col(0);
  const Vector g = sample_gaussian(rng, 31, 1, 1.0).col(0);
  const Vector lhs = trapezoid_cumulative(xs, 2.0 * f - 3.0 * g);
  const Vector rhs = 2.0 * trapezoid_cumulative(xs, f) - 3.0 * trapezoid_cumulative(xs, g);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample_gaussian") {
  Rng zero(1);
  CHECK(sample_gaussian(zero, 4, 3, 0.0).isZero(0.0));

  Rng rng(2024);
  const Matrix s = sample_gaussian(rng, 100000, 1, 1.0);
  const double var = (s.array() - s.mean()).square().sum() / (s.rows() - 1);
  CHECK(std::abs(var - 1.0) < 0.02);

  Rng a(99), b(99);
  CHECK(sample_gaussian(a, 10, 3, 2.0) == sample_gaussian(b, 10, 3, 2.0));
}

TEST_CASE("rng substreams are independent of parent consumption") {
  Rng parent(42);
  const Rng before = parent.substream("phase1");
  parent.normal();
  parent.normal();
  Rng x = before, y = parent.substream("phase1");
  CHECK(x.next_u64() == y.next_u64());
  Rng p = Rng(42).substream("phase1"), q = Rng(42).substream("phase2");
  CHECK(p.next_u64() != q.next_u64());
}

TEST_CASE("whiten") {
  Rng rng(8);
  const Matrix white = sample_gaussian(rng, 200000, 2, 1.0);
  CHECK(std::abs(whiten(white).log_det_transform) < 0.01);

  const Matrix scaled = 3.0 * sample_gaussian(rng, 200000, 2, 1.0);
  const Whitening w = whiten(scaled);
  CHECK(w.log_det_transform == doctest::Approx(oracle::kMinusLog9).epsilon(0.005));
  const Matrix cov = sample_covariance(w.whitened);
  CHECK((cov - Matrix::Identity(2, 2)).norm() < 1e-6);

  CHECK(code_of([] { whiten(Matrix::Ones(2, 2)); }) == ErrorCode::DegenerateSample);
}

TEST_CASE("log_sum_exp") {
  Vector v(3);
  v << 1000.0, 1000.0, -std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
}
