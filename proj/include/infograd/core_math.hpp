#pragma once

// Dense linear algebra, quadrature, sampling and projection primitives.
//
// Sample batches are row-major B x dim matrices: one sample per row.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string_view>

#include "infograd/errors.hpp"

namespace infograd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kOracleRidge = 1e-10;
inline constexpr double kSampleRidge = 1e-8;

void require_finite(const Matrix& m, std::string_view what);
void require_finite(const Vector& v, std::string_view what);
void require_cols(const Matrix& m, Index cols, std::string_view what);

// 64-bit FNV-1a; stable across platforms, used for stream derivation and config hashes.
std::uint64_t stable_hash(std::string_view text) noexcept;

// Seeded, splittable generator. Sub-streams are derived by hashing (seed, tag), so
// draws in one phase never shift the stream consumed by another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng substream(std::string_view tag) const { return Rng(mix(seed_ ^ stable_hash(tag))); }
  Rng substream(std::uint64_t id) const { return Rng(mix(seed_ + 0x9e3779b97f4a7c15ULL * (id + 1))); }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  static std::uint64_t mix(std::uint64_t x) noexcept {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Cholesky factor of a symmetric positive-definite matrix.
struct PsdFactor {
  Matrix lower;
  double log_det = 0.0;

  Index dim() const noexcept { return lower.rows(); }
  Matrix reconstruct() const { return lower * lower.transpose(); }
};

PsdFactor cholesky(const Matrix& m, double ridge = kOracleRidge);

// Solves M X = B for the matrix M that produced `factor`; B is dim x k.
Matrix solve_psd(const PsdFactor& factor, const Matrix& b);
// Row-batched variant: each row r of `rows` is replaced by M^{-1} r.
Matrix solve_psd_rows(const PsdFactor& factor, const Matrix& rows);

Vector singular_values(const Matrix& a);

double frobenius_norm(const Matrix& a);
Matrix frobenius_project(const Matrix& a, double radius);

// out[0] = 0, out[k] = out[k-1] + (y[k-1] + y[k]) (x[k] - x[k-1]) / 2.
Vector trapezoid_cumulative(const Vector& xs, const Vector& ys);

Matrix sample_gaussian(Rng& rng, Index rows, Index dim, double scale);

struct Whitening {
  Matrix whitened;
  // -1/2 log det(C + ridge I); H(samples) = H(whitened) - log_det_transform.
  double log_det_transform = 0.0;
  Vector mean;
  Matrix lower;  // Cholesky factor of the (ridged) sample covariance
};

Whitening whiten(const Matrix& samples, double ridge = kSampleRidge);

Matrix sample_covariance(const Matrix& samples);

double log_sum_exp(const Eigen::Ref<const Vector>& values);

}  // namespace infograd
