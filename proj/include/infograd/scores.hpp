#pragma once

// Score models s(y) ~ grad_y log p(y), analytic and learned, plus denoising score
// matching (DSM) training, Stein calibration and the checkpoint container.

#include <filesystem>
#include <string_view>
#include <variant>
#include <vector>

#include "infograd/channels.hpp"
#include "infograd/mlp.hpp"

namespace infograd {

namespace score_kinds {

// -Sigma^{-1} (y - mean)
struct AnalyticGaussian {
  PsdFactor cov;
  Vector mean;
};

// Score of the Gaussian mixture sum_k pi_k N(A mu_k + b, A Sigma_k A^T + t I).
struct GaussianMixture {
  std::vector<double> log_weights;
  std::vector<Vector> means;
  std::vector<PsdFactor> covs;
};

// s(y | x) = -(y - f(x)) / t; the condition is the clean input x.
struct ConditionalGivenX {
  FrontEnd front_end;
  double t;
};

// s(y | tau) = -Sigma^{-1} (y - G tau - b): conditional score of a jointly Gaussian (Y, T).
struct ConditionalLinearGaussian {
  PsdFactor cov;
  Matrix gain;  // m x k
  Vector offset;
};

struct Mlp {
  MlpNet net;
};

// Network input is the concatenation [y, tau].
struct ConditionalMlp {
  MlpNet net;
  Index condition_dim;
};

}  // namespace score_kinds

class ScoreModel {
 public:
  using Kind = std::variant<score_kinds::AnalyticGaussian, score_kinds::GaussianMixture,
                            score_kinds::ConditionalGivenX, score_kinds::ConditionalLinearGaussian,
                            score_kinds::Mlp, score_kinds::ConditionalMlp>;

  static ScoreModel analytic_gaussian(const Matrix& cov, Vector mean = Vector());
  static ScoreModel analytic_gaussian(PsdFactor cov, Vector mean);
  static ScoreModel gaussian_mixture(const std::vector<GaussianComponent>& input_components,
                                     const Matrix& a, const Vector& b, double t);
  static ScoreModel conditional_given_x(FrontEnd fe, double t);
  static ScoreModel conditional_linear_gaussian(const Matrix& cond_cov, Matrix gain, Vector offset);
  static ScoreModel mlp(MlpNet net);
  static ScoreModel conditional_mlp(MlpNet net, Index condition_dim);

  const Kind& kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept;
  Index output_dim() const noexcept { return m_; }
  Index condition_dim() const noexcept { return k_; }
  bool is_conditional() const noexcept { return k_ > 0; }
  bool is_learned() const noexcept;

  double calibration() const noexcept { return c_; }
  void set_calibration(double c);

  // c * raw score, B x m. `tau` is required iff the model is conditional.
  Matrix eval(const Matrix& y, const Matrix* tau = nullptr) const;
  Matrix eval_raw(const Matrix& y, const Matrix* tau = nullptr) const;

 private:
  ScoreModel(Kind kind, Index m, Index k) : kind_(std::move(kind)), m_(m), k_(k) {}

  Kind kind_;
  Index m_;
  Index k_;
  double c_ = 1.0;
};

// Marginal score of Y = A X + Z for X ~ N(0, sigma_x), Z ~ N(0, t I).
ScoreModel linear_gaussian_marginal_score(const Matrix& a, const Matrix& sigma_x, double t);
// Conditional score of Y given T = W X for the same channel.
ScoreModel linear_gaussian_task_score(const Matrix& a, const Matrix& w, const Matrix& sigma_x,
                                      double t);

enum class DsmMode {
  PerturbW,     // input w + sqrt(t) eps: targets the score of Y_t
  PerturbY,     // input y + sigma eps at a fixed sigma
};

std::string_view to_string(DsmMode mode) noexcept;
DsmMode parse_dsm_mode(std::string_view text);

struct DsmConfig {
  DsmMode mode = DsmMode::PerturbY;
  double sigma = 0.1;  // used in PerturbY mode
  Index steps = 1000;
  Index batch = 4096;
  Index hidden = 256;
  AdamWConfig optimizer;

  double noise_scale(double t) const;
};

// (1/B) sum_i || s(u_i + sigma eps_i [, tau_i]) + eps_i / sigma ||^2 for a fresh eps draw.
double dsm_loss(const MlpNet& net, const ChannelBatch& batch, const DsmConfig& cfg, Rng& rng);

// One clipped AdamW step on the DSM loss; returns the pre-step loss. The network is
// treated as conditional when its input width exceeds the channel output width.
double dsm_step(MlpNet& net, const ChannelBatch& batch, const DsmConfig& cfg, AdamW& opt, Rng& rng);

// Sets c = -m / mean(y_i^T s_raw(y_i [, tau_i])) on `model` and returns it.
double stein_calibrate(ScoreModel& model, const Matrix& y, const Matrix* tau = nullptr);

inline constexpr std::string_view kCheckpointHeader = "infograd-score-v1";

struct ScoreCheckpoint {
  ScoreModel model;
  DsmConfig dsm;
};

void save_checkpoint(const std::filesystem::path& path, const ScoreModel& model, const DsmConfig& dsm);
ScoreCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace infograd
