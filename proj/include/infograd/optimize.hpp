#pragma once

// Alternating score-learning / projected-ascent loop over the front-end parameters.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "infograd/estimators.hpp"

namespace infograd {

enum class AscentMode { PlainMI, TaskMI, IB };
enum class ScoreSource { Analytic, Learned };

std::string_view to_string(AscentMode mode) noexcept;
AscentMode parse_ascent_mode(std::string_view text);
std::string_view to_string(ScoreSource source) noexcept;
ScoreSource parse_score_source(std::string_view text);

struct Regularizer {
  enum class Kind { None, SquaredFrobenius };
  Kind kind = Kind::None;
  double lambda = 0.0;
};

struct RegularizerValue {
  double value = 0.0;
  Vector grad;  // gradient of C, not scaled by lambda
};

RegularizerValue regularizer_grad(const Regularizer& reg, const Vector& eta);

// eta + lr grad, projected onto the Frobenius ball of radius P when P is set.
Vector projected_ascent_step(const Vector& eta, const Vector& grad, double lr,
                             std::optional<double> radius);

struct AscentConfig {
  Index iterations = 60;     // K
  Index score_steps = 1000;  // S, DSM steps per outer iteration
  double lr_eta = 0.05;
  Index estimation_samples = 50000;  // N
  std::optional<double> radius;      // P
  Regularizer regularizer;
  double beta = 1.0;
  AscentMode mode = AscentMode::PlainMI;
  ScoreSource scores = ScoreSource::Learned;
  DsmConfig dsm;  // batch, hidden width, optimizer (lr_theta) and perturbation mode
  bool warm_start = true;
  bool stein = true;  // Stein-calibrate learned scores on each estimation batch
  std::uint64_t seed = 0;
};

struct Metric {
  std::string name;
  double value = 0.0;
};

// Called with the front-end after each update; may return no metrics for an iteration.
using MetricHook = std::function<std::vector<Metric>(const FrontEnd& fe, Index iteration)>;

struct AscentRecord {
  Index iteration = 0;
  std::vector<Metric> metrics;
  double grad_norm = 0.0;   // norm of the regularized ascent direction
  double grad_stderr_norm = 0.0;  // norm of the per-coordinate MC standard errors
  double frob_norm = 0.0;   // ||eta|| after the update
  double reg_value = 0.0;   // C(eta) before the update
  double dsm_loss = 0.0;    // last Phase-1 loss of the marginal net (0 for analytic scores)
  double dsm_loss_cond = 0.0;
  double stein_c = 1.0;
  double stein_c_cond = 1.0;
  double seconds = 0.0;
};

struct AscentTrace {
  std::vector<Metric> initial;  // hook evaluated at the starting point
  std::vector<AscentRecord> records;
};

struct AscentResult {
  FrontEnd final_front_end;
  AscentTrace trace;
  bool truncated = false;  // a NonFiniteLoss stopped the run early
  std::string error;
};

// Exact scores for linear front-ends with Gaussian (or Gaussian-mixture, marginal only) inputs.
ScoreModel analytic_marginal_score(const FrontEnd& fe, const InputDistribution& dist, double t);
ScoreModel analytic_task_score(const FrontEnd& fe, const InputDistribution& dist, double t,
                               const TaskMap& task);

// Alternates score refreshes (learned mode) with projected ascent steps on eta.
// Phase-1 training and Phase-2 estimation draw from separate RNG sub-streams.
AscentResult alternating_optimize(const FrontEnd& fe, const InputDistribution& dist, double t,
                                  const TaskMap* task, const AscentConfig& cfg,
                                  const MetricHook& hook = {});

// Hook reporting the KDE MI of a fresh output sample every `every` iterations (and at the last).
MetricHook kde_monitor(const InputDistribution& dist, double t, Index samples, Index every,
                       Index last_iteration, std::uint64_t seed);

}  // namespace infograd
