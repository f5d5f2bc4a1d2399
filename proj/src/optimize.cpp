#include "infograd/optimize.hpp"

#include <chrono>
#include <string>

namespace infograd {

std::string_view to_string(AscentMode mode) noexcept {
  switch (mode) {
    case AscentMode::PlainMI: return "plain_mi";
    case AscentMode::TaskMI: return "task_mi";
    case AscentMode::IB: return "ib";
  }
  return "unknown";
}

AscentMode parse_ascent_mode(std::string_view text) {
  if (text == "plain_mi") return AscentMode::PlainMI;
  if (text == "task_mi") return AscentMode::TaskMI;
  if (text == "ib") return AscentMode::IB;
  throw Error(ErrorCode::ConfigInvalid, "unknown ascent mode '" + std::string(text) + "'");
}

std::string_view to_string(ScoreSource source) noexcept {
  return source == ScoreSource::Analytic ? "analytic" : "learned";
}

ScoreSource parse_score_source(std::string_view text) {
  if (text == "analytic") return ScoreSource::Analytic;
  if (text == "learned") return ScoreSource::Learned;
  throw Error(ErrorCode::ConfigInvalid, "unknown score source '" + std::string(text) + "'");
}

RegularizerValue regularizer_grad(const Regularizer& reg, const Vector& eta) {
  if (reg.kind == Regularizer::Kind::None) return {0.0, Vector::Zero(eta.size())};
  return {eta.squaredNorm(), 2.0 * eta};
}

Vector projected_ascent_step(const Vector& eta, const Vector& grad, double lr,
                             std::optional<double> radius) {
  if (eta.size() != grad.size()) throw Error(ErrorCode::ShapeMismatch, "eta and gradient lengths differ");
  Vector next = eta + lr * grad;
  if (radius) {
    const double norm = next.norm();
    if (norm > *radius) next *= *radius / norm;
  }
  return next;
}

ScoreModel analytic_marginal_score(const FrontEnd& fe, const InputDistribution& dist, double t) {
  if (!fe.is_linear()) {
    throw Error(ErrorCode::ConfigInvalid, "analytic scores need a linear front-end");
  }
  if (dist.is_isotropic()) return linear_gaussian_marginal_score(fe.matrix(), dist.covariance(), t);
  return ScoreModel::gaussian_mixture(dist.components(), fe.matrix(), Vector(), t);
}

ScoreModel analytic_task_score(const FrontEnd& fe, const InputDistribution& dist, double t,
                               const TaskMap& task) {
  if (!fe.is_linear()) throw Error(ErrorCode::ConfigInvalid, "analytic scores need a linear front-end");
  if (!dist.is_isotropic() && dist.components().size() != 1) {
    throw Error(ErrorCode::ConfigInvalid, "analytic task score needs a Gaussian input");
  }
  if (!dist.is_isotropic() && !dist.components().front().mean.isZero(0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "analytic task score needs a zero-mean input");
  }
  return linear_gaussian_task_score(fe.matrix(), task.w, dist.covariance(), t);
}

namespace {

struct LearnedScore {
  MlpNet net;
  AdamW opt;
  double last_loss = 0.0;
};

LearnedScore fresh_learner(Index in, Index out, const DsmConfig& dsm, Rng& rng) {
  MlpNet net({in, dsm.hidden, dsm.hidden, out}, rng);
  AdamW opt(net, dsm.optimizer);
  return {std::move(net), std::move(opt), 0.0};
}

}  // namespace

AscentResult alternating_optimize(const FrontEnd& fe, const InputDistribution& dist, double t,
                                  const TaskMap* task, const AscentConfig& cfg, const MetricHook& hook) {
  if (cfg.iterations < 0 || cfg.score_steps < 0) throw Error(ErrorCode::ConfigInvalid, "K and S must be >= 0");
  if (!(cfg.lr_eta > 0.0)) throw Error(ErrorCode::ConfigInvalid, "lr_eta must be positive");
  if (cfg.radius && !(*cfg.radius > 0.0)) throw Error(ErrorCode::ConfigInvalid, "radius must be positive");
  if (!(cfg.regularizer.lambda >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "lambda must be >= 0");
  if (!(cfg.beta >= 0.0)) throw Error(ErrorCode::ConfigInvalid, "beta must be >= 0");
  if (cfg.estimation_samples < 2) throw Error(ErrorCode::ConfigInvalid, "N must be >= 2");
  const bool conditional = cfg.mode != AscentMode::PlainMI;
  if (conditional && task == nullptr) {
    throw Error(ErrorCode::ConfigInvalid, "task and IB modes need a task map");
  }
  const bool learned = cfg.scores == ScoreSource::Learned;
  if (learned && cfg.stein && cfg.estimation_samples < 100) {
    throw Error(ErrorCode::ConfigInvalid, "Stein calibration needs N >= 100");
  }

  AscentResult result{fe, {}, false, {}};
  if (hook) result.trace.initial = hook(fe, 0);

  const Rng root(cfg.seed);
  const Rng init_root = root.substream("score-init");
  const Rng train_root = root.substream("phase1");
  const Rng est_root = root.substream("phase2");
  const Index m = fe.output_dim();
  const Index k = task != nullptr ? task->task_dim() : 0;

  std::optional<LearnedScore> marginal, cond;
  FrontEnd cur = fe;
  for (Index it = 1; it <= cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    AscentRecord rec;
    rec.iteration = it;
    try {
      // Phase 1: refresh the score networks on samples from the current front-end.
      if (learned) {
        const auto uit = static_cast<std::uint64_t>(it);
        if (!marginal || !cfg.warm_start) {
          Rng init = init_root.substream(uit);
          marginal = fresh_learner(m, m, cfg.dsm, init);
          if (conditional) cond = fresh_learner(m + k, m, cfg.dsm, init);
        }
        Rng train = train_root.substream(uit);
        for (Index s = 0; s < cfg.score_steps; ++s) {
          const ChannelBatch b = sample_channel(cur, dist, t, cfg.dsm.batch, train, task);
          marginal->last_loss = dsm_step(marginal->net, b, cfg.dsm, marginal->opt, train);
          if (conditional) cond->last_loss = dsm_step(cond->net, b, cfg.dsm, cond->opt, train);
        }
        rec.dsm_loss = marginal->last_loss;
        if (conditional) rec.dsm_loss_cond = cond->last_loss;
      }

      // Phase 2: fresh estimation batch, calibrated scores, ascent step.
      Rng est = est_root.substream(static_cast<std::uint64_t>(it));
      const ChannelBatch b = sample_channel(cur, dist, t, cfg.estimation_samples, est, task);
      ScoreModel s_unc = learned ? ScoreModel::mlp(marginal->net) : analytic_marginal_score(cur, dist, t);
      std::optional<ScoreModel> s_cond;
      if (conditional) {
        s_cond = learned ? ScoreModel::conditional_mlp(cond->net, k) : analytic_task_score(cur, dist, t, *task);
      }
      if (learned && cfg.stein) {
        rec.stein_c = stein_calibrate(s_unc, b.y);
        if (s_cond) rec.stein_c_cond = stein_calibrate(*s_cond, b.y, &*b.tau);
      }
      GradientEstimate g;
      switch (cfg.mode) {
        case AscentMode::PlainMI: g = info_gradient(cur, s_unc, b); break;
        case AscentMode::TaskMI: g = task_info_gradient(cur, *s_cond, s_unc, b); break;
        case AscentMode::IB: g = ib_gradient(cur, *s_cond, s_unc, cfg.beta, b); break;
      }
      const RegularizerValue reg = regularizer_grad(cfg.regularizer, cur.params());
      const Vector direction = g.grad - cfg.regularizer.lambda * reg.grad;
      if (!direction.allFinite()) throw Error(ErrorCode::NonFiniteLoss, "ascent direction is not finite");
      rec.reg_value = reg.value;
      rec.grad_norm = direction.norm();
      rec.grad_stderr_norm = g.stderr_.norm();
      cur = cur.with_params(projected_ascent_step(cur.params(), direction, cfg.lr_eta, cfg.radius));
      rec.frob_norm = cur.params().norm();
      if (hook) rec.metrics = hook(cur, it);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFiniteLoss) throw;
      result.truncated = true;
      result.error = e.what();
      break;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.records.push_back(std::move(rec));
  }
  result.final_front_end = std::move(cur);
  return result;
}

MetricHook kde_monitor(const InputDistribution& dist, double t, Index samples, Index every,
                       Index last_iteration, std::uint64_t seed) {
  if (every < 1) throw Error(ErrorCode::ConfigInvalid, "KDE monitoring interval must be >= 1");
  if (samples > kKdeMaxSamples) throw Error(ErrorCode::ConfigInvalid, "KDE sample count exceeds 50000");
  const Rng root = Rng(seed).substream("kde-monitor");
  return [=](const FrontEnd& fe, Index it) -> std::vector<Metric> {
    if (it % every != 0 && it != last_iteration) return {};
    Rng rng = root.substream(static_cast<std::uint64_t>(it));
    const ChannelBatch b = sample_channel(fe, dist, t, samples, rng);
    const KdeMi est = mi_kde(b.y, t);
    return {{"mi_kde", est.mi}, {"bandwidth", est.entropy.bandwidth}};
  };
}

}  // namespace infograd
