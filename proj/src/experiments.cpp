#include "infograd/experiments.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace infograd {

namespace {

void progress(std::ostream* log, const std::string& line) {
  if (log != nullptr) *log << line << std::endl;
}

Matrix initial_matrix(const ExperimentConfig& cfg, Index m, Index n, const Rng& root) {
  Rng rng = root.substream("initial-matrix");
  const double radius = cfg.get_double("radius");
  if (cfg.get("init") == "test_matrix") {
    const Matrix a = generate_test_matrix(n, m, 12.0, rng);
    return a * (radius / a.norm());
  }
  return random_matrix_with_norm(m, n, radius, rng);
}

MetricHook with_progress(MetricHook hook, std::ostream* log, std::string label) {
  return [hook = std::move(hook), log, label = std::move(label)](const FrontEnd& fe, Index it) {
    std::vector<Metric> ms = hook(fe, it);
    if (log != nullptr && !ms.empty()) {
      std::string line = label + " iter " + std::to_string(it);
      for (const auto& m : ms) line += " " + m.name + "=" + format_double(m.value);
      progress(log, line);
    }
    return ms;
  };
}

void annotate(CsvTable& table, const ExperimentConfig& cfg) {
  table.add_comment("config_hash=" + hex64(cfg.hash()) + " seed=" + std::to_string(cfg.seed()));
}

void check_positive(const ExperimentConfig& cfg, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (!(cfg.get_double(k) > 0.0)) throw Error(ErrorCode::ConfigInvalid, std::string(k) + " must be positive");
  }
}

}  // namespace

DsmConfig dsm_config_from(const ExperimentConfig& cfg, double t) {
  DsmConfig d;
  d.mode = parse_dsm_mode(cfg.get("dsm_mode"));
  d.sigma = cfg.get_double("dsm_sigma") * (cfg.get_bool("dsm_sigma_relative") ? std::sqrt(t) : 1.0);
  d.steps = cfg.get_int("dsm_steps");
  d.batch = cfg.get_int("dsm_batch");
  d.hidden = cfg.get_int("hidden");
  d.optimizer.lr = cfg.get_double("lr_theta");
  d.optimizer.weight_decay = cfg.get_double("weight_decay");
  d.optimizer.clip_norm = cfg.get_double("clip_norm");
  if (d.steps < 0 || d.batch < 1 || d.hidden < 1 || !(d.sigma > 0.0) || !(d.optimizer.lr > 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "invalid DSM settings");
  }
  return d;
}

AscentConfig ascent_config_from(const ExperimentConfig& cfg, ScoreSource scores) {
  const double t = cfg.get_double("t");
  AscentConfig a;
  a.iterations = cfg.get_int("iterations");
  a.lr_eta = cfg.get_double("lr_eta");
  a.estimation_samples = cfg.get_int("samples");
  a.radius = cfg.get_double("radius");
  a.regularizer.kind = cfg.get("regularizer") == "squared_frobenius" ? Regularizer::Kind::SquaredFrobenius
                                                                    : Regularizer::Kind::None;
  a.regularizer.lambda = cfg.get_double("lambda");
  a.scores = scores;
  a.dsm = dsm_config_from(cfg, t);
  a.score_steps = a.dsm.steps;
  a.warm_start = cfg.get_bool("warm_start");
  a.stein = cfg.get_bool("stein");
  a.seed = cfg.seed();
  if (cfg.has("beta")) a.beta = cfg.get_double("beta");
  return a;
}

double metric(const std::vector<Metric>& metrics, std::string_view name) {
  for (const auto& m : metrics) {
    if (m.name == name) return m.value;
  }
  throw Error(ErrorCode::ConfigInvalid, "metric '" + std::string(name) + "' not recorded");
}

E1Result run_e1(const ExperimentConfig& cfg, std::ostream* log) {
  check_positive(cfg, {"sigma_x", "t"});
  const double sigma = cfg.get_double("sigma_x"), t = cfg.get_double("t");
  const double lo = cfg.get_double("alpha_min"), hi = cfg.get_double("alpha_max");
  const Index points = cfg.get_int("alpha_points"), samples = cfg.get_int("samples");
  if (points < 2 || !(hi > lo) || samples < 2) throw Error(ErrorCode::ConfigInvalid, "invalid e1 grid");
  const Rng root = Rng(cfg.seed()).substream("e1");
  const auto dist = InputDistribution::isotropic(sigma, 1);
  const Matrix sigma_x = Matrix::Constant(1, 1, sigma * sigma);

  E1Result r;
  r.alpha = Vector::LinSpaced(points, lo, hi);
  r.grad_analytic.resize(points);
  r.grad_vjp.resize(points);
  r.grad_stderr.resize(points);
  r.mi_analytic.resize(points);
  for (Index k = 0; k < points; ++k) {
    const double a = r.alpha[k];
    const FrontEnd fe = FrontEnd::scalar_gain(1, a);
    Rng rng = root.substream(static_cast<std::uint64_t>(k));
    const ChannelBatch b = sample_channel(fe, dist, t, samples, rng);
    const ScoreModel s = linear_gaussian_marginal_score(fe.matrix(), sigma_x, t);
    const GradientEstimate g = info_gradient(fe, s, b);
    r.grad_vjp[k] = g.grad[0];
    r.grad_stderr[k] = g.stderr_[0];
    r.grad_analytic[k] = grad_alpha_closed_form(Matrix::Identity(1, 1), a, sigma * sigma, t);
    r.mi_analytic[k] = mi_closed_form_linear(Matrix::Constant(1, 1, a), sigma * sigma, t);
  }
  const double anchor = mi_closed_form_linear(Matrix::Constant(1, 1, lo), sigma * sigma, t);
  r.mi_path = path_integral_mi(r.alpha, r.grad_vjp, anchor).values;
  progress(log, "e1: " + std::to_string(points) + " grid points done");
  return r;
}

E2Result run_e2(const ExperimentConfig& cfg, std::ostream* log) {
  check_positive(cfg, {"sigma_x2", "t", "alpha_max"});
  const Index n = cfg.get_int("n"), points = cfg.get_int("alpha_points"), samples = cfg.get_int("samples");
  const double sx2 = cfg.get_double("sigma_x2"), t = cfg.get_double("t");
  const std::string mode = cfg.get("score_mode");
  const bool want_true = mode != "learned", want_learned = mode != "analytic";
  if (n < 1 || points < 1 || samples < 100) throw Error(ErrorCode::ConfigInvalid, "invalid e2 sizes");
  const Rng root = Rng(cfg.seed()).substream("e2");
  Rng mrng = root.substream("matrix");

  E2Result r;
  r.a = generate_test_matrix(n, n, cfg.get_double("cond_ratio"), mrng);
  const auto dist = InputDistribution::isotropic(std::sqrt(sx2), n);
  const Matrix sigma_x = sx2 * Matrix::Identity(n, n);
  const DsmConfig dsm = want_learned ? dsm_config_from(cfg, t) : DsmConfig{};
  const bool stein = want_learned && cfg.get_bool("stein");

  r.alpha.resize(points);
  r.grad_analytic.resize(points);
  if (want_true) r.grad_true = Vector(points), r.stderr_true = Vector(points);
  if (want_learned) r.grad_learned = Vector(points), r.stderr_learned = Vector(points), r.stein_c = Vector(points);
  for (Index k = 0; k < points; ++k) {
    const auto uk = static_cast<std::uint64_t>(k);
    const double a = cfg.get_double("alpha_max") * static_cast<double>(k + 1) / static_cast<double>(points);
    r.alpha[k] = a;
    r.grad_analytic[k] = grad_alpha_closed_form(r.a, a, sx2, t);
    const FrontEnd fe = FrontEnd::scaled_fixed_linear(r.a, a);
    Rng est = root.substream("estimate").substream(uk);
    const ChannelBatch b = sample_channel(fe, dist, t, samples, est);
    std::string line = "e2: alpha=" + format_double(a) + " analytic=" + format_double(r.grad_analytic[k]);
    if (want_true) {
      const GradientEstimate g = info_gradient(fe, linear_gaussian_marginal_score(fe.matrix(), sigma_x, t), b);
      (*r.grad_true)[k] = g.grad[0];
      (*r.stderr_true)[k] = g.stderr_[0];
      line += " true=" + format_double(g.grad[0]);
    }
    if (want_learned) {
      Rng init = root.substream("init").substream(uk);
      Rng train = root.substream("train").substream(uk);
      MlpNet net({n, dsm.hidden, dsm.hidden, n}, init);
      AdamW opt(net, dsm.optimizer);
      for (Index s = 0; s < dsm.steps; ++s) {
        dsm_step(net, sample_channel(fe, dist, t, dsm.batch, train), dsm, opt, train);
      }
      ScoreModel learned = ScoreModel::mlp(std::move(net));
      (*r.stein_c)[k] = stein ? stein_calibrate(learned, b.y) : 1.0;
      const GradientEstimate g = info_gradient(fe, learned, b);
      (*r.grad_learned)[k] = g.grad[0];
      (*r.stderr_learned)[k] = g.stderr_[0];
      line += " learned=" + format_double(g.grad[0]) + " c=" + format_double((*r.stein_c)[k]);
    }
    progress(log, line);
  }
  return r;
}

E3Result run_e3(const ExperimentConfig& cfg, std::ostream* log) {
  check_positive(cfg, {"sigma_x2", "t", "radius"});
  const Index n = cfg.get_int("n");
  const double sx2 = cfg.get_double("sigma_x2"), t = cfg.get_double("t");
  const Rng root = Rng(cfg.seed()).substream("e3");
  E3Result r;
  r.i_star = optimum_mi_frobenius(n, sx2, t, cfg.get_double("radius"));
  r.initial = initial_matrix(cfg, n, n, root);
  const auto dist = InputDistribution::isotropic(std::sqrt(sx2), n);
  const FrontEnd fe = FrontEnd::linear_matrix(r.initial);
  const MetricHook mi_hook = [sx2, t](const FrontEnd& f, Index) -> std::vector<Metric> {
    return {{"mi_closed_form", mi_closed_form_linear(f.matrix(), sx2, t)}};
  };
  const std::string mode = cfg.get("score_mode");
  if (mode != "learned") {
    r.analytic = alternating_optimize(fe, dist, t, nullptr, ascent_config_from(cfg, ScoreSource::Analytic),
                                      with_progress(mi_hook, log, "e3 analytic"));
  }
  if (mode != "analytic") {
    r.learned = alternating_optimize(fe, dist, t, nullptr, ascent_config_from(cfg, ScoreSource::Learned),
                                     with_progress(mi_hook, log, "e3 learned"));
  }
  return r;
}

E4Result run_e4(const ExperimentConfig& cfg, std::ostream* log) {
  check_positive(cfg, {"sigma_x2", "t", "radius"});
  const Index n = cfg.get_int("n");
  const double sx2 = cfg.get_double("sigma_x2"), t = cfg.get_double("t");
  const Index kde_n = cfg.get_int("kde_samples");
  if (n > kKdeMaxDim) throw Error(ErrorCode::ConfigInvalid, "KDE monitoring supports m <= 16");
  if (kde_n > kKdeMaxSamples || kde_n <= n + 1) {
    throw Error(ErrorCode::ConfigInvalid, "kde_samples must lie in (m + 1, 50000]");
  }
  const Rng root = Rng(cfg.seed()).substream("e4");
  E4Result r;
  r.initial = initial_matrix(cfg, n, n, root);
  const auto dist = InputDistribution::isotropic(std::sqrt(sx2), n);
  const AscentConfig acfg = ascent_config_from(cfg, ScoreSource::Learned);
  const MetricHook hook =
      kde_monitor(dist, t, kde_n, cfg.get_int("kde_every"), acfg.iterations, root.substream("kde").seed());
  r.run = alternating_optimize(FrontEnd::tanh_linear(r.initial), dist, t, nullptr, acfg,
                               with_progress(hook, log, "e4"));
  return r;
}

E5Result run_e5(const ExperimentConfig& cfg, std::ostream* log) {
  check_positive(cfg, {"t", "radius"});
  const Index n = cfg.get_int("n"), k = cfg.get_int("k");
  const double t = cfg.get_double("t"), beta = cfg.get_double("beta");
  if (k < 1 || k > n) throw Error(ErrorCode::ConfigInvalid, "need 1 <= k <= n");
  const Rng root = Rng(cfg.seed()).substream("e5");
  E5Result r;
  Rng wrng = root.substream("task");
  r.w = sample_gaussian(wrng, k, n, 1.0);
  r.initial = initial_matrix(cfg, n, n, root);
  const Matrix sigma_x = Matrix::Identity(n, n);
  const auto dist = InputDistribution::isotropic(1.0, n);
  const TaskMap task(r.w);
  AscentConfig acfg = ascent_config_from(cfg, parse_score_source(cfg.get("score_mode")));
  acfg.mode = AscentMode::IB;
  const Matrix w = r.w;
  const MetricHook hook = [w, sigma_x, t, beta](const FrontEnd& f, Index) -> std::vector<Metric> {
    const Matrix a = f.matrix();
    const double ity = task_mi_closed_form(a, w, sigma_x, t);
    const double ixy = mi_closed_form_gaussian(a, sigma_x, t);
    return {{"L_ib", ity - beta * ixy}, {"I_TY", ity}, {"I_XY", ixy}};
  };
  r.run = alternating_optimize(FrontEnd::linear_matrix(r.initial), dist, t, &task, acfg,
                               with_progress(hook, log, "e5"));
  return r;
}

CsvTable e1_table(const E1Result& r) {
  CsvTable tab({"alpha", "grad_analytic", "grad_vjp", "mi_analytic", "mi_path_integral"});
  for (Index k = 0; k < r.alpha.size(); ++k) {
    tab.add_row({r.alpha[k], r.grad_analytic[k], r.grad_vjp[k], r.mi_analytic[k], r.mi_path[k]});
  }
  return tab;
}

CsvTable e2_table(const E2Result& r) {
  std::vector<std::string> header{"alpha", "grad_analytic"};
  if (r.grad_true) header.push_back("grad_true_score");
  if (r.grad_learned) header.insert(header.end(), {"grad_learned_score", "stein_c"});
  CsvTable tab(header);
  for (Index k = 0; k < r.alpha.size(); ++k) {
    std::vector<double> row{r.alpha[k], r.grad_analytic[k]};
    if (r.grad_true) row.push_back((*r.grad_true)[k]);
    if (r.grad_learned) row.insert(row.end(), {(*r.grad_learned)[k], (*r.stein_c)[k]});
    tab.add_row(row);
  }
  return tab;
}

CsvTable e3_table(const AscentResult& run, double i_star, double initial_frob) {
  CsvTable tab({"iter", "mi_closed_form", "grad_norm", "frob_norm", "I_star"});
  tab.add_row({0.0, metric(run.trace.initial, "mi_closed_form"), 0.0, initial_frob, i_star});
  for (const auto& rec : run.trace.records) {
    tab.add_row({static_cast<double>(rec.iteration), metric(rec.metrics, "mi_closed_form"), rec.grad_norm,
                 rec.frob_norm, i_star});
  }
  if (run.truncated) tab.mark_truncated(run.error);
  return tab;
}

CsvTable e4_table(const E4Result& r) {
  CsvTable tab({"iter", "mi_kde", "bandwidth", "frob_norm"});
  tab.add_row({0.0, metric(r.run.trace.initial, "mi_kde"), metric(r.run.trace.initial, "bandwidth"),
               r.initial.norm()});
  for (const auto& rec : r.run.trace.records) {
    if (rec.metrics.empty()) continue;
    tab.add_row({static_cast<double>(rec.iteration), metric(rec.metrics, "mi_kde"),
                 metric(rec.metrics, "bandwidth"), rec.frob_norm});
  }
  if (r.run.truncated) tab.mark_truncated(r.run.error);
  return tab;
}

CsvTable e5_table(const E5Result& r) {
  CsvTable tab({"iter", "L_ib", "I_TY", "I_XY", "frob_norm"});
  const auto& init = r.run.trace.initial;
  tab.add_row({0.0, metric(init, "L_ib"), metric(init, "I_TY"), metric(init, "I_XY"), r.initial.norm()});
  for (const auto& rec : r.run.trace.records) {
    tab.add_row({static_cast<double>(rec.iteration), metric(rec.metrics, "L_ib"), metric(rec.metrics, "I_TY"),
                 metric(rec.metrics, "I_XY"), rec.frob_norm});
  }
  if (r.run.truncated) tab.mark_truncated(r.run.error);
  return tab;
}

int run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  const std::string& id = cfg.experiment();
  {
    std::ofstream echo(out_dir / (id + ".config"), std::ios::binary);
    if (!echo) throw Error(ErrorCode::Io, "cannot write config echo in " + out_dir.string());
    echo << cfg.echo();
  }
  bool truncated = false;
  auto emit = [&](CsvTable tab, const std::string& name) {
    annotate(tab, cfg);
    truncated = truncated || tab.truncated();
    tab.write(out_dir / name);
    log << "wrote " << (out_dir / name).string() << "\n";
  };
  if (id == "e1_scalar_gradient") {
    emit(e1_table(run_e1(cfg, &log)), "e1_scalar_gradient.csv");
  } else if (id == "e2_vector_gradient") {
    emit(e2_table(run_e2(cfg, &log)), "e2_vector_gradient.csv");
  } else if (id == "e3_mi_maximize") {
    const E3Result r = run_e3(cfg, &log);
    if (r.analytic) emit(e3_table(*r.analytic, r.i_star, r.initial.norm()), "e3_mi_maximize_analytic.csv");
    if (r.learned) emit(e3_table(*r.learned, r.i_star, r.initial.norm()), "e3_mi_maximize_learned.csv");
  } else if (id == "e4_tanh_maximize") {
    emit(e4_table(run_e4(cfg, &log)), "e4_tanh_maximize.csv");
  } else if (id == "e5_ib_optimize") {
    emit(e5_table(run_e5(cfg, &log)), "e5_ib_optimize.csv");
  } else {
    throw Error(ErrorCode::ConfigInvalid, "run_experiment does not handle '" + id + "'");
  }
  return truncated ? 3 : 0;
}

}  // namespace infograd
