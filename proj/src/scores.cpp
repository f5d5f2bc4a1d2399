#include "infograd/scores.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

namespace infograd {

namespace sk = score_kinds;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix concat_condition(const Matrix& y, const Matrix& tau) {
  Matrix in(y.rows(), y.cols() + tau.cols());
  in << y, tau;
  return in;
}

}  // namespace

ScoreModel ScoreModel::analytic_gaussian(const Matrix& cov, Vector mean) {
  return analytic_gaussian(cholesky(cov, 0.0), std::move(mean));
}

ScoreModel ScoreModel::analytic_gaussian(PsdFactor cov, Vector mean) {
  const Index m = cov.dim();
  if (mean.size() == 0) mean = Vector::Zero(m);
  if (mean.size() != m) throw Error(ErrorCode::ShapeMismatch, "mean and covariance dimensions differ");
  return ScoreModel(sk::AnalyticGaussian{std::move(cov), std::move(mean)}, m, 0);
}

ScoreModel ScoreModel::gaussian_mixture(const std::vector<GaussianComponent>& input_components,
                                        const Matrix& a, const Vector& b, double t) {
  if (input_components.empty()) throw Error(ErrorCode::ConfigInvalid, "mixture needs a component");
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t must be positive");
  const Index m = a.rows();
  const Vector offset = b.size() == 0 ? Vector::Zero(m) : b;
  if (offset.size() != m) throw Error(ErrorCode::ShapeMismatch, "offset length differs from A rows");
  sk::GaussianMixture mix;
  for (const auto& c : input_components) {
    if (c.mean.size() != a.cols()) throw Error(ErrorCode::ShapeMismatch, "component mean length");
    Matrix cov = a * c.cov * a.transpose();
    cov = 0.5 * (cov + cov.transpose());
    cov.diagonal().array() += t;
    mix.log_weights.push_back(std::log(c.weight));
    mix.means.push_back(a * c.mean + offset);
    mix.covs.push_back(cholesky(cov, 0.0));
  }
  return ScoreModel(std::move(mix), m, 0);
}

ScoreModel ScoreModel::conditional_given_x(FrontEnd fe, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::ConfigInvalid, "t must be positive");
  const Index m = fe.output_dim(), n = fe.input_dim();
  return ScoreModel(sk::ConditionalGivenX{std::move(fe), t}, m, n);
}

ScoreModel ScoreModel::conditional_linear_gaussian(const Matrix& cond_cov, Matrix gain, Vector offset) {
  PsdFactor f = cholesky(cond_cov, 0.0);
  const Index m = f.dim();
  if (gain.rows() != m || gain.cols() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "conditional gain must be m x k");
  }
  if (offset.size() == 0) offset = Vector::Zero(m);
  const Index k = gain.cols();
  return ScoreModel(sk::ConditionalLinearGaussian{std::move(f), std::move(gain), std::move(offset)}, m, k);
}

ScoreModel ScoreModel::mlp(MlpNet net) {
  const Index m = net.output_dim();
  if (net.input_dim() != m) throw Error(ErrorCode::ShapeMismatch, "score network must map R^m to R^m");
  return ScoreModel(sk::Mlp{std::move(net)}, m, 0);
}

ScoreModel ScoreModel::conditional_mlp(MlpNet net, Index condition_dim) {
  const Index m = net.output_dim();
  if (condition_dim < 1 || net.input_dim() != m + condition_dim) {
    throw Error(ErrorCode::ShapeMismatch, "conditional score network must map R^{m+k} to R^m");
  }
  return ScoreModel(sk::ConditionalMlp{std::move(net), condition_dim}, m, condition_dim);
}

std::string_view ScoreModel::kind_name() const noexcept {
  return std::visit(Overloaded{
                        [](const sk::AnalyticGaussian&) { return std::string_view("analytic_gaussian"); },
                        [](const sk::GaussianMixture&) { return std::string_view("gaussian_mixture"); },
                        [](const sk::ConditionalGivenX&) { return std::string_view("conditional_given_x"); },
                        [](const sk::ConditionalLinearGaussian&) {
                          return std::string_view("conditional_linear_gaussian");
                        },
                        [](const sk::Mlp&) { return std::string_view("mlp"); },
                        [](const sk::ConditionalMlp&) { return std::string_view("conditional_mlp"); },
                    },
                    kind_);
}

bool ScoreModel::is_learned() const noexcept {
  return std::holds_alternative<sk::Mlp>(kind_) || std::holds_alternative<sk::ConditionalMlp>(kind_);
}

void ScoreModel::set_calibration(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorCode::DegenerateDenominator, "calibration factor must be positive and finite");
  }
  c_ = c;
}

Matrix ScoreModel::eval(const Matrix& y, const Matrix* tau) const {
  Matrix s = eval_raw(y, tau);
  if (c_ != 1.0) s *= c_;
  return s;
}

Matrix ScoreModel::eval_raw(const Matrix& y, const Matrix* tau) const {
  require_cols(y, m_, "score input y");
  if (is_conditional()) {
    if (tau == nullptr) throw Error(ErrorCode::MissingCondition, "conditional score needs tau");
    require_cols(*tau, k_, "score condition tau");
    if (tau->rows() != y.rows()) throw Error(ErrorCode::ShapeMismatch, "y and tau batch sizes differ");
  }
  return std::visit(
      Overloaded{
          [&](const sk::AnalyticGaussian& g) -> Matrix {
            return -solve_psd_rows(g.cov, y.rowwise() - g.mean.transpose());
          },
          [&](const sk::GaussianMixture& g) -> Matrix {
            const std::size_t kc = g.means.size();
            const Index b = y.rows();
            std::vector<Matrix> sols(kc);
            Matrix logits(b, static_cast<Index>(kc));
            for (std::size_t k = 0; k < kc; ++k) {
              const Matrix d = y.rowwise() - g.means[k].transpose();
              sols[k] = solve_psd_rows(g.covs[k], d);
              const Vector quad = d.cwiseProduct(sols[k]).rowwise().sum();
              logits.col(static_cast<Index>(k)) =
                  (g.log_weights[k] - 0.5 * g.covs[k].log_det) - 0.5 * quad.array();
            }
            Matrix out = Matrix::Zero(b, m_);
            for (Index i = 0; i < b; ++i) {
              const Vector row = logits.row(i).transpose();
              const double lse = log_sum_exp(row);
              for (std::size_t k = 0; k < kc; ++k) {
                const double gamma = std::exp(row[static_cast<Index>(k)] - lse);
                out.row(i) -= gamma * sols[k].row(i);
              }
            }
            return out;
          },
          [&](const sk::ConditionalGivenX& g) -> Matrix {
            return -(y - g.front_end.forward(*tau)) / g.t;
          },
          [&](const sk::ConditionalLinearGaussian& g) -> Matrix {
            Matrix centered = y - (*tau) * g.gain.transpose();
            centered.rowwise() -= g.offset.transpose();
            return -solve_psd_rows(g.cov, centered);
          },
          [&](const sk::Mlp& g) -> Matrix { return g.net.forward(y); },
          [&](const sk::ConditionalMlp& g) -> Matrix {
            return g.net.forward(concat_condition(y, *tau));
          },
      },
      kind_);
}

ScoreModel linear_gaussian_marginal_score(const Matrix& a, const Matrix& sigma_x, double t) {
  Matrix cov = a * sigma_x * a.transpose();
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += t;
  return ScoreModel::analytic_gaussian(cov);
}

ScoreModel linear_gaussian_task_score(const Matrix& a, const Matrix& w, const Matrix& sigma_x,
                                      double t) {
  const Index m = a.rows();
  Matrix sigma_y = a * sigma_x * a.transpose();
  sigma_y.diagonal().array() += t;
  if (w.isZero(0.0)) {
    // T carries nothing: the conditional law of Y is its marginal.
    return ScoreModel::conditional_linear_gaussian(0.5 * (sigma_y + sigma_y.transpose()),
                                                   Matrix::Zero(m, w.rows()), Vector::Zero(m));
  }
  const Matrix sigma_t = w * sigma_x * w.transpose();
  const Matrix sigma_yt = a * sigma_x * w.transpose();  // m x k
  const PsdFactor ft = cholesky(0.5 * (sigma_t + sigma_t.transpose()), 0.0);
  // gain = Sigma_YT Sigma_T^{-1}
  Matrix gain = solve_psd(ft, sigma_yt.transpose()).transpose();
  Matrix cond = sigma_y - gain * sigma_yt.transpose();
  cond = 0.5 * (cond + cond.transpose());
  return ScoreModel::conditional_linear_gaussian(cond, std::move(gain), Vector::Zero(m));
}

std::string_view to_string(DsmMode mode) noexcept {
  return mode == DsmMode::PerturbW ? "perturb_w_sqrt_t" : "perturb_y_fixed_sigma";
}

DsmMode parse_dsm_mode(std::string_view text) {
  if (text == "perturb_w_sqrt_t") return DsmMode::PerturbW;
  if (text == "perturb_y_fixed_sigma") return DsmMode::PerturbY;
  throw Error(ErrorCode::ConfigInvalid, "unknown DSM mode '" + std::string(text) + "'");
}

double DsmConfig::noise_scale(double t) const {
  if (mode == DsmMode::PerturbW) return std::sqrt(t);
  if (!(sigma > 0.0)) throw Error(ErrorCode::ConfigInvalid, "DSM sigma must be positive");
  return sigma;
}

namespace {

struct DsmInput {
  Matrix input;
  Matrix eps;
  double sigma;
};

DsmInput make_dsm_input(const MlpNet& net, const ChannelBatch& batch, const DsmConfig& cfg, Rng& rng) {
  const Index m = batch.y.cols();
  if (net.output_dim() != m) throw Error(ErrorCode::ShapeMismatch, "score network output width != m");
  const bool conditional = net.input_dim() > m;
  if (conditional) {
    if (!batch.tau) throw Error(ErrorCode::MissingCondition, "conditional DSM needs tau in the batch");
    if (net.input_dim() != m + batch.tau->cols()) {
      throw Error(ErrorCode::ShapeMismatch, "conditional network input width != m + k");
    }
  }
  DsmInput d;
  d.sigma = cfg.noise_scale(batch.t);
  d.eps = sample_gaussian(rng, batch.size(), m, 1.0);
  const Matrix& base = cfg.mode == DsmMode::PerturbW ? batch.w : batch.y;
  Matrix noisy = base + d.sigma * d.eps;
  d.input = conditional ? concat_condition(noisy, *batch.tau) : std::move(noisy);
  return d;
}

}  // namespace

double dsm_loss(const MlpNet& net, const ChannelBatch& batch, const DsmConfig& cfg, Rng& rng) {
  const DsmInput d = make_dsm_input(net, batch, cfg, rng);
  const Matrix r = net.forward(d.input) + d.eps / d.sigma;
  return r.squaredNorm() / static_cast<double>(batch.size());
}

double dsm_step(MlpNet& net, const ChannelBatch& batch, const DsmConfig& cfg, AdamW& opt, Rng& rng) {
  const DsmInput d = make_dsm_input(net, batch, cfg, rng);
  double loss = 0.0;
  auto pass = net.forward_backward(d.input, [&](const Matrix& out) {
    Matrix r = out + d.eps / d.sigma;
    loss = r.squaredNorm() / static_cast<double>(out.rows());
    return Matrix(2.0 * r);
  });
  if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteLoss, "DSM loss is not finite");
  opt.step(net, std::move(pass.param_grads));
  return loss;
}

double stein_calibrate(ScoreModel& model, const Matrix& y, const Matrix* tau) {
  if (y.rows() < 100) {
    throw Error(ErrorCode::DegenerateSample, "Stein calibration needs at least 100 samples");
  }
  const Matrix s = model.eval_raw(y, tau);
  const double mean_inner = y.cwiseProduct(s).sum() / static_cast<double>(y.rows());
  if (!(std::abs(mean_inner) >= 1e-8)) {
    throw Error(ErrorCode::DegenerateDenominator, "mean y^T s(y) is numerically zero");
  }
  const double c = -static_cast<double>(model.output_dim()) / mean_inner;
  model.set_calibration(c);
  return c;
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

void write_values(std::ostream& os, const double* data, Index n) {
  for (Index i = 0; i < n; ++i) os << (i ? " " : "") << data[i];
  os << '\n';
}

std::string expect_key(std::istream& is, std::string_view key) {
  std::string k;
  if (!(is >> k) || k != key) {
    throw Error(ErrorCode::Io, "checkpoint: expected '" + std::string(key) + "', found '" + k + "'");
  }
  std::string rest;
  std::getline(is >> std::ws, rest);
  return rest;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw Error(ErrorCode::Io, "checkpoint: bad number '" + s + "'");
  return v;
}

void read_values(std::istream& is, double* data, Index n) {
  for (Index i = 0; i < n; ++i) {
    std::string tok;
    if (!(is >> tok)) throw Error(ErrorCode::Io, "checkpoint: truncated parameter block");
    data[i] = to_double(tok);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ScoreModel& model, const DsmConfig& dsm) {
  const MlpNet* net = nullptr;
  if (const auto* p = std::get_if<sk::Mlp>(&model.kind())) net = &p->net;
  if (const auto* p = std::get_if<sk::ConditionalMlp>(&model.kind())) net = &p->net;
  if (net == nullptr) throw Error(ErrorCode::ConfigInvalid, "only learned score models are checkpointed");

  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path.string());
  os << std::setprecision(17);
  os << kCheckpointHeader << '\n';
  os << "kind " << model.kind_name() << '\n';
  os << "condition_dim " << model.condition_dim() << '\n';
  os << "calibration " << model.calibration() << '\n';
  os << "dsm_mode " << to_string(dsm.mode) << '\n';
  os << "dsm_sigma " << dsm.sigma << '\n';
  os << "dsm_steps " << dsm.steps << '\n';
  os << "dsm_batch " << dsm.batch << '\n';
  os << "dsm_hidden " << dsm.hidden << '\n';
  const auto& o = dsm.optimizer;
  os << "adamw " << o.lr << ' ' << o.beta1 << ' ' << o.beta2 << ' ' << o.eps << ' ' << o.weight_decay
     << ' ' << o.clip_norm << '\n';
  os << "layers " << net->layers().size() << '\n';
  for (const auto& l : net->layers()) {
    os << "layer " << l.weight.rows() << ' ' << l.weight.cols() << '\n';
    write_values(os, l.weight.data(), l.weight.size());
    write_values(os, l.bias.data(), l.bias.size());
  }
  os << "end\n";
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

ScoreCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string header;
  std::getline(is, header);
  if (header != kCheckpointHeader) {
    throw Error(ErrorCode::Io, "not an " + std::string(kCheckpointHeader) + " file: " + path.string());
  }
  const std::string kind = expect_key(is, "kind");
  const Index k = std::stol(expect_key(is, "condition_dim"));
  const double c = to_double(expect_key(is, "calibration"));
  DsmConfig dsm;
  dsm.mode = parse_dsm_mode(expect_key(is, "dsm_mode"));
  dsm.sigma = to_double(expect_key(is, "dsm_sigma"));
  dsm.steps = std::stol(expect_key(is, "dsm_steps"));
  dsm.batch = std::stol(expect_key(is, "dsm_batch"));
  dsm.hidden = std::stol(expect_key(is, "dsm_hidden"));
  {
    std::istringstream line(expect_key(is, "adamw"));
    std::string a, b, cc, d, e, f;
    line >> a >> b >> cc >> d >> e >> f;
    dsm.optimizer = {to_double(a), to_double(b), to_double(cc), to_double(d), to_double(e), to_double(f)};
  }
  const long n_layers = std::stol(expect_key(is, "layers"));
  std::vector<DenseLayer> layers;
  for (long l = 0; l < n_layers; ++l) {
    std::istringstream dims(expect_key(is, "layer"));
    Index rows = 0, cols = 0;
    if (!(dims >> rows >> cols) || rows < 1 || cols < 1) throw Error(ErrorCode::Io, "checkpoint: bad layer shape");
    DenseLayer layer{Matrix(rows, cols), Vector(rows)};
    read_values(is, layer.weight.data(), layer.weight.size());
    read_values(is, layer.bias.data(), layer.bias.size());
    layers.push_back(std::move(layer));
  }
  std::string end;
  if (!(is >> end) || end != "end") throw Error(ErrorCode::Io, "checkpoint: missing end marker");

  MlpNet net(std::move(layers));
  ScoreModel model = kind == "conditional_mlp" ? ScoreModel::conditional_mlp(std::move(net), k)
                     : kind == "mlp"           ? ScoreModel::mlp(std::move(net))
                                               : throw Error(ErrorCode::Io, "checkpoint: unknown kind " + kind);
  model.set_calibration(c);
  return {std::move(model), dsm};
}

}  // namespace infograd
