#include "infograd/mlp.hpp"

#include <cmath>
#include <string>

namespace infograd {

namespace {

// silu(h) = h * sigmoid(h)
Matrix silu(const Matrix& h) {
  return (h.array() / (1.0 + (-h.array()).exp())).matrix();
}

// d silu / dh = sig(h) * (1 + h * (1 - sig(h)))
Matrix silu_prime(const Matrix& h) {
  const auto sig = 1.0 / (1.0 + (-h.array()).exp());
  return (sig * (1.0 + h.array() * (1.0 - sig))).matrix();
}

MlpGrads zeros_like(const std::vector<DenseLayer>& layers) {
  MlpGrads g;
  g.reserve(layers.size());
  for (const auto& l : layers) {
    g.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  }
  return g;
}

}  // namespace

MlpNet::MlpNet(const std::vector<Index>& widths, Rng& rng) : MlpNet(zeros(widths)) {
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    auto& w = layers_[l].weight;
    const double bound = std::sqrt(2.0) * std::sqrt(3.0 / static_cast<double>(w.cols()));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = bound * (2.0 * rng.uniform() - 1.0);
  }
}

MlpNet MlpNet::zeros(const std::vector<Index>& widths) {
  if (widths.size() < 2) throw Error(ErrorCode::ShapeMismatch, "MLP needs at least two widths");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] < 1 || widths[l + 1] < 1) {
      throw Error(ErrorCode::ShapeMismatch, "MLP widths must be positive");
    }
    layers.push_back({Matrix::Zero(widths[l + 1], widths[l]), Vector::Zero(widths[l + 1])});
  }
  return MlpNet(std::move(layers));
}

MlpNet::MlpNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::ShapeMismatch, "MLP has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "bias length differs from layer width");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw Error(ErrorCode::ShapeMismatch, "consecutive layer shapes do not chain");
    }
    require_finite(layer.weight, "MLP weights");
    require_finite(layer.bias, "MLP biases");
  }
}

std::vector<Index> MlpNet::widths() const {
  std::vector<Index> w{input_dim()};
  for (const auto& l : layers_) w.push_back(l.weight.rows());
  return w;
}

Index MlpNet::param_count() const {
  Index n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

Matrix MlpNet::forward(const Matrix& input) const {
  require_cols(input, input_dim(), "MLP input");
  Matrix h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix pre = h * layers_[l].weight.transpose();
    pre.rowwise() += layers_[l].bias.transpose();
    h = (l + 1 < layers_.size()) ? silu(pre) : std::move(pre);
  }
  return h;
}

MlpNet::Pass MlpNet::forward_backward(const Matrix& input, const Matrix& upstream) const {
  return forward_backward(input, [&upstream](const Matrix&) { return upstream; });
}

MlpNet::Pass MlpNet::forward_backward(
    const Matrix& input, const std::function<Matrix(const Matrix& output)>& upstream_of) const {
  require_cols(input, input_dim(), "MLP input");
  const std::size_t depth = layers_.size();
  const double inv_b = 1.0 / static_cast<double>(input.rows());

  // acts[l] is the input of layer l; pres[l] its pre-activation.
  std::vector<Matrix> acts(depth + 1);
  std::vector<Matrix> pres(depth);
  acts[0] = input;
  for (std::size_t l = 0; l < depth; ++l) {
    pres[l] = acts[l] * layers_[l].weight.transpose();
    pres[l].rowwise() += layers_[l].bias.transpose();
    acts[l + 1] = (l + 1 < depth) ? silu(pres[l]) : pres[l];
  }

  Pass pass;
  pass.output = acts[depth];
  const Matrix upstream = upstream_of(pass.output);
  require_cols(upstream, output_dim(), "MLP upstream gradient");
  if (upstream.rows() != input.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "upstream and input batch sizes differ");
  }
  pass.param_grads.resize(depth);
  Matrix delta = upstream * inv_b;  // d scalar / d pre-activation of the last layer
  for (std::size_t l = depth; l-- > 0;) {
    if (l + 1 < depth) delta.array() *= silu_prime(pres[l]).array();
    pass.param_grads[l].weight = delta.transpose() * acts[l];
    pass.param_grads[l].bias = delta.colwise().sum().transpose();
    delta = delta * layers_[l].weight;
  }
  pass.input_grads = std::move(delta);
  return pass;
}

Vector MlpNet::flat_params() const {
  Vector flat(param_count());
  Index off = 0;
  for (const auto& l : layers_) {
    flat.segment(off, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
    off += l.weight.size();
    flat.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return flat;
}

void MlpNet::set_flat_params(const Vector& flat) {
  if (flat.size() != param_count()) {
    throw Error(ErrorCode::ShapeMismatch, "flat parameter vector has wrong length");
  }
  Index off = 0;
  for (auto& l : layers_) {
    Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = flat.segment(off, l.weight.size());
    off += l.weight.size();
    l.bias = flat.segment(off, l.bias.size());
    off += l.bias.size();
  }
}

Vector flatten(const MlpGrads& grads) {
  Index n = 0;
  for (const auto& g : grads) n += g.weight.size() + g.bias.size();
  Vector flat(n);
  Index off = 0;
  for (const auto& g : grads) {
    flat.segment(off, g.weight.size()) = Eigen::Map<const Vector>(g.weight.data(), g.weight.size());
    off += g.weight.size();
    flat.segment(off, g.bias.size()) = g.bias;
    off += g.bias.size();
  }
  return flat;
}

double global_norm(const MlpGrads& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.weight.squaredNorm() + g.bias.squaredNorm();
  return std::sqrt(sq);
}

AdamW::AdamW(const MlpNet& net, AdamWConfig config)
    : config_(config), first_(zeros_like(net.layers())), second_(zeros_like(net.layers())) {}

double AdamW::step(MlpNet& net, MlpGrads grads) {
  auto& layers = net.layers();
  if (grads.size() != layers.size() || first_.size() != layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match the network");
  }
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw Error(ErrorCode::NonFiniteLoss, "non-finite gradient");
  if (config_.clip_norm > 0.0 && norm > config_.clip_norm) {
    const double scale = config_.clip_norm / norm;
    for (auto& g : grads) {
      g.weight *= scale;
      g.bias *= scale;
    }
  }
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = config_.lr, wd = config_.weight_decay, eps = config_.eps;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
    param.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + eps) + wd * param.array());
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight, first_[l].weight, second_[l].weight, grads[l].weight);
    update(layers[l].bias, first_[l].bias, second_[l].bias, grads[l].bias);
  }
  return norm;
}

}  // namespace infograd
