#pragma once

// Small fully connected network with SiLU hidden activations and an identity output,
// hand-written backpropagation, and an AdamW optimizer with global-norm clipping.

#include <functional>
#include <vector>

#include "infograd/core_math.hpp"

namespace infograd {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// Gradients share the parameter layout.
using MlpGrads = std::vector<DenseLayer>;

class MlpNet {
 public:
  MlpNet() = default;
  // Hidden layers: uniform(-b, b) with b = sqrt(2) * sqrt(3 / fan_in); output layer zero.
  MlpNet(const std::vector<Index>& widths, Rng& rng);
  static MlpNet zeros(const std::vector<Index>& widths);
  explicit MlpNet(std::vector<DenseLayer> layers);

  Index input_dim() const { return layers_.front().weight.cols(); }
  Index output_dim() const { return layers_.back().weight.rows(); }
  std::vector<Index> widths() const;
  Index param_count() const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  Matrix forward(const Matrix& input) const;

  struct Pass {
    Matrix output;          // B x d_out
    MlpGrads param_grads;   // grad_params of (1/B) sum_i <net(x_i), u_i>
    Matrix input_grads;     // grad_input of the same scalar
  };
  Pass forward_backward(const Matrix& input, const Matrix& upstream) const;
  // Same, with the upstream gradient computed from the forward output (one forward pass).
  Pass forward_backward(const Matrix& input,
                        const std::function<Matrix(const Matrix& output)>& upstream_of) const;

  Vector flat_params() const;
  void set_flat_params(const Vector& flat);

 private:
  std::vector<DenseLayer> layers_;
};

Vector flatten(const MlpGrads& grads);
double global_norm(const MlpGrads& grads);

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

class AdamW {
 public:
  AdamW() = default;
  AdamW(const MlpNet& net, AdamWConfig config);

  const AdamWConfig& config() const noexcept { return config_; }
  long step_count() const noexcept { return steps_; }

  // Clips `grads` to config.clip_norm, then applies one decoupled-weight-decay Adam
  // update. Returns the gradient norm before clipping.
  double step(MlpNet& net, MlpGrads grads);

 private:
  AdamWConfig config_;
  MlpGrads first_;
  MlpGrads second_;
  long steps_ = 0;
};

}  // namespace infograd
