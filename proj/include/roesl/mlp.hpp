#pragma once

#include <span>
#include <vector>

#include "roesl/rng.hpp"

namespace roesl {

// Fully connected net with tanh hidden layers and a linear output head.
// Parameters are packed flat (per layer: weights row-major [out][in], then
// biases) so optimizers and checkpoints can treat them as one block.
class Mlp {
 public:
  Mlp() = default;
  // rng == nullptr leaves all parameters at zero.
  Mlp(std::vector<int> sizes, Rng* rng);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  size_t param_count() const { return params.size(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }

  std::span<double> layer_weights(int layer);
  std::span<double> layer_biases(int layer);

  // Activation storage for one forward pass; reusable across calls.
  struct Workspace {
    std::vector<double> acts;
    std::vector<size_t> offsets;
  };

  std::span<const double> forward(std::span<const double> input, Workspace& ws) const;

  // Reverse-mode gradients of (output . upstream) with respect to all
  // parameters, accumulated into grad. Optionally also w.r.t. the input.
  void backward(const Workspace& ws, std::span<const double> upstream, std::span<double> grad,
                std::span<double> input_grad = {}) const;

  std::vector<double> params;

 private:
  std::vector<int> sizes_;
  std::vector<size_t> w_off_, b_off_;
  void build_offsets();
};

// Adaptive-moment estimation with the usual defaults.
class Adam {
 public:
  explicit Adam(size_t n = 0) : m_(n, 0.0), v_(n, 0.0) {}
  void resize(size_t n) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
    t_ = 0;
  }
  void step(std::span<double> params, std::span<const double> grad, double lr);

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

 private:
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace roesl
