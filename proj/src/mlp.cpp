#include "roesl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace roesl {

Mlp::Mlp(std::vector<int> sizes, Rng* rng) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least one layer");
  for (int s : sizes_)
    if (s <= 0) throw std::invalid_argument("Mlp layer sizes must be positive");
  build_offsets();
  if (rng) {
    for (int l = 0; l < num_layers(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double bound = std::sqrt(6.0 / (in + out));
      auto w = layer_weights(l);
      for (double& x : w) x = rng->uniform(-bound, bound);
      // biases stay zero
    }
  }
}

void Mlp::build_offsets() {
  w_off_.clear();
  b_off_.clear();
  size_t off = 0;
  for (int l = 0; l < num_layers(); ++l) {
    w_off_.push_back(off);
    off += static_cast<size_t>(sizes_[l]) * sizes_[l + 1];
    b_off_.push_back(off);
    off += static_cast<size_t>(sizes_[l + 1]);
  }
  params.assign(off, 0.0);
}

std::span<double> Mlp::layer_weights(int layer) {
  return {params.data() + w_off_[layer], static_cast<size_t>(sizes_[layer]) * sizes_[layer + 1]};
}

std::span<double> Mlp::layer_biases(int layer) {
  return {params.data() + b_off_[layer], static_cast<size_t>(sizes_[layer + 1])};
}

std::span<const double> Mlp::forward(std::span<const double> input, Workspace& ws) const {
  if (static_cast<int>(input.size()) != input_size())
    throw std::invalid_argument("Mlp::forward: input size " + std::to_string(input.size()) +
                                " does not match declared " + std::to_string(input_size()));

  size_t total = 0;
  ws.offsets.resize(sizes_.size());
  for (size_t i = 0; i < sizes_.size(); ++i) {
    ws.offsets[i] = total;
    total += static_cast<size_t>(sizes_[i]);
  }
  ws.acts.resize(total);

  double* a0 = ws.acts.data();
  for (int i = 0; i < input_size(); ++i) a0[i] = input[i];

  const int layers = num_layers();
  for (int l = 0; l < layers; ++l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const double* x = ws.acts.data() + ws.offsets[l];
    double* y = ws.acts.data() + ws.offsets[l + 1];
    const double* w = params.data() + w_off_[l];
    const double* b = params.data() + b_off_[l];
    for (int o = 0; o < out; ++o) {
      const double* row = w + static_cast<size_t>(o) * in;
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = (l + 1 < layers) ? std::tanh(acc) : acc;
    }
  }
  return {ws.acts.data() + ws.offsets[layers], static_cast<size_t>(sizes_[layers])};
}

void Mlp::backward(const Workspace& ws, std::span<const double> upstream, std::span<double> grad,
                   std::span<double> input_grad) const {
  if (static_cast<int>(upstream.size()) != output_size())
    throw std::invalid_argument("Mlp::backward: upstream size mismatch");
  if (grad.size() != params.size())
    throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");

  const int layers = num_layers();
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> delta_prev;

  for (int l = layers - 1; l >= 0; --l) {
    const int in = sizes_[l], out = sizes_[l + 1];
    const double* x = ws.acts.data() + ws.offsets[l];
    const double* w = params.data() + w_off_[l];
    double* gw = grad.data() + w_off_[l];
    double* gb = grad.data() + b_off_[l];

    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      double* grow = gw + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * x[i];
      gb[o] += d;
    }

    const bool need_input = l > 0 || !input_grad.empty();
    if (!need_input) break;

    delta_prev.assign(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = delta[o];
      const double* row = w + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) delta_prev[i] += d * row[i];
    }
    if (l > 0) {
      // x here is a tanh activation, so dtanh = 1 - x^2.
      for (int i = 0; i < in; ++i) delta_prev[i] *= 1.0 - x[i] * x[i];
    } else {
      for (int i = 0; i < in; ++i) input_grad[i] = delta_prev[i];
    }
    delta.swap(delta_prev);
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("Adam::step: size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, t_);
  const double bc2 = 1.0 - std::pow(beta2, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace roesl
