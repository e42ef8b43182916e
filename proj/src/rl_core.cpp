#include <cmath>
#include <numbers>
#include <stdexcept>

#include "roesl/rl.hpp"
#include "roesl/util.hpp"

namespace roesl {

namespace {
constexpr double kLogTau = 1.8378770664093453;  // ln(2*pi)
}

GaussianPolicy::GaussianPolicy(std::vector<int> mean_sizes, uint64_t init_seed) {
  Rng rng(Rng::derive(init_seed, 0x60));
  mean = Mlp(std::move(mean_sizes), &rng);
  if (mean.output_size() != kNumLegs)
    throw std::invalid_argument("policy mean net must have 4 outputs");
  // Small final layer keeps the initial action mean near zero.
  const int last = mean.num_layers() - 1;
  for (double& w : mean.layer_weights(last)) w *= 0.1;
  log_std.fill(kLogStdInit);
}

Action GaussianPolicy::mean_action(const Obs& obs, Mlp::Workspace& ws) const {
  const auto out = mean.forward(obs, ws);
  Action a;
  for (int i = 0; i < kNumLegs; ++i) a[i] = clamp_unit(out[i]);
  return a;
}

GaussianPolicy::Sampled GaussianPolicy::sample(const Obs& obs, Rng& rng,
                                               Mlp::Workspace& ws) const {
  const auto mu = mean.forward(obs, ws);
  Sampled s;
  for (int i = 0; i < kNumLegs; ++i) {
    const double sigma = std::exp(log_std[i]);
    s.raw[i] = mu[i] + sigma * rng.normal();
    s.clamped[i] = clamp_unit(s.raw[i]);
  }
  s.log_prob = log_prob(mu, s.raw);
  return s;
}

double GaussianPolicy::log_prob(std::span<const double> mean_out,
                                const std::array<double, kNumLegs>& raw) const {
  double lp = 0.0;
  for (int i = 0; i < kNumLegs; ++i) {
    const double z = (raw[i] - mean_out[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLogTau;
  }
  return lp;
}

namespace {

// log Phi(h) and phi(h)/Phi(h) for the censored-tail terms, stable far into
// the left tail.
double log_normal_cdf(double h) {
  if (h < -30.0) h = -30.0;
  return std::log(0.5 * std::erfc(-h / std::numbers::sqrt2));
}

double normal_hazard(double h) {
  if (h < -30.0) h = -30.0;
  const double log_pdf = -0.5 * h * h - 0.5 * kLogTau;
  return std::exp(log_pdf - log_normal_cdf(h));
}

}  // namespace

GaussianPolicy::ClampedLogProb GaussianPolicy::log_prob_clamped(
    std::span<const double> mean_out, const Action& action) const {
  ClampedLogProb out;
  for (int i = 0; i < kNumLegs; ++i) {
    const double sigma = std::exp(log_std[i]);
    const double inv_sigma = 1.0 / sigma;
    if (action[i] >= 1.0) {
      // P(raw >= 1) = Phi((mu - 1) / sigma)
      const double h = (mean_out[i] - 1.0) * inv_sigma;
      const double r = normal_hazard(h);
      out.log_prob += log_normal_cdf(h);
      out.d_mean[i] = r * inv_sigma;
      out.d_log_std[i] = -r * h;
    } else if (action[i] <= -1.0) {
      // P(raw <= -1) = Phi((-1 - mu) / sigma)
      const double h = (-1.0 - mean_out[i]) * inv_sigma;
      const double r = normal_hazard(h);
      out.log_prob += log_normal_cdf(h);
      out.d_mean[i] = -r * inv_sigma;
      out.d_log_std[i] = -r * h;
    } else {
      const double z = (action[i] - mean_out[i]) * inv_sigma;
      out.log_prob += -0.5 * z * z - log_std[i] - 0.5 * kLogTau;
      out.d_mean[i] = z * inv_sigma;
      out.d_log_std[i] = z * z - 1.0;
    }
  }
  return out;
}

double GaussianPolicy::entropy() const {
  double h = 0.0;
  for (double ls : log_std) h += ls + 0.5 * (1.0 + kLogTau);
  return h;
}

void GaussianPolicy::clamp_log_std() {
  for (double& ls : log_std) ls = std::clamp(ls, kLogStdMin, kLogStdMax);
}

PolicyFn GaussianPolicy::as_policy() const {
  return [self = *this, ws = Mlp::Workspace{}](const GaitState&, const Obs& obs) mutable {
    return self.mean_action(obs, ws);
  };
}

GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                         std::span<const uint8_t> dones, double gamma, double lambda,
                         double bootstrap_value) {
  const size_t n = rewards.size();
  if (values.size() != n || dones.size() != n)
    throw std::invalid_argument("gae_advantages: sequence length mismatch");

  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double running = 0.0;
  for (size_t i = n; i-- > 0;) {
    const double not_done = dones[i] ? 0.0 : 1.0;
    const double next_value = (i + 1 < n) ? values[i + 1] : bootstrap_value;
    const double delta = rewards[i] + gamma * next_value * not_done - values[i];
    running = delta + gamma * lambda * not_done * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
  }
  return out;
}

double expectile_loss(double u, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("expectile tau must be in (0,1)");
  const double w = u < 0.0 ? 1.0 - tau : tau;
  return w * u * u;
}

void PpoConfig::validate() const {
  if (num_envs < 1 || horizon < 1 || minibatch < 1 || epochs < 1)
    throw std::invalid_argument("ppo sizes must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo.gamma must be in (0,1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0))
    throw std::invalid_argument("ppo.gae_lambda must be in (0,1]");
  if (!(clip > 0.0)) throw std::invalid_argument("ppo.clip must be > 0");
  if (learning_rate < 0.0) throw std::invalid_argument("ppo.learning_rate must be >= 0");
  if (total_steps < 0) throw std::invalid_argument("ppo.total_steps must be >= 0");
  if (total_steps % num_envs != 0)
    throw std::invalid_argument("ppo.total_steps must be a multiple of ppo.num_envs");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("ppo.hidden sizes must be positive");
}

void IqlConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument("iql.temperature must be > 0");
  if (!(target_update > 0.0 && target_update <= 1.0))
    throw std::invalid_argument("iql.target_update must be in (0,1]");
  if (!(expectile > 0.0 && expectile < 1.0))
    throw std::invalid_argument("iql.expectile must be in (0,1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("iql.gamma must be in (0,1]");
  if (learning_rate < 0.0) throw std::invalid_argument("iql.learning_rate must be >= 0");
  if (grad_steps < 0) throw std::invalid_argument("iql.grad_steps must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("iql.batch_size must be >= 1");
  if (!(awr_weight_clip > 0.0)) throw std::invalid_argument("iql.awr_weight_clip must be > 0");
  if (awr_advantage_steps < 1)
    throw std::invalid_argument("iql.awr_advantage_steps must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("iql.hidden sizes must be positive");
}

}  // namespace roesl
