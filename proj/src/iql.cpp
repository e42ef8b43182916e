#include <cmath>
#include <stdexcept>

#include "roesl/rl.hpp"

namespace roesl {

namespace {

std::vector<int> net_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes;
  sizes.push_back(input);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

constexpr int kQInput = kObsDim + kNumLegs;

void fill_q_input(std::array<double, kQInput>& buf, const Obs& obs, const Action& action) {
  for (int i = 0; i < kObsDim; ++i) buf[i] = obs[i];
  for (int i = 0; i < kNumLegs; ++i) buf[kObsDim + i] = action[i];
}

}  // namespace

IqlLearner::IqlLearner(const IqlConfig& cfg, uint64_t seed)
    : policy(net_sizes(kObsDim, cfg.hidden, kNumLegs), Rng::derive(seed, 0xD1)) {
  Rng qrng(Rng::derive(seed, 0xD2));
  Rng vrng(Rng::derive(seed, 0xD3));
  q = Mlp(net_sizes(kQInput, cfg.hidden, 1), &qrng);
  v = Mlp(net_sizes(kObsDim, cfg.hidden, 1), &vrng);
  q_target = q;
  opt_mean_.resize(policy.mean.param_count());
  opt_logstd_.resize(kNumLegs);
  opt_q_.resize(q.param_count());
  opt_v_.resize(v.param_count());
}

std::vector<long> build_chain_next(const OfflineDataset& dataset) {
  std::vector<long> next(dataset.size(), -1);
  for (size_t i = 0; i + 1 < dataset.size(); ++i) {
    const Transition& a = dataset.transitions[i];
    const Transition& b = dataset.transitions[i + 1];
    if (a.source_candidate == b.source_candidate && a.iteration == b.iteration &&
        b.step == a.step + 1)
      next[i] = static_cast<long>(i + 1);
  }
  return next;
}

IqlStats IqlLearner::update(const OfflineDataset& ds, std::span<const long> chain_next,
                            std::span<const size_t> indices, const IqlConfig& cfg) {
  const size_t m = indices.size();
  if (m == 0) throw std::invalid_argument("iql update: empty batch");

  // The nets regress returns scaled by (1 - gamma) so they converge within a
  // small gradient budget; advantages are mapped back to reward units before
  // the AWR weighting.
  const double scale = cfg.gamma < 1.0 ? 1.0 - cfg.gamma : 1.0;

  std::vector<double> grad_q(q.param_count(), 0.0);
  std::vector<double> grad_v(v.param_count(), 0.0);
  std::vector<double> grad_mean(policy.mean.param_count(), 0.0);
  std::vector<double> grad_logstd(kNumLegs, 0.0);
  Mlp::Workspace qws, qtws, vws, vpws, pws;

  IqlStats stats;
  std::array<double, kQInput> qin;

  // First pass: critic updates plus the raw n-step advantages.
  std::vector<double> advantages(m);
  size_t pos = 0;
  for (size_t idx : indices) {
    const Transition& t = ds.transitions[idx];
    fill_q_input(qin, t.obs, t.action);

    // All heads are evaluated with start-of-step parameters; targets take no
    // gradient (V(s') for the Q target, Q_target(s,a) for V).
    const double v_s = v.forward(t.obs, vws)[0];
    const double v_next = v.forward(t.next_obs, vpws)[0];
    const double q_t = q_target.forward(qin, qtws)[0];
    const double q_sa = q.forward(qin, qws)[0];

    // V: expectile regression on target-Q residuals.
    const double u = q_t - v_s;
    const double ew = u < 0.0 ? 1.0 - cfg.expectile : cfg.expectile;
    stats.v_loss += ew * u * u;
    const std::array<double, 1> v_up = {-2.0 * ew * u / m};
    v.backward(vws, v_up, grad_v);

    // Q: TD toward r + gamma * V(s'). Episodes end by time limit only, so
    // the bootstrap runs through the done flag.
    const double y = scale * t.reward + cfg.gamma * v_next;
    const double qerr = q_sa - y;
    stats.q_loss += qerr * qerr;
    const std::array<double, 1> q_up = {2.0 * qerr / m};
    q.backward(qws, q_up, grad_q);

    // n-step TD advantage for the AWR weights: it reads the action's
    // observed effect straight from the stored rollout, which resolves far
    // more sharply than Q(s,a) - V(s) on this slow-integrator task.
    double target = 0.0;
    double discount = 1.0;
    size_t j = idx;
    for (int step = 0;; ++step) {
      target += discount * scale * ds.transitions[j].reward;
      discount *= cfg.gamma;
      const long nxt = chain_next[j];
      if (step + 1 >= cfg.awr_advantage_steps || nxt < 0) {
        target += discount * ((j == idx) ? v_next : v.forward(ds.transitions[j].next_obs, vpws)[0]);
        break;
      }
      j = static_cast<size_t>(nxt);
    }
    advantages[pos++] = (target - v_s) / scale;
  }

  // Advantages are centered per batch so critic lag cannot rail the whole
  // batch against the weight clip.
  double adv_mean = 0.0;
  for (double a : advantages) adv_mean += a / m;

  // Second pass: advantage-weighted regression toward dataset actions.
  // Stored actions are post-clamp, so the censored likelihood keeps bound
  // actions from dragging the fitted mean.
  pos = 0;
  for (size_t idx : indices) {
    const Transition& t = ds.transitions[idx];
    const double adv = advantages[pos++] - adv_mean;
    const double w = std::min(std::exp(adv / cfg.temperature), cfg.awr_weight_clip);
    stats.mean_weight += w;
    const auto mu = policy.mean.forward(t.obs, pws);
    const auto lp = policy.log_prob_clamped(mu, t.action);
    stats.policy_loss += -w * lp.log_prob;
    std::array<double, kNumLegs> up{};
    for (int d = 0; d < kNumLegs; ++d) {
      up[d] = -w * lp.d_mean[d] / m;
      grad_logstd[d] += -w * lp.d_log_std[d] / m;
    }
    policy.mean.backward(pws, up, grad_mean);
  }

  opt_v_.step(v.params, grad_v, cfg.learning_rate);
  opt_q_.step(q.params, grad_q, cfg.learning_rate);
  opt_mean_.step(policy.mean.params, grad_mean, cfg.learning_rate);
  opt_logstd_.step(policy.log_std, grad_logstd, cfg.learning_rate);
  policy.clamp_log_std();

  // Polyak target update.
  for (size_t i = 0; i < q.params.size(); ++i)
    q_target.params[i] += cfg.target_update * (q.params[i] - q_target.params[i]);

  stats.q_loss /= m;
  stats.v_loss /= m;
  stats.policy_loss /= m;
  stats.mean_weight /= m;
  if (!std::isfinite(stats.q_loss) || !std::isfinite(stats.v_loss) ||
      !std::isfinite(stats.policy_loss))
    throw std::runtime_error("iql: non-finite loss (q=" + std::to_string(stats.q_loss) +
                             ", v=" + std::to_string(stats.v_loss) +
                             ", policy=" + std::to_string(stats.policy_loss) + ")");
  return stats;
}

namespace {

// The heads are linear, so scaling the last layer converts the net's output
// from the internally scaled return estimate back to reward units.
void rescale_output(Mlp& net, double factor) {
  const int last = net.num_layers() - 1;
  for (double& w : net.layer_weights(last)) w *= factor;
  for (double& b : net.layer_biases(last)) b *= factor;
}

}  // namespace

IqlResult train_iql(const OfflineDataset& dataset, const IqlConfig& cfg, uint64_t seed) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train_iql: dataset is empty");

  IqlLearner learner(cfg, seed);
  Rng batch_rng(Rng::derive(seed, 0xD0));
  const std::vector<long> chain_next = build_chain_next(dataset);

  IqlResult result;
  result.stats.reserve(cfg.grad_steps);
  std::vector<size_t> indices(cfg.batch_size);
  for (long step = 0; step < cfg.grad_steps; ++step) {
    for (auto& i : indices) i = batch_rng.uniform_int(dataset.size());
    result.stats.push_back(learner.update(dataset, chain_next, indices, cfg));
  }

  result.policy = std::move(learner.policy);
  result.value = std::move(learner.v);
  result.q = std::move(learner.q);
  if (cfg.grad_steps > 0 && cfg.gamma < 1.0) {
    rescale_output(result.value, 1.0 / (1.0 - cfg.gamma));
    rescale_output(result.q, 1.0 / (1.0 - cfg.gamma));
  }
  return result;
}

}  // namespace roesl
