#include <cmath>
#include <numeric>
#include <stdexcept>

#include "roesl/rl.hpp"
#include "roesl/util.hpp"

namespace roesl {

namespace {

std::vector<int> net_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes;
  sizes.push_back(input);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

}  // namespace

PpoLearner::PpoLearner(const PpoConfig& cfg, uint64_t seed)
    : policy(net_sizes(kObsDim, cfg.hidden, kNumLegs), Rng::derive(seed, 0xA1)) {
  Rng vrng(Rng::derive(seed, 0xA2));
  value = Mlp(net_sizes(kObsDim, cfg.hidden, 1), &vrng);
  init_optimizers();
}

PpoLearner::PpoLearner(GaussianPolicy p, Mlp v) : policy(std::move(p)), value(std::move(v)) {
  init_optimizers();
}

void PpoLearner::init_optimizers() {
  opt_mean_.resize(policy.mean.param_count());
  opt_logstd_.resize(kNumLegs);
  opt_value_.resize(value.param_count());
}

TrainStats PpoLearner::update(const PpoBatch& batch, const PpoConfig& cfg, Rng& shuffle_rng) {
  const size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("ppo update: empty batch");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> grad_mean(policy.mean.param_count());
  std::vector<double> grad_logstd(kNumLegs);
  std::vector<double> grad_value(value.param_count());
  Mlp::Workspace pws, vws;

  TrainStats stats;
  size_t minibatches = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the seeded generator.
    for (size_t i = n; i > 1; --i) {
      const size_t j = shuffle_rng.uniform_int(i);
      std::swap(order[i - 1], order[j]);
    }

    for (size_t start = 0; start < n; start += cfg.minibatch) {
      const size_t end = std::min(n, start + static_cast<size_t>(cfg.minibatch));
      const size_t m = end - start;
      std::fill(grad_mean.begin(), grad_mean.end(), 0.0);
      std::fill(grad_logstd.begin(), grad_logstd.end(), 0.0);
      std::fill(grad_value.begin(), grad_value.end(), 0.0);

      double pg_loss = 0.0, v_loss = 0.0, kl = 0.0;
      size_t clipped = 0;

      for (size_t b = start; b < end; ++b) {
        const size_t i = order[b];
        const auto mu = policy.mean.forward(batch.obs[i], pws);
        const double logp = policy.log_prob(mu, batch.raw_actions[i]);
        const double ratio = std::exp(logp - batch.logp_old[i]);
        const double adv = batch.advantages[i];

        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
        const double surr1 = ratio * adv;
        const double surr2 = clipped_ratio * adv;
        pg_loss += -std::min(surr1, surr2);
        kl += batch.logp_old[i] - logp;
        if (std::fabs(ratio - 1.0) > cfg.clip) ++clipped;

        // d(-min)/dlogp: gradient flows only when the unclipped branch is
        // the active minimum.
        const double dlogp = (surr1 <= surr2) ? -ratio * adv / m : 0.0;
        if (dlogp != 0.0) {
          std::array<double, kNumLegs> up{};
          for (int d = 0; d < kNumLegs; ++d) {
            const double inv_sigma = std::exp(-policy.log_std[d]);
            const double z = (batch.raw_actions[i][d] - mu[d]) * inv_sigma;
            up[d] = dlogp * z * inv_sigma;           // dlogp/dmu = z/sigma
            grad_logstd[d] += dlogp * (z * z - 1.0); // dlogp/dlogsigma
          }
          policy.mean.backward(pws, up, grad_mean);
        }

        const auto vout = value.forward(batch.obs[i], vws);
        const double verr = vout[0] - batch.returns[i];
        v_loss += verr * verr;
        const std::array<double, 1> vup = {cfg.value_coef * 2.0 * verr / m};
        value.backward(vws, vup, grad_value);
      }

      // Entropy bonus: state-independent, so it contributes a constant pull
      // on each log-std component.
      for (int d = 0; d < kNumLegs; ++d) grad_logstd[d] -= cfg.entropy_coef;

      opt_mean_.step(policy.mean.params, grad_mean, cfg.learning_rate);
      opt_logstd_.step(policy.log_std, grad_logstd, cfg.learning_rate);
      opt_value_.step(value.params, grad_value, cfg.learning_rate);
      policy.clamp_log_std();

      stats.policy_loss += pg_loss / m;
      stats.value_loss += v_loss / m;
      stats.approx_kl += kl / m;
      stats.clip_fraction += static_cast<double>(clipped) / m;
      ++minibatches;
    }
  }

  if (minibatches > 0) {
    stats.policy_loss /= minibatches;
    stats.value_loss /= minibatches;
    stats.approx_kl /= minibatches;
    stats.clip_fraction /= minibatches;
  }
  stats.entropy = policy.entropy();
  if (!std::isfinite(stats.policy_loss) || !std::isfinite(stats.value_loss))
    throw std::runtime_error("ppo: non-finite loss (policy=" + std::to_string(stats.policy_loss) +
                             ", value=" + std::to_string(stats.value_loss) + ")");
  return stats;
}

PpoResult train_ppo(const GaitEnvFactory& factory, const RewardSpec& spec, const PpoConfig& cfg,
                    uint64_t seed, const std::string& candidate_id, int iteration,
                    const GaussianPolicy* init_policy, const Mlp* init_value) {
  cfg.validate();

  PpoLearner learner = (init_policy && init_value)
                           ? PpoLearner(*init_policy, *init_value)
                           : PpoLearner(cfg, seed);
  if (init_policy && !init_value) {
    Rng vrng(Rng::derive(seed, 0xA2));
    learner = PpoLearner(*init_policy, Mlp(net_sizes(kObsDim, cfg.hidden, 1), &vrng));
  }

  Rng action_rng(Rng::derive(seed, 0xB0));
  Rng shuffle_rng(Rng::derive(seed, 0xB1));

  const int num_envs = cfg.num_envs;
  std::vector<GaitEnv> envs;
  std::vector<Obs> obs(num_envs);
  std::vector<int> reset_counts(num_envs, 0);
  envs.reserve(num_envs);
  for (int e = 0; e < num_envs; ++e) {
    envs.push_back(factory.make());
    obs[e] = envs[e].reset(Rng::derive(seed, 0xC0 + e, 0));
  }

  // Per-env transition chains, concatenated at the end. Step numbering
  // leaves a gap between chains so the dataset loader can tell stream
  // boundaries apart when reconstructing prev_action.
  std::vector<std::vector<Transition>> chains(num_envs);
  const long steps_per_env = cfg.total_steps / num_envs;
  for (auto& c : chains) c.reserve(steps_per_env);

  PpoResult result;
  Mlp::Workspace pws, vws;

  long collected = 0;
  while (collected < cfg.total_steps) {
    const long remaining = (cfg.total_steps - collected) / num_envs;
    const int horizon = static_cast<int>(std::min<long>(cfg.horizon, remaining));

    const size_t batch_n = static_cast<size_t>(horizon) * num_envs;
    PpoBatch batch;
    batch.obs.resize(batch_n);
    batch.raw_actions.resize(batch_n);
    batch.logp_old.resize(batch_n);
    std::vector<double> rewards(batch_n), values(batch_n);
    std::vector<uint8_t> dones(batch_n);

    for (int t = 0; t < horizon; ++t) {
      for (int e = 0; e < num_envs; ++e) {
        const size_t i = static_cast<size_t>(t) * num_envs + e;
        const auto sampled = learner.policy.sample(obs[e], action_rng, pws);
        values[i] = learner.value.forward(obs[e], vws)[0];
        batch.obs[i] = obs[e];
        batch.raw_actions[i] = sampled.raw;
        batch.logp_old[i] = sampled.log_prob;

        const Action prev = envs[e].state().prev_action;
        const auto step = envs[e].step(sampled.clamped);

        Transition tr;
        tr.obs = obs[e];
        tr.action = sampled.clamped;
        tr.prev_action = prev;
        tr.next_obs = step.obs;
        tr.done = step.done;
        tr.reward = eval_reward(spec, tr);
        tr.source_candidate = candidate_id;
        tr.iteration = iteration;
        rewards[i] = tr.reward;
        dones[i] = step.done ? 1 : 0;
        if (step.done) {
          // Episodes end by time limit only, and the observation carries no
          // time-to-go, so the terminal state is bootstrapped like any other
          // state. Only the GAE input sees this; the logged reward stays pure.
          rewards[i] += cfg.gamma * learner.value.forward(step.obs, vws)[0];
        }
        chains[e].push_back(std::move(tr));

        if (step.done) {
          obs[e] = envs[e].reset(Rng::derive(seed, 0xC0 + e, ++reset_counts[e]));
        } else {
          obs[e] = step.obs;
        }
      }
    }

    // Per-env GAE with a bootstrap from the value net at the next obs (the
    // reset obs after a terminal, but the done flag gates it off there).
    std::vector<double> env_rewards(horizon), env_values(horizon);
    std::vector<uint8_t> env_dones(horizon);
    batch.advantages.resize(batch_n);
    batch.returns.resize(batch_n);
    for (int e = 0; e < num_envs; ++e) {
      for (int t = 0; t < horizon; ++t) {
        const size_t i = static_cast<size_t>(t) * num_envs + e;
        env_rewards[t] = rewards[i];
        env_values[t] = values[i];
        env_dones[t] = dones[i];
      }
      const double boot = learner.value.forward(obs[e], vws)[0];
      const auto gae = gae_advantages(env_rewards, env_values, env_dones, cfg.gamma,
                                      cfg.gae_lambda, boot);
      for (int t = 0; t < horizon; ++t) {
        const size_t i = static_cast<size_t>(t) * num_envs + e;
        batch.advantages[i] = gae.advantages[t];
        batch.returns[i] = gae.returns[t];
      }
    }

    // Normalize advantages per batch.
    const double adv_mean = mean(batch.advantages);
    double var = 0.0;
    for (double a : batch.advantages) var += (a - adv_mean) * (a - adv_mean);
    const double adv_std = std::max(std::sqrt(var / batch_n), 1e-8);
    for (double& a : batch.advantages) a = (a - adv_mean) / adv_std;

    result.stats.push_back(learner.update(batch, cfg, shuffle_rng));
    collected += static_cast<long>(batch_n);
  }

  // Flatten chains env-major; the +1 gap separates the streams.
  const long chain_stride = steps_per_env + 1;
  for (int e = 0; e < num_envs; ++e) {
    for (size_t s = 0; s < chains[e].size(); ++s) {
      chains[e][s].step = static_cast<long>(e) * chain_stride + static_cast<long>(s);
      result.transitions.push_back(std::move(chains[e][s]));
    }
  }

  if (!result.transitions.empty()) {
    double sum = 0.0;
    for (const auto& t : result.transitions) sum += t.reward;
    result.final_mean_reward = sum / result.transitions.size();
  }

  GaitEnv eval_env = factory.make();
  result.eval_rollout = rollout(
      eval_env, learner.policy.as_policy(), Rng::derive(seed, 0xE0),
      [&](const Obs& next, const Action& a, const Action& prev) {
        return eval_reward(spec, context_from(next, a, prev));
      },
      candidate_id);

  result.policy = std::move(learner.policy);
  result.value = std::move(learner.value);
  return result;
}

}  // namespace roesl
