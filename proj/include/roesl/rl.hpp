#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roesl/dataset.hpp"
#include "roesl/gait.hpp"
#include "roesl/mlp.hpp"
#include "roesl/reward.hpp"
#include "roesl/rng.hpp"

namespace roesl {

// Diagonal Gaussian policy: MLP mean head plus a state-independent log-std
// vector. Sampled actions are clamped to [-1,1] before they reach the
// environment; log-probabilities are taken at the unclamped sample.
class GaussianPolicy {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 1.0;
  static constexpr double kLogStdInit = -0.5;

  GaussianPolicy() = default;
  GaussianPolicy(std::vector<int> mean_sizes, uint64_t init_seed);

  Action mean_action(const Obs& obs, Mlp::Workspace& ws) const;

  struct Sampled {
    std::array<double, kNumLegs> raw{};
    Action clamped{};
    double log_prob = 0.0;
  };
  Sampled sample(const Obs& obs, Rng& rng, Mlp::Workspace& ws) const;

  double log_prob(std::span<const double> mean_out,
                  const std::array<double, kNumLegs>& raw) const;

  // Likelihood of an executed (clamped) action: Gaussian density in the
  // interior, censored tail mass at the +-1 bounds. Needed when fitting
  // dataset actions, which only record the post-clamp values.
  struct ClampedLogProb {
    double log_prob = 0.0;
    std::array<double, kNumLegs> d_mean{};
    std::array<double, kNumLegs> d_log_std{};
  };
  ClampedLogProb log_prob_clamped(std::span<const double> mean_out, const Action& action) const;

  double entropy() const;
  void clamp_log_std();

  PolicyFn as_policy() const;  // deterministic (mean action)

  Mlp mean;
  std::array<double, kNumLegs> log_std{};
};

// --------------------------------------------------------------------- GAE

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Standard generalized advantage estimation; done flags reset the recursion
// and gate the bootstrap.
GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                         std::span<const uint8_t> dones, double gamma, double lambda,
                         double bootstrap_value);

// --------------------------------------------------------------------- PPO

struct PpoConfig {
  int num_envs = 64;
  int horizon = 64;        // steps collected per env per update
  int minibatch = 1024;
  int epochs = 4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double entropy_coef = 0.01;
  double learning_rate = 1e-3;
  double clip = 0.2;
  double value_coef = 0.5;
  long total_steps = 200000;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

struct TrainStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct PpoBatch {
  std::vector<Obs> obs;
  std::vector<std::array<double, kNumLegs>> raw_actions;
  std::vector<double> logp_old;
  std::vector<double> advantages;
  std::vector<double> returns;

  size_t size() const { return obs.size(); }
};

// Owns the actor-critic parameters and their optimizer state across updates.
class PpoLearner {
 public:
  PpoLearner(const PpoConfig& cfg, uint64_t seed);
  PpoLearner(GaussianPolicy policy, Mlp value);

  // One full update phase: `epochs` passes of clipped-surrogate minibatch
  // steps over the batch. Advantages must already be normalized.
  TrainStats update(const PpoBatch& batch, const PpoConfig& cfg, Rng& shuffle_rng);

  GaussianPolicy policy;
  Mlp value;

 private:
  Adam opt_mean_, opt_logstd_, opt_value_;
  void init_optimizers();
};

struct PpoResult {
  GaussianPolicy policy;
  Mlp value;
  std::vector<Transition> transitions;  // exactly total_steps entries
  Trajectory eval_rollout;              // deterministic mean-action episode
  std::vector<TrainStats> stats;
  double final_mean_reward = 0.0;
};

// Trains PPO from scratch (or from the given warm start) under the reward
// spec, labeling and logging every environment transition for offline reuse.
PpoResult train_ppo(const GaitEnvFactory& factory, const RewardSpec& spec, const PpoConfig& cfg,
                    uint64_t seed, const std::string& candidate_id, int iteration = 0,
                    const GaussianPolicy* init_policy = nullptr, const Mlp* init_value = nullptr);

// --------------------------------------------------------------------- IQL

struct IqlConfig {
  double temperature = 3.0;     // advantage weights are exp(A / temperature)
  double target_update = 0.005; // Polyak coefficient for the target Q net
  double expectile = 0.7;
  double gamma = 0.99;
  double learning_rate = 3e-4;
  long grad_steps = 2000;
  int batch_size = 256;
  double awr_weight_clip = 100.0;
  // Lookahead for the advantage inside the AWR weights. Actions here act on
  // phase rates, so their effect on the return accumulates over several
  // steps; a short n-step advantage makes it visible over critic noise.
  int awr_advantage_steps = 8;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

// Asymmetric squared loss |tau - [u < 0]| * u^2.
double expectile_loss(double u, double tau);

struct IqlStats {
  double q_loss = 0.0;
  double v_loss = 0.0;
  double policy_loss = 0.0;
  double mean_weight = 0.0;
};

class IqlLearner {
 public:
  IqlLearner(const IqlConfig& cfg, uint64_t seed);

  // chain_next[i] must give the index of transition i's successor within the
  // same rollout stream, or -1 at a stream boundary (see build_chain_next).
  IqlStats update(const OfflineDataset& ds, std::span<const long> chain_next,
                  std::span<const size_t> indices, const IqlConfig& cfg);

  GaussianPolicy policy;
  Mlp q;        // input: obs ++ action
  Mlp v;        // input: obs
  Mlp q_target;

 private:
  Adam opt_mean_, opt_logstd_, opt_q_, opt_v_;
};

struct IqlResult {
  GaussianPolicy policy;
  Mlp value;
  Mlp q;
  std::vector<IqlStats> stats;
};

// Successor index of each transition within its rollout stream (-1 where the
// next stored transition does not continue it).
std::vector<long> build_chain_next(const OfflineDataset& dataset);

// Offline training: the configured number of gradient steps over the fixed
// dataset, zero environment interaction.
IqlResult train_iql(const OfflineDataset& dataset, const IqlConfig& cfg, uint64_t seed);

}  // namespace roesl
