#include <doctest.h>

#include <cmath>

#include "roesl/rl.hpp"
#include "roesl/rng.hpp"

using namespace roesl;

namespace {

// Unrolled-sum oracle: A_t = sum_k (gamma*lambda)^k delta_{t+k}, cut at done.
std::vector<double> gae_bruteforce(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<uint8_t>& dones, double gamma, double lambda,
                                   double bootstrap) {
  const size_t n = rewards.size();
  std::vector<double> delta(n);
  for (size_t i = 0; i < n; ++i) {
    const double next_v = (i + 1 < n) ? values[i + 1] : bootstrap;
    delta[i] = rewards[i] + gamma * next_v * (dones[i] ? 0.0 : 1.0) - values[i];
  }
  std::vector<double> adv(n, 0.0);
  for (size_t t = 0; t < n; ++t) {
    double factor = 1.0;
    for (size_t k = t; k < n; ++k) {
      adv[t] += factor * delta[k];
      if (dones[k]) break;
      factor *= gamma * lambda;
    }
  }
  return adv;
}

OfflineDataset tiny_dataset(int n, uint64_t seed) {
  Rng rng(seed);
  OfflineDataset ds;
  for (int i = 0; i < n; ++i) {
    Transition t;
    for (auto& v : t.obs) v = rng.uniform(-1, 1);
    for (auto& v : t.next_obs) v = rng.uniform(-1, 1);
    for (auto& v : t.action) v = rng.uniform(-1, 1);
    t.reward = rng.uniform(-1, 1);
    t.done = rng.uniform() < 0.2;
    t.source_candidate = "fixture";
    t.step = i;
    ds.transitions.push_back(t);
  }
  return ds;
}

double expectile_objective(const std::vector<double>& data, double e, double tau) {
  double s = 0.0;
  for (double x : data) s += expectile_loss(x - e, tau);
  return s / data.size();
}

double fit_expectile(const std::vector<double>& data, double tau) {
  // Coarse grid then golden-section refinement.
  double lo = *std::min_element(data.begin(), data.end());
  double hi = *std::max_element(data.begin(), data.end());
  for (int iter = 0; iter < 200; ++iter) {
    const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
    if (expectile_objective(data, a, tau) < expectile_objective(data, b, tau))
      hi = b;
    else
      lo = a;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("gae: single terminal step reduces to r - V(s)") {
  const auto g = gae_advantages(std::vector<double>{2.0}, std::vector<double>{0.7},
                                std::vector<uint8_t>{1}, 0.99, 0.95, 123.0);
  CHECK(g.advantages[0] == doctest::Approx(2.0 - 0.7).epsilon(1e-15));
  CHECK(g.returns[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("gae: gamma=lambda=1, zero values telescopes to the reward sum") {
  const auto g = gae_advantages(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0},
                                std::vector<uint8_t>{0, 0}, 1.0, 1.0, 5.0);
  CHECK(g.advantages[0] == doctest::Approx(1.0 + 2.0 + 5.0).epsilon(1e-15));
  CHECK(g.advantages[1] == doctest::Approx(2.0 + 5.0).epsilon(1e-15));
}

TEST_CASE("gae: 5-step random instance matches the unrolled sum to 1e-10") {
  Rng rng(21);
  std::vector<double> rewards(5), values(5);
  std::vector<uint8_t> dones = {0, 0, 1, 0, 0};
  for (auto& r : rewards) r = rng.uniform(-2, 2);
  for (auto& v : values) v = rng.uniform(-1, 1);
  const double boot = rng.uniform(-1, 1);

  const auto g = gae_advantages(rewards, values, dones, 0.99, 0.95, boot);
  const auto want = gae_bruteforce(rewards, values, dones, 0.99, 0.95, boot);
  for (size_t i = 0; i < want.size(); ++i)
    CHECK(std::fabs(g.advantages[i] - want[i]) < 1e-10);
}

TEST_CASE("gae: equals brute force on every sequence of length <= 6 over a grid") {
  // 2 rewards x 2 values x 2 done flags per step, exhausted per length.
  const double rewards_grid[] = {-1.0, 1.5};
  const double values_grid[] = {0.0, 0.5};
  const double boot = 0.25;
  for (int n = 1; n <= 6; ++n) {
    const long combos = 1L << (3 * n);
    for (long mask = 0; mask < combos; ++mask) {
      std::vector<double> rewards(n), values(n);
      std::vector<uint8_t> dones(n);
      long m = mask;
      for (int i = 0; i < n; ++i) {
        rewards[i] = rewards_grid[m & 1];
        m >>= 1;
        values[i] = values_grid[m & 1];
        m >>= 1;
        dones[i] = static_cast<uint8_t>(m & 1);
        m >>= 1;
      }
      const auto g = gae_advantages(rewards, values, dones, 0.99, 0.95, boot);
      const auto want = gae_bruteforce(rewards, values, dones, 0.99, 0.95, boot);
      for (int i = 0; i < n; ++i) REQUIRE(std::fabs(g.advantages[i] - want[i]) < 1e-10);
    }
  }
}

TEST_CASE("gae: length mismatch throws") {
  CHECK_THROWS_AS(gae_advantages(std::vector<double>{1.0}, std::vector<double>{0.0, 0.0},
                                 std::vector<uint8_t>{0}, 0.99, 0.95, 0.0),
                  std::invalid_argument);
}

TEST_CASE("expectile: midpoint is half the squared loss; zero residual is free") {
  for (double u : {-3.0, -0.25, 0.0, 0.5, 2.0})
    CHECK(expectile_loss(u, 0.5) == doctest::Approx(0.5 * u * u).epsilon(1e-15));
  CHECK(expectile_loss(0.0, 0.7) == 0.0);
  CHECK_THROWS_AS(expectile_loss(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(expectile_loss(1.0, 1.0), std::invalid_argument);
}

TEST_CASE("expectile: constant fit on {0,1} at tau=0.7 lands on 0.7") {
  // Analytic optimum: 0.3 e^2 + 0.7 (1-e)^2 is minimized at e = 0.7.
  const std::vector<double> data = {0.0, 1.0};
  const double fitted = fit_expectile(data, 0.7);
  CHECK(std::fabs(fitted - 0.7) <= 0.01);
}

TEST_CASE("expectile: tau=0.5 fit equals the least-squares mean within 1e-6") {
  Rng rng(31);
  std::vector<double> data(40);
  double mean = 0.0;
  for (auto& x : data) {
    x = rng.uniform(-3, 3);
    mean += x;
  }
  mean /= data.size();
  CHECK(std::fabs(fit_expectile(data, 0.5) - mean) <= 1e-6);
}

TEST_CASE("expectile: convex in u; complementary weights reconstruct u^2; mirror symmetry") {
  Rng rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    const double tau = rng.uniform(0.05, 0.95);
    const double a = rng.uniform(-4, 4), b = rng.uniform(-4, 4);
    const double mid = 0.5 * (a + b);
    CHECK(expectile_loss(mid, tau) <= 0.5 * (expectile_loss(a, tau) + expectile_loss(b, tau)) + 1e-12);

    const double u = rng.uniform(-4, 4);
    CHECK(expectile_loss(u, tau) + expectile_loss(u, 1 - tau) ==
          doctest::Approx(u * u).epsilon(1e-14));
    CHECK(expectile_loss(-u, 1 - tau) == expectile_loss(u, tau));
  }
}

TEST_CASE("ppo: in the clip region the surrogate sends no gradient to the mean net") {
  PpoConfig cfg;
  cfg.epochs = 1;
  cfg.minibatch = 1;
  cfg.entropy_coef = 0.0;
  PpoLearner learner(cfg, 7);
  Rng rng(3);

  PpoBatch batch;
  Obs obs{};
  for (auto& v : obs) v = 0.3;
  Mlp::Workspace ws;
  const auto mu = learner.policy.mean.forward(obs, ws);
  std::array<double, kNumLegs> raw;
  for (int i = 0; i < kNumLegs; ++i) raw[i] = mu[i] + 0.1;
  const double logp = learner.policy.log_prob(mu, raw);

  batch.obs.push_back(obs);
  batch.raw_actions.push_back(raw);
  // logp_old far below logp: ratio = e^{0.5} > 1 + clip, advantage positive.
  batch.logp_old.push_back(logp - 0.5);
  batch.advantages.push_back(1.0);
  batch.returns.push_back(0.0);

  const std::vector<double> mean_before = learner.policy.mean.params;
  learner.update(batch, cfg, rng);
  CHECK(learner.policy.mean.params == mean_before);
}

TEST_CASE("ppo: zero learning rate is a bit-identical no-op on all parameters") {
  PpoConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  cfg.minibatch = 8;
  PpoLearner learner(cfg, 8);
  Rng rng(4);

  PpoBatch batch;
  for (int i = 0; i < 16; ++i) {
    Obs obs{};
    for (auto& v : obs) v = rng.uniform(-1, 1);
    Mlp::Workspace ws;
    const auto mu = learner.policy.mean.forward(obs, ws);
    std::array<double, kNumLegs> raw;
    for (int d = 0; d < kNumLegs; ++d) raw[d] = mu[d] + rng.uniform(-0.5, 0.5);
    batch.obs.push_back(obs);
    batch.raw_actions.push_back(raw);
    batch.logp_old.push_back(learner.policy.log_prob(mu, raw));
    batch.advantages.push_back(rng.uniform(-1, 1));
    batch.returns.push_back(rng.uniform(-1, 1));
  }

  const std::vector<double> mean_before = learner.policy.mean.params;
  const auto logstd_before = learner.policy.log_std;
  const std::vector<double> value_before = learner.value.params;
  learner.update(batch, cfg, rng);
  CHECK(learner.policy.mean.params == mean_before);
  CHECK(learner.policy.log_std == logstd_before);
  CHECK(learner.value.params == value_before);
}

TEST_CASE("iql: with gamma=0 the Q head converges to the reward") {
  OfflineDataset ds;
  Transition t;
  for (auto& v : t.obs) v = 0.25;
  for (auto& v : t.action) v = -0.5;
  for (auto& v : t.next_obs) v = 0.1;
  t.reward = 5.0;
  t.done = false;
  ds.transitions.push_back(t);

  IqlConfig cfg;
  cfg.gamma = 0.0;
  cfg.learning_rate = 3e-3;
  cfg.grad_steps = 2000;
  cfg.batch_size = 4;
  const IqlResult result = train_iql(ds, cfg, 11);

  Mlp::Workspace ws;
  std::vector<double> qin(kObsDim + kNumLegs);
  for (int i = 0; i < kObsDim; ++i) qin[i] = t.obs[i];
  for (int i = 0; i < kNumLegs; ++i) qin[kObsDim + i] = t.action[i];
  CHECK(result.q.forward(qin, ws)[0] == doctest::Approx(5.0).epsilon(1e-2));
}

TEST_CASE("iql: zero advantage makes the policy update plain behavior cloning") {
  const OfflineDataset ds = tiny_dataset(8, 41);
  IqlConfig cfg;
  cfg.expectile = 0.5;
  cfg.grad_steps = 1;
  cfg.batch_size = 8;

  // Two learners from the same seed; in both, V and target-Q are zeroed so
  // the advantage is identically zero and every AWR weight is exp(0) = 1.
  IqlLearner awr(cfg, 77);
  std::fill(awr.v.params.begin(), awr.v.params.end(), 0.0);
  std::fill(awr.q_target.params.begin(), awr.q_target.params.end(), 0.0);
  IqlLearner bc(cfg, 77);
  std::fill(bc.v.params.begin(), bc.v.params.end(), 0.0);
  std::fill(bc.q_target.params.begin(), bc.q_target.params.end(), 0.0);

  std::vector<size_t> idx = {0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<long> chain = build_chain_next(ds);

  // Extreme opposite temperatures: if the advantage were not identically
  // zero, the two updates would diverge wildly. With A == 0 both reduce to
  // behavior cloning with unit weights.
  IqlConfig awr_cfg = cfg;
  awr_cfg.temperature = 1e-12;
  const IqlStats stats = awr.update(ds, chain, idx, awr_cfg);
  CHECK(stats.mean_weight == 1.0);

  IqlConfig bc_cfg = cfg;
  bc_cfg.temperature = 1e12;
  bc.update(ds, chain, idx, bc_cfg);
  REQUIRE(awr.policy.mean.params.size() == bc.policy.mean.params.size());
  for (size_t i = 0; i < awr.policy.mean.params.size(); ++i)
    CHECK(awr.policy.mean.params[i] == doctest::Approx(bc.policy.mean.params[i]).epsilon(1e-12));
}

TEST_CASE("iql: converged V stays inside the hull of target-Q samples") {
  const OfflineDataset ds = tiny_dataset(12, 55);
  IqlConfig cfg;
  cfg.grad_steps = 4000;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 12;
  const IqlResult result = train_iql(ds, cfg, 19);

  // Recompute target-Q over the dataset with the trained nets.
  Mlp::Workspace ws;
  double qmin = 1e300, qmax = -1e300;
  std::vector<double> qin(kObsDim + kNumLegs);
  for (const auto& t : ds.transitions) {
    for (int i = 0; i < kObsDim; ++i) qin[i] = t.obs[i];
    for (int i = 0; i < kNumLegs; ++i) qin[kObsDim + i] = t.action[i];
    const double q = result.q.forward(qin, ws)[0];
    qmin = std::min(qmin, q);
    qmax = std::max(qmax, q);
  }
  for (const auto& t : ds.transitions) {
    const double v = result.value.forward(t.obs, ws)[0];
    CHECK(v >= qmin - 0.05);
    CHECK(v <= qmax + 0.05);
  }
}

TEST_CASE("iql: zero gradient steps returns the freshly initialized policy") {
  const OfflineDataset ds = tiny_dataset(4, 60);
  IqlConfig cfg;
  cfg.grad_steps = 0;
  const IqlResult result = train_iql(ds, cfg, 99);
  const IqlLearner fresh(cfg, 99);
  CHECK(result.policy.mean.params == fresh.policy.mean.params);
  CHECK(result.policy.log_std == fresh.policy.log_std);
}

TEST_CASE("iql: deterministic per seed; empty dataset rejected") {
  const OfflineDataset ds = tiny_dataset(16, 61);
  IqlConfig cfg;
  cfg.grad_steps = 50;
  const IqlResult a = train_iql(ds, cfg, 5);
  const IqlResult b = train_iql(ds, cfg, 5);
  CHECK(a.policy.mean.params == b.policy.mean.params);
  CHECK(a.value.params == b.value.params);

  CHECK_THROWS_AS(train_iql(OfflineDataset{}, cfg, 5), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range values") {
  PpoConfig p;
  p.gamma = 1.5;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("ppo.gamma"), std::invalid_argument);
  PpoConfig p2;
  p2.total_steps = 100;
  p2.num_envs = 64;
  CHECK_THROWS_AS(p2.validate(), std::invalid_argument);

  IqlConfig q;
  q.expectile = 1.0;
  CHECK_THROWS_WITH_AS(q.validate(), doctest::Contains("iql.expectile"), std::invalid_argument);
}
