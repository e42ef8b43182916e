#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "roesl/image.hpp"

namespace roesl {

// Leg order everywhere: FL, FR, RL, RR.
inline constexpr int kNumLegs = 4;
inline constexpr int kObsDim = 14;  // sin x4, cos x4, contacts x4, velocity, height

using Action = std::array<double, kNumLegs>;
using Obs = std::array<double, kObsDim>;

struct GaitConfig {
  double dt = 0.02;              // seconds per step
  double omega0 = 1.5;           // base phase rate, Hz
  double beta = 0.5;             // action modulation of phase rate
  double duty = 0.6;             // stance fraction of the cycle
  double vel_smoothing = 0.1;    // EMA factor for base velocity
  double vel_gain = 0.5;         // velocity per unit mean stance phase rate
  double base_height = 0.3;      // nominal body height, m
  double height_dip = 0.05;      // height drop when fully airborne, m
  double thigh_amplitude = 0.4;  // thigh angle amplitude, rad
  int episode_len = 400;
  int eval_window = 300;         // fitness window, final steps
  double k_phase = 40.0;
  double k_vel = 4.0;
  double w_phase = 0.7;
  double w_vel = 0.3;
  double target_velocity = 0.4;  // m/s, shared across skills

  void validate() const;
  int cycle_steps() const { return static_cast<int>(1.0 / (dt * omega0) + 0.5); }
};

struct GaitState {
  std::array<double, kNumLegs> phase{};  // each in [0,1)
  double velocity = 0.0;
  double height = 0.3;
  Action prev_action{};
  int step_index = 0;
};

struct SkillTarget {
  std::string name;
  std::array<double, kNumLegs> offsets{};  // phase offsets relative to FL
  double duty = 0.6;
  double velocity = 0.4;
};

// trot, pace, bound, hop. Throws on unknown names.
const SkillTarget& skill_target(std::string_view name);
const std::vector<SkillTarget>& all_skills();

// One environment step as stored for offline reuse. prev_action is the
// action taken one step earlier (zero right after reset); it is needed to
// re-evaluate smoothness-style reward terms without environment access.
struct Transition {
  Obs obs{};
  Action action{};
  double reward = 0.0;
  Obs next_obs{};
  bool done = false;
  std::string source_candidate;
  int iteration = 0;
  long step = 0;
  Action prev_action{};
};

struct FitnessReport {
  double fitness = 0.0;        // w_phase * phase_score + w_vel * velocity_score
  double phase_score = 0.0;
  double velocity_score = 0.0;
  std::array<double, 6> pair_errors{};  // mean circular error per leg pair (01,02,03,12,13,23)
};

struct Trajectory {
  std::vector<Transition> transitions;
  std::vector<std::array<double, kNumLegs>> phases;        // post-step state
  std::vector<std::array<bool, kNumLegs>> contacts;
  std::vector<std::array<double, kNumLegs>> thigh_angles;  // A * sin(2*pi*phase)
  uint64_t seed = 0;

  size_t length() const { return transitions.size(); }
};

class GaitEnv {
 public:
  explicit GaitEnv(GaitConfig cfg, std::shared_ptr<std::atomic<uint64_t>> step_counter = nullptr);

  Obs reset(uint64_t seed);

  struct StepResult {
    Obs obs{};
    bool done = false;
  };
  // Clamps the action to [-1,1] componentwise. Reward is not computed here;
  // transitions are labeled by the reward module so offline relabeling stays
  // a pure dataset transformation.
  StepResult step(const Action& action);

  const GaitState& state() const { return state_; }
  const GaitConfig& config() const { return cfg_; }
  std::array<bool, kNumLegs> contacts() const;

  static Obs observe(const GaitState& s, const GaitConfig& cfg);

 private:
  GaitConfig cfg_;
  GaitState state_;
  std::shared_ptr<std::atomic<uint64_t>> counter_;
};

// Hands out environments that share one interaction counter, so tests and
// the pipeline can assert exactly how many steps each phase consumed.
class GaitEnvFactory {
 public:
  explicit GaitEnvFactory(GaitConfig cfg);
  GaitEnv make() const;
  uint64_t steps_taken() const { return counter_->load(); }
  const GaitConfig& config() const { return cfg_; }

 private:
  GaitConfig cfg_;
  std::shared_ptr<std::atomic<uint64_t>> counter_;
};

using PolicyFn = std::function<Action(const GaitState&, const Obs&)>;
// Optional transition labeler: (next_obs, action, prev_action) -> reward.
using RewardFn = std::function<double(const Obs&, const Action&, const Action&)>;

// Runs one full episode and logs phases, contacts and thigh angles.
Trajectory rollout(GaitEnv& env, const PolicyFn& policy, uint64_t seed,
                   const RewardFn& labeler = {}, const std::string& candidate_id = {});

FitnessReport fitness(const Trajectory& traj, const SkillTarget& skill, const GaitConfig& cfg);

// Rebuilds the phase/contact/thigh logs of a trajectory from its stored
// transitions (phases recovered from the sin/cos observation pair).
Trajectory trajectory_from_transitions(std::vector<Transition> transitions,
                                       const GaitConfig& cfg);

// Proportional controller that servos leg phases toward the skill's offset
// pattern and the base velocity toward its target. Test oracle and
// synthetic-demo generator.
class ExpertPolicy {
 public:
  ExpertPolicy(SkillTarget skill, GaitConfig cfg, double phase_gain = 4.0,
               double velocity_gain = 2.0);
  Action act(const GaitState& s) const;
  PolicyFn as_policy() const;

 private:
  SkillTarget skill_;
  GaitConfig cfg_;
  double phase_gain_;
  double velocity_gain_;
  double feedforward_;
};

// Grayscale stick-figure side view, one frame per trajectory step.
FrameSequence render_frames(const Trajectory& traj, int width, int height,
                            const GaitConfig& cfg);

}  // namespace roesl
