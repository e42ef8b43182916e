#include "roesl/gait.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "roesl/rng.hpp"
#include "roesl/util.hpp"

namespace roesl {
namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

const std::vector<SkillTarget>& skill_table() {
  static const std::vector<SkillTarget> skills = {
      {"trot", {0.0, 0.5, 0.5, 0.0}, 0.6, 0.4},
      {"pace", {0.0, 0.5, 0.0, 0.5}, 0.6, 0.4},
      {"bound", {0.0, 0.0, 0.5, 0.5}, 0.6, 0.4},
      {"hop", {0.0, 0.0, 0.0, 0.0}, 0.6, 0.4},
  };
  return skills;
}

}  // namespace

void GaitConfig::validate() const {
  if (dt <= 0 || omega0 <= 0) throw std::invalid_argument("gait.dt and gait.omega0 must be > 0");
  if (duty <= 0 || duty >= 1) throw std::invalid_argument("gait.duty must be in (0,1)");
  if (base_height <= 0) throw std::invalid_argument("gait.base_height must be > 0");
  if (episode_len < 2) throw std::invalid_argument("gait.episode_len must be >= 2");
  if (eval_window < 1 || eval_window > episode_len)
    throw std::invalid_argument("gait.eval_window must be in [1, episode_len]");
  if (w_phase < 0 || w_vel < 0 || std::fabs(w_phase + w_vel - 1.0) > 1e-12)
    throw std::invalid_argument("gait.w_phase + gait.w_vel must equal 1");
}

const SkillTarget& skill_target(std::string_view name) {
  for (const auto& s : skill_table())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown skill '" + std::string(name) +
                              "' (expected trot, pace, bound or hop)");
}

const std::vector<SkillTarget>& all_skills() { return skill_table(); }

GaitEnv::GaitEnv(GaitConfig cfg, std::shared_ptr<std::atomic<uint64_t>> step_counter)
    : cfg_(cfg), counter_(std::move(step_counter)) {
  cfg_.validate();
  state_.height = cfg_.base_height;
}

Obs GaitEnv::observe(const GaitState& s, const GaitConfig& cfg) {
  Obs o{};
  for (int i = 0; i < kNumLegs; ++i) {
    o[i] = std::sin(kTau * s.phase[i]);
    o[kNumLegs + i] = std::cos(kTau * s.phase[i]);
    o[2 * kNumLegs + i] = s.phase[i] < cfg.duty ? 1.0 : 0.0;
  }
  o[12] = s.velocity;
  o[13] = s.height;
  return o;
}

Obs GaitEnv::reset(uint64_t seed) {
  Rng rng(Rng::derive(seed, 0xE5));
  state_ = GaitState{};
  for (int i = 0; i < kNumLegs; ++i) state_.phase[i] = rng.uniform();
  state_.velocity = 0.0;
  state_.height = cfg_.base_height;
  state_.prev_action = {};
  state_.step_index = 0;
  return observe(state_, cfg_);
}

std::array<bool, kNumLegs> GaitEnv::contacts() const {
  std::array<bool, kNumLegs> c{};
  for (int i = 0; i < kNumLegs; ++i) c[i] = state_.phase[i] < cfg_.duty;
  return c;
}

GaitEnv::StepResult GaitEnv::step(const Action& action) {
  Action a;
  for (int i = 0; i < kNumLegs; ++i) a[i] = clamp_unit(action[i]);

  double stance_rate_sum = 0.0;
  int stance_count = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    const double rate = cfg_.omega0 * (1.0 + cfg_.beta * a[i]);  // Hz
    state_.phase[i] = wrap01(state_.phase[i] + cfg_.dt * rate);
    if (state_.phase[i] < cfg_.duty) {
      stance_rate_sum += rate;
      ++stance_count;
    }
  }
  const double drive = stance_count > 0 ? cfg_.vel_gain * stance_rate_sum / stance_count : 0.0;
  state_.velocity = (1.0 - cfg_.vel_smoothing) * state_.velocity + cfg_.vel_smoothing * drive;
  state_.height = cfg_.base_height - (stance_count == 0 ? cfg_.height_dip : 0.0);
  state_.prev_action = a;
  state_.step_index += 1;

  if (counter_) counter_->fetch_add(1, std::memory_order_relaxed);

  StepResult r;
  r.obs = observe(state_, cfg_);
  r.done = state_.step_index >= cfg_.episode_len;
  return r;
}

GaitEnvFactory::GaitEnvFactory(GaitConfig cfg)
    : cfg_(cfg), counter_(std::make_shared<std::atomic<uint64_t>>(0)) {
  cfg_.validate();
}

GaitEnv GaitEnvFactory::make() const { return GaitEnv(cfg_, counter_); }

Trajectory rollout(GaitEnv& env, const PolicyFn& policy, uint64_t seed, const RewardFn& labeler,
                   const std::string& candidate_id) {
  Trajectory traj;
  traj.seed = seed;
  Obs obs = env.reset(seed);
  const GaitConfig& cfg = env.config();
  traj.transitions.reserve(cfg.episode_len);

  bool done = false;
  long step = 0;
  while (!done) {
    const Action prev = env.state().prev_action;
    const Action a = policy(env.state(), obs);
    const auto result = env.step(a);

    Transition t;
    t.obs = obs;
    for (int i = 0; i < kNumLegs; ++i) t.action[i] = clamp_unit(a[i]);
    t.prev_action = prev;
    t.next_obs = result.obs;
    t.done = result.done;
    t.reward = labeler ? labeler(t.next_obs, t.action, t.prev_action) : 0.0;
    t.source_candidate = candidate_id;
    t.step = step++;
    traj.transitions.push_back(std::move(t));

    const GaitState& s = env.state();
    traj.phases.push_back(s.phase);
    std::array<bool, kNumLegs> c{};
    std::array<double, kNumLegs> th{};
    for (int i = 0; i < kNumLegs; ++i) {
      c[i] = s.phase[i] < cfg.duty;
      th[i] = cfg.thigh_amplitude * std::sin(kTau * s.phase[i]);
    }
    traj.contacts.push_back(c);
    traj.thigh_angles.push_back(th);

    obs = result.obs;
    done = result.done;
  }
  return traj;
}

Trajectory trajectory_from_transitions(std::vector<Transition> transitions,
                                       const GaitConfig& cfg) {
  Trajectory traj;
  traj.transitions = std::move(transitions);
  traj.phases.reserve(traj.transitions.size());
  traj.contacts.reserve(traj.transitions.size());
  traj.thigh_angles.reserve(traj.transitions.size());
  for (const auto& t : traj.transitions) {
    std::array<double, kNumLegs> phase{};
    std::array<bool, kNumLegs> contact{};
    std::array<double, kNumLegs> thigh{};
    for (int i = 0; i < kNumLegs; ++i) {
      phase[i] = wrap01(std::atan2(t.next_obs[i], t.next_obs[kNumLegs + i]) / kTau);
      contact[i] = t.next_obs[2 * kNumLegs + i] > 0.5;
      thigh[i] = cfg.thigh_amplitude * std::sin(kTau * phase[i]);
    }
    traj.phases.push_back(phase);
    traj.contacts.push_back(contact);
    traj.thigh_angles.push_back(thigh);
  }
  return traj;
}

FitnessReport fitness(const Trajectory& traj, const SkillTarget& skill, const GaitConfig& cfg) {
  const int n = static_cast<int>(traj.length());
  if (n < cfg.eval_window)
    throw std::invalid_argument("fitness: trajectory length " + std::to_string(n) +
                                " is shorter than the evaluation window " +
                                std::to_string(cfg.eval_window));
  const int start = n - cfg.eval_window;

  static constexpr std::array<std::pair<int, int>, 6> kPairs = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

  FitnessReport report;
  double phase_sum = 0.0;
  double vel_sum = 0.0;
  std::array<double, 6> err_sum{};
  for (int t = start; t < n; ++t) {
    double sq = 0.0;
    for (size_t p = 0; p < kPairs.size(); ++p) {
      const auto [i, j] = kPairs[p];
      const double delta = wrap01(traj.phases[t][i] - traj.phases[t][j]);
      const double target = wrap01(skill.offsets[i] - skill.offsets[j]);
      const double d = circ_dist(delta, target);
      sq += d * d;
      err_sum[p] += d;
    }
    phase_sum += std::exp(-cfg.k_phase * sq / kPairs.size());
    vel_sum += traj.transitions[t].next_obs[12];
  }
  const double vbar = vel_sum / cfg.eval_window;
  report.phase_score = phase_sum / cfg.eval_window;
  report.velocity_score = std::exp(-cfg.k_vel * (vbar - skill.velocity) * (vbar - skill.velocity));
  report.fitness = cfg.w_phase * report.phase_score + cfg.w_vel * report.velocity_score;
  for (size_t p = 0; p < kPairs.size(); ++p) report.pair_errors[p] = err_sum[p] / cfg.eval_window;
  return report;
}

ExpertPolicy::ExpertPolicy(SkillTarget skill, GaitConfig cfg, double phase_gain,
                           double velocity_gain)
    : skill_(std::move(skill)), cfg_(cfg), phase_gain_(phase_gain), velocity_gain_(velocity_gain) {
  // Common phase rate that sustains the target velocity while in stance.
  feedforward_ = clamp_unit(
      (skill_.velocity / (cfg_.vel_gain * cfg_.omega0) - 1.0) / cfg_.beta);
}

Action ExpertPolicy::act(const GaitState& s) const {
  // Consensus reference phase: circular mean of each leg's de-offset phase.
  double sx = 0.0, sy = 0.0;
  for (int i = 0; i < kNumLegs; ++i) {
    const double ref = wrap01(s.phase[i] - skill_.offsets[i]);
    sx += std::cos(kTau * ref);
    sy += std::sin(kTau * ref);
  }
  const double psi = wrap01(std::atan2(sy, sx) / kTau);

  const double common = feedforward_ + velocity_gain_ * (skill_.velocity - s.velocity);
  Action a;
  for (int i = 0; i < kNumLegs; ++i) {
    const double err = circ_signed(wrap01(psi + skill_.offsets[i]), s.phase[i]);
    a[i] = clamp_unit(common + phase_gain_ * err);
  }
  return a;
}

PolicyFn ExpertPolicy::as_policy() const {
  return [self = *this](const GaitState& s, const Obs&) { return self.act(s); };
}

namespace {

void draw_line(Frame& f, double x0, double y0, double x1, double y1, double value) {
  // Plain DDA, 2 px thick; y grows upward in scene coordinates.
  const double dx = x1 - x0, dy = y1 - y0;
  const int steps = static_cast<int>(std::max(std::fabs(dx), std::fabs(dy))) * 2 + 1;
  for (int s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * dx));
    const int y = static_cast<int>(std::lround(y0 + t * dy));
    for (int ox = 0; ox < 2; ++ox) {
      const int px = x + ox;
      const int py = f.height - 1 - y;
      if (px >= 0 && px < f.width && py >= 0 && py < f.height)
        f.at(px, py) = std::max(f.at(px, py), value);
    }
  }
}

}  // namespace

FrameSequence render_frames(const Trajectory& traj, int width, int height, const GaitConfig& cfg) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("render_frames: frame dimensions must be positive");
  if (traj.length() == 0) throw std::invalid_argument("render_frames: empty trajectory");

  const double scale = 1.5 * height;  // px per metre
  const double ground_y = 3.0;
  const double cx = width / 2.0;
  const double hip_dx = 0.22 * width;
  const double leg_len = cfg.base_height * scale;

  FrameSequence seq;
  seq.frames.reserve(traj.length());
  for (size_t t = 0; t < traj.length(); ++t) {
    Frame f = Frame::blank(width, height, 0.0);
    draw_line(f, 1, ground_y - 2, width - 2, ground_y - 2, 0.25);

    // Height comes from the logged observation so the render is a pure
    // function of the trajectory.
    const double body_y = ground_y + traj.transitions[t].next_obs[13] * scale;
    draw_line(f, cx - hip_dx, body_y, cx + hip_dx, body_y, 0.9);

    // Legs: FL, FR at the front hip; RL, RR at the rear. Left legs are drawn
    // dimmer and offset so both sides stay visible.
    static constexpr struct {
      int leg;
      double hip_sign;
      double x_off;
      double shade;
    } kLegs[] = {
        {0, +1.0, -2.0, 0.55},  // FL
        {1, +1.0, +2.0, 1.0},   // FR
        {2, -1.0, -2.0, 0.55},  // RL
        {3, -1.0, +2.0, 1.0},   // RR
    };
    for (const auto& leg : kLegs) {
      const double theta = traj.thigh_angles[t][leg.leg];
      const double hx = cx + leg.hip_sign * hip_dx + leg.x_off;
      const double ex = hx + leg_len * std::sin(theta);
      const double ey = body_y - leg_len * std::cos(theta);
      draw_line(f, hx, body_y, ex, ey, leg.shade);
    }

    f.index = static_cast<int>(t);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace roesl
