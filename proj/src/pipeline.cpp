#include "roesl/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "roesl/checkpoint.hpp"
#include "roesl/util.hpp"
#include "roesl/evalkit.hpp"

namespace roesl {

using nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Environment interface summary embedded into prompts when no code path is
// configured.
constexpr const char* kEnvCodeExcerpt = R"(// Quadruped gait environment (phase-oscillator model).
// State: per-leg phases phi[4] in [0,1) for legs FL=0, FR=1, RL=2, RR=3,
//        base velocity (m/s), base height (m), previous action.
// Action: a[4] in [-1,1], per-leg phase-rate modulation:
//        phi_i <- (phi_i + dt * omega0 * (1 + beta * a_i)) mod 1
// Contact: leg i touches the ground while phi_i < duty (duty = 0.6).
// Velocity: EMA toward vel_gain * mean phase rate of stance legs (0 airborne).
// Observation (14): sin(2*pi*phi) x4, cos(2*pi*phi) x4, contacts x4,
//        base velocity, base height.
// Episode: 400 steps of dt = 0.02 s; omega0 = 1.5 Hz; beta = 0.5.
)";

struct ScoreFile {
  double score = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  std::string failure;
};

void write_score(const std::filesystem::path& dir, const CandidateRecord& rec) {
  json j = {{"id", rec.id},
            {"phase", rec.phase},
            {"failed", rec.failed},
            {"failure", rec.failure},
            {"score", rec.failed ? json(nullptr) : json(rec.score)}};
  std::ofstream out(dir / "score.json", std::ios::trunc);
  out << j.dump(2) << "\n";
}

std::optional<ScoreFile> read_score(const std::filesystem::path& dir) {
  std::ifstream in(dir / "score.json");
  if (!in) return std::nullopt;
  try {
    json j = json::parse(in);
    ScoreFile s;
    s.failed = j.at("failed").get<bool>();
    s.failure = j.value("failure", "");
    if (!j.at("score").is_null()) s.score = j.at("score").get<double>();
    return s;
  } catch (const std::exception&) {
    return std::nullopt;  // corrupt marker: retrain the candidate
  }
}

void persist_candidate(const std::filesystem::path& dir, const CandidateRecord& rec,
                       const GaussianPolicy* policy, const Mlp* value, uint64_t seed) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "spec.json", std::ios::trunc);
    out << serialize(rec.spec) << "\n";
  }
  if (policy) save_policy(dir / "ckpt.bin", *policy, {{"seed", seed}, {"candidate", rec.id}});
  if (value) save_mlp(dir / "vnet.bin", *value, {{"seed", seed}, {"candidate", rec.id}});
  if (!rec.rollout.transitions.empty()) {
    OfflineDataset wrap;
    wrap.transitions = rec.rollout.transitions;
    save_dataset(wrap, dir / "rollout.jsonl");
  }
}

Trajectory load_rollout(const std::filesystem::path& dir, const GaitConfig& gait) {
  OfflineDataset wrap = load_dataset(dir / "rollout.jsonl");
  return trajectory_from_transitions(std::move(wrap.transitions), gait);
}

// Shared candidate-loop skeleton for the three training phases.
struct PhaseRunner {
  const RunConfig& cfg;
  const std::filesystem::path& run_dir;
  std::string phase_name;
  std::string id_prefix;

  std::vector<CandidateRecord> records{};
  std::vector<std::optional<std::pair<GaussianPolicy, Mlp>>> nets{};
  std::vector<CandidateTiming> timings{};

  bool persistent() const { return !run_dir.empty(); }
  std::filesystem::path candidate_dir(const std::string& id) const {
    return run_dir / "candidates" / id;
  }

  // Returns true when the candidate was already complete on disk.
  bool try_resume(CandidateRecord& rec) {
    if (!persistent()) return false;
    const auto dir = candidate_dir(rec.id);
    const auto score = read_score(dir);
    if (!score) return false;
    rec.failed = score->failed;
    rec.failure = score->failure;
    rec.score = score->score;
    if (!rec.failed) rec.rollout = load_rollout(dir, cfg.gait);
    return true;
  }

  void finish_candidate(CandidateRecord rec, std::optional<std::pair<GaussianPolicy, Mlp>> net,
                        double seconds) {
    timings.push_back({rec.id, phase_name, seconds});
    if (persistent() && !rec.failed && net)
      persist_candidate(candidate_dir(rec.id), rec, &net->first, &net->second,
                        cfg.pipeline.seed);
    if (persistent() && rec.failed) {
      std::filesystem::create_directories(candidate_dir(rec.id));
      write_score(candidate_dir(rec.id), rec);
    }
    nets.push_back(std::move(net));
    records.push_back(std::move(rec));
  }

  // Evaluates one iteration's fresh rollouts and persists the scores.
  void evaluate_iteration(RewardSource& source, const FrameSequence& demo, size_t first_index) {
    std::vector<size_t> eligible;
    bool needs_eval = false;
    for (size_t i = first_index; i < records.size(); ++i) {
      if (records[i].failed) continue;
      eligible.push_back(i);
      if (std::isnan(records[i].score)) needs_eval = true;
    }
    if (!eligible.empty() && needs_eval) {
      std::vector<Trajectory> rollouts;
      rollouts.reserve(eligible.size());
      for (size_t i : eligible) rollouts.push_back(records[i].rollout);
      const EvaluationResult eval = source.evaluate_rollouts(demo, rollouts);
      for (size_t r = 0; r < eligible.size(); ++r) records[eligible[r]].score = eval.scores[r];
    }
    if (persistent())
      for (size_t i = first_index; i < records.size(); ++i)
        write_score(candidate_dir(records[i].id), records[i]);
  }

  PhaseResult finish(const char* phase_label) {
    const int sel = select_best(records);
    PhaseResult result;
    result.report.records = std::move(records);
    result.report.selected = sel;
    result.best_spec = result.report.records[sel].spec;
    if (nets[sel]) {
      result.best_policy = std::move(nets[sel]->first);
      result.best_value = std::move(nets[sel]->second);
    } else {
      // Resumed winner: parameters come back from its checkpoint.
      const auto dir = candidate_dir(result.report.records[sel].id);
      result.best_policy = load_policy(dir / "ckpt.bin");
      result.best_value = load_mlp(dir / "vnet.bin");
    }
    (void)phase_label;
    return result;
  }
};

}  // namespace

int select_best(const std::vector<CandidateRecord>& records) {
  int best = -1;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].failed || std::isnan(records[i].score)) continue;
    if (best < 0 || records[i].score > records[best].score) best = static_cast<int>(i);
  }
  if (best < 0) throw std::runtime_error("select_best: every candidate failed");
  return best;
}

OfflineDataset relabel_dataset(const OfflineDataset& dataset, const RewardSpec& spec) {
  if (dataset.empty()) throw std::invalid_argument("relabel_dataset: dataset is empty");
  OfflineDataset out = dataset;
  for (auto& t : out.transitions) t.reward = eval_reward(spec, t);
  return out;
}

Phase1Result phase1_collect(const GaitEnvFactory& factory, RewardSource& source,
                            const PromptBundle& prompt, const FrameSequence& demo,
                            const RunConfig& cfg, const std::filesystem::path& run_dir) {
  PpoConfig ppo = cfg.ppo;
  ppo.total_steps = cfg.pipeline.phase1_steps;
  ppo.validate();

  PhaseRunner runner{cfg, run_dir, "phase1", "p1"};
  OfflineDataset dataset;
  const auto dataset_path = run_dir.empty() ? std::filesystem::path{} : run_dir / "dataset.jsonl";
  auto chunks = run_dir.empty() ? std::set<std::pair<int, std::string>>{}
                                : dataset_chunks(dataset_path);

  for (int iter = 0; iter < cfg.pipeline.n1; ++iter) {
    const auto candidates = source.generate_rewards(prompt, cfg.pipeline.k1);
    const size_t first_index = runner.records.size();
    int usable = 0;

    for (int k = 0; k < cfg.pipeline.k1; ++k) {
      CandidateRecord rec;
      rec.id = "p1-i" + std::to_string(iter) + "-c" + std::to_string(k);
      rec.phase = "phase1";

      if (!candidates[k].ok()) {
        rec.failed = true;
        rec.failure = "unparseable candidate";
        for (const auto& e : candidates[k].errors) rec.failure += "; " + e;
        runner.finish_candidate(std::move(rec), std::nullopt, 0.0);
        continue;
      }
      rec.spec = *candidates[k].spec;
      ++usable;

      const auto chunk_key = std::make_pair(iter, rec.id);
      if (runner.try_resume(rec) && chunks.count(chunk_key)) {
        runner.finish_candidate(std::move(rec), std::nullopt, 0.0);
        continue;
      }

      const double t0 = now_seconds();
      std::optional<std::pair<GaussianPolicy, Mlp>> net;
      try {
        PpoResult trained = train_ppo(factory, rec.spec, ppo,
                                      Rng::derive(cfg.pipeline.seed, 0x100 + iter, k), rec.id,
                                      iter);
        for (auto& t : trained.transitions) t.iteration = iter;
        if (!run_dir.empty() && !chunks.count(chunk_key)) {
          append_dataset(dataset_path, trained.transitions);
          chunks.insert(chunk_key);
        }
        if (run_dir.empty()) {
          dataset.transitions.insert(dataset.transitions.end(),
                                     std::make_move_iterator(trained.transitions.begin()),
                                     std::make_move_iterator(trained.transitions.end()));
        }
        rec.rollout = std::move(trained.eval_rollout);
        net = std::make_pair(std::move(trained.policy), std::move(trained.value));
      } catch (const std::runtime_error& e) {
        rec.failed = true;
        rec.failure = e.what();
      }
      runner.finish_candidate(std::move(rec), std::move(net), now_seconds() - t0);
    }

    if (usable == 0)
      throw std::runtime_error("phase 1 iteration " + std::to_string(iter) +
                               ": all candidates were unparseable after retry");
    runner.evaluate_iteration(source, demo, first_index);
  }

  Phase1Result result;
  const auto& timings = runner.timings;
  result.phase = runner.finish("phase1");
  // The file is the source of truth when persisting, so resumed and fresh
  // runs see identical datasets.
  result.dataset = run_dir.empty() ? std::move(dataset) : load_dataset(dataset_path);
  result.phase.report.records[result.phase.report.selected].phase = "phase1";
  for (size_t i = 0; i < timings.size(); ++i)
    result.phase.report.records[i].wall_seconds = timings[i].seconds;
  return result;
}

PhaseResult phase2_optimize(const OfflineDataset& dataset, const GaitEnvFactory& factory,
                            RewardSource& source, const PromptBundle& prompt,
                            const FrameSequence& demo, const RunConfig& cfg,
                            const std::filesystem::path& run_dir) {
  if (dataset.empty()) throw std::invalid_argument("phase2_optimize: dataset is empty");
  IqlConfig iql = cfg.iql;
  iql.grad_steps = cfg.pipeline.phase2_grad_steps;
  iql.validate();

  PhaseRunner runner{cfg, run_dir, "phase2", "p2"};

  for (int iter = 0; iter < cfg.pipeline.n2; ++iter) {
    const auto candidates = source.generate_rewards(prompt, cfg.pipeline.k2);
    const size_t first_index = runner.records.size();

    for (int k = 0; k < cfg.pipeline.k2; ++k) {
      CandidateRecord rec;
      rec.id = "p2-i" + std::to_string(iter) + "-c" + std::to_string(k);
      rec.phase = "phase2";
      if (!candidates[k].ok()) {
        rec.failed = true;
        rec.failure = "unparseable candidate";
        runner.finish_candidate(std::move(rec), std::nullopt, 0.0);
        continue;
      }
      rec.spec = *candidates[k].spec;
      if (runner.try_resume(rec)) {
        runner.finish_candidate(std::move(rec), std::nullopt, 0.0);
        continue;
      }

      const double t0 = now_seconds();
      std::optional<std::pair<GaussianPolicy, Mlp>> net;
      try {
        // Offline optimization: relabel, train with zero env interaction,
        // then a single evaluation rollout.
        const OfflineDataset relabeled = relabel_dataset(dataset, rec.spec);
        IqlResult trained = train_iql(relabeled, iql,
                                      Rng::derive(cfg.pipeline.seed, 0x200 + iter, k));
        GaitEnv env = factory.make();
        const RewardSpec& spec = rec.spec;
        rec.rollout = rollout(
            env, trained.policy.as_policy(), Rng::derive(cfg.pipeline.seed, 0x210 + iter, k),
            [&spec](const Obs& next, const Action& a, const Action& prev) {
              return eval_reward(spec, context_from(next, a, prev));
            },
            rec.id);
        net = std::make_pair(std::move(trained.policy), std::move(trained.value));
      } catch (const std::runtime_error& e) {
        rec.failed = true;
        rec.failure = e.what();
      }
      runner.finish_candidate(std::move(rec), std::move(net), now_seconds() - t0);
    }
    runner.evaluate_iteration(source, demo, first_index);
  }

  const auto timings = runner.timings;
  PhaseResult result = runner.finish("phase2");
  for (size_t i = 0; i < timings.size(); ++i)
    result.report.records[i].wall_seconds = timings[i].seconds;
  return result;
}

PhaseResult phase2_all_online(const GaitEnvFactory& factory, RewardSource& source,
                              const PromptBundle& prompt, const FrameSequence& demo,
                              const RunConfig& cfg,
                              const std::filesystem::path& run_dir) {
  // SDS-style comparator: every phase 2 candidate gets a full online
  // training at the phase 1 budget.
  PpoConfig ppo = cfg.ppo;
  ppo.total_steps = cfg.pipeline.phase1_steps;
  ppo.validate();

  PhaseRunner runner{cfg, run_dir, "baseline", "p2"};

  for (int iter = 0; iter < cfg.pipeline.n2; ++iter) {
    const auto candidates = source.generate_rewards(prompt, cfg.pipeline.k2);
    const size_t first_index = runner.records.size();
    for (int k = 0; k < cfg.pipeline.k2; ++k) {
      CandidateRecord rec;
      rec.id = "p2-i" + std::to_string(iter) + "-c" + std::to_string(k);
      rec.phase = "baseline";
      if (!candidates[k].ok()) {
        rec.failed = true;
        rec.failure = "unparseable candidate";
        runner.finish_candidate(std::move(rec), std::nullopt, 0.0);
        continue;
      }
      rec.spec = *candidates[k].spec;
      if (runner.try_resume(rec)) {
        runner.finish_candidate(std::move(rec), std::nullopt, 0.0);
        continue;
      }

      const double t0 = now_seconds();
      std::optional<std::pair<GaussianPolicy, Mlp>> net;
      try {
        PpoResult trained = train_ppo(factory, rec.spec, ppo,
                                      Rng::derive(cfg.pipeline.seed, 0x400 + iter, k), rec.id,
                                      iter);
        rec.rollout = std::move(trained.eval_rollout);
        net = std::make_pair(std::move(trained.policy), std::move(trained.value));
      } catch (const std::runtime_error& e) {
        rec.failed = true;
        rec.failure = e.what();
      }
      runner.finish_candidate(std::move(rec), std::move(net), now_seconds() - t0);
    }
    runner.evaluate_iteration(source, demo, first_index);
  }

  const auto timings = runner.timings;
  PhaseResult result = runner.finish("baseline");
  for (size_t i = 0; i < timings.size(); ++i)
    result.report.records[i].wall_seconds = timings[i].seconds;
  return result;
}

Phase3Result phase3_finetune(const GaitEnvFactory& factory, const GaussianPolicy& init_policy,
                             const Mlp* init_value, const RewardSpec& spec, const RunConfig& cfg,
                             const std::filesystem::path& run_dir) {
  PpoConfig ppo = cfg.ppo;
  ppo.total_steps = cfg.pipeline.phase3_steps;
  ppo.validate();

  std::vector<int> expected = {kObsDim};
  expected.insert(expected.end(), ppo.hidden.begin(), ppo.hidden.end());
  expected.push_back(kNumLegs);
  if (init_policy.mean.sizes() != expected)
    throw std::runtime_error("fine-tune policy layer table mismatch: checkpoint has [" +
                             join(init_policy.mean.sizes()) + "], config expects [" +
                             join(expected) + "]");

  const double t0 = now_seconds();
  PpoResult trained = train_ppo(factory, spec, ppo, Rng::derive(cfg.pipeline.seed, 0x300, 0),
                                "p3", 0, &init_policy, init_value);

  Phase3Result result;
  result.wall_seconds = now_seconds() - t0;
  result.rollout = std::move(trained.eval_rollout);
  result.fitness = fitness(result.rollout, skill_target(cfg.pipeline.skill), cfg.gait);
  result.policy = std::move(trained.policy);
  result.value = std::move(trained.value);

  if (!run_dir.empty()) {
    save_policy(run_dir / "final.ckpt.bin", result.policy, {{"seed", cfg.pipeline.seed}});
    save_mlp(run_dir / "final.vnet.bin", result.value, {{"seed", cfg.pipeline.seed}});
    OfflineDataset wrap;
    wrap.transitions = result.rollout.transitions;
    save_dataset(wrap, run_dir / "final_rollout.jsonl");
  }
  return result;
}

double EfficiencyReport::phase2_per_candidate() const {
  double sum = 0.0;
  int n = 0;
  for (const auto& t : timings) {
    if ((t.phase == "phase2" || t.phase == "baseline") && t.seconds > 0) {
      sum += t.seconds;
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

EfficiencyReport compare_efficiency(const EfficiencyReport& hybrid,
                                    const EfficiencyReport& baseline) {
  EfficiencyReport merged = hybrid;
  merged.has_comparison = true;
  merged.hybrid_per_candidate = hybrid.phase2_per_candidate();
  merged.baseline_per_candidate = baseline.phase2_per_candidate();
  merged.reduction_pct =
      merged.baseline_per_candidate > 0
          ? (merged.baseline_per_candidate - merged.hybrid_per_candidate) /
                merged.baseline_per_candidate * 100.0
          : 0.0;
  return merged;
}

void write_efficiency_report(const EfficiencyReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "efficiency.csv", std::ios::trunc);
    csv << "phase,candidate,seconds\n";
    csv.precision(6);
    csv << std::fixed;
    for (const auto& t : report.timings) csv << t.phase << "," << t.id << "," << t.seconds << "\n";
    csv << "total,phase1," << report.phase1_total << "\n";
    csv << "total,phase2," << report.phase2_total << "\n";
    csv << "total,phase3," << report.phase3_total << "\n";
    if (report.has_comparison) {
      csv << "comparison,hybrid_per_candidate," << report.hybrid_per_candidate << "\n";
      csv << "comparison,baseline_per_candidate," << report.baseline_per_candidate << "\n";
      csv << "comparison,reduction_pct," << report.reduction_pct << "\n";
    }
  }
  json j;
  j["timings"] = json::array();
  for (const auto& t : report.timings)
    j["timings"].push_back({{"id", t.id}, {"phase", t.phase}, {"seconds", t.seconds}});
  j["phase1_total"] = report.phase1_total;
  j["phase2_total"] = report.phase2_total;
  j["phase3_total"] = report.phase3_total;
  j["total"] = report.total();
  j["baseline_mode"] = report.baseline_mode;
  if (report.has_comparison) {
    j["hybrid_per_candidate"] = report.hybrid_per_candidate;
    j["baseline_per_candidate"] = report.baseline_per_candidate;
    j["reduction_pct"] = report.reduction_pct;
  }
  std::ofstream out(dir / "efficiency.json", std::ios::trunc);
  out << j.dump(2) << "\n";
}

std::string run_id(const RunConfig& cfg) {
  std::string id = cfg.pipeline.skill + "-" + cfg.pipeline.mode + "-seed" +
                   std::to_string(cfg.pipeline.seed);
  if (cfg.pipeline.all_online_baseline) id += "-baseline";
  return id;
}

namespace {

void write_state(const std::filesystem::path& dir, const std::string& status,
                 const std::vector<std::string>& completed, const std::string& error = {}) {
  json j = {{"status", status}, {"completed", completed}};
  if (!error.empty()) j["error"] = error;
  std::ofstream out(dir / "state.json", std::ios::trunc);
  out << j.dump(2) << "\n";
}

json report_to_json(const PhaseReport& report) {
  json records = json::array();
  for (const auto& r : report.records)
    records.push_back({{"id", r.id},
                       {"spec", r.spec.name},
                       {"failed", r.failed},
                       {"score", r.failed || std::isnan(r.score) ? json(nullptr) : json(r.score)}});
  return {{"records", records},
          {"selected", report.selected >= 0 ? json(report.records[report.selected].id)
                                            : json(nullptr)}};
}

}  // namespace

RunResult run_full(const RunConfig& cfg, const std::filesystem::path& run_root) {
  cfg.validate();
  const SkillTarget& skill = skill_target(cfg.pipeline.skill);
  const std::filesystem::path dir = run_root / "run" / run_id(cfg);
  std::filesystem::create_directories(dir / "candidates");
  std::filesystem::create_directories(dir / "report");

  {
    std::ofstream out(dir / "config.json", std::ios::trunc);
    out << config_to_json(cfg).dump(2) << "\n";
  }

  std::vector<std::string> completed;
  try {
    GaitEnvFactory factory(cfg.gait);

    // Demonstration video: expert rollout rendered to frames, then the
    // motion-aware selection feeds the prompt.
    GaitEnv demo_env = factory.make();
    const Trajectory demo_traj =
        rollout(demo_env, ExpertPolicy(skill, cfg.gait).as_policy(),
                Rng::derive(cfg.pipeline.seed, 0xDE, 0));
    const FrameSequence demo = render_frames(demo_traj, 64, 64, cfg.gait);
    const MotionScores scores = motion_scores(demo, cfg.flow.params);
    const SelectionResult selection =
        select_frames(scores, cfg.flow.select_k, cfg.flow.threshold);

    std::filesystem::path env_code = cfg.vlm.env_code_path;
    if (env_code.empty()) {
      env_code = dir / "env_code.txt";
      std::ofstream out(env_code, std::ios::trunc);
      out << kEnvCodeExcerpt;
    }
    const PromptBundle prompt =
        build_prompt(env_code, selection, demo, skill, cfg.provider.max_payload_bytes);

    std::unique_ptr<RewardSource> gateway;
    if (cfg.pipeline.live()) {
      gateway = std::make_unique<LiveGateway>(cfg.provider, skill, cfg.gait);
    } else {
      MockConfig mock;
      mock.seed = cfg.mock.seed;
      mock.sabotage_fraction = cfg.mock.sabotage_fraction;
      mock.pool = cfg.mock.pool.empty() ? default_mock_pool(skill) : cfg.mock.pool;
      gateway = std::make_unique<MockGateway>(mock, skill, cfg.gait);
    }

    EfficiencyReport efficiency;
    efficiency.baseline_mode = cfg.pipeline.all_online_baseline;

    Phase1Result phase1 = phase1_collect(factory, *gateway, prompt, demo, cfg, dir);
    for (const auto& r : phase1.phase.report.records) {
      efficiency.timings.push_back({r.id, r.phase, r.wall_seconds});
      efficiency.phase1_total += r.wall_seconds;
      completed.push_back(r.id);
    }
    write_state(dir, "phase1-complete", completed);

    PhaseResult phase2 =
        cfg.pipeline.all_online_baseline
            ? phase2_all_online(factory, *gateway, prompt, demo, cfg, dir)
            : phase2_optimize(phase1.dataset, factory, *gateway, prompt, demo, cfg, dir);
    for (const auto& r : phase2.report.records) {
      efficiency.timings.push_back({r.id, r.phase, r.wall_seconds});
      efficiency.phase2_total += r.wall_seconds;
      completed.push_back(r.id);
    }
    write_state(dir, "phase2-complete", completed);

    Phase3Result phase3 = phase3_finetune(factory, phase2.best_policy, &phase2.best_value,
                                          phase2.best_spec, cfg, dir);
    efficiency.timings.push_back({"p3", "phase3", phase3.wall_seconds});
    efficiency.phase3_total = phase3.wall_seconds;
    completed.push_back("p3");

    write_efficiency_report(efficiency, dir / "report");

    RunResult result;
    result.final_policy = std::move(phase3.policy);
    result.final_fitness = phase3.fitness;
    result.efficiency = efficiency;
    result.run_dir = dir;
    result.selected_spec = phase2.best_spec;

    const GaitLabel label = classify_gait(contact_matrix(phase3.rollout));
    result.final_gait_label = label.name;

    json summary;
    summary["skill"] = cfg.pipeline.skill;
    summary["mode"] = cfg.pipeline.mode;
    summary["seed"] = cfg.pipeline.seed;
    summary["baseline"] = cfg.pipeline.all_online_baseline;
    summary["dataset_transitions"] = phase1.dataset.size();
    summary["phase1"] = report_to_json(phase1.phase.report);
    summary["phase2"] = report_to_json(phase2.report);
    summary["final"] = {{"fitness", phase3.fitness.fitness},
                        {"phase_score", phase3.fitness.phase_score},
                        {"velocity_score", phase3.fitness.velocity_score},
                        {"gait_label", label.name},
                        {"gait_confidence", label.confidence},
                        {"selected_spec", phase2.best_spec.name}};
    std::ofstream out(dir / "summary.json", std::ios::trunc);
    out << summary.dump(2) << "\n";

    write_state(dir, "complete", completed);
    return result;
  } catch (...) {
    // Keep partial artifacts; the state file is the resume marker.
    try {
      write_state(dir, "incomplete", completed, "run aborted; re-run to resume");
    } catch (...) {
    }
    throw;
  }
}

}  // namespace roesl
