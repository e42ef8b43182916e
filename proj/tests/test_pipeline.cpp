#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "roesl/checkpoint.hpp"
#include "roesl/pipeline.hpp"

using namespace roesl;
namespace fs = std::filesystem;

namespace {

// Tiny, fast configuration: learning quality is irrelevant here, only the
// orchestration contracts.
RunConfig tiny_config(uint64_t seed = 0) {
  RunConfig cfg;
  cfg.gait.episode_len = 60;
  cfg.gait.eval_window = 40;
  cfg.ppo.num_envs = 8;
  cfg.ppo.horizon = 16;
  cfg.ppo.minibatch = 64;
  cfg.ppo.epochs = 2;
  cfg.pipeline.n1 = 1;
  cfg.pipeline.n2 = 1;
  cfg.pipeline.k1 = 2;
  cfg.pipeline.k2 = 3;
  cfg.pipeline.phase1_steps = 256;
  cfg.pipeline.phase2_grad_steps = 20;
  cfg.pipeline.phase3_steps = 128;
  cfg.pipeline.seed = seed;
  cfg.iql.batch_size = 32;
  cfg.validate();
  return cfg;
}

std::unique_ptr<MockGateway> tiny_gateway(const RunConfig& cfg) {
  const SkillTarget& skill = skill_target(cfg.pipeline.skill);
  MockConfig mock;
  mock.seed = cfg.mock.seed;
  mock.pool = default_mock_pool(skill);
  return std::make_unique<MockGateway>(mock, skill, cfg.gait);
}

struct DemoKit {
  FrameSequence demo;
  PromptBundle prompt;
  fs::path dir;
};

DemoKit make_demo(const RunConfig& cfg, const char* name) {
  DemoKit kit;
  kit.dir = fs::temp_directory_path() / name;
  fs::remove_all(kit.dir);
  fs::create_directories(kit.dir);
  const fs::path code = kit.dir / "env.txt";
  std::ofstream(code) << "// env\n";

  GaitEnvFactory factory(cfg.gait);
  GaitEnv env = factory.make();
  const Trajectory traj =
      rollout(env, ExpertPolicy(skill_target(cfg.pipeline.skill), cfg.gait).as_policy(), 1);
  kit.demo = render_frames(traj, 64, 64, cfg.gait);
  SelectionResult sel;
  sel.indices = {1, 2};
  sel.tags = {SelectionTag::kMotion, SelectionTag::kMotion};
  sel.target_count = 2;
  kit.prompt = build_prompt(code, sel, kit.demo, skill_target(cfg.pipeline.skill));
  return kit;
}

// Gateway test fake with scriptable candidate outcomes.
class FakeSource : public RewardSource {
 public:
  std::vector<CandidateSpec> candidates;
  GaitConfig gait;
  SkillTarget skill;

  std::vector<CandidateSpec> generate_rewards(const PromptBundle&, int k) override {
    std::vector<CandidateSpec> out;
    for (int i = 0; i < k; ++i) {
      CandidateSpec c = candidates[i % candidates.size()];
      c.index = i;
      out.push_back(c);
    }
    return out;
  }

  EvaluationResult evaluate_rollouts(const FrameSequence&,
                                     const std::vector<Trajectory>& rollouts) override {
    EvaluationResult r;
    for (const auto& traj : rollouts) r.scores.push_back(fitness(traj, skill, gait).fitness);
    r.best_index = 0;
    for (size_t i = 1; i < r.scores.size(); ++i)
      if (r.scores[i] > r.scores[r.best_index]) r.best_index = static_cast<int>(i);
    return r;
  }
};

CandidateRecord record_with(double score, bool failed = false) {
  CandidateRecord r;
  r.score = score;
  r.failed = failed;
  return r;
}

OfflineDataset small_dataset(const RunConfig& cfg) {
  GaitEnvFactory factory(cfg.gait);
  const PpoConfig ppo = [&] {
    PpoConfig p = cfg.ppo;
    p.total_steps = 256;
    return p;
  }();
  PpoResult r = train_ppo(factory, aligned_spec(skill_target("trot")), ppo, 5, "fixture");
  OfflineDataset ds;
  ds.transitions = std::move(r.transitions);
  return ds;
}

}  // namespace

TEST_CASE("select_best: argmax, tie toward lowest, failures excluded") {
  CHECK(select_best({record_with(0.2), record_with(0.9), record_with(0.4)}) == 1);
  CHECK(select_best({record_with(0.7), record_with(0.7)}) == 0);
  CHECK(select_best({record_with(0, true), record_with(0.3)}) == 1);
  CHECK_THROWS_WITH_AS(select_best({record_with(0, true), record_with(0, true)}),
                       doctest::Contains("every candidate failed"), std::runtime_error);
}

TEST_CASE("select_best: invariant under positive affine score transforms") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<CandidateRecord> records;
    const int n = 2 + static_cast<int>(rng.uniform_int(6));
    for (int i = 0; i < n; ++i) records.push_back(record_with(rng.uniform(-5, 5)));
    const int base = select_best(records);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-3, 3);
    for (auto& r : records) r.score = a * r.score + b;
    CHECK(select_best(records) == base);
  }
}

TEST_CASE("relabel: own labels are reproduced bit-exactly; zero spec zeroes rewards") {
  const RunConfig cfg = tiny_config();
  OfflineDataset ds = small_dataset(cfg);
  const RewardSpec original = aligned_spec(skill_target("trot"));

  const OfflineDataset same = relabel_dataset(ds, original);
  REQUIRE(same.size() == ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    const double a = ds.transitions[i].reward;
    const double b = same.transitions[i].reward;
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  }

  RewardSpec zero;
  zero.name = "zero";
  RewardTerm t;
  t.kind = TermKind::kVelocityTracking;
  t.target = 0.4;
  t.sharpness = 4.0;
  t.weight = 0.0;
  zero.terms.push_back(t);
  const OfflineDataset zeroed = relabel_dataset(ds, zero);
  for (const auto& tr : zeroed.transitions) CHECK(tr.reward == 0.0);
}

TEST_CASE("relabel: three-transition fixture matches the direct per-transition formula") {
  OfflineDataset ds;
  for (int i = 0; i < 3; ++i) {
    Transition t;
    t.next_obs[12] = 0.1 * (i + 1);  // velocity channel
    t.step = i;
    ds.transitions.push_back(t);
  }
  RewardSpec spec;
  spec.name = "vel";
  RewardTerm term;
  term.kind = TermKind::kVelocityTracking;
  term.target = 0.4;
  term.sharpness = 4.0;
  term.weight = 2.0;
  spec.terms.push_back(term);

  const OfflineDataset out = relabel_dataset(ds, spec);
  for (int i = 0; i < 3; ++i) {
    const double v = 0.1 * (i + 1);
    const double want = 2.0 * std::exp(-4.0 * (v - 0.4) * (v - 0.4));
    CHECK(out.transitions[i].reward == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("relabel: pure, idempotent, preserves size and non-reward fields bit-exactly") {
  const RunConfig cfg = tiny_config();
  const OfflineDataset ds = small_dataset(cfg);
  const RewardSpec spec = aligned_spec(skill_target("pace"));

  const OfflineDataset once = relabel_dataset(ds, spec);
  const OfflineDataset twice = relabel_dataset(once, spec);
  REQUIRE(once.size() == ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    CHECK(once.transitions[i].obs == ds.transitions[i].obs);
    CHECK(once.transitions[i].action == ds.transitions[i].action);
    CHECK(once.transitions[i].next_obs == ds.transitions[i].next_obs);
    CHECK(once.transitions[i].done == ds.transitions[i].done);
    CHECK(once.transitions[i].prev_action == ds.transitions[i].prev_action);
    CHECK(once.transitions[i].source_candidate == ds.transitions[i].source_candidate);
    CHECK(once.transitions[i].step == ds.transitions[i].step);
    const double a = once.transitions[i].reward, b = twice.transitions[i].reward;
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  }

  CHECK_THROWS_AS(relabel_dataset(OfflineDataset{}, spec), std::invalid_argument);
}

TEST_CASE("phase1: dataset size equals candidates times budget; provenance recorded") {
  const RunConfig cfg = tiny_config();
  GaitEnvFactory factory(cfg.gait);
  auto gateway = tiny_gateway(cfg);
  const DemoKit kit = make_demo(cfg, "roesl_p1_count");

  const Phase1Result r = phase1_collect(factory, *gateway, kit.prompt, kit.demo, cfg);
  CHECK(r.dataset.size() == size_t(cfg.pipeline.k1) * cfg.pipeline.phase1_steps);
  for (const auto& t : r.dataset.transitions) {
    CHECK(!t.source_candidate.empty());
    CHECK(t.source_candidate.rfind("p1-", 0) == 0);
  }
  CHECK(r.phase.report.records.size() == size_t(cfg.pipeline.k1));
  CHECK(r.phase.report.selected >= 0);
}

TEST_CASE("phase1: an unparseable candidate degrades the iteration; all bad aborts") {
  RunConfig cfg = tiny_config();
  const DemoKit kit = make_demo(cfg, "roesl_p1_fail");

  FakeSource source;
  source.gait = cfg.gait;
  source.skill = skill_target("trot");
  CandidateSpec good;
  good.index = 0;
  good.spec = aligned_spec(source.skill);
  CandidateSpec bad;
  bad.index = 1;
  bad.errors = {"unknown term kind 'fly' at terms[0]"};
  source.candidates = {good, bad};

  GaitEnvFactory factory(cfg.gait);
  const Phase1Result r = phase1_collect(factory, source, kit.prompt, kit.demo, cfg);
  REQUIRE(r.phase.report.records.size() == 2);
  CHECK(!r.phase.report.records[0].failed);
  CHECK(r.phase.report.records[1].failed);
  CHECK(r.phase.report.records[1].failure.find("unparseable") != std::string::npos);
  CHECK(r.dataset.size() == size_t(cfg.pipeline.phase1_steps));

  source.candidates = {bad};
  GaitEnvFactory factory2(cfg.gait);
  CHECK_THROWS_WITH_AS(phase1_collect(factory2, source, kit.prompt, kit.demo, cfg),
                       doctest::Contains("all candidates"), std::runtime_error);
}

TEST_CASE("phase2: training consumes zero env steps; one evaluation rollout per candidate") {
  RunConfig cfg = tiny_config();
  cfg.pipeline.n2 = 2;
  cfg.pipeline.k2 = 3;
  const DemoKit kit = make_demo(cfg, "roesl_p2_steps");

  GaitEnvFactory collect(cfg.gait);
  auto gateway = tiny_gateway(cfg);
  const Phase1Result p1 = phase1_collect(collect, *gateway, kit.prompt, kit.demo, cfg);

  GaitEnvFactory phase2_factory(cfg.gait);
  const uint64_t before = phase2_factory.steps_taken();
  const PhaseResult p2 =
      phase2_optimize(p1.dataset, phase2_factory, *gateway, kit.prompt, kit.demo, cfg);
  const uint64_t after = phase2_factory.steps_taken();

  CHECK(before == 0);
  CHECK(after == uint64_t(cfg.pipeline.n2) * cfg.pipeline.k2 * cfg.gait.episode_len);
  CHECK(p2.report.records.size() == size_t(cfg.pipeline.n2) * cfg.pipeline.k2);

  CHECK_THROWS_AS(phase2_optimize(OfflineDataset{}, phase2_factory, *gateway, kit.prompt,
                                  kit.demo, cfg),
                  std::invalid_argument);
}

TEST_CASE("pipeline config: zero iteration counts are construction errors") {
  RunConfig cfg = tiny_config();
  cfg.pipeline.n2 = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("phase3: zero budget returns the initial policy bit-identically") {
  RunConfig cfg = tiny_config();
  cfg.pipeline.phase3_steps = 0;
  GaitEnvFactory factory(cfg.gait);

  GaussianPolicy init({kObsDim, 64, 64, kNumLegs}, 313);
  Rng vrng(314);
  Mlp vnet({kObsDim, 64, 64, 1}, &vrng);
  const Phase3Result r = phase3_finetune(factory, init, &vnet, aligned_spec(skill_target("trot")),
                                         cfg);
  CHECK(r.policy.mean.params == init.mean.params);
  CHECK(r.policy.log_std == init.log_std);
}

TEST_CASE("phase3: layer-table mismatch is an explicit error, not a silent reinit") {
  RunConfig cfg = tiny_config();
  GaitEnvFactory factory(cfg.gait);
  GaussianPolicy wrong({kObsDim, 32, kNumLegs}, 99);
  CHECK_THROWS_WITH_AS(
      phase3_finetune(factory, wrong, nullptr, aligned_spec(skill_target("trot")), cfg),
      doctest::Contains("layer table mismatch"), std::runtime_error);
}

TEST_CASE("checkpoints: round trip bit-exact; table mismatch errors") {
  const fs::path dir = fs::temp_directory_path() / "roesl_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);

  GaussianPolicy policy({kObsDim, 64, 64, kNumLegs}, 21);
  save_policy(dir / "p.bin", policy, {{"seed", 21}});
  const GaussianPolicy back = load_policy(dir / "p.bin", {kObsDim, 64, 64, kNumLegs});
  CHECK(back.mean.params == policy.mean.params);
  CHECK(back.log_std == policy.log_std);

  // Re-saving the loaded policy reproduces the file byte-for-byte.
  save_policy(dir / "p2.bin", back, {{"seed", 21}});
  std::ifstream a(dir / "p.bin", std::ios::binary), b(dir / "p2.bin", std::ios::binary);
  const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
  CHECK(bytes_a == bytes_b);

  CHECK_THROWS_WITH_AS(load_policy(dir / "p.bin", {kObsDim, 32, 32, kNumLegs}),
                       doctest::Contains("layer table mismatch"), std::runtime_error);

  Rng vrng(5);
  Mlp net({7, 5, 1}, &vrng);
  save_mlp(dir / "v.bin", net);
  CHECK(load_mlp(dir / "v.bin").params == net.params);
  CHECK_THROWS_AS(load_policy(dir / "v.bin"), std::runtime_error);  // not a policy
}

TEST_CASE("run_full: identical seeds produce bit-identical artifacts") {
  auto run_once = [](const char* name) {
    RunConfig cfg = tiny_config(77);
    const fs::path root = fs::temp_directory_path() / name;
    fs::remove_all(root);
    const RunResult r = run_full(cfg, root);
    return r.run_dir;
  };
  const fs::path a = run_once("roesl_det_a");
  const fs::path b = run_once("roesl_det_b");

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), {});
  };

  for (const char* rel : {"dataset.jsonl", "summary.json", "final.ckpt.bin", "state.json"}) {
    CAPTURE(rel);
    CHECK(slurp(a / rel) == slurp(b / rel));
  }
  // every candidate score and checkpoint matches
  for (const auto& entry : fs::recursive_directory_iterator(a / "candidates")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    CAPTURE(rel.string());
    CHECK(slurp(entry.path()) == slurp(b / rel));
  }
}

TEST_CASE("run_full: re-running a finished directory never duplicates transitions") {
  RunConfig cfg = tiny_config(5);
  const fs::path root = fs::temp_directory_path() / "roesl_resume";
  fs::remove_all(root);

  const RunResult first = run_full(cfg, root);
  const auto size_before = fs::file_size(first.run_dir / "dataset.jsonl");
  const std::string summary_before = [&] {
    std::ifstream in(first.run_dir / "summary.json");
    return std::string((std::istreambuf_iterator<char>(in)), {});
  }();

  const RunResult second = run_full(cfg, root);
  CHECK(second.run_dir == first.run_dir);
  CHECK(fs::file_size(first.run_dir / "dataset.jsonl") == size_before);
  std::ifstream in(first.run_dir / "summary.json");
  const std::string summary_after((std::istreambuf_iterator<char>(in)), {});
  CHECK(summary_after == summary_before);
}

TEST_CASE("run_full: interrupted candidate artifacts are reused, dataset appends stay unique") {
  RunConfig cfg = tiny_config(6);
  const fs::path root = fs::temp_directory_path() / "roesl_resume_partial";
  fs::remove_all(root);
  const RunResult r = run_full(cfg, root);
  const auto size_full = fs::file_size(r.run_dir / "dataset.jsonl");

  // Simulate an interrupt after phase 1 candidate 0: drop one candidate's
  // completion marker and all later artifacts, keep the dataset.
  fs::remove(r.run_dir / "candidates" / "p1-i0-c1" / "score.json");
  fs::remove(r.run_dir / "summary.json");
  fs::remove(r.run_dir / "final.ckpt.bin");

  const RunResult again = run_full(cfg, root);
  CHECK(fs::file_size(again.run_dir / "dataset.jsonl") == size_full);
  CHECK(fs::exists(again.run_dir / "summary.json"));
  CHECK(fs::exists(again.run_dir / "final.ckpt.bin"));

  // The dataset still holds exactly one chunk per phase-1 candidate.
  const auto chunks = dataset_chunks(again.run_dir / "dataset.jsonl");
  CHECK(chunks.size() == size_t(cfg.pipeline.k1));
}

TEST_CASE("efficiency report: totals, comparison arithmetic, emission") {
  EfficiencyReport hybrid;
  hybrid.timings = {{"p1-i0-c0", "phase1", 2.0},
                    {"p2-i0-c0", "phase2", 1.0},
                    {"p2-i0-c1", "phase2", 3.0}};
  hybrid.phase1_total = 2.0;
  hybrid.phase2_total = 4.0;
  hybrid.phase3_total = 1.0;

  EfficiencyReport baseline;
  baseline.baseline_mode = true;
  baseline.timings = {{"p2-i0-c0", "baseline", 8.0}, {"p2-i0-c1", "baseline", 8.0}};
  baseline.phase2_total = 16.0;

  const EfficiencyReport merged = compare_efficiency(hybrid, baseline);
  CHECK(merged.hybrid_per_candidate == doctest::Approx(2.0));
  CHECK(merged.baseline_per_candidate == doctest::Approx(8.0));
  CHECK(merged.reduction_pct == doctest::Approx(75.0));
  CHECK(merged.total() == doctest::Approx(7.0));
  CHECK(merged.reduction_pct <= 100.0);

  const fs::path dir = fs::temp_directory_path() / "roesl_eff";
  fs::remove_all(dir);
  write_efficiency_report(merged, dir);
  CHECK(fs::file_size(dir / "efficiency.csv") > 0);
  std::ifstream in(dir / "efficiency.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("reduction_pct").get<double>() == doctest::Approx(75.0));
}
