#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "roesl/config.hpp"
#include "roesl/dataset.hpp"
#include "roesl/gait.hpp"
#include "roesl/rl.hpp"
#include "roesl/vlm.hpp"

namespace roesl {

struct CandidateRecord {
  std::string id;          // e.g. "p1-i0-c2"
  std::string phase;       // "phase1" | "phase2" | "baseline"
  RewardSpec spec;
  bool failed = false;
  std::string failure;
  double score = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  Trajectory rollout;
};

struct PhaseReport {
  std::vector<CandidateRecord> records;
  int selected = -1;  // index into records
};

// Argmax over evaluator scores; failed records are skipped; ties break
// toward the lowest index. Throws when every record failed.
int select_best(const std::vector<CandidateRecord>& records);

// Pure reward relabeling: same transitions, rewards recomputed under spec.
OfflineDataset relabel_dataset(const OfflineDataset& dataset, const RewardSpec& spec);

struct PhaseResult {
  PhaseReport report;
  RewardSpec best_spec;
  GaussianPolicy best_policy;
  Mlp best_value;
};

struct Phase1Result {
  OfflineDataset dataset;
  PhaseResult phase;
};

// Runs the pipeline against a run directory (pass an empty path to skip
// persistence). Previously completed candidates found in the directory are
// reused instead of retrained, and their dataset chunks are never appended
// twice.
Phase1Result phase1_collect(const GaitEnvFactory& factory, RewardSource& source,
                            const PromptBundle& prompt, const FrameSequence& demo,
                            const RunConfig& cfg, const std::filesystem::path& run_dir = {});

PhaseResult phase2_optimize(const OfflineDataset& dataset, const GaitEnvFactory& factory,
                            RewardSource& source, const PromptBundle& prompt,
                            const FrameSequence& demo, const RunConfig& cfg,
                            const std::filesystem::path& run_dir = {});

// All-online comparator: phase 2 candidates trained with full PPO at the
// phase 1 budget instead of offline optimization.
PhaseResult phase2_all_online(const GaitEnvFactory& factory, RewardSource& source,
                              const PromptBundle& prompt, const FrameSequence& demo,
                              const RunConfig& cfg,
                              const std::filesystem::path& run_dir = {});

struct Phase3Result {
  GaussianPolicy policy;
  Mlp value;
  Trajectory rollout;
  FitnessReport fitness;
  double wall_seconds = 0.0;
};

Phase3Result phase3_finetune(const GaitEnvFactory& factory, const GaussianPolicy& init_policy,
                             const Mlp* init_value, const RewardSpec& spec, const RunConfig& cfg,
                             const std::filesystem::path& run_dir = {});

struct CandidateTiming {
  std::string id;
  std::string phase;
  double seconds = 0.0;
};

struct EfficiencyReport {
  std::vector<CandidateTiming> timings;
  double phase1_total = 0.0;
  double phase2_total = 0.0;  // offline (hybrid) or online (baseline) candidates
  double phase3_total = 0.0;
  bool baseline_mode = false;

  // Filled by compare_efficiency.
  bool has_comparison = false;
  double hybrid_per_candidate = 0.0;
  double baseline_per_candidate = 0.0;
  double reduction_pct = 0.0;

  double total() const { return phase1_total + phase2_total + phase3_total; }
  double phase2_per_candidate() const;
};

// reduction% = (baseline - hybrid) / baseline * 100, on per-candidate
// phase 2 wall-clock.
EfficiencyReport compare_efficiency(const EfficiencyReport& hybrid,
                                    const EfficiencyReport& baseline);

void write_efficiency_report(const EfficiencyReport& report, const std::filesystem::path& dir);

struct RunResult {
  GaussianPolicy final_policy;
  FitnessReport final_fitness;
  std::string final_gait_label;
  EfficiencyReport efficiency;
  std::filesystem::path run_dir;
  RewardSpec selected_spec;  // R_bst (or R_sel in baseline mode)
};

// Executes phases 1 -> 2 -> 3 and writes all artifacts:
//   <run_root>/run/<id>/{config.json, dataset.jsonl, state.json, summary.json,
//   candidates/<phase>-<iter>-<k>/{spec.json, ckpt.bin, vnet.bin,
//   rollout.jsonl, score.json}, report/{efficiency.csv, efficiency.json}}
RunResult run_full(const RunConfig& cfg, const std::filesystem::path& run_root);

// Deterministic run directory name for a config.
std::string run_id(const RunConfig& cfg);

}  // namespace roesl
