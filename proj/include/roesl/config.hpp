#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roesl/flow.hpp"
#include "roesl/gait.hpp"
#include "roesl/rl.hpp"
#include "roesl/vlm.hpp"

namespace roesl {

// Thrown for configuration problems; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlowSettings {
  FlowParams params;
  int select_k = 8;
  std::optional<double> threshold;  // motion threshold; default mean score

  void validate() const;
};

struct PipelineSettings {
  int n1 = 1;                     // phase 1 iterations
  int n2 = 2;                     // phase 2 iterations
  int k1 = 3;                     // candidates per phase 1 iteration
  int k2 = 6;                     // candidates per phase 2 iteration
  long phase1_steps = 40000;      // env steps per phase 1 candidate
  long phase2_grad_steps = 2000;  // offline gradient steps per phase 2 candidate
  long phase3_steps = 40000;      // fine-tune env steps (0 skips fine-tuning)
  uint64_t seed = 0;
  std::string skill = "trot";
  std::string mode = "mock";  // mock | live
  bool all_online_baseline = false;

  void validate() const;
  bool live() const { return mode == "live"; }
};

struct MockSettings {
  uint64_t seed = 0;
  double sabotage_fraction = 0.0;
  // Empty pool means "use the built-in default pool for the configured skill".
  std::vector<MockPoolEntry> pool;

  void validate() const;
};

struct VlmSettings {
  // Environment code excerpt embedded into prompts; empty selects the
  // built-in description of the gait environment.
  std::string env_code_path;
};

struct RunConfig {
  FlowSettings flow;
  GaitConfig gait;
  PpoConfig ppo;
  IqlConfig iql;
  PipelineSettings pipeline;
  ProviderConfig provider;
  MockSettings mock;
  VlmSettings vlm;

  void validate() const;
};

RunConfig default_run_config();

// Strict parse: unknown keys anywhere are ConfigErrors naming the key path.
RunConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one "section.key=value" override onto the JSON document. Values
// parse as JSON scalars, falling back to strings.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace roesl
