#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roesl/flow.hpp"
#include "roesl/gait.hpp"
#include "roesl/reward.hpp"

namespace roesl {

struct PromptBundle {
  std::string system_text;
  std::string env_code;
  std::string skill_context;
  std::vector<std::string> frames_b64;  // PNG data, base64, ascending frame index

  size_t payload_bytes() const;
  // Canonical serialization; identical inputs produce identical bytes.
  std::string serialize() const;
};

struct ProviderConfig {
  std::string endpoint = "http://127.0.0.1:8600";
  std::string model = "gpt-4-vision-preview";
  std::string auth_env = "ROESL_API_KEY";
  double timeout_s = 60.0;
  int retries = 2;
  int max_inflight = 4;
  size_t max_payload_bytes = 20 * 1024 * 1024;

  void validate() const;
};

// Template plus jitter ranges for the deterministic candidate generator.
struct MockPoolEntry {
  RewardSpec spec;
  double phase_jitter = 0.0;     // phase_pair targets move by U(-j, j)
  double velocity_jitter = 0.0;  // velocity targets move by U(-j, j)
  double weight_jitter = 0.0;    // weights scale by 1 + U(-j, j)
};

struct MockConfig {
  uint64_t seed = 0;
  std::vector<MockPoolEntry> pool;
  double sabotage_fraction = 0.0;  // share of candidates with phase targets pushed off

  void validate() const;
};

// Pool used by mock runs when the config does not list one explicitly:
// the aligned candidate, a jittered aligned variant, the other skills'
// aligned specs, and a zero-weight spec.
std::vector<MockPoolEntry> default_mock_pool(const SkillTarget& skill);

struct CandidateSpec {
  int index = 0;
  std::optional<RewardSpec> spec;
  std::vector<std::string> errors;
  bool reprompted = false;

  bool ok() const { return spec.has_value(); }
};

struct EvaluationResult {
  int best_index = -1;
  std::vector<double> scores;
  bool fallback_used = false;
};

// Gateway interface shared by the mock and the live client (and test fakes).
class RewardSource {
 public:
  virtual ~RewardSource() = default;
  virtual std::vector<CandidateSpec> generate_rewards(const PromptBundle& bundle, int k) = 0;
  virtual EvaluationResult evaluate_rollouts(const FrameSequence& demo,
                                             const std::vector<Trajectory>& rollouts) = 0;
};

// Seeded, fully deterministic stand-in for the vision model: candidates come
// from the configured pool, rollouts are scored by ground-truth fitness.
class MockGateway : public RewardSource {
 public:
  MockGateway(MockConfig cfg, SkillTarget skill, GaitConfig gait);

  std::vector<CandidateSpec> generate_rewards(const PromptBundle& bundle, int k) override;
  EvaluationResult evaluate_rollouts(const FrameSequence& demo,
                                     const std::vector<Trajectory>& rollouts) override;

 private:
  MockConfig cfg_;
  SkillTarget skill_;
  GaitConfig gait_;
};

// OpenAI-compatible chat-completions client with image parts. Candidates are
// requested one per call (concurrently up to max_inflight); malformed output
// gets one reprompt carrying the parse errors, then the candidate is dropped.
// A ranking that stays malformed after a retry falls back to mock scoring
// with the fallback flag set.
class LiveGateway : public RewardSource {
 public:
  LiveGateway(ProviderConfig cfg, SkillTarget skill, GaitConfig gait);

  std::vector<CandidateSpec> generate_rewards(const PromptBundle& bundle, int k) override;
  EvaluationResult evaluate_rollouts(const FrameSequence& demo,
                                     const std::vector<Trajectory>& rollouts) override;

 private:
  ProviderConfig cfg_;
  SkillTarget skill_;
  GaitConfig gait_;
  std::string auth_token_;

  std::optional<std::string> post_chat(const std::string& body, std::string& error) const;
};

// Assembles the generation prompt: schema, environment code text, the
// selected frames (in index order) and the skill context.
PromptBundle build_prompt(const std::filesystem::path& env_code_path,
                          const SelectionResult& selection, const FrameSequence& frames,
                          const SkillTarget& skill,
                          size_t max_payload_bytes = 20 * 1024 * 1024);

std::string base64_encode(const std::vector<uint8_t>& data);

// Extracts the contents of the first fenced code block, if any.
std::optional<std::string> extract_fenced_block(const std::string& text);

}  // namespace roesl
