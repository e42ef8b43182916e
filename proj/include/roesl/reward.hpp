#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "roesl/gait.hpp"

namespace roesl {

// Whitelisted reward term kinds. Candidate documents may only combine these;
// arbitrary reward code is out of contract.
enum class TermKind {
  kVelocityTracking,
  kPhasePair,
  kContactPattern,
  kHeightKeep,
  kEnergyPenalty,
  kActionSmoothness,
};

const char* term_kind_name(TermKind kind);
std::optional<TermKind> term_kind_from(const std::string& name);

struct RewardTerm {
  TermKind kind = TermKind::kEnergyPenalty;
  double weight = 1.0;
  // Kind-specific parameters; unused ones stay at their defaults.
  double target = 0.0;
  double sharpness = 1.0;
  int leg_i = 0;
  int leg_j = 1;
  std::array<bool, kNumLegs> pattern{};

  bool operator==(const RewardTerm&) const = default;
};

struct RewardSpec {
  std::string name;
  std::vector<RewardTerm> terms;

  bool operator==(const RewardSpec&) const = default;
};

struct ParseIssue {
  std::string location;  // e.g. "terms[0].params.k"
  std::string message;
  std::string str() const { return message + " at " + location; }
};

struct ParseReport {
  std::optional<RewardSpec> spec;
  std::vector<ParseIssue> errors;
  bool ok() const { return spec.has_value(); }
  std::string error_text() const;
};

// Parses a candidate document: {"name": str, "terms": [{"kind": str,
// "params": {...}, "weight": num}]}. Every violation is reported, not just
// the first.
ParseReport parse_reward(const std::string& text);
std::string serialize(const RewardSpec& spec);

// Everything a reward term may look at. Phases/contacts/velocity/height are
// the post-step values.
struct RewardContext {
  std::array<double, kNumLegs> phase{};
  std::array<bool, kNumLegs> contact{};
  double velocity = 0.0;
  double height = 0.0;
  Action action{};
  Action prev_action{};
};

// Builds the evaluation context from stored transition fields only, so live
// labeling and offline relabeling are bit-identical.
RewardContext context_from(const Obs& next_obs, const Action& action, const Action& prev_action);

double eval_reward(const RewardSpec& spec, const RewardContext& ctx);
double eval_reward(const RewardSpec& spec, const Transition& t);

// Ground-truth-aligned candidate for a skill: pairwise phase terms matching
// the skill's offsets plus a velocity-tracking term.
RewardSpec aligned_spec(const SkillTarget& skill);

}  // namespace roesl
