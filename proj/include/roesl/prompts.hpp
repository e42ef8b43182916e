#pragma once

// Prompt templates sent to the vision-chat endpoint. Versioned so runs can
// record which template produced a candidate.

namespace roesl::prompts {

inline constexpr int kVersion = 1;

// The candidate document schema is embedded verbatim in the generation
// prompt and mirrored by the parser in reward.cpp.
inline constexpr const char* kRewardSchema = R"({
  "name": "<candidate name>",
  "terms": [
    {"kind": "velocity_tracking", "params": {"target": <m/s>, "k": <sharpness > 0>}, "weight": <number>},
    {"kind": "phase_pair", "params": {"i": <leg 0..3>, "j": <leg 0..3>, "target": <offset in [0,1)>, "k": <sharpness > 0>}, "weight": <number>},
    {"kind": "contact_pattern", "params": {"pattern": [<4 booleans>]}, "weight": <number>},
    {"kind": "height_keep", "params": {"target": <m>, "k": <sharpness > 0>}, "weight": <number>},
    {"kind": "energy_penalty", "params": {}, "weight": <number>},
    {"kind": "action_smoothness", "params": {}, "weight": <number>}
  ]
})";

inline constexpr const char* kGenerateSystem =
    "You design reward functions for a quadruped locomotion controller. "
    "You will be shown the environment code and motion-salient frames from a "
    "demonstration video. Legs are indexed FL=0, FR=1, RL=2, RR=3. "
    "Reply with exactly one fenced code block containing a JSON document in "
    "the following schema; no other code blocks:\n";

inline constexpr const char* kGenerateReprompt =
    "Your previous reply could not be used. Fix the following problems and "
    "reply again with exactly one fenced JSON code block in the schema:\n";

inline constexpr const char* kEvaluateSystem =
    "You compare robot rollouts against a demonstration video. The first "
    "image strip is the demonstration; each following strip is one rollout. "
    "Reply with a single JSON array of rollout indices ranked best-first, "
    "e.g. [2,0,1], and nothing else.";

}  // namespace roesl::prompts
