#pragma once

#include <optional>
#include <string>
#include <vector>

#include "roesl/image.hpp"

namespace roesl {

struct FlowParams {
  // Horn-Schunck smoothness weight. The classic calibration assumes 8-bit
  // intensities, so the solver works on a 0..255 scale internally; frames
  // themselves stay in [0,1].
  double alpha = 10.0;
  int iterations = 100;
};

// Per-pixel displacement field from one frame to the next, in pixels.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> dx, dy;

  double mean_dx() const;
  double mean_dy() const;
};

// Dense optical flow between two frames of equal size (Horn-Schunck,
// Jacobi iterations, central-difference gradients, reflective borders).
FlowField dense_flow(const Frame& prev, const Frame& next, const FlowParams& params = {});

// Mean L2 displacement magnitude over the field.
double motion_score(const FlowField& flow);

// scores[k-1] holds the motion score between frames k-1 and k, k = 1..T-1.
struct MotionScores {
  std::vector<double> scores;
};

MotionScores motion_scores(const FrameSequence& seq, const FlowParams& params = {});

enum class SelectionTag { kMotion, kUniformTopup };

struct SelectionResult {
  std::vector<int> indices;       // sorted ascending, values in [1, T-1]
  std::vector<SelectionTag> tags; // parallel to indices
  int target_count = 0;

  bool is_motion(size_t i) const { return tags[i] == SelectionTag::kMotion; }
};

// Picks the target_count most motion-salient frame indices. Indices whose
// score exceeds the threshold (default: mean score) count as motion-selected;
// any deficit is filled with evenly spaced picks from the remaining indices.
SelectionResult select_frames(const MotionScores& scores, int target_count,
                              std::optional<double> threshold = std::nullopt);

}  // namespace roesl
