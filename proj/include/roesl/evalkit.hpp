#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roesl/gait.hpp"

namespace roesl {

// Per-step feature vectors for alignment analysis. For trajectories this is
// the 4 thigh angles concatenated with the 4 contact flags.
struct KeypointSeq {
  int width = 0;
  std::vector<double> values;  // length * width, row-major
  std::string label;

  size_t length() const { return width == 0 ? 0 : values.size() / width; }
  std::span<const double> step(size_t i) const {
    return {values.data() + i * width, static_cast<size_t>(width)};
  }

  static KeypointSeq from_trajectory(const Trajectory& traj, std::string label);
  static KeypointSeq from_scalars(const std::vector<double>& xs, std::string label = {});
};

enum class DtwMetric { kEuclidean, kManhattan };
const char* dtw_metric_name(DtwMetric m);

struct DtwResult {
  double distance = 0.0;
  std::vector<std::pair<int, int>> path;  // (0,0) .. (n-1, m-1)
  DtwMetric metric = DtwMetric::kEuclidean;

  double per_step() const { return path.empty() ? 0.0 : distance / path.size(); }
};

// Full dynamic-programming DTW with steps {(1,0),(0,1),(1,1)}; the distance
// equals the summed step costs along the returned path.
DtwResult dtw_distance(const KeypointSeq& a, const KeypointSeq& b,
                       DtwMetric metric = DtwMetric::kEuclidean);

struct ContactMatrix {
  std::array<std::vector<uint8_t>, kNumLegs> rows;  // FL, FR, RL, RR
  size_t length() const { return rows[0].size(); }
};

ContactMatrix contact_matrix(const Trajectory& traj);

struct GaitLabel {
  std::string name = "unknown";
  std::array<double, kNumLegs> offsets{};  // estimated, relative to FL
  double confidence = 0.0;
};

// Estimates per-leg phases from contact onsets and matches them against the
// four skill offset tables. Returns "unknown" below confidence 0.5.
GaitLabel classify_gait(const ContactMatrix& cm, int min_steps = 67);

// Final `window` steps of the four thigh-angle logs.
std::array<std::vector<double>, kNumLegs> joint_trace(const Trajectory& traj, int window = 300);

// Report emission.
void write_contacts_csv(const ContactMatrix& cm, const std::filesystem::path& path);
void write_traces_csv(const std::array<std::vector<double>, kNumLegs>& traces,
                      const std::filesystem::path& path);
void write_dtw_csv(const std::vector<std::string>& labels,
                   const std::vector<std::vector<double>>& matrix,
                   const std::filesystem::path& path);
void write_contacts_svg(const ContactMatrix& cm, const std::filesystem::path& path);
void write_traces_svg(const std::array<std::vector<double>, kNumLegs>& traces,
                      const std::filesystem::path& path);

}  // namespace roesl
