#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roesl/mlp.hpp"
#include "roesl/rl.hpp"

namespace roesl {

// Versioned binary checkpoint: magic "ROESLCKP", u16 version, a layer-size
// table, an extra-parameter count (the policy's log-std block), then all
// parameters as little-endian f64 in declaration order. A JSON sidecar at
// <path>.json records config and seed.

inline constexpr uint16_t kCheckpointVersion = 1;

void save_policy(const std::filesystem::path& path, const GaussianPolicy& policy,
                 const nlohmann::json& sidecar = {});
// expected_sizes, when given, must match the stored layer table exactly;
// a mismatch is an explicit error, never a silent reinit.
GaussianPolicy load_policy(const std::filesystem::path& path,
                           const std::vector<int>& expected_sizes = {});

void save_mlp(const std::filesystem::path& path, const Mlp& net,
              const nlohmann::json& sidecar = {});
Mlp load_mlp(const std::filesystem::path& path, const std::vector<int>& expected_sizes = {});

}  // namespace roesl
