#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "roesl/gait.hpp"

namespace roesl {

inline constexpr int kDatasetVersion = 1;

struct OfflineDataset {
  std::vector<Transition> transitions;

  size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
};

// JSON-lines persistence. First line is the version header, then one
// transition per line. Doubles survive the round trip bit-exactly.
void save_dataset(const OfflineDataset& ds, const std::filesystem::path& path);

// Appends transitions; writes the version header when creating the file.
void append_dataset(const std::filesystem::path& path, const std::vector<Transition>& transitions);

// Streaming parse: the callback sees each transition as soon as its line is
// read. Returning false stops the scan early.
void for_each_transition(const std::filesystem::path& path,
                         const std::function<bool(Transition&&)>& fn);

OfflineDataset load_dataset(const std::filesystem::path& path);

// Provenance chunks already present in a dataset file, keyed by
// (iteration, candidate). Used to make pipeline appends idempotent.
std::set<std::pair<int, std::string>> dataset_chunks(const std::filesystem::path& path);

}  // namespace roesl
