#include "roesl/dataset.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace roesl {

using nlohmann::json;

namespace {

json transition_to_json(const Transition& t) {
  // prev_action is intentionally not persisted; the loader reconstructs it
  // from line order (it equals the previous line's action within an episode
  // and zero right after a reset).
  json line;
  line["obs"] = t.obs;
  line["action"] = t.action;
  line["reward"] = t.reward;
  line["next_obs"] = t.next_obs;
  line["done"] = t.done;
  line["candidate"] = t.source_candidate;
  line["iter"] = t.iteration;
  line["step"] = t.step;
  return line;
}

template <size_t N>
void read_array(const json& j, const char* key, std::array<double, N>& out, int line_no) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != N)
    throw std::runtime_error("dataset line " + std::to_string(line_no) + ": '" + key +
                             "' must be an array of " + std::to_string(N) + " numbers");
  for (size_t i = 0; i < N; ++i) out[i] = arr[i].get<double>();
}

Transition transition_from_json(const json& j, int line_no) {
  Transition t;
  try {
    read_array(j, "obs", t.obs, line_no);
    read_array(j, "action", t.action, line_no);
    read_array(j, "next_obs", t.next_obs, line_no);
    t.reward = j.at("reward").get<double>();
    t.done = j.at("done").get<bool>();
    t.source_candidate = j.at("candidate").get<std::string>();
    t.iteration = j.at("iter").get<int>();
    t.step = j.at("step").get<long>();
  } catch (const json::exception& e) {
    throw std::runtime_error("dataset line " + std::to_string(line_no) +
                             ": schema violation: " + e.what());
  }
  return t;
}

void write_header(std::ostream& out) {
  out << json{{"format", "roesl-dataset"}, {"version", kDatasetVersion}}.dump() << "\n";
}

void check_header(const std::string& line) {
  json h;
  try {
    h = json::parse(line);
  } catch (const std::exception&) {
    throw std::runtime_error("dataset line 1: missing or corrupt version header");
  }
  if (!h.is_object() || h.value("format", "") != "roesl-dataset")
    throw std::runtime_error("dataset line 1: missing version header");
  const int version = h.value("version", -1);
  if (version != kDatasetVersion)
    throw std::runtime_error("unsupported dataset version " + std::to_string(version) +
                             " (expected " + std::to_string(kDatasetVersion) + ")");
}

}  // namespace

void save_dataset(const OfflineDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path.string());
  write_header(out);
  for (const auto& t : ds.transitions) out << transition_to_json(t).dump() << "\n";
}

void append_dataset(const std::filesystem::path& path,
                    const std::vector<Transition>& transitions) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to dataset file: " + path.string());
  if (fresh) write_header(out);
  for (const auto& t : transitions) out << transition_to_json(t).dump() << "\n";
}

void for_each_transition(const std::filesystem::path& path,
                         const std::function<bool(Transition&&)>& fn) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path.string());
  check_header(line);

  // prev_action reconstruction: last action of each (iter, candidate) stream,
  // reset to zero after an episode boundary.
  std::map<std::pair<int, std::string>, Action> last_action;

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) +
                               ": corrupt JSON: " + e.what());
    }
    Transition t = transition_from_json(j, line_no);
    const auto key = std::make_pair(t.iteration, t.source_candidate);
    auto it = last_action.find(key);
    t.prev_action = it != last_action.end() ? it->second : Action{};
    if (t.done)
      last_action[key] = Action{};
    else
      last_action[key] = t.action;
    if (!fn(std::move(t))) return;
  }
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  OfflineDataset ds;
  for_each_transition(path, [&](Transition&& t) {
    ds.transitions.push_back(std::move(t));
    return true;
  });
  return ds;
}

std::set<std::pair<int, std::string>> dataset_chunks(const std::filesystem::path& path) {
  std::set<std::pair<int, std::string>> chunks;
  if (!std::filesystem::exists(path)) return chunks;
  for_each_transition(path, [&](Transition&& t) {
    chunks.emplace(t.iteration, t.source_candidate);
    return true;
  });
  return chunks;
}

}  // namespace roesl
