#include "roesl/vlm.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "roesl/prompts.hpp"
#include "roesl/rng.hpp"
#include "roesl/util.hpp"

namespace roesl {

using nlohmann::json;

// ------------------------------------------------------------------ helpers

std::string base64_encode(const std::vector<uint8_t>& data) {
  static const char* kTable =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += kTable[v & 63];
  }
  if (i + 1 == data.size()) {
    const uint32_t v = data[i] << 16;
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += kTable[(v >> 18) & 63];
    out += kTable[(v >> 12) & 63];
    out += kTable[(v >> 6) & 63];
    out += "=";
  }
  return out;
}

std::optional<std::string> extract_fenced_block(const std::string& text) {
  const size_t open = text.find("```");
  if (open == std::string::npos) return std::nullopt;
  size_t body = text.find('\n', open);
  if (body == std::string::npos) return std::nullopt;
  ++body;
  const size_t close = text.find("```", body);
  if (close == std::string::npos) return std::nullopt;
  return text.substr(body, close - body);
}

size_t PromptBundle::payload_bytes() const { return serialize().size(); }

std::string PromptBundle::serialize() const {
  json j;
  j["prompt_version"] = prompts::kVersion;
  j["system_text"] = system_text;
  j["env_code"] = env_code;
  j["skill_context"] = skill_context;
  j["frames"] = frames_b64;
  return j.dump();
}

void ProviderConfig::validate() const {
  if (endpoint.empty()) throw std::invalid_argument("provider.endpoint must not be empty");
  if (!(timeout_s > 0)) throw std::invalid_argument("provider.timeout_s must be > 0");
  if (retries < 0) throw std::invalid_argument("provider.retries must be >= 0");
  if (max_inflight < 1) throw std::invalid_argument("provider.max_inflight must be >= 1");
  if (max_payload_bytes == 0) throw std::invalid_argument("provider.max_payload_bytes must be > 0");
}

void MockConfig::validate() const {
  if (pool.empty()) throw std::invalid_argument("mock.pool must not be empty");
  if (sabotage_fraction < 0.0 || sabotage_fraction > 1.0)
    throw std::invalid_argument("mock.sabotage_fraction must be in [0,1]");
}

std::vector<MockPoolEntry> default_mock_pool(const SkillTarget& skill) {
  std::vector<MockPoolEntry> pool;
  pool.push_back({aligned_spec(skill), 0.0, 0.0, 0.0});

  MockPoolEntry jittered{aligned_spec(skill), 0.05, 0.1, 0.2};
  jittered.spec.name = "near-" + skill.name;
  pool.push_back(jittered);

  for (const auto& other : all_skills()) {
    if (other.name == skill.name) continue;
    pool.push_back({aligned_spec(other), 0.0, 0.0, 0.0});
  }

  RewardSpec zero;
  zero.name = "zero";
  RewardTerm t;
  t.kind = TermKind::kEnergyPenalty;
  t.weight = 0.0;
  zero.terms.push_back(t);
  pool.push_back({zero, 0.0, 0.0, 0.0});
  return pool;
}

// --------------------------------------------------------------------- mock

MockGateway::MockGateway(MockConfig cfg, SkillTarget skill, GaitConfig gait)
    : cfg_(std::move(cfg)), skill_(std::move(skill)), gait_(gait) {
  cfg_.validate();
}

std::vector<CandidateSpec> MockGateway::generate_rewards(const PromptBundle&, int k) {
  if (k < 1) throw std::invalid_argument("generate_rewards: k must be >= 1");
  // Reseeded per call: (seed, k, pool) fully determine the output.
  Rng rng(Rng::derive(cfg_.seed, 0xF00D, static_cast<uint64_t>(k)));

  const int sabotaged = static_cast<int>(std::lround(cfg_.sabotage_fraction * k));
  std::vector<CandidateSpec> out;
  for (int i = 0; i < k; ++i) {
    const MockPoolEntry& entry = cfg_.pool[i % cfg_.pool.size()];
    RewardSpec spec = entry.spec;
    for (auto& term : spec.terms) {
      if (term.kind == TermKind::kPhasePair && entry.phase_jitter > 0)
        term.target = wrap01(term.target + rng.uniform(-entry.phase_jitter, entry.phase_jitter));
      if (term.kind == TermKind::kVelocityTracking && entry.velocity_jitter > 0)
        term.target += rng.uniform(-entry.velocity_jitter, entry.velocity_jitter);
      if (entry.weight_jitter > 0)
        term.weight *= 1.0 + rng.uniform(-entry.weight_jitter, entry.weight_jitter);
    }
    if (i >= k - sabotaged) {
      // Push every phase target off by a quarter to half cycle.
      for (auto& term : spec.terms)
        if (term.kind == TermKind::kPhasePair)
          term.target = wrap01(term.target + 0.25 + 0.25 * rng.uniform());
    }

    // The gateway never emits a spec the parser would reject.
    ParseReport check = parse_reward(serialize(spec));
    if (!check.ok())
      throw std::logic_error("mock gateway produced an invalid spec: " + check.error_text());

    CandidateSpec c;
    c.index = i;
    c.spec = std::move(spec);
    out.push_back(std::move(c));
  }
  return out;
}

EvaluationResult MockGateway::evaluate_rollouts(const FrameSequence&,
                                                const std::vector<Trajectory>& rollouts) {
  if (rollouts.empty()) throw std::invalid_argument("evaluate_rollouts: no rollouts");
  EvaluationResult result;
  result.scores.reserve(rollouts.size());
  for (const auto& traj : rollouts)
    result.scores.push_back(fitness(traj, skill_, gait_).fitness);
  result.best_index = 0;
  for (size_t i = 1; i < result.scores.size(); ++i)
    if (result.scores[i] > result.scores[result.best_index])
      result.best_index = static_cast<int>(i);
  return result;
}

// --------------------------------------------------------------------- live

namespace {

json image_part(const std::string& b64) {
  return {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + b64}}}};
}

std::vector<std::string> strip_frames(const FrameSequence& seq, int count) {
  std::vector<std::string> out;
  const int n = static_cast<int>(seq.size());
  const int m = std::min(count, n);
  for (int j = 0; j < m; ++j) {
    const int idx = static_cast<int>((j + 0.5) * n / m);
    out.push_back(base64_encode(encode_png_gray(seq.frames[std::min(idx, n - 1)])));
  }
  return out;
}

std::optional<std::vector<int>> parse_ranking(const std::string& content, size_t n) {
  const size_t open = content.find('[');
  const size_t close = content.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  json arr;
  try {
    arr = json::parse(content.substr(open, close - open + 1));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (!arr.is_array() || arr.empty()) return std::nullopt;
  std::vector<int> ranking;
  std::vector<bool> seen(n, false);
  for (const auto& v : arr) {
    if (!v.is_number_integer()) return std::nullopt;
    const int idx = v.get<int>();
    if (idx < 0 || idx >= static_cast<int>(n) || seen[idx]) return std::nullopt;
    seen[idx] = true;
    ranking.push_back(idx);
  }
  return ranking;
}

}  // namespace

LiveGateway::LiveGateway(ProviderConfig cfg, SkillTarget skill, GaitConfig gait)
    : cfg_(std::move(cfg)), skill_(std::move(skill)), gait_(gait) {
  cfg_.validate();
  const char* token = std::getenv(cfg_.auth_env.c_str());
  if (!token || !*token)
    throw std::runtime_error("live mode needs the auth token environment variable '" +
                             cfg_.auth_env + "' to be set");
  auth_token_ = token;
}

std::optional<std::string> LiveGateway::post_chat(const std::string& body,
                                                  std::string& error) const {
  if (body.size() > cfg_.max_payload_bytes) {
    error = "request payload is " + std::to_string(body.size()) + " bytes, limit is " +
            std::to_string(cfg_.max_payload_bytes);
    return std::nullopt;
  }
  httplib::Client client(cfg_.endpoint);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - secs) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  client.set_default_headers({{"Authorization", "Bearer " + auth_token_}});

  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    auto res = client.Post("/chat/completions", body, "application/json");
    if (res && res->status >= 200 && res->status < 300) return res->body;
    if (res)
      error = "HTTP " + std::to_string(res->status) + " from " + cfg_.endpoint;
    else
      error = "transport error talking to " + cfg_.endpoint + " (" +
              httplib::to_string(res.error()) + ")";
  }
  return std::nullopt;
}

std::vector<CandidateSpec> LiveGateway::generate_rewards(const PromptBundle& bundle, int k) {
  if (k < 1) throw std::invalid_argument("generate_rewards: k must be >= 1");

  json user_content = json::array();
  user_content.push_back(
      {{"type", "text"},
       {"text", "Environment code:\n" + bundle.env_code + "\n\n" + bundle.skill_context}});
  for (const auto& b64 : bundle.frames_b64) user_content.push_back(image_part(b64));

  const json base_messages = json::array({
      {{"role", "system"}, {"content", bundle.system_text}},
      {{"role", "user"}, {"content", user_content}},
  });

  std::vector<CandidateSpec> out(k);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= k) return;
      CandidateSpec cand;
      cand.index = i;

      json messages = base_messages;
      for (int round = 0; round < 2 && !cand.spec; ++round) {
        cand.reprompted = round > 0;
        const json request = {{"model", cfg_.model}, {"messages", messages}};
        std::string error;
        const auto body = post_chat(request.dump(), error);
        if (!body) {
          cand.errors.push_back(error);
          break;  // transport failure: no reprompt, the candidate is dropped
        }
        std::string content;
        try {
          content = json::parse(*body).at("choices").at(0).at("message").at("content")
                        .get<std::string>();
        } catch (const std::exception& e) {
          cand.errors.push_back(std::string("malformed completion response: ") + e.what());
          break;
        }
        const auto block = extract_fenced_block(content);
        std::string reprompt_reason;
        if (!block) {
          reprompt_reason = "reply contained no fenced code block";
        } else {
          ParseReport report = parse_reward(*block);
          if (report.ok()) {
            cand.spec = std::move(report.spec);
            break;
          }
          reprompt_reason = report.error_text();
        }
        cand.errors.push_back(reprompt_reason);
        messages.push_back({{"role", "assistant"}, {"content", content}});
        messages.push_back({{"role", "user"},
                            {"content", std::string(prompts::kGenerateReprompt) +
                                            reprompt_reason + "\n" + prompts::kRewardSchema}});
      }
      out[i] = std::move(cand);
    }
  };

  const int workers = std::min(cfg_.max_inflight, k);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return out;
}

EvaluationResult LiveGateway::evaluate_rollouts(const FrameSequence& demo,
                                                const std::vector<Trajectory>& rollouts) {
  if (rollouts.empty()) throw std::invalid_argument("evaluate_rollouts: no rollouts");
  constexpr int kStrip = 8;

  json user_content = json::array();
  user_content.push_back({{"type", "text"}, {"text", "Demonstration:"}});
  for (const auto& b64 : strip_frames(demo, kStrip)) user_content.push_back(image_part(b64));
  for (size_t i = 0; i < rollouts.size(); ++i) {
    user_content.push_back({{"type", "text"}, {"text", "Rollout " + std::to_string(i) + ":"}});
    const FrameSequence frames = render_frames(rollouts[i], 64, 64, gait_);
    for (const auto& b64 : strip_frames(frames, kStrip)) user_content.push_back(image_part(b64));
  }
  const json request = {{"model", cfg_.model},
                        {"messages", json::array({
                            {{"role", "system"}, {"content", prompts::kEvaluateSystem}},
                            {{"role", "user"}, {"content", user_content}},
                        })}};
  const std::string body = request.dump();

  // One regular attempt plus one retry for a malformed ranking; then fall
  // back to ground-truth scoring with the warning flag set.
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string error;
    const auto resp = post_chat(body, error);
    if (!resp) continue;
    std::string content;
    try {
      content = json::parse(*resp).at("choices").at(0).at("message").at("content")
                    .get<std::string>();
    } catch (const std::exception&) {
      continue;
    }
    if (const auto ranking = parse_ranking(content, rollouts.size())) {
      EvaluationResult result;
      result.best_index = ranking->front();
      result.scores.assign(rollouts.size(), 0.0);
      for (size_t pos = 0; pos < ranking->size(); ++pos)
        result.scores[(*ranking)[pos]] =
            1.0 - static_cast<double>(pos) / static_cast<double>(rollouts.size());
      return result;
    }
  }

  MockGateway fallback(MockConfig{0, default_mock_pool(skill_), 0.0}, skill_, gait_);
  EvaluationResult result = fallback.evaluate_rollouts(demo, rollouts);
  result.fallback_used = true;
  return result;
}

// ------------------------------------------------------------- build_prompt

PromptBundle build_prompt(const std::filesystem::path& env_code_path,
                          const SelectionResult& selection, const FrameSequence& frames,
                          const SkillTarget& skill, size_t max_payload_bytes) {
  std::ifstream in(env_code_path);
  if (!in) throw std::runtime_error("cannot read environment code file: " + env_code_path.string());
  std::ostringstream code;
  code << in.rdbuf();

  PromptBundle bundle;
  bundle.system_text = std::string(prompts::kGenerateSystem) + prompts::kRewardSchema;
  bundle.env_code = code.str();
  bundle.skill_context = "Target skill: " + skill.name + ". Target forward velocity: " +
                         std::to_string(skill.velocity) + " m/s. Selected frame indices: " +
                         join(selection.indices) + ".";
  for (int idx : selection.indices) {
    if (idx < 0 || idx >= static_cast<int>(frames.size()))
      throw std::runtime_error("selection index " + std::to_string(idx) +
                               " is out of range for a sequence of " +
                               std::to_string(frames.size()) + " frames");
    bundle.frames_b64.push_back(base64_encode(encode_png_gray(frames.frames[idx])));
  }
  const size_t bytes = bundle.payload_bytes();
  if (bytes > max_payload_bytes)
    throw std::runtime_error("prompt payload is " + std::to_string(bytes) +
                             " bytes, exceeding the limit of " +
                             std::to_string(max_payload_bytes));
  return bundle;
}

}  // namespace roesl
