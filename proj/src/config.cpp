#include "roesl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "roesl/reward.hpp"

namespace roesl {

using nlohmann::json;

namespace {

// Pulls known keys out of a section object, erroring on anything else.
class Section {
 public:
  Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_ + " must be a JSON object");
  }

  ~Section() = default;

  void finish() const {
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + prefix_ + "." + key + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + prefix_ + "." + key + "' has the wrong type");
    }
  }

  const json* raw(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void parse_flow(const json& obj, FlowSettings& out) {
  Section s(obj, "flow");
  s.get("alpha", out.params.alpha);
  s.get("iterations", out.params.iterations);
  s.get("select_k", out.select_k);
  if (const json* t = s.raw("threshold")) {
    if (t->is_null())
      out.threshold.reset();
    else if (t->is_number())
      out.threshold = t->get<double>();
    else
      throw ConfigError("config key 'flow.threshold' must be a number or null");
  }
  s.finish();
}

void parse_gait(const json& obj, GaitConfig& g) {
  Section s(obj, "gait");
  s.get("dt", g.dt);
  s.get("omega0", g.omega0);
  s.get("beta", g.beta);
  s.get("duty", g.duty);
  s.get("vel_smoothing", g.vel_smoothing);
  s.get("vel_gain", g.vel_gain);
  s.get("base_height", g.base_height);
  s.get("height_dip", g.height_dip);
  s.get("thigh_amplitude", g.thigh_amplitude);
  s.get("episode_len", g.episode_len);
  s.get("eval_window", g.eval_window);
  s.get("k_phase", g.k_phase);
  s.get("k_vel", g.k_vel);
  s.get("w_phase", g.w_phase);
  s.get("w_vel", g.w_vel);
  s.get("target_velocity", g.target_velocity);
  s.finish();
}

void parse_ppo(const json& obj, PpoConfig& p) {
  Section s(obj, "ppo");
  s.get("num_envs", p.num_envs);
  s.get("horizon", p.horizon);
  s.get("minibatch", p.minibatch);
  s.get("epochs", p.epochs);
  s.get("gamma", p.gamma);
  s.get("gae_lambda", p.gae_lambda);
  s.get("entropy_coef", p.entropy_coef);
  s.get("learning_rate", p.learning_rate);
  s.get("clip", p.clip);
  s.get("value_coef", p.value_coef);
  s.get("total_steps", p.total_steps);
  s.get("hidden", p.hidden);
  s.finish();
}

void parse_iql(const json& obj, IqlConfig& q) {
  Section s(obj, "iql");
  s.get("temperature", q.temperature);
  s.get("target_update", q.target_update);
  s.get("expectile", q.expectile);
  s.get("gamma", q.gamma);
  s.get("learning_rate", q.learning_rate);
  s.get("grad_steps", q.grad_steps);
  s.get("batch_size", q.batch_size);
  s.get("awr_weight_clip", q.awr_weight_clip);
  s.get("awr_advantage_steps", q.awr_advantage_steps);
  s.get("hidden", q.hidden);
  s.finish();
}

void parse_pipeline(const json& obj, PipelineSettings& p) {
  Section s(obj, "pipeline");
  s.get("n1", p.n1);
  s.get("n2", p.n2);
  s.get("k1", p.k1);
  s.get("k2", p.k2);
  s.get("phase1_steps", p.phase1_steps);
  s.get("phase2_grad_steps", p.phase2_grad_steps);
  s.get("phase3_steps", p.phase3_steps);
  s.get("seed", p.seed);
  s.get("skill", p.skill);
  s.get("mode", p.mode);
  s.get("all_online_baseline", p.all_online_baseline);
  s.finish();
}

void parse_provider(const json& obj, ProviderConfig& p) {
  Section s(obj, "provider");
  s.get("endpoint", p.endpoint);
  s.get("model", p.model);
  s.get("auth_env", p.auth_env);
  s.get("timeout_s", p.timeout_s);
  s.get("retries", p.retries);
  s.get("max_inflight", p.max_inflight);
  s.get("max_payload_bytes", p.max_payload_bytes);
  s.finish();
}

void parse_mock(const json& obj, MockSettings& m) {
  Section s(obj, "mock");
  s.get("seed", m.seed);
  s.get("sabotage_fraction", m.sabotage_fraction);
  if (const json* pool = s.raw("pool")) {
    if (!pool->is_array()) throw ConfigError("config key 'mock.pool' must be an array");
    m.pool.clear();
    for (size_t i = 0; i < pool->size(); ++i) {
      Section e((*pool)[i], "mock.pool[" + std::to_string(i) + "]");
      MockPoolEntry entry;
      const json* spec = e.raw("spec");
      if (!spec)
        throw ConfigError("config key 'mock.pool[" + std::to_string(i) + "].spec' is required");
      ParseReport report = parse_reward(spec->dump());
      if (!report.ok())
        throw ConfigError("mock.pool[" + std::to_string(i) +
                          "].spec is not a valid reward document: " + report.error_text());
      entry.spec = *report.spec;
      e.get("phase_jitter", entry.phase_jitter);
      e.get("velocity_jitter", entry.velocity_jitter);
      e.get("weight_jitter", entry.weight_jitter);
      e.finish();
      m.pool.push_back(std::move(entry));
    }
  }
  s.finish();
}

void parse_vlm(const json& obj, VlmSettings& v) {
  Section s(obj, "vlm");
  s.get("env_code_path", v.env_code_path);
  s.finish();
}

}  // namespace

void FlowSettings::validate() const {
  if (params.alpha <= 0) throw ConfigError("flow.alpha must be > 0");
  if (params.iterations < 1) throw ConfigError("flow.iterations must be >= 1");
  if (select_k < 1) throw ConfigError("flow.select_k must be >= 1");
  if (threshold && !(*threshold >= 0)) throw ConfigError("flow.threshold must be >= 0");
}

void PipelineSettings::validate() const {
  if (n1 < 1 || n2 < 1 || k1 < 1 || k2 < 1)
    throw ConfigError("pipeline iteration and candidate counts must be >= 1");
  if (phase1_steps < 1) throw ConfigError("pipeline.phase1_steps must be > 0");
  if (phase2_grad_steps < 1) throw ConfigError("pipeline.phase2_grad_steps must be > 0");
  if (phase3_steps < 0) throw ConfigError("pipeline.phase3_steps must be >= 0");
  if (mode != "mock" && mode != "live")
    throw ConfigError("pipeline.mode must be 'mock' or 'live'");
  skill_target(skill);  // throws on unknown skill
}

void MockSettings::validate() const {
  if (sabotage_fraction < 0.0 || sabotage_fraction > 1.0)
    throw ConfigError("mock.sabotage_fraction must be in [0,1]");
}

void RunConfig::validate() const {
  flow.validate();
  try {
    gait.validate();
    ppo.validate();
    iql.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  pipeline.validate();
  try {
    provider.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  mock.validate();
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be a JSON object");
  static const std::set<std::string> kSections = {"flow", "gait", "ppo", "iql",
                                                  "pipeline", "provider", "mock", "vlm"};
  for (const auto& [key, _] : doc.items())
    if (!kSections.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig cfg;
  if (doc.contains("flow")) parse_flow(doc["flow"], cfg.flow);
  if (doc.contains("gait")) parse_gait(doc["gait"], cfg.gait);
  if (doc.contains("ppo")) parse_ppo(doc["ppo"], cfg.ppo);
  if (doc.contains("iql")) parse_iql(doc["iql"], cfg.iql);
  if (doc.contains("pipeline")) parse_pipeline(doc["pipeline"], cfg.pipeline);
  if (doc.contains("provider")) parse_provider(doc["provider"], cfg.provider);
  if (doc.contains("mock")) parse_mock(doc["mock"], cfg.mock);
  if (doc.contains("vlm")) parse_vlm(doc["vlm"], cfg.vlm);
  cfg.validate();
  return cfg;
}

json config_to_json(const RunConfig& cfg) {
  json doc;
  doc["flow"] = {{"alpha", cfg.flow.params.alpha},
                 {"iterations", cfg.flow.params.iterations},
                 {"select_k", cfg.flow.select_k},
                 {"threshold", cfg.flow.threshold ? json(*cfg.flow.threshold) : json(nullptr)}};
  doc["gait"] = {{"dt", cfg.gait.dt},
                 {"omega0", cfg.gait.omega0},
                 {"beta", cfg.gait.beta},
                 {"duty", cfg.gait.duty},
                 {"vel_smoothing", cfg.gait.vel_smoothing},
                 {"vel_gain", cfg.gait.vel_gain},
                 {"base_height", cfg.gait.base_height},
                 {"height_dip", cfg.gait.height_dip},
                 {"thigh_amplitude", cfg.gait.thigh_amplitude},
                 {"episode_len", cfg.gait.episode_len},
                 {"eval_window", cfg.gait.eval_window},
                 {"k_phase", cfg.gait.k_phase},
                 {"k_vel", cfg.gait.k_vel},
                 {"w_phase", cfg.gait.w_phase},
                 {"w_vel", cfg.gait.w_vel},
                 {"target_velocity", cfg.gait.target_velocity}};
  doc["ppo"] = {{"num_envs", cfg.ppo.num_envs},
                {"horizon", cfg.ppo.horizon},
                {"minibatch", cfg.ppo.minibatch},
                {"epochs", cfg.ppo.epochs},
                {"gamma", cfg.ppo.gamma},
                {"gae_lambda", cfg.ppo.gae_lambda},
                {"entropy_coef", cfg.ppo.entropy_coef},
                {"learning_rate", cfg.ppo.learning_rate},
                {"clip", cfg.ppo.clip},
                {"value_coef", cfg.ppo.value_coef},
                {"total_steps", cfg.ppo.total_steps},
                {"hidden", cfg.ppo.hidden}};
  doc["iql"] = {{"temperature", cfg.iql.temperature},
                {"target_update", cfg.iql.target_update},
                {"expectile", cfg.iql.expectile},
                {"gamma", cfg.iql.gamma},
                {"learning_rate", cfg.iql.learning_rate},
                {"grad_steps", cfg.iql.grad_steps},
                {"batch_size", cfg.iql.batch_size},
                {"awr_weight_clip", cfg.iql.awr_weight_clip},
                {"awr_advantage_steps", cfg.iql.awr_advantage_steps},
                {"hidden", cfg.iql.hidden}};
  doc["pipeline"] = {{"n1", cfg.pipeline.n1},
                     {"n2", cfg.pipeline.n2},
                     {"k1", cfg.pipeline.k1},
                     {"k2", cfg.pipeline.k2},
                     {"phase1_steps", cfg.pipeline.phase1_steps},
                     {"phase2_grad_steps", cfg.pipeline.phase2_grad_steps},
                     {"phase3_steps", cfg.pipeline.phase3_steps},
                     {"seed", cfg.pipeline.seed},
                     {"skill", cfg.pipeline.skill},
                     {"mode", cfg.pipeline.mode},
                     {"all_online_baseline", cfg.pipeline.all_online_baseline}};
  doc["provider"] = {{"endpoint", cfg.provider.endpoint},
                     {"model", cfg.provider.model},
                     {"auth_env", cfg.provider.auth_env},
                     {"timeout_s", cfg.provider.timeout_s},
                     {"retries", cfg.provider.retries},
                     {"max_inflight", cfg.provider.max_inflight},
                     {"max_payload_bytes", cfg.provider.max_payload_bytes}};
  json pool = json::array();
  for (const auto& entry : cfg.mock.pool)
    pool.push_back({{"spec", json::parse(serialize(entry.spec))},
                    {"phase_jitter", entry.phase_jitter},
                    {"velocity_jitter", entry.velocity_jitter},
                    {"weight_jitter", entry.weight_jitter}});
  doc["mock"] = {{"seed", cfg.mock.seed},
                 {"sabotage_fraction", cfg.mock.sabotage_fraction},
                 {"pool", pool}};
  doc["vlm"] = {{"env_code_path", cfg.vlm.env_code_path}};
  return doc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const std::exception&) {
    parsed = value;  // plain string
  }

  json* node = &doc;
  size_t start = 0;
  for (;;) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*node)[key] = parsed;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace roesl
