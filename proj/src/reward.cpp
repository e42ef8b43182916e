#include "roesl/reward.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "roesl/util.hpp"

namespace roesl {

using nlohmann::json;

namespace {

struct KindInfo {
  TermKind kind;
  const char* name;
  std::set<std::string> params;
};

const std::vector<KindInfo>& kind_table() {
  static const std::vector<KindInfo> kinds = {
      {TermKind::kVelocityTracking, "velocity_tracking", {"target", "k"}},
      {TermKind::kPhasePair, "phase_pair", {"i", "j", "target", "k"}},
      {TermKind::kContactPattern, "contact_pattern", {"pattern"}},
      {TermKind::kHeightKeep, "height_keep", {"target", "k"}},
      {TermKind::kEnergyPenalty, "energy_penalty", {}},
      {TermKind::kActionSmoothness, "action_smoothness", {}},
  };
  return kinds;
}

const KindInfo& kind_info(TermKind kind) {
  for (const auto& k : kind_table())
    if (k.kind == kind) return k;
  throw std::logic_error("unreachable term kind");
}

class TermParser {
 public:
  TermParser(const json& term, size_t index, std::vector<ParseIssue>& errors)
      : term_(term), loc_("terms[" + std::to_string(index) + "]"), errors_(errors) {}

  std::optional<RewardTerm> parse() {
    if (!term_.is_object()) {
      add("", "term must be an object");
      return std::nullopt;
    }
    for (const auto& [key, _] : term_.items())
      if (key != "kind" && key != "params" && key != "weight")
        add("." + key, "unexpected key '" + key + "'");

    RewardTerm out;
    bool ok = parse_kind(out);
    ok &= parse_weight(out);
    if (ok) ok &= parse_params(out);
    if (ok) return out;
    return std::nullopt;
  }

 private:
  void add(const std::string& sub, const std::string& msg) {
    errors_.push_back({loc_ + sub, msg});
  }

  bool parse_kind(RewardTerm& out) {
    if (!term_.contains("kind") || !term_["kind"].is_string()) {
      add("", "missing or non-string 'kind'");
      return false;
    }
    const std::string name = term_["kind"].get<std::string>();
    auto kind = term_kind_from(name);
    if (!kind) {
      add("", "unknown term kind '" + name + "'");
      return false;
    }
    out.kind = *kind;
    return true;
  }

  bool parse_weight(RewardTerm& out) {
    if (!term_.contains("weight") || !term_["weight"].is_number()) {
      add(".weight", "weight must be a finite number");
      return false;
    }
    out.weight = term_["weight"].get<double>();
    if (!std::isfinite(out.weight)) {
      add(".weight", "weight must be a finite number");
      return false;
    }
    return true;
  }

  double require_number(const json& params, const std::string& key, bool& ok) {
    if (!params.contains(key) || !params[key].is_number()) {
      add(".params." + key, "missing or non-numeric param '" + key + "'");
      ok = false;
      return 0.0;
    }
    const double v = params[key].get<double>();
    if (!std::isfinite(v)) {
      add(".params." + key, "param '" + key + "' must be finite");
      ok = false;
      return 0.0;
    }
    return v;
  }

  int require_leg(const json& params, const std::string& key, bool& ok) {
    if (!params.contains(key) || !params[key].is_number_integer()) {
      add(".params." + key, "missing or non-integer leg index '" + key + "'");
      ok = false;
      return 0;
    }
    const long v = params[key].get<long>();
    if (v < 0 || v >= kNumLegs) {
      add(".params." + key, "leg index must be in 0..3, got " + std::to_string(v));
      ok = false;
      return 0;
    }
    return static_cast<int>(v);
  }

  bool parse_params(RewardTerm& out) {
    const auto& info = kind_info(out.kind);
    json params = json::object();
    if (term_.contains("params")) {
      if (!term_["params"].is_object()) {
        add(".params", "params must be an object");
        return false;
      }
      params = term_["params"];
    }

    bool ok = true;
    for (const auto& [key, _] : params.items())
      if (!info.params.count(key)) {
        add(".params." + key, std::string("unexpected param '") + key + "' for kind '" +
                                  info.name + "'");
        ok = false;
      }

    switch (out.kind) {
      case TermKind::kVelocityTracking:
      case TermKind::kHeightKeep:
        out.target = require_number(params, "target", ok);
        out.sharpness = require_number(params, "k", ok);
        if (ok && out.sharpness <= 0) {
          add(".params.k", "sharpness k must be > 0");
          ok = false;
        }
        break;
      case TermKind::kPhasePair:
        out.leg_i = require_leg(params, "i", ok);
        out.leg_j = require_leg(params, "j", ok);
        out.target = require_number(params, "target", ok);
        out.sharpness = require_number(params, "k", ok);
        if (ok && (out.target < 0.0 || out.target >= 1.0)) {
          add(".params.target", "phase offset target must be in [0,1)");
          ok = false;
        }
        if (ok && out.sharpness <= 0) {
          add(".params.k", "sharpness k must be > 0");
          ok = false;
        }
        break;
      case TermKind::kContactPattern: {
        if (!params.contains("pattern") || !params["pattern"].is_array() ||
            params["pattern"].size() != kNumLegs) {
          add(".params.pattern", "pattern must be an array of 4 booleans");
          ok = false;
          break;
        }
        for (int i = 0; i < kNumLegs; ++i) {
          const json& v = params["pattern"][i];
          if (v.is_boolean())
            out.pattern[i] = v.get<bool>();
          else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1))
            out.pattern[i] = v.get<int>() == 1;
          else {
            add(".params.pattern", "pattern entries must be booleans or 0/1");
            ok = false;
            break;
          }
        }
        break;
      }
      case TermKind::kEnergyPenalty:
      case TermKind::kActionSmoothness:
        break;
    }
    return ok;
  }

  const json& term_;
  std::string loc_;
  std::vector<ParseIssue>& errors_;
};

}  // namespace

const char* term_kind_name(TermKind kind) { return kind_info(kind).name; }

std::optional<TermKind> term_kind_from(const std::string& name) {
  for (const auto& k : kind_table())
    if (name == k.name) return k.kind;
  return std::nullopt;
}

std::string ParseReport::error_text() const {
  std::string out;
  for (size_t i = 0; i < errors.size(); ++i) {
    if (i) out += "; ";
    out += errors[i].str();
  }
  return out;
}

ParseReport parse_reward(const std::string& text) {
  ParseReport report;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const std::exception& e) {
    report.errors.push_back({"document", std::string("syntax error: ") + e.what()});
    return report;
  }

  if (!doc.is_object()) {
    report.errors.push_back({"document", "candidate document must be a JSON object"});
    return report;
  }
  for (const auto& [key, _] : doc.items())
    if (key != "name" && key != "terms")
      report.errors.push_back({key, "unexpected key '" + key + "'"});

  RewardSpec spec;
  if (!doc.contains("name") || !doc["name"].is_string())
    report.errors.push_back({"name", "missing or non-string 'name'"});
  else
    spec.name = doc["name"].get<std::string>();

  if (!doc.contains("terms") || !doc["terms"].is_array() || doc["terms"].empty()) {
    report.errors.push_back({"terms", "'terms' must be a non-empty array"});
    return report;
  }

  for (size_t i = 0; i < doc["terms"].size(); ++i) {
    TermParser parser(doc["terms"][i], i, report.errors);
    if (auto term = parser.parse()) spec.terms.push_back(*term);
  }

  if (report.errors.empty()) report.spec = std::move(spec);
  return report;
}

std::string serialize(const RewardSpec& spec) {
  json terms = json::array();
  for (const auto& t : spec.terms) {
    json params = json::object();
    switch (t.kind) {
      case TermKind::kVelocityTracking:
      case TermKind::kHeightKeep:
        params["target"] = t.target;
        params["k"] = t.sharpness;
        break;
      case TermKind::kPhasePair:
        params["i"] = t.leg_i;
        params["j"] = t.leg_j;
        params["target"] = t.target;
        params["k"] = t.sharpness;
        break;
      case TermKind::kContactPattern: {
        json pat = json::array();
        for (bool b : t.pattern) pat.push_back(b);
        params["pattern"] = pat;
        break;
      }
      case TermKind::kEnergyPenalty:
      case TermKind::kActionSmoothness:
        break;
    }
    terms.push_back({{"kind", term_kind_name(t.kind)}, {"params", params}, {"weight", t.weight}});
  }
  return json{{"name", spec.name}, {"terms", terms}}.dump(2);
}

RewardContext context_from(const Obs& next_obs, const Action& action, const Action& prev_action) {
  constexpr double kTau = 2.0 * std::numbers::pi;
  RewardContext ctx;
  for (int i = 0; i < kNumLegs; ++i) {
    ctx.phase[i] = wrap01(std::atan2(next_obs[i], next_obs[kNumLegs + i]) / kTau);
    ctx.contact[i] = next_obs[2 * kNumLegs + i] > 0.5;
  }
  ctx.velocity = next_obs[12];
  ctx.height = next_obs[13];
  ctx.action = action;
  ctx.prev_action = prev_action;
  return ctx;
}

double eval_reward(const RewardSpec& spec, const RewardContext& ctx) {
  double r = 0.0;
  for (const auto& t : spec.terms) {
    double value = 0.0;
    switch (t.kind) {
      case TermKind::kVelocityTracking: {
        const double d = ctx.velocity - t.target;
        value = std::exp(-t.sharpness * d * d);
        break;
      }
      case TermKind::kPhasePair: {
        const double d = circ_dist(wrap01(ctx.phase[t.leg_i] - ctx.phase[t.leg_j]), t.target);
        value = std::exp(-t.sharpness * d * d);
        break;
      }
      case TermKind::kContactPattern: {
        int matches = 0;
        for (int i = 0; i < kNumLegs; ++i)
          if (ctx.contact[i] == t.pattern[i]) ++matches;
        value = matches / static_cast<double>(kNumLegs);
        break;
      }
      case TermKind::kHeightKeep: {
        const double d = ctx.height - t.target;
        value = std::exp(-t.sharpness * d * d);
        break;
      }
      case TermKind::kEnergyPenalty: {
        double s = 0.0;
        for (double a : ctx.action) s += a * a;
        value = -s;
        break;
      }
      case TermKind::kActionSmoothness: {
        double s = 0.0;
        for (int i = 0; i < kNumLegs; ++i) {
          const double d = ctx.action[i] - ctx.prev_action[i];
          s += d * d;
        }
        value = -s;
        break;
      }
    }
    r += t.weight * value;
  }
  return r;
}

double eval_reward(const RewardSpec& spec, const Transition& t) {
  return eval_reward(spec, context_from(t.next_obs, t.action, t.prev_action));
}

RewardSpec aligned_spec(const SkillTarget& skill) {
  RewardSpec spec;
  spec.name = "aligned-" + skill.name;
  static constexpr std::array<std::pair<int, int>, 6> kPairs = {
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
  for (const auto& [i, j] : kPairs) {
    RewardTerm t;
    t.kind = TermKind::kPhasePair;
    t.leg_i = i;
    t.leg_j = j;
    t.target = wrap01(skill.offsets[i] - skill.offsets[j]);
    t.sharpness = 40.0;
    t.weight = 0.7 / kPairs.size();
    spec.terms.push_back(t);
  }
  RewardTerm v;
  v.kind = TermKind::kVelocityTracking;
  v.target = skill.velocity;
  v.sharpness = 4.0;
  v.weight = 0.3;
  spec.terms.push_back(v);
  return spec;
}

}  // namespace roesl
