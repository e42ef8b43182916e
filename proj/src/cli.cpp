#include "roesl/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "roesl/checkpoint.hpp"
#include "roesl/evalkit.hpp"
#include "roesl/flow.hpp"
#include "roesl/pipeline.hpp"

namespace roesl {

using nlohmann::json;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::optional<std::string> mode;
  std::string run_dir = ".";
};

void add_globals(CLI::App& app, GlobalArgs& g) {
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--set", g.overrides, "config override, e.g. --set ppo.gamma=0.98");
  app.add_option("--seed", g.seed, "pipeline seed override");
  app.add_option("--mode", g.mode, "mock or live")->check(CLI::IsMember({"mock", "live"}));
  app.add_option("--run-dir", g.run_dir, "root directory for run artifacts");
}

RunConfig resolve_config(const GlobalArgs& g) {
  json doc = json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw ConfigError("cannot open config file: " + g.config_path);
    try {
      doc = json::parse(in);
    } catch (const std::exception& e) {
      throw ConfigError("config file " + g.config_path + " is not valid JSON: " + e.what());
    }
  }
  for (const auto& o : g.overrides) apply_override(doc, o);
  if (g.seed) doc["pipeline"]["seed"] = *g.seed;
  if (g.mode) doc["pipeline"]["mode"] = *g.mode;
  return config_from_json(doc);
}

RewardSpec load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reward spec file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  ParseReport report = parse_reward(text.str());
  if (!report.ok())
    throw std::runtime_error("invalid reward spec in " + path + ": " + report.error_text());
  return *report.spec;
}

std::vector<int> policy_sizes(const PpoConfig& ppo) {
  std::vector<int> sizes = {kObsDim};
  sizes.insert(sizes.end(), ppo.hidden.begin(), ppo.hidden.end());
  sizes.push_back(kNumLegs);
  return sizes;
}

int cmd_select_frames(const CliOptions& opt) {
  const FrameSequence seq = load_frames(opt.input);
  const MotionScores scores = motion_scores(seq, opt.config.flow.params);
  const int k = opt.select_k > 0 ? opt.select_k : opt.config.flow.select_k;
  const SelectionResult sel = select_frames(scores, k, opt.config.flow.threshold);

  json j;
  j["frame_count"] = seq.size();
  j["target_count"] = sel.target_count;
  j["scores"] = scores.scores;
  j["indices"] = sel.indices;
  json tags = json::array();
  for (size_t i = 0; i < sel.indices.size(); ++i)
    tags.push_back(sel.is_motion(i) ? "motion" : "uniform-topup");
  j["tags"] = tags;

  if (opt.output.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(opt.output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + opt.output);
    out << j.dump(2) << "\n";
    std::cout << "selected " << sel.indices.size() << " frames -> " << opt.output << "\n";
  }
  return kExitOk;
}

int cmd_run(const CliOptions& opt) {
  const RunResult result = run_full(opt.config, opt.run_dir);
  std::cout << "run directory: " << result.run_dir.string() << "\n"
            << "selected reward: " << result.selected_spec.name << "\n"
            << "final fitness: " << result.final_fitness.fitness
            << " (phase " << result.final_fitness.phase_score << ", velocity "
            << result.final_fitness.velocity_score << ")\n"
            << "gait label: " << result.final_gait_label << "\n";
  return kExitOk;
}

int cmd_relabel(const CliOptions& opt) {
  const OfflineDataset ds = load_dataset(opt.dataset);
  const RewardSpec spec = load_spec_file(opt.spec_path);
  const OfflineDataset out = relabel_dataset(ds, spec);
  save_dataset(out, opt.output);
  std::cout << "relabeled " << out.size() << " transitions under '" << spec.name << "' -> "
            << opt.output << "\n";
  return kExitOk;
}

int cmd_train_offline(const CliOptions& opt) {
  OfflineDataset ds = load_dataset(opt.dataset);
  std::string reward_name = "dataset rewards";
  if (!opt.spec_path.empty()) {
    const RewardSpec spec = load_spec_file(opt.spec_path);
    ds = relabel_dataset(ds, spec);
    reward_name = spec.name;
  }
  const IqlResult result = train_iql(ds, opt.config.iql, opt.config.pipeline.seed);
  save_policy(opt.output, result.policy, {{"seed", opt.config.pipeline.seed}});
  save_mlp(opt.output + ".vnet", result.value, {{"seed", opt.config.pipeline.seed}});

  GaitEnvFactory factory(opt.config.gait);
  GaitEnv env = factory.make();
  const Trajectory traj = rollout(env, result.policy.as_policy(),
                                  Rng::derive(opt.config.pipeline.seed, 0xEE, 0));
  const FitnessReport fit =
      fitness(traj, skill_target(opt.config.pipeline.skill), opt.config.gait);
  std::cout << "trained offline on " << ds.size() << " transitions (" << reward_name << ")\n"
            << "checkpoint: " << opt.output << "\n"
            << "rollout fitness vs " << opt.config.pipeline.skill << ": " << fit.fitness << "\n";
  return kExitOk;
}

int cmd_finetune(const CliOptions& opt) {
  const GaussianPolicy init = load_policy(opt.ckpt, policy_sizes(opt.config.ppo));
  std::optional<Mlp> vnet;
  if (!opt.vnet.empty()) vnet = load_mlp(opt.vnet);

  RunConfig cfg = opt.config;
  if (opt.budget >= 0) cfg.pipeline.phase3_steps = opt.budget;
  const RewardSpec spec = load_spec_file(opt.spec_path);

  GaitEnvFactory factory(cfg.gait);
  const Phase3Result result =
      phase3_finetune(factory, init, vnet ? &*vnet : nullptr, spec, cfg);
  save_policy(opt.output, result.policy, {{"seed", cfg.pipeline.seed}});
  std::cout << "fine-tuned for " << cfg.pipeline.phase3_steps << " env steps\n"
            << "fitness vs " << cfg.pipeline.skill << ": " << result.fitness.fitness << "\n"
            << "checkpoint: " << opt.output << "\n";
  return kExitOk;
}

int cmd_eval(const CliOptions& opt) {
  const SkillTarget& skill = skill_target(opt.config.pipeline.skill);
  GaitEnvFactory factory(opt.config.gait);
  GaitEnv env = factory.make();

  Trajectory traj;
  std::string label;
  if (!opt.expert.empty()) {
    traj = rollout(env, ExpertPolicy(skill_target(opt.expert), opt.config.gait).as_policy(),
                   Rng::derive(opt.config.pipeline.seed, 0xEF, 0));
    label = "expert-" + opt.expert;
  } else {
    const GaussianPolicy policy = load_policy(opt.ckpt);
    traj = rollout(env, policy.as_policy(), Rng::derive(opt.config.pipeline.seed, 0xEF, 0));
    label = "policy";
  }

  const FitnessReport fit = fitness(traj, skill, opt.config.gait);
  const ContactMatrix cm = contact_matrix(traj);
  const GaitLabel gait_label = classify_gait(cm);

  const std::filesystem::path out_dir = opt.output.empty() ? "eval-out" : opt.output;
  std::filesystem::create_directories(out_dir);
  write_contacts_csv(cm, out_dir / "contacts.csv");
  const auto traces = joint_trace(traj, std::min<int>(300, traj.length()));
  write_traces_csv(traces, out_dir / "traces.csv");
  if (opt.svg) {
    write_contacts_svg(cm, out_dir / "contacts.svg");
    write_traces_svg(traces, out_dir / "traces.svg");
  }

  // DTW against all four expert rollouts (plus itself).
  std::vector<std::string> labels = {label};
  std::vector<KeypointSeq> seqs = {KeypointSeq::from_trajectory(traj, label)};
  for (const auto& s : all_skills()) {
    GaitEnv e2 = factory.make();
    const Trajectory expert =
        rollout(e2, ExpertPolicy(s, opt.config.gait).as_policy(),
                Rng::derive(opt.config.pipeline.seed, 0xEF, 1));
    labels.push_back("expert-" + s.name);
    seqs.push_back(KeypointSeq::from_trajectory(expert, labels.back()));
  }
  std::vector<std::vector<double>> matrix(seqs.size(), std::vector<double>(seqs.size(), 0.0));
  for (size_t i = 0; i < seqs.size(); ++i)
    for (size_t j = 0; j < seqs.size(); ++j)
      matrix[i][j] = i == j ? 0.0 : dtw_distance(seqs[i], seqs[j]).distance;
  write_dtw_csv(labels, matrix, out_dir / "dtw.csv");

  std::cout << "fitness vs " << skill.name << ": " << fit.fitness << " (phase "
            << fit.phase_score << ", velocity " << fit.velocity_score << ")\n"
            << "gait label: " << gait_label.name << " (confidence " << gait_label.confidence
            << ")\n"
            << "reports: " << out_dir.string() << "\n";
  return kExitOk;
}

int cmd_report(const CliOptions& opt) {
  auto read_report = [](const std::filesystem::path& dir) {
    std::ifstream in(dir / "report" / "efficiency.json");
    if (!in)
      throw std::runtime_error("no efficiency report under " + dir.string() +
                               " (expected report/efficiency.json)");
    const json j = json::parse(in);
    EfficiencyReport r;
    for (const auto& t : j.at("timings"))
      r.timings.push_back({t.at("id").get<std::string>(), t.at("phase").get<std::string>(),
                           t.at("seconds").get<double>()});
    r.phase1_total = j.at("phase1_total").get<double>();
    r.phase2_total = j.at("phase2_total").get<double>();
    r.phase3_total = j.at("phase3_total").get<double>();
    r.baseline_mode = j.value("baseline_mode", false);
    return r;
  };

  const EfficiencyReport hybrid = read_report(opt.hybrid_dir);
  const EfficiencyReport baseline = read_report(opt.baseline_dir);
  const EfficiencyReport merged = compare_efficiency(hybrid, baseline);
  const std::filesystem::path out_dir = opt.output.empty() ? "report-out" : opt.output;
  write_efficiency_report(merged, out_dir);
  std::cout << "hybrid per-candidate:   " << merged.hybrid_per_candidate << " s\n"
            << "baseline per-candidate: " << merged.baseline_per_candidate << " s\n"
            << "reduction: " << merged.reduction_pct << "%\n"
            << "report: " << out_dir.string() << "\n";
  return kExitOk;
}

}  // namespace

CliParse parse_cli(const std::vector<std::string>& args) {
  CLI::App app{"MA-ROESL: motion-aware frame selection and hybrid reward optimization"};
  app.require_subcommand(1);
  GlobalArgs globals;
  add_globals(app, globals);

  CliOptions opt;

  auto* sel = app.add_subcommand("select-frames", "score motion and pick salient frames");
  sel->add_option("--input", opt.input, "frame directory or manifest file")->required();
  sel->add_option("--k", opt.select_k, "number of frames to select");
  sel->add_option("--out", opt.output, "output JSON path (stdout if omitted)");

  app.add_subcommand("run", "execute the full three-phase pipeline");

  auto* rel = app.add_subcommand("relabel", "recompute dataset rewards under a spec");
  rel->add_option("--dataset", opt.dataset, "input dataset.jsonl")->required();
  rel->add_option("--spec", opt.spec_path, "reward spec JSON file")->required();
  rel->add_option("--out", opt.output, "output dataset path")->required();

  auto* off = app.add_subcommand("train-offline", "train an offline policy on a dataset");
  off->add_option("--dataset", opt.dataset, "input dataset.jsonl")->required();
  off->add_option("--spec", opt.spec_path, "optional reward spec to relabel with");
  off->add_option("--out", opt.output, "output checkpoint path")->required();

  auto* fin = app.add_subcommand("finetune", "fine-tune a policy checkpoint online");
  fin->add_option("--ckpt", opt.ckpt, "policy checkpoint")->required();
  fin->add_option("--vnet", opt.vnet, "value-net checkpoint to warm-start from");
  fin->add_option("--spec", opt.spec_path, "reward spec JSON file")->required();
  fin->add_option("--out", opt.output, "output checkpoint path")->required();
  fin->add_option("--budget", opt.budget, "fine-tune env steps (overrides config)");

  auto* ev = app.add_subcommand("eval", "roll out a policy and emit gait reports");
  ev->add_option("--ckpt", opt.ckpt, "policy checkpoint");
  ev->add_option("--expert", opt.expert, "use the scripted expert for this skill");
  ev->add_option("--out", opt.output, "report output directory");
  ev->add_flag("--svg", opt.svg, "also write SVG plots");

  auto* rep = app.add_subcommand("report", "compare hybrid vs baseline efficiency");
  rep->add_option("--hybrid", opt.hybrid_dir, "hybrid run directory")->required();
  rep->add_option("--baseline", opt.baseline_dir, "baseline run directory")->required();
  rep->add_option("--out", opt.output, "report output directory");

  CliParse result;
  std::vector<std::string> argv_copy = args;
  try {
    // CLI11 parses right-to-left over this vector.
    std::reverse(argv_copy.begin(), argv_copy.end());
    app.parse(argv_copy);
  } catch (const CLI::CallForHelp&) {
    result.exit_code = kExitOk;
    result.message = app.help();
    return result;
  } catch (const CLI::ParseError& e) {
    result.exit_code = kExitUsage;
    result.message = std::string(e.what()) + "\n\n" + app.help();
    return result;
  }

  try {
    opt.config = resolve_config(globals);
  } catch (const ConfigError& e) {
    result.exit_code = kExitUsage;
    result.message = e.what();
    return result;
  }
  opt.run_dir = globals.run_dir;
  opt.command = app.get_subcommands().front()->get_name();

  if (opt.command == "eval" && opt.ckpt.empty() && opt.expert.empty()) {
    result.exit_code = kExitUsage;
    result.message = "eval needs --ckpt or --expert";
    return result;
  }

  result.options = std::move(opt);
  return result;
}

int run_command(const CliOptions& opt) {
  try {
    if (opt.command == "select-frames") return cmd_select_frames(opt);
    if (opt.command == "run") return cmd_run(opt);
    if (opt.command == "relabel") return cmd_relabel(opt);
    if (opt.command == "train-offline") return cmd_train_offline(opt);
    if (opt.command == "finetune") return cmd_finetune(opt);
    if (opt.command == "eval") return cmd_eval(opt);
    if (opt.command == "report") return cmd_report(opt);
    std::cerr << "unknown command: " << opt.command << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace roesl
