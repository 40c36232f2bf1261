// fbr: score, target, audit, and simulate friend-based rank targeting.
//
// Exit codes: 0 success; 1 invariant breach or unexpected failure; 2 usage;
// 3 parse error; 4 validation error; 5 solver failure; 6 I/O error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fbr/errors.hpp"
#include "fbr/hodge.hpp"
#include "fbr/io.hpp"
#include "fbr/mechanism.hpp"
#include "fbr/ranking.hpp"
#include "fbr/sim.hpp"

namespace {

using nlohmann::json;

struct ScoreArgs {
  std::string reports;
  std::string network;
  std::string out = ".";
  std::string method = "auto";
  double tolerance = 1e-10;
  int threads = 1;
};

struct TargetArgs {
  std::string scores;
  std::string reports;
  std::string network;
  std::string out = ".";
  double cutoff = 0.0;
  double alpha = 0.0;
  bool has_cutoff = false;
  bool has_alpha = false;
  std::string tie_policy = "include_all";
  std::uint64_t seed = 0;
  int threads = 1;
};

struct AuditArgs {
  std::string reports;
  std::string network;
  std::string alternative;
  std::string out = ".";
  std::optional<std::int64_t> deviator;
  std::vector<std::int64_t> coalition;
  double cutoff = 0.0;
  double alpha = 0.0;
  bool has_cutoff = false;
  bool has_alpha = false;
  std::string tie_policy = "include_all";
  std::uint64_t seed = 0;
  int threads = 1;
};

struct SimulateArgs {
  std::string config;
  std::string out = ".";
  int threads = 0;  // 0 = honor the config file
};

std::string out_path(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw fbr::IoError("cannot create output directory " + dir + ": " + ec.message());
  return (fs::path(dir) / name).string();
}

fbr::SolveOptions solve_options(const std::string& method, double tolerance) {
  fbr::SolveOptions options;
  options.tolerance = tolerance;
  if (method == "direct")
    options.method = fbr::SolveMethod::kDirect;
  else if (method == "cg")
    options.method = fbr::SolveMethod::kConjugateGradient;
  return options;
}

fbr::TiePolicy tie_policy_from_name(const std::string& name) {
  if (name == "include_all") return fbr::TiePolicy::kIncludeAllTies;
  if (name == "exclude_all") return fbr::TiePolicy::kExcludeAllTies;
  if (name == "seeded_random") return fbr::TiePolicy::kSeededUniformRandom;
  throw fbr::UsageError("unknown tie policy '" + name +
                        "' (expected include_all, exclude_all, or seeded_random)");
}

std::string tie_policy_name(fbr::TiePolicy policy) {
  switch (policy) {
    case fbr::TiePolicy::kIncludeAllTies: return "include_all";
    case fbr::TiePolicy::kExcludeAllTies: return "exclude_all";
    case fbr::TiePolicy::kSeededUniformRandom: return "seeded_random";
  }
  return "include_all";
}

fbr::MechanismConfig mechanism_from_flags(bool has_cutoff, double cutoff, bool has_alpha,
                                          double alpha, const std::string& tie_policy,
                                          std::uint64_t seed) {
  if (has_cutoff == has_alpha)
    throw fbr::UsageError("choose exactly one of --cutoff (threshold) and --alpha (quota)");
  if (has_cutoff) return fbr::MechanismConfig::threshold(cutoff);
  return fbr::MechanismConfig::quota(alpha, tie_policy_from_name(tie_policy), seed);
}

json mechanism_json(const fbr::MechanismConfig& config) {
  json j;
  if (config.mode == fbr::MechanismConfig::Mode::kThreshold) {
    j["mode"] = "threshold";
    j["cutoff"] = config.cutoff;
  } else {
    j["mode"] = "quota";
    j["alpha"] = config.alpha;
    j["tie_policy"] = tie_policy_name(config.tie_policy);
    j["seed"] = config.seed;
  }
  return j;
}

json node_list(const std::set<fbr::NodeId>& nodes) {
  json list = json::array();
  for (const fbr::NodeId node : nodes) list.push_back(node.value);
  return list;
}

json score_map(const fbr::ScoreVector& scores) {
  json map = json::object();
  for (const auto& [node, score] : scores) map[fbr::to_string(node)] = score;
  return map;
}

void write_manifest(const std::string& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs,
                    std::vector<std::string> outputs) {
  const std::string path = out_path(dir, "manifest.json");
  outputs.push_back(path);
  json manifest;
  manifest["artifact_version"] = fbr::kArtifactVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  fbr::write_json(path, manifest);
}

int cmd_score(const ScoreArgs& args) {
  const std::vector<fbr::Report> reports = fbr::load_reports(args.reports);
  const fbr::SocialNetwork network =
      args.network.empty() ? fbr::infer_network(reports) : fbr::load_network(args.network);

  const fbr::SolveOptions options = solve_options(args.method, args.tolerance);
  const fbr::RankingGraph graph = fbr::build_ranking_graph(reports, network);
  const fbr::HodgeResult full = fbr::solve_scores(graph, options);
  const fbr::LeaveOneOutScores loo =
      fbr::leave_one_out_scores(reports, network, options, args.threads);

  const fbr::ScoreFile file = fbr::make_score_file(graph, full, loo);
  const std::string scores_path = out_path(args.out, "scores.txt");
  fbr::save_scores(scores_path, file);

  json config;
  config["method"] = args.method;
  config["tolerance"] = args.tolerance;
  config["threads"] = args.threads;
  std::vector<std::string> inputs{args.reports};
  if (!args.network.empty()) inputs.push_back(args.network);
  write_manifest(args.out, "score", config, inputs, {scores_path});

  std::cout << "cycle_ratio "
            << (full.cycle_ratio ? fbr::fmt(*full.cycle_ratio) : std::string("undefined"))
            << '\n';
  for (const fbr::ScoreFileRow& row : file.rows) {
    if (file.unscored.contains(row.node)) continue;
    std::cout << "node " << fbr::to_string(row.node) << " full " << fbr::fmt(row.full)
              << " loo " << fbr::fmt(row.loo) << '\n';
  }
  if (!file.unscored.empty()) {
    std::cout << "unscored";
    for (const fbr::NodeId node : file.unscored) std::cout << ' ' << fbr::to_string(node);
    std::cout << '\n';
  }
  return 0;
}

int cmd_target(const TargetArgs& args) {
  const fbr::MechanismConfig config = mechanism_from_flags(
      args.has_cutoff, args.cutoff, args.has_alpha, args.alpha, args.tie_policy, args.seed);

  fbr::ScoreVector scores;
  std::set<fbr::NodeId> unscored;
  std::map<fbr::NodeId, std::optional<double>> per_node_ratio;
  std::vector<std::string> inputs;

  if (!args.scores.empty()) {
    const fbr::ScoreFile file = fbr::load_scores(args.scores);
    for (const fbr::ScoreFileRow& row : file.rows) {
      scores[row.node] = row.loo;
      per_node_ratio[row.node] = row.loo_cycle_ratio;
    }
    unscored = file.unscored;
    inputs.push_back(args.scores);
  } else {
    if (args.reports.empty())
      throw fbr::UsageError("target needs either --scores or --reports");
    const std::vector<fbr::Report> reports = fbr::load_reports(args.reports);
    const fbr::SocialNetwork network =
        args.network.empty() ? fbr::infer_network(reports) : fbr::load_network(args.network);
    const fbr::LeaveOneOutScores loo =
        fbr::leave_one_out_scores(reports, network, {}, args.threads);
    scores = loo.scores;
    unscored = loo.unscored;
    per_node_ratio = loo.cycle_ratio;
    inputs.push_back(args.reports);
    if (!args.network.empty()) inputs.push_back(args.network);
  }

  fbr::TargetingOutcome outcome =
      config.mode == fbr::MechanismConfig::Mode::kThreshold
          ? fbr::target_threshold(scores, config.cutoff, unscored)
          : fbr::target_quota(scores, config.alpha, config.tie_policy, config.seed, unscored);
  outcome.per_node_cycle_ratio = per_node_ratio;

  json targets;
  targets["mechanism"] = mechanism_json(config);
  targets["targeted"] = node_list(outcome.targeted);
  targets["unscored"] = node_list(outcome.unscored);
  targets["scores"] = score_map(outcome.scores);
  json ratios = json::object();
  for (const auto& [node, ratio] : outcome.per_node_cycle_ratio)
    ratios[fbr::to_string(node)] = ratio ? json(*ratio) : json(nullptr);
  targets["per_node_cycle_ratio"] = ratios;

  const std::string targets_path = out_path(args.out, "targets.json");
  fbr::write_json(targets_path, targets);
  write_manifest(args.out, "target", mechanism_json(config), inputs, {targets_path});

  std::cout << "targeted";
  for (const fbr::NodeId node : outcome.targeted) std::cout << ' ' << fbr::to_string(node);
  std::cout << '\n';
  return 0;
}

json delta_json(fbr::NodeId node, const fbr::MembershipDelta& delta) {
  json j;
  j["node"] = node.value;
  j["before"] = delta.before;
  j["after"] = delta.after;
  return j;
}

int cmd_audit(const AuditArgs& args) {
  const fbr::MechanismConfig config = mechanism_from_flags(
      args.has_cutoff, args.cutoff, args.has_alpha, args.alpha, args.tie_policy, args.seed);
  if (args.deviator.has_value() == !args.coalition.empty())
    throw fbr::UsageError("choose exactly one of --deviator and --coalition");

  const std::vector<fbr::Report> reports = fbr::load_reports(args.reports);
  const fbr::SocialNetwork network = fbr::load_network(args.network);
  const std::vector<fbr::Report> alternatives = fbr::load_reports(args.alternative);

  json audit;
  audit["mechanism"] = mechanism_json(config);
  bool breach = false;

  if (args.deviator) {
    if (alternatives.size() != 1)
      throw fbr::UsageError("unilateral audit needs exactly one alternative report");
    const fbr::NodeId deviator{*args.deviator};
    const fbr::UnilateralAudit result = fbr::audit_unilateral(
        reports, network, config, deviator, alternatives.front(), {}, args.threads);

    audit["kind"] = "unilateral";
    audit["deviator"] = delta_json(deviator, result.deviator);
    audit["deviator_changed"] = result.deviator_changed;
    json others = json::array();
    for (const auto& [node, delta] : result.changed_others)
      others.push_back(delta_json(node, delta));
    audit["changed_others"] = others;
    audit["scores_before"] = score_map(result.original.scores);
    audit["scores_after"] = score_map(result.deviated.scores);
    audit["targeted_before"] = node_list(result.original.targeted);
    audit["targeted_after"] = node_list(result.deviated.targeted);

    breach = config.mode == fbr::MechanismConfig::Mode::kThreshold && result.deviator_changed;
    std::cout << "deviator " << fbr::to_string(deviator) << " changed "
              << (result.deviator_changed ? "true" : "false") << '\n';
    std::cout << "changed_others " << result.changed_others.size() << '\n';
  } else {
    std::set<fbr::NodeId> coalition;
    for (const std::int64_t id : args.coalition) coalition.insert(fbr::NodeId{id});
    const fbr::CoalitionAudit result = fbr::audit_coalition(reports, network, config,
                                                            coalition, alternatives, {},
                                                            args.threads);
    audit["kind"] = "coalition";
    json members = json::array();
    for (const auto& [node, delta] : result.members)
      members.push_back(delta_json(node, delta));
    audit["members"] = members;
    json others = json::array();
    for (const auto& [node, delta] : result.changed_others)
      others.push_back(delta_json(node, delta));
    audit["changed_others"] = others;
    audit["scores_before"] = score_map(result.original.scores);
    audit["scores_after"] = score_map(result.deviated.scores);
    audit["targeted_before"] = node_list(result.original.targeted);
    audit["targeted_after"] = node_list(result.deviated.targeted);

    for (const auto& [node, delta] : result.members)
      std::cout << "member " << fbr::to_string(node) << (delta.changed() ? " changed" : " unchanged")
                << '\n';
    std::cout << "changed_others " << result.changed_others.size() << '\n';
  }

  const std::string audit_path = out_path(args.out, "audit.json");
  fbr::write_json(audit_path, audit);

  json config_echo = mechanism_json(config);
  config_echo["alternative"] = args.alternative;
  if (args.deviator) config_echo["deviator"] = *args.deviator;
  write_manifest(args.out, "audit", config_echo, {args.reports, args.network, args.alternative},
                 {audit_path});

  if (breach) {
    std::cerr << "invariant breach: threshold-mode deviation changed the deviator's own "
                 "membership\n";
    return 1;
  }
  return 0;
}

int cmd_simulate(const SimulateArgs& args) {
  fbr::ExperimentConfig config = fbr::load_experiment_config(args.config);
  if (args.threads > 0) config.threads = args.threads;

  const fbr::ExperimentResult result = fbr::run_experiment(config);

  const std::string runs_path = out_path(args.out, "runs.csv");
  const std::string theta_path = out_path(args.out, "theta_hist.csv");
  const std::string cycle_path = out_path(args.out, "cycle_hist.csv");
  const std::string summary_path = out_path(args.out, "summary.json");
  fbr::write_runs_csv(runs_path, result, config.networks);
  fbr::write_theta_hist_csv(theta_path, result);
  fbr::write_cycle_hist_csv(cycle_path, result);
  fbr::write_json(summary_path, fbr::experiment_summary(config, result));

  json config_echo;
  config_echo["config_file"] = args.config;
  config_echo["threads"] = config.threads;
  write_manifest(args.out, "simulate", config_echo, {args.config},
                 {runs_path, theta_path, cycle_path, summary_path});

  std::cout << "runs " << result.runs.size() << '\n';
  if (result.calibrated_cutoff)
    std::cout << "calibrated_cutoff " << fbr::fmt(*result.calibrated_cutoff) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"friend-based rank aggregation and targeting toolkit"};
  app.require_subcommand(1);

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "aggregate reports and solve for scores");
  score->add_option("--reports", score_args.reports, "reports CSV")->required();
  score->add_option("--network", score_args.network,
                    "network CSV (inferred from reports when omitted)");
  score->add_option("--out", score_args.out, "output directory");
  score->add_option("--method", score_args.method, "solver: auto, direct, or cg")
      ->check(CLI::IsMember({"auto", "direct", "cg"}));
  score->add_option("--tolerance", score_args.tolerance, "iterative solver tolerance");
  score->add_option("--threads", score_args.threads, "leave-one-out solve threads");

  TargetArgs target_args;
  CLI::App* target = app.add_subcommand("target", "select the targeted set from scores");
  auto* scores_opt = target->add_option("--scores", target_args.scores,
                                        "score file written by `score`");
  auto* treports_opt = target->add_option("--reports", target_args.reports, "reports CSV");
  auto* tnetwork_opt = target->add_option("--network", target_args.network, "network CSV");
  scores_opt->excludes(treports_opt)->excludes(tnetwork_opt);
  target->add_option("--out", target_args.out, "output directory");
  auto* cutoff_opt = target->add_option("--cutoff", target_args.cutoff,
                                        "threshold mode: absolute score cutoff");
  auto* alpha_opt = target->add_option("--alpha", target_args.alpha,
                                       "quota mode: fraction of scored nodes");
  cutoff_opt->excludes(alpha_opt);
  target->add_option("--tie-policy", target_args.tie_policy,
                     "quota boundary ties: include_all, exclude_all, seeded_random")
      ->check(CLI::IsMember({"include_all", "exclude_all", "seeded_random"}));
  target->add_option("--seed", target_args.seed, "seed for seeded_random tie policy");
  target->add_option("--threads", target_args.threads, "leave-one-out solve threads");

  AuditArgs audit_args;
  CLI::App* audit = app.add_subcommand("audit", "compare outcomes under deviated reports");
  audit->add_option("--reports", audit_args.reports, "reports CSV")->required();
  audit->add_option("--network", audit_args.network, "network CSV")->required();
  audit->add_option("--alternative", audit_args.alternative,
                    "alternative reports CSV (one block per deviating ranker)")
      ->required();
  auto* deviator_opt =
      audit->add_option("--deviator", audit_args.deviator, "single deviating ranker");
  auto* coalition_opt =
      audit->add_option("--coalition", audit_args.coalition, "comma-separated ranker ids")
          ->delimiter(',');
  deviator_opt->excludes(coalition_opt);
  audit->add_option("--out", audit_args.out, "output directory");
  auto* acutoff_opt = audit->add_option("--cutoff", audit_args.cutoff, "threshold cutoff");
  auto* aalpha_opt = audit->add_option("--alpha", audit_args.alpha, "quota fraction");
  acutoff_opt->excludes(aalpha_opt);
  audit->add_option("--tie-policy", audit_args.tie_policy, "quota tie policy")
      ->check(CLI::IsMember({"include_all", "exclude_all", "seeded_random"}));
  audit->add_option("--seed", audit_args.seed, "seed for seeded_random tie policy");
  audit->add_option("--threads", audit_args.threads, "leave-one-out solve threads");

  SimulateArgs sim_args;
  CLI::App* simulate = app.add_subcommand("simulate", "run a synthetic-community experiment");
  simulate->add_option("--config", sim_args.config, "experiment config JSON")->required();
  simulate->add_option("--out", sim_args.out, "output directory");
  simulate->add_option("--threads", sim_args.threads, "override config thread count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  target_args.has_cutoff = cutoff_opt->count() > 0;
  target_args.has_alpha = alpha_opt->count() > 0;
  audit_args.has_cutoff = acutoff_opt->count() > 0;
  audit_args.has_alpha = aalpha_opt->count() > 0;

  try {
    if (score->parsed()) return cmd_score(score_args);
    if (target->parsed()) return cmd_target(target_args);
    if (audit->parsed()) return cmd_audit(audit_args);
    if (simulate->parsed()) return cmd_simulate(sim_args);
    throw fbr::UsageError("no subcommand given");
  } catch (const fbr::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const fbr::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const fbr::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 4;
  } catch (const fbr::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return 5;
  } catch (const fbr::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
