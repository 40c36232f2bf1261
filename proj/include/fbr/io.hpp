#pragma once

// File formats: report/network CSV loaders, the score report text format,
// JSON helpers, experiment config parsing, and experiment output writers.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbr/hodge.hpp"
#include "fbr/mechanism.hpp"
#include "fbr/ranking.hpp"
#include "fbr/sim.hpp"

namespace fbr {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Shortest decimal that round-trips the exact double (std::to_chars).
std::string fmt(double value);

// Reports CSV: `ranker,rank_position,ranked_node`; position 1 = lowest;
// position "?" marks a neighbor the ranker declined to place. Rows for one
// ranker must be contiguous; '#' comments and blank lines are skipped.
std::vector<Report> parse_reports(std::istream& in, const std::string& source);
std::vector<Report> load_reports(const std::string& path);
void save_reports(const std::string& path, const std::vector<Report>& reports);

// Network CSV: `node_a,node_b` edges; a single-field row declares an
// isolated node.
SocialNetwork parse_network(std::istream& in, const std::string& source);
SocialNetwork load_network(const std::string& path);

// Score report: full-graph and leave-one-out scores side by side, plus the
// edge dump with residuals. Round-trips through save_scores/load_scores.
struct ScoreFileRow {
  NodeId node;
  double full = 0.0;
  double loo = 0.0;
  std::optional<double> loo_cycle_ratio;
};

struct ScoreFileResidual {
  NodeId a, b;  // canonical orientation, a < b
  double weight = 0.0;
  int count = 0;
  double residual = 0.0;
};

struct ScoreFile {
  std::size_t node_count = 0;
  std::size_t edge_count = 0;
  std::optional<double> cycle_ratio;  // full aggregation; nullopt = undefined
  std::vector<std::vector<NodeId>> components;
  std::set<NodeId> unscored;                // under leave-one-out scoring
  std::vector<ScoreFileRow> rows;           // sorted by node
  std::vector<ScoreFileResidual> residuals; // sorted by (a, b)
};

ScoreFile make_score_file(const RankingGraph& graph, const HodgeResult& full,
                          const LeaveOneOutScores& loo);
void save_scores(const std::string& path, const ScoreFile& file);
ScoreFile load_scores(const std::string& path);

// JSON files are written with sorted keys and a trailing newline.
void write_json(const std::string& path, const nlohmann::json& value);
nlohmann::json read_json(const std::string& path);

// Experiment configuration (JSON; see docs/formats.md). Structural problems
// raise ParseError and value problems ValidationError, both naming the field
// path.
ExperimentConfig load_experiment_config(const std::string& path);

// Simulation outputs.
void write_runs_csv(const std::string& path, const ExperimentResult& result,
                    const std::vector<NetworkModel>& models);
// 20 equal-width bins over the pooled theta range; counts per bin for
// friend-based vs baseline, targeted vs excluded.
void write_theta_hist_csv(const std::string& path, const ExperimentResult& result);
// 20 equal-width bins over [0, 1] counting per-run cycle ratios.
void write_cycle_hist_csv(const std::string& path, const ExperimentResult& result);
nlohmann::json experiment_summary(const ExperimentConfig& config,
                                  const ExperimentResult& result);

}  // namespace fbr
