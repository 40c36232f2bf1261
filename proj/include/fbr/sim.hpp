#pragma once

// Synthetic communities, noisy report sampling, a community-meeting baseline,
// and evaluation metrics for comparing targeting methods at desk scale.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fbr/mechanism.hpp"
#include "fbr/ranking.hpp"

namespace fbr {

// Ground truth: network, latent characteristic per node, planner threshold.
struct Community {
  SocialNetwork network;
  std::map<NodeId, double> theta;
  double theta_bar = 0.0;
};

struct NoiseModel {
  enum class Kind { kExact, kFlipConstant, kFlipLogistic };

  Kind kind = Kind::kExact;
  double flip_probability = 0.0;  // kFlipConstant, in [0, 0.5)
  double scale = 1.0;             // kFlipLogistic, > 0

  static NoiseModel exact();
  static NoiseModel flip_constant(double p);
  static NoiseModel flip_logistic(double scale);
};

// Gumbel scale for per-(ranker, subject) utility disturbances; 0 means
// error-free. Gumbel utilities give logistic inversion probabilities
// 1 / (1 + exp(gap / scale)) per pair, so kFlipLogistic uses its scale
// directly and kFlipConstant calibrates the scale so the inversion
// probability at the community's mean adjacent theta gap is approximately p.
double utility_noise_scale(const NoiseModel& noise, const Community& community);

struct NetworkModel {
  enum class Kind { kErdosRenyi, kRingLatticeRewire, kGeometric };

  Kind kind = Kind::kErdosRenyi;
  int n = 0;
  double edge_probability = 0.0;  // kErdosRenyi
  int ring_neighbors = 0;         // kRingLatticeRewire: links to each side
  double rewire_probability = 0;  // kRingLatticeRewire
  double radius = 0.0;            // kGeometric, on the unit square

  static NetworkModel erdos_renyi(int n, double p);
  static NetworkModel ring_lattice_rewire(int n, int k, double beta);
  static NetworkModel geometric(int n, double radius);

  std::string describe() const;
};

// Deterministic for a fixed (model, seed).
SocialNetwork generate_network(const NetworkModel& model, std::uint64_t seed);

// Draws theta iid normal(mean, stddev) over the network's nodes and sets
// theta_bar to the empirical quantile so a (1 - quantile) fraction lies above.
struct ThetaModel {
  double mean = 0.0;
  double stddev = 1.0;
};

Community make_community(SocialNetwork network, const ThetaModel& theta,
                         double theta_bar_quantile, std::uint64_t seed);

// Each node ranks a coverage fraction of its neighbors (rounded up), chosen
// uniformly; the rest go to the unknown set. Rankings sort noisy utilities
// theta + scale * gumbel, so each report is internally transitive.
std::vector<Report> sample_reports(const Community& community, const NoiseModel& noise,
                                   double coverage, std::uint64_t seed);

// Community-meeting baseline: one noisy global ranking of all nodes, then the
// top floor(quota * n) targeted. Scores in the outcome are the drawn
// utilities.
TargetingOutcome community_baseline(const Community& community, const NoiseModel& noise,
                                    double quota, std::uint64_t seed);

struct ThetaSummary {
  std::size_t count = 0;
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

ThetaSummary summarize_theta(const std::vector<double>& values);

struct EvalReport {
  std::size_t true_positives = 0;   // targeted, theta above threshold
  std::size_t false_positives = 0;  // targeted, theta at or below
  std::size_t false_negatives = 0;  // excluded, theta above
  std::size_t true_negatives = 0;   // excluded, theta at or below
  std::optional<ThetaSummary> targeted_theta;
  std::optional<ThetaSummary> excluded_theta;
  std::optional<double> cycle_ratio;  // of the full aggregation, when supplied
  double network_density = 0.0;
};

// Confusion counts over the scored population against theta_bar, plus theta
// summaries for targeted vs excluded. The full-graph cycle ratio is carried
// through when the caller has one.
EvalReport evaluate_targeting(const TargetingOutcome& outcome, const Community& community,
                              std::optional<double> cycle_ratio = std::nullopt);

// One experiment run per (network model, seed) pair.
struct MechanismSpec {
  MechanismConfig config = MechanismConfig::threshold(0.0);
  // Threshold mode only: fit the cutoff once on pooled leave-one-out scores
  // so this fraction of scored nodes is targeted, then hold it fixed across
  // runs. Reintroduces quota-style manipulability; flagged in summaries.
  std::optional<double> calibrate_fraction;
};

struct ExperimentConfig {
  std::vector<NetworkModel> networks;
  ThetaModel theta;
  double theta_bar_quantile = 0.5;
  NoiseModel noise;
  double coverage = 1.0;
  MechanismSpec mechanism;
  std::optional<double> baseline_quota;
  std::vector<std::uint64_t> seeds;
  int threads = 1;
};

struct RunRecord {
  int run_id = 0;
  int model_index = 0;
  std::uint64_t seed = 0;
  Community community;
  double density = 0.0;
  std::optional<double> cycle_ratio;  // full-graph aggregation
  TargetingOutcome outcome;
  EvalReport eval;
  std::optional<TargetingOutcome> baseline_outcome;
  std::optional<EvalReport> baseline_eval;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  std::optional<double> calibrated_cutoff;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Lightweight sweep emitting (density, cycle ratio) per run.
struct DensityCycleRow {
  int model_index = 0;
  std::uint64_t seed = 0;
  double density = 0.0;
  std::optional<double> cycle_ratio;
};

std::vector<DensityCycleRow> cycle_ratio_experiment(
    const std::vector<NetworkModel>& models, const ThetaModel& theta,
    const NoiseModel& noise, double coverage, const std::vector<std::uint64_t>& seeds,
    int threads = 1);

}  // namespace fbr
