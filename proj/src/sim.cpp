#include "fbr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

#include "fbr/errors.hpp"
#include "fbr/hodge.hpp"
#include "fbr/parallel.hpp"
#include "fbr/rng.hpp"

namespace fbr {

namespace {

// Substream tags so one run seed feeds independent draws.
constexpr std::uint64_t kStreamNetwork = 1;
constexpr std::uint64_t kStreamTheta = 2;
constexpr std::uint64_t kStreamReports = 3;
constexpr std::uint64_t kStreamBaseline = 4;

// Interpolated quantile (linear between closest ranks) over sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

std::vector<NodeId> make_nodes(int n) {
  std::vector<NodeId> nodes;
  nodes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nodes.push_back(NodeId{i});
  return nodes;
}

}  // namespace

NoiseModel NoiseModel::exact() { return NoiseModel{}; }

NoiseModel NoiseModel::flip_constant(double p) {
  if (!(p >= 0.0 && p < 0.5))
    throw ValidationError("flip_constant: probability must be in [0, 0.5)");
  NoiseModel noise;
  noise.kind = Kind::kFlipConstant;
  noise.flip_probability = p;
  return noise;
}

NoiseModel NoiseModel::flip_logistic(double scale) {
  if (!(scale > 0.0)) throw ValidationError("flip_logistic: scale must be positive");
  NoiseModel noise;
  noise.kind = Kind::kFlipLogistic;
  noise.scale = scale;
  return noise;
}

double utility_noise_scale(const NoiseModel& noise, const Community& community) {
  switch (noise.kind) {
    case NoiseModel::Kind::kExact:
      return 0.0;
    case NoiseModel::Kind::kFlipLogistic:
      return noise.scale;
    case NoiseModel::Kind::kFlipConstant: {
      const double p = noise.flip_probability;
      if (p == 0.0) return 0.0;
      // Mean gap between adjacent sorted thetas; a pair at that gap inverts
      // with probability 1 / (1 + exp(gap / scale)) = p.
      std::vector<double> sorted;
      sorted.reserve(community.theta.size());
      for (const auto& [id, value] : community.theta) sorted.push_back(value);
      std::sort(sorted.begin(), sorted.end());
      if (sorted.size() < 2) return 0.0;
      const double span = sorted.back() - sorted.front();
      const double mean_gap = span / static_cast<double>(sorted.size() - 1);
      if (mean_gap <= 0.0) return 0.0;  // degenerate: all thetas equal
      return mean_gap / std::log((1.0 - p) / p);
    }
  }
  return 0.0;
}

NetworkModel NetworkModel::erdos_renyi(int n, double p) {
  if (n < 2) throw ValidationError("erdos_renyi: need at least two nodes");
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("erdos_renyi: edge probability must be in [0, 1]");
  NetworkModel model;
  model.kind = Kind::kErdosRenyi;
  model.n = n;
  model.edge_probability = p;
  return model;
}

NetworkModel NetworkModel::ring_lattice_rewire(int n, int k, double beta) {
  if (n < 3) throw ValidationError("ring_lattice_rewire: need at least three nodes");
  if (k < 1 || 2 * k >= n)
    throw ValidationError("ring_lattice_rewire: neighbors per side must satisfy 1 <= k and 2k < n");
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ValidationError("ring_lattice_rewire: rewire probability must be in [0, 1]");
  NetworkModel model;
  model.kind = Kind::kRingLatticeRewire;
  model.n = n;
  model.ring_neighbors = k;
  model.rewire_probability = beta;
  return model;
}

NetworkModel NetworkModel::geometric(int n, double radius) {
  if (n < 2) throw ValidationError("geometric: need at least two nodes");
  if (!(radius > 0.0)) throw ValidationError("geometric: radius must be positive");
  NetworkModel model;
  model.kind = Kind::kGeometric;
  model.n = n;
  model.radius = radius;
  return model;
}

std::string NetworkModel::describe() const {
  char buf[96];
  switch (kind) {
    case Kind::kErdosRenyi:
      std::snprintf(buf, sizeof buf, "erdos_renyi(n=%d,p=%g)", n, edge_probability);
      break;
    case Kind::kRingLatticeRewire:
      std::snprintf(buf, sizeof buf, "ring(n=%d,k=%d,beta=%g)", n, ring_neighbors,
                    rewire_probability);
      break;
    case Kind::kGeometric:
      std::snprintf(buf, sizeof buf, "geometric(n=%d,r=%g)", n, radius);
      break;
  }
  return buf;
}

SocialNetwork generate_network(const NetworkModel& model, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<NodeId> nodes = make_nodes(model.n);
  std::set<std::pair<NodeId, NodeId>> edges;

  switch (model.kind) {
    case NetworkModel::Kind::kErdosRenyi: {
      for (int i = 0; i < model.n; ++i)
        for (int j = i + 1; j < model.n; ++j)
          if (rng.uniform01() < model.edge_probability)
            edges.insert({NodeId{i}, NodeId{j}});
      break;
    }
    case NetworkModel::Kind::kRingLatticeRewire: {
      for (int d = 1; d <= model.ring_neighbors; ++d)
        for (int i = 0; i < model.n; ++i) {
          const int j = (i + d) % model.n;
          edges.insert(make_edge_key(NodeId{i}, NodeId{j}));
        }
      // Watts-Strogatz pass: per original lattice edge, with probability beta
      // re-point the far end at a uniform node, retrying on self-loops and
      // duplicates; keep the original edge if no slot is found.
      for (int d = 1; d <= model.ring_neighbors; ++d)
        for (int i = 0; i < model.n; ++i) {
          if (!(rng.uniform01() < model.rewire_probability)) continue;
          const int j = (i + d) % model.n;
          const auto old_key = make_edge_key(NodeId{i}, NodeId{j});
          for (int attempt = 0; attempt < 100; ++attempt) {
            const int w = static_cast<int>(rng.below(static_cast<std::uint64_t>(model.n)));
            if (w == i) continue;
            const auto new_key = make_edge_key(NodeId{i}, NodeId{w});
            if (edges.contains(new_key)) continue;
            edges.erase(old_key);
            edges.insert(new_key);
            break;
          }
        }
      break;
    }
    case NetworkModel::Kind::kGeometric: {
      std::vector<std::pair<double, double>> pos;
      pos.reserve(static_cast<std::size_t>(model.n));
      for (int i = 0; i < model.n; ++i) {
        const double x = rng.uniform01();
        const double y = rng.uniform01();
        pos.emplace_back(x, y);
      }
      const double r2 = model.radius * model.radius;
      for (int i = 0; i < model.n; ++i)
        for (int j = i + 1; j < model.n; ++j) {
          const double dx = pos[i].first - pos[j].first;
          const double dy = pos[i].second - pos[j].second;
          if (dx * dx + dy * dy <= r2) edges.insert({NodeId{i}, NodeId{j}});
        }
      break;
    }
  }

  std::vector<std::pair<NodeId, NodeId>> edge_list(edges.begin(), edges.end());
  return SocialNetwork(nodes, edge_list);
}

Community make_community(SocialNetwork network, const ThetaModel& theta,
                         double theta_bar_quantile, std::uint64_t seed) {
  if (!(theta.stddev >= 0.0))
    throw ValidationError("make_community: theta stddev must be nonnegative");
  if (!(theta_bar_quantile > 0.0 && theta_bar_quantile < 1.0))
    throw ValidationError("make_community: threshold quantile must be in (0, 1)");

  Rng rng(seed);
  Community community;
  community.network = std::move(network);
  std::vector<double> values;
  for (const NodeId id : community.network.nodes()) {
    const double value = theta.mean + theta.stddev * rng.normal();
    community.theta[id] = value;
    values.push_back(value);
  }
  // theta_bar is the k-th smallest draw, k = max(1, floor(q * n)): roughly a
  // (1 - q) fraction of the community lies strictly above it.
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(theta_bar_quantile * static_cast<double>(n)));
  community.theta_bar = values[k - 1];
  return community;
}

std::vector<Report> sample_reports(const Community& community, const NoiseModel& noise,
                                   double coverage, std::uint64_t seed) {
  if (!(coverage > 0.0 && coverage <= 1.0))
    throw ValidationError("sample_reports: coverage must be in (0, 1]");
  const double scale = utility_noise_scale(noise, community);

  std::vector<Report> reports;
  for (const NodeId ranker : community.network.nodes()) {
    std::vector<NodeId> neighbors = community.network.neighbors(ranker);
    if (neighbors.empty()) continue;  // nothing to rank

    // Per-ranker substream: reports do not depend on processing order.
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(ranker.value)));

    const auto deg = neighbors.size();
    const auto m = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(deg),
                         std::ceil(coverage * static_cast<double>(deg))));
    // Partial Fisher-Yates: first m entries are a uniform subset.
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(deg - i));
      std::swap(neighbors[i], neighbors[j]);
    }
    std::vector<NodeId> chosen(neighbors.begin(),
                               neighbors.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(chosen.begin(), chosen.end());

    // One gumbel per subject even when scale is zero, so every noise model
    // consumes the same stream and flip_constant(0) matches exact bit-for-bit.
    std::vector<std::pair<double, NodeId>> utilities;
    utilities.reserve(chosen.size());
    for (const NodeId subject : chosen) {
      const double g = rng.gumbel();
      utilities.emplace_back(community.theta.at(subject) + scale * g, subject);
    }
    std::sort(utilities.begin(), utilities.end(),
              [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return a.second < b.second;
              });

    Report report;
    report.ranker = ranker;
    for (const auto& [u, subject] : utilities) report.ranking.push_back(subject);
    for (std::size_t i = m; i < neighbors.size(); ++i)
      report.unknown.insert(neighbors[i]);
    reports.push_back(std::move(report));
  }
  return reports;
}

TargetingOutcome community_baseline(const Community& community, const NoiseModel& noise,
                                    double quota, std::uint64_t seed) {
  if (!(quota > 0.0 && quota <= 1.0))
    throw ValidationError("community_baseline: quota must be in (0, 1]");
  const double scale = utility_noise_scale(noise, community);

  Rng rng(seed);
  std::vector<std::pair<double, NodeId>> utilities;
  TargetingOutcome outcome;
  for (const NodeId id : community.network.nodes()) {
    const double u = community.theta.at(id) + scale * rng.gumbel();
    utilities.emplace_back(u, id);
    outcome.scores[id] = u;
  }
  std::sort(utilities.begin(), utilities.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const auto slots = static_cast<std::size_t>(
      quota * static_cast<double>(utilities.size()));
  for (std::size_t i = 0; i < slots && i < utilities.size(); ++i)
    outcome.targeted.insert(utilities[i].second);
  return outcome;
}

ThetaSummary summarize_theta(const std::vector<double>& values) {
  ThetaSummary summary;
  summary.count = values.size();
  if (values.empty()) return summary;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  summary.min = sorted.front();
  summary.max = sorted.back();
  summary.q25 = quantile_sorted(sorted, 0.25);
  summary.median = quantile_sorted(sorted, 0.5);
  summary.q75 = quantile_sorted(sorted, 0.75);
  return summary;
}

EvalReport evaluate_targeting(const TargetingOutcome& outcome, const Community& community,
                              std::optional<double> cycle_ratio) {
  EvalReport eval;
  std::vector<double> targeted_theta;
  std::vector<double> excluded_theta;
  for (const NodeId id : community.network.nodes()) {
    if (outcome.unscored.contains(id)) continue;
    const double theta = community.theta.at(id);
    const bool needy = theta > community.theta_bar;
    const bool targeted = outcome.targeted.contains(id);
    if (targeted) {
      targeted_theta.push_back(theta);
      ++(needy ? eval.true_positives : eval.false_positives);
    } else {
      excluded_theta.push_back(theta);
      ++(needy ? eval.false_negatives : eval.true_negatives);
    }
  }
  if (!targeted_theta.empty()) eval.targeted_theta = summarize_theta(targeted_theta);
  if (!excluded_theta.empty()) eval.excluded_theta = summarize_theta(excluded_theta);
  eval.cycle_ratio = cycle_ratio;
  eval.network_density = community.network.density();
  return eval;
}

namespace {

struct RunInputs {
  Community community;
  std::vector<Report> reports;
  LeaveOneOutScores loo;
  std::optional<double> cycle_ratio;
};

RunInputs prepare_run(const NetworkModel& model, const ThetaModel& theta,
                      double theta_bar_quantile, const NoiseModel& noise,
                      double coverage, std::uint64_t seed) {
  RunInputs inputs;
  SocialNetwork network = generate_network(model, Rng::derive(seed, kStreamNetwork));
  inputs.community = make_community(std::move(network), theta, theta_bar_quantile,
                                    Rng::derive(seed, kStreamTheta));
  inputs.reports = sample_reports(inputs.community, noise, coverage,
                                  Rng::derive(seed, kStreamReports));
  inputs.loo = leave_one_out_scores(inputs.reports, inputs.community.network);
  const HodgeResult full =
      solve_scores(build_ranking_graph(inputs.reports, inputs.community.network));
  inputs.cycle_ratio = full.cycle_ratio;
  return inputs;
}

TargetingOutcome select_from_loo(const LeaveOneOutScores& loo,
                                 const MechanismConfig& config, std::uint64_t run_seed) {
  TargetingOutcome outcome;
  if (config.mode == MechanismConfig::Mode::kThreshold) {
    outcome = target_threshold(loo.scores, config.cutoff, loo.unscored);
  } else {
    // Vary tie-break draws per run while keeping the whole sweep a pure
    // function of (config seed, run seed).
    outcome = target_quota(loo.scores, config.alpha, config.tie_policy,
                           Rng::derive(config.seed, run_seed), loo.unscored);
  }
  outcome.per_node_cycle_ratio = loo.cycle_ratio;
  return outcome;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.networks.empty())
    throw ValidationError("run_experiment: need at least one network model");
  if (config.seeds.empty())
    throw ValidationError("run_experiment: need at least one seed");
  if (config.threads < 1)
    throw ValidationError("run_experiment: thread count must be positive");
  if (config.mechanism.calibrate_fraction) {
    if (config.mechanism.config.mode != MechanismConfig::Mode::kThreshold)
      throw ValidationError("run_experiment: cutoff calibration applies to threshold mode only");
    if (!(*config.mechanism.calibrate_fraction > 0.0 && *config.mechanism.calibrate_fraction <= 1.0))
      throw ValidationError("run_experiment: calibration fraction must be in (0, 1]");
  }
  if (config.baseline_quota &&
      !(*config.baseline_quota > 0.0 && *config.baseline_quota <= 1.0))
    throw ValidationError("run_experiment: baseline quota must be in (0, 1]");

  struct RunKey {
    int model_index;
    std::uint64_t seed;
  };
  std::vector<RunKey> keys;
  for (int m = 0; m < static_cast<int>(config.networks.size()); ++m)
    for (const std::uint64_t seed : config.seeds) keys.push_back({m, seed});

  std::vector<RunInputs> inputs(keys.size());
  parallel_for_index(keys.size(), config.threads, [&](std::size_t i) {
    inputs[i] = prepare_run(config.networks[static_cast<std::size_t>(keys[i].model_index)],
                            config.theta, config.theta_bar_quantile, config.noise,
                            config.coverage, keys[i].seed);
  });

  ExperimentResult result;
  MechanismConfig mech = config.mechanism.config;
  if (config.mechanism.calibrate_fraction) {
    // Fit one global cutoff on pooled leave-one-out scores so that roughly
    // the requested fraction of scored nodes clears it, then reuse it in
    // every run (a planner-style fixed threshold).
    std::vector<double> pooled;
    for (const RunInputs& in : inputs)
      for (const auto& [id, score] : in.loo.scores)
        if (!in.loo.unscored.contains(id)) pooled.push_back(score);
    std::sort(pooled.begin(), pooled.end());
    mech.cutoff = quantile_sorted(pooled, 1.0 - *config.mechanism.calibrate_fraction);
    result.calibrated_cutoff = mech.cutoff;
  }

  result.runs.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    RunRecord record;
    record.run_id = static_cast<int>(i);
    record.model_index = keys[i].model_index;
    record.seed = keys[i].seed;
    record.community = std::move(inputs[i].community);
    record.density = record.community.network.density();
    record.cycle_ratio = inputs[i].cycle_ratio;
    record.outcome = select_from_loo(inputs[i].loo, mech, keys[i].seed);
    record.eval = evaluate_targeting(record.outcome, record.community, record.cycle_ratio);
    if (config.baseline_quota) {
      record.baseline_outcome =
          community_baseline(record.community, config.noise, *config.baseline_quota,
                             Rng::derive(keys[i].seed, kStreamBaseline));
      record.baseline_eval =
          evaluate_targeting(*record.baseline_outcome, record.community, std::nullopt);
    }
    result.runs.push_back(std::move(record));
  }
  return result;
}

std::vector<DensityCycleRow> cycle_ratio_experiment(
    const std::vector<NetworkModel>& models, const ThetaModel& theta,
    const NoiseModel& noise, double coverage, const std::vector<std::uint64_t>& seeds,
    int threads) {
  if (models.empty())
    throw ValidationError("cycle_ratio_experiment: need at least one network model");
  if (seeds.empty()) throw ValidationError("cycle_ratio_experiment: need at least one seed");

  std::vector<DensityCycleRow> rows;
  for (int m = 0; m < static_cast<int>(models.size()); ++m)
    for (const std::uint64_t seed : seeds) {
      DensityCycleRow row;
      row.model_index = m;
      row.seed = seed;
      rows.push_back(row);
    }

  parallel_for_index(rows.size(), threads, [&](std::size_t i) {
    DensityCycleRow& row = rows[i];
    SocialNetwork network = generate_network(
        models[static_cast<std::size_t>(row.model_index)], Rng::derive(row.seed, kStreamNetwork));
    // Quantile only matters for evaluation, not scoring; any interior value works.
    Community community =
        make_community(std::move(network), theta, 0.5, Rng::derive(row.seed, kStreamTheta));
    const std::vector<Report> reports =
        sample_reports(community, noise, coverage, Rng::derive(row.seed, kStreamReports));
    row.density = community.network.density();
    const HodgeResult full = solve_scores(build_ranking_graph(reports, community.network));
    row.cycle_ratio = full.cycle_ratio;
  });
  return rows;
}

}  // namespace fbr
