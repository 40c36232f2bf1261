#include "fbr/mechanism.hpp"

#include <algorithm>
#include <cmath>

#include "fbr/errors.hpp"
#include "fbr/parallel.hpp"
#include "fbr/rng.hpp"

namespace fbr {

namespace {

TargetingOutcome select(const LeaveOneOutScores& loo, const MechanismConfig& config) {
  TargetingOutcome outcome =
      config.mode == MechanismConfig::Mode::kThreshold
          ? target_threshold(loo.scores, config.cutoff, loo.unscored)
          : target_quota(loo.scores, config.alpha, config.tie_policy, config.seed,
                         loo.unscored);
  outcome.per_node_cycle_ratio = loo.cycle_ratio;
  return outcome;
}

std::map<NodeId, MembershipDelta> membership_deltas(const TargetingOutcome& before,
                                                    const TargetingOutcome& after) {
  std::map<NodeId, MembershipDelta> deltas;
  for (NodeId id : before.targeted) deltas[id].before = true;
  for (NodeId id : after.targeted) deltas[id].after = true;
  return deltas;
}

std::vector<Report> with_replaced_reports(const std::vector<Report>& reports,
                                          const std::vector<Report>& replacements) {
  std::vector<Report> out = reports;
  for (const Report& replacement : replacements) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Report& r) {
      return r.ranker == replacement.ranker;
    });
    if (it != out.end())
      *it = replacement;
    else
      out.push_back(replacement);
  }
  return out;
}

}  // namespace

MechanismConfig MechanismConfig::threshold(double cutoff) {
  MechanismConfig config;
  config.mode = Mode::kThreshold;
  config.cutoff = cutoff;
  return config;
}

MechanismConfig MechanismConfig::quota(double alpha, TiePolicy tie_policy,
                                       std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("quota: alpha must be in (0, 1]");
  MechanismConfig config;
  config.mode = Mode::kQuota;
  config.alpha = alpha;
  config.tie_policy = tie_policy;
  config.seed = seed;
  return config;
}

LeaveOneOutScores leave_one_out_scores(const std::vector<Report>& reports,
                                       const SocialNetwork& network,
                                       const SolveOptions& options, int threads) {
  const std::vector<NodeId>& nodes = network.nodes();
  std::vector<double> scores(nodes.size(), 0.0);
  std::vector<char> unscored(nodes.size(), 0);
  std::vector<std::optional<double>> ratios(nodes.size());

  parallel_for_index(nodes.size(), threads, [&](std::size_t i) {
    const NodeId id = nodes[i];
    const RankingGraph graph = build_ranking_graph(reports, network, id);
    try {
      const HodgeResult result = solve_scores(graph, options);
      scores[i] = result.scores.at(id);
      unscored[i] = result.unscored.contains(id) ? 1 : 0;
      ratios[i] = result.cycle_ratio;
    } catch (const SolverError& e) {
      throw SolverError("leave-one-out solve excluding node " + to_string(id) +
                            " failed: " + e.what(),
                        e.residual_norm());
    }
  });

  LeaveOneOutScores out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    out.scores[nodes[i]] = scores[i];
    if (unscored[i]) out.unscored.insert(nodes[i]);
    out.cycle_ratio[nodes[i]] = ratios[i];
  }
  return out;
}

TargetingOutcome target_threshold(const ScoreVector& scores, double cutoff,
                                  const std::set<NodeId>& unscored) {
  TargetingOutcome outcome;
  outcome.scores = scores;
  outcome.unscored = unscored;
  for (const auto& [id, score] : scores) {
    if (unscored.contains(id)) continue;
    if (score > cutoff) outcome.targeted.insert(id);
  }
  return outcome;
}

TargetingOutcome target_quota(const ScoreVector& scores, double alpha,
                              TiePolicy tie_policy, std::uint64_t seed,
                              const std::set<NodeId>& unscored) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ValidationError("quota: alpha must be in (0, 1]");

  TargetingOutcome outcome;
  outcome.scores = scores;
  outcome.unscored = unscored;

  std::vector<std::pair<double, NodeId>> ranked;  // descending score, id tiebreak
  for (const auto& [id, score] : scores)
    if (!unscored.contains(id)) ranked.emplace_back(score, id);
  if (ranked.empty()) return outcome;
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  const auto n = ranked.size();
  const auto slots = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  if (slots == 0) return outcome;
  if (slots >= n) {
    for (const auto& [score, id] : ranked) outcome.targeted.insert(id);
    return outcome;
  }

  // Boundary value: the score at the last slot. Everything clearly above is
  // in; the tie policy governs the nodes at the boundary when they do not all
  // fit. Near-ties count as ties: these are least-squares estimates, and an
  // exact comparison would let solver noise pick the winner.
  const double boundary = ranked[slots - 1].first;
  std::vector<NodeId> tied;
  std::size_t above = 0;
  for (const auto& [score, id] : ranked) {
    if (score > boundary + kQuotaTieTolerance)
      ++above;
    else if (score >= boundary - kQuotaTieTolerance)
      tied.push_back(id);
  }
  for (std::size_t i = 0; i < above; ++i) outcome.targeted.insert(ranked[i].second);

  const std::size_t remaining = slots - above;
  if (tied.size() <= remaining) {  // everyone at the boundary fits
    for (NodeId id : tied) outcome.targeted.insert(id);
    return outcome;
  }
  switch (tie_policy) {
    case TiePolicy::kIncludeAllTies:
      for (NodeId id : tied) outcome.targeted.insert(id);
      break;
    case TiePolicy::kExcludeAllTies:
      break;
    case TiePolicy::kSeededUniformRandom: {
      Rng rng(Rng::derive(seed, 0x71e));
      for (std::size_t i = 0; i < remaining; ++i) {
        const auto pick = i + static_cast<std::size_t>(rng.below(tied.size() - i));
        std::swap(tied[i], tied[pick]);
        outcome.targeted.insert(tied[i]);
      }
      break;
    }
  }
  return outcome;
}

TargetingOutcome run_mechanism(const std::vector<Report>& reports,
                               const SocialNetwork& network,
                               const MechanismConfig& config,
                               const SolveOptions& options, int threads) {
  return select(leave_one_out_scores(reports, network, options, threads), config);
}

UnilateralAudit audit_unilateral(const std::vector<Report>& reports,
                                 const SocialNetwork& network,
                                 const MechanismConfig& config, NodeId deviator,
                                 const Report& alternative,
                                 const SolveOptions& options, int threads) {
  if (alternative.ranker != deviator)
    throw ValidationError("audit: alternative report must be by the deviator (node " +
                          to_string(deviator) + ")");
  validate_report(alternative, network);

  UnilateralAudit audit;
  audit.original = run_mechanism(reports, network, config, options, threads);
  audit.deviated = run_mechanism(with_replaced_reports(reports, {alternative}), network,
                                 config, options, threads);
  audit.deviator.before = audit.original.targeted.contains(deviator);
  audit.deviator.after = audit.deviated.targeted.contains(deviator);
  audit.deviator_changed = audit.deviator.changed();
  for (const auto& [id, delta] : membership_deltas(audit.original, audit.deviated))
    if (delta.changed() && id != deviator) audit.changed_others[id] = delta;
  return audit;
}

CoalitionAudit audit_coalition(const std::vector<Report>& reports,
                               const SocialNetwork& network,
                               const MechanismConfig& config,
                               const std::set<NodeId>& coalition,
                               const std::vector<Report>& alternatives,
                               const SolveOptions& options, int threads) {
  std::set<NodeId> covered;
  for (const Report& alternative : alternatives) {
    if (!coalition.contains(alternative.ranker))
      throw ValidationError("audit: alternative report by node " +
                            to_string(alternative.ranker) +
                            " which is not in the coalition");
    if (!covered.insert(alternative.ranker).second)
      throw ValidationError("audit: multiple alternative reports by node " +
                            to_string(alternative.ranker));
    validate_report(alternative, network);
  }
  if (covered != coalition)
    throw ValidationError("audit: alternative reports must cover exactly the coalition");

  CoalitionAudit audit;
  audit.original = run_mechanism(reports, network, config, options, threads);
  audit.deviated = run_mechanism(with_replaced_reports(reports, alternatives), network,
                                 config, options, threads);
  const auto deltas = membership_deltas(audit.original, audit.deviated);
  for (NodeId id : coalition) {
    auto it = deltas.find(id);
    audit.members[id] = it == deltas.end() ? MembershipDelta{} : it->second;
  }
  for (const auto& [id, delta] : deltas)
    if (delta.changed() && !coalition.contains(id)) audit.changed_others[id] = delta;
  return audit;
}

}  // namespace fbr
