#pragma once

// Three-step targeting mechanism: collect rankings, estimate each node's
// score from everyone else's reports (leave-one-out), then select by an
// absolute cutoff or a quota. Leave-one-out makes a node's own report
// irrelevant to its own score, so unilateral misreporting cannot change the
// reporter's membership under the cutoff rule. Audit helpers recompute
// outcomes under deviations to exercise exactly that.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fbr/hodge.hpp"
#include "fbr/ranking.hpp"

namespace fbr {

enum class TiePolicy {
  kIncludeAllTies,
  kExcludeAllTies,
  kSeededUniformRandom,
};

struct MechanismConfig {
  enum class Mode { kThreshold, kQuota };

  Mode mode = Mode::kThreshold;
  double cutoff = 0.0;  // threshold mode: targeted iff score > cutoff
  double alpha = 0.0;   // quota mode: fraction of scored nodes, in (0, 1]
  TiePolicy tie_policy = TiePolicy::kIncludeAllTies;
  std::uint64_t seed = 0;  // kSeededUniformRandom only

  static MechanismConfig threshold(double cutoff);
  static MechanismConfig quota(double alpha,
                               TiePolicy tie_policy = TiePolicy::kIncludeAllTies,
                               std::uint64_t seed = 0);
};

struct LeaveOneOutScores {
  ScoreVector scores;  // every network node; 0 for unscored
  std::set<NodeId> unscored;
  std::map<NodeId, std::optional<double>> cycle_ratio;  // of each node's graph
};

struct TargetingOutcome {
  std::set<NodeId> targeted;
  ScoreVector scores;
  std::map<NodeId, std::optional<double>> per_node_cycle_ratio;
  std::set<NodeId> unscored;
};

// Node i's score is read from the solve over all reports except i's own.
// Nodes isolated in their own leave-one-out graph are flagged unscored.
// Solves are independent; `threads` > 1 runs them concurrently with results
// keyed by node id. Solver failures carry the offending exclusion id.
LeaveOneOutScores leave_one_out_scores(const std::vector<Report>& reports,
                                       const SocialNetwork& network,
                                       const SolveOptions& options = {},
                                       int threads = 1);

// Strict inequality: targeted iff score > cutoff. Unscored nodes are
// excluded and reported.
TargetingOutcome target_threshold(const ScoreVector& scores, double cutoff,
                                  const std::set<NodeId>& unscored = {});

// Scores are solver output, so exact equality between them is meaningless;
// anything this close to the quota boundary counts as tied.
inline constexpr double kQuotaTieTolerance = 1e-9;

// Top floor(alpha * n) of the n scored nodes by score. Ties at the quota
// boundary (within kQuotaTieTolerance) follow the tie policy; the seeded
// policy picks uniformly among the boundary-tied nodes, reproducibly for a
// fixed seed.
TargetingOutcome target_quota(const ScoreVector& scores, double alpha,
                              TiePolicy tie_policy, std::uint64_t seed,
                              const std::set<NodeId>& unscored = {});

// Full pipeline: leave-one-out scoring plus the configured selection rule.
TargetingOutcome run_mechanism(const std::vector<Report>& reports,
                               const SocialNetwork& network,
                               const MechanismConfig& config,
                               const SolveOptions& options = {}, int threads = 1);

struct MembershipDelta {
  bool before = false;
  bool after = false;
  bool changed() const { return before != after; }
};

struct UnilateralAudit {
  MembershipDelta deviator;
  bool deviator_changed = false;
  std::map<NodeId, MembershipDelta> changed_others;
  TargetingOutcome original;
  TargetingOutcome deviated;
};

// Replaces (or adds) the deviator's report and recomputes the outcome.
// The alternative report must have ranker == deviator and be valid.
UnilateralAudit audit_unilateral(const std::vector<Report>& reports,
                                 const SocialNetwork& network,
                                 const MechanismConfig& config, NodeId deviator,
                                 const Report& alternative,
                                 const SolveOptions& options = {}, int threads = 1);

struct CoalitionAudit {
  std::map<NodeId, MembershipDelta> members;
  std::map<NodeId, MembershipDelta> changed_others;
  TargetingOutcome original;
  TargetingOutcome deviated;
};

// Alternative reports must cover exactly the coalition, one per member.
CoalitionAudit audit_coalition(const std::vector<Report>& reports,
                               const SocialNetwork& network,
                               const MechanismConfig& config,
                               const std::set<NodeId>& coalition,
                               const std::vector<Report>& alternatives,
                               const SolveOptions& options = {}, int threads = 1);

}  // namespace fbr
