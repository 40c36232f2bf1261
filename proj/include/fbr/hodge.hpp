#pragma once

// Least-squares scores on a ranking graph. Scores minimize
//   sum over edges {i,j} of ((s_i - s_j) - Y_ij)^2,
// normalized to sum to zero within each connected component. The residual is
// the cyclic part of the data; the cycle ratio is the residual sum of squares
// over the total sum of squared edge weights.

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "fbr/ranking.hpp"

namespace fbr {

using ScoreVector = std::map<NodeId, double>;

struct HodgeResult {
  ScoreVector scores;                           // every graph node; 0 for unscored
  std::map<EdgeKey, double> residuals;          // (s_a - s_b) - Y_ab per stored edge
  std::optional<double> cycle_ratio;            // nullopt when the edge set is empty
  std::vector<std::vector<NodeId>> components;  // components with >= 1 edge
  std::set<NodeId> unscored;                    // isolated nodes
};

// Row/column order is `order` (sorted ascending over all graph nodes).
// laplacian is the unweighted graph Laplacian of the edge set; divergence_u is
// the sum of Y_uv over neighbors v. The least-squares minimizers are exactly
// the solutions of laplacian * s = divergence.
struct LaplacianSystem {
  std::vector<NodeId> order;
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd divergence;
};

LaplacianSystem laplacian_divergence(const RankingGraph& graph);

enum class SolveMethod {
  kAuto,               // direct at or below direct_component_limit, CG above
  kDirect,             // dense factorization in the sum-zero subspace
  kConjugateGradient,  // matrix-free CG on the Laplacian system
};

struct SolveOptions {
  double tolerance = 1e-10;  // residual-norm target for the iterative path
  SolveMethod method = SolveMethod::kAuto;
  int direct_component_limit = 2000;
  int max_iter_factor = 10;           // CG cap = factor * component size
  std::optional<int> max_iterations;  // explicit cap override
};

// Solves per connected component; isolated nodes get score 0 and are listed
// as unscored. Throws ValidationError on tolerance <= 0, SolverError (with
// the achieved residual norm) when CG hits its iteration cap.
HodgeResult solve_scores(const RankingGraph& graph, const SolveOptions& options = {});

// Residual sum of squares over total squared edge weight, in [0, 1].
// A zero denominator with a nonempty edge set yields 0 (the residual is also
// zero there); an empty edge set throws ValidationError ("undefined").
double cycle_ratio(const RankingGraph& graph, const ScoreVector& scores);

// Per-edge residual (s_a - s_b) - Y_ab keyed by canonical edge. At the
// least-squares scores the residual is divergence-free: it sums to zero
// around every node under the antisymmetric convention.
std::map<EdgeKey, double> edge_residuals(const RankingGraph& graph,
                                         const ScoreVector& scores);

}  // namespace fbr
