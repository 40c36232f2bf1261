#include "fbr/hodge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fbr/errors.hpp"

namespace fbr {

namespace {

std::map<NodeId, int> index_nodes(const std::vector<NodeId>& nodes) {
  std::map<NodeId, int> index;
  int i = 0;
  for (NodeId id : nodes) index[id] = i++;
  return index;
}

// Connected components of the edge set, each sorted; singletons are isolated
// nodes and come back separately.
void split_components(const RankingGraph& graph,
                      std::vector<std::vector<NodeId>>& components,
                      std::set<NodeId>& isolated) {
  std::set<NodeId> visited;
  for (NodeId start : graph.nodes()) {
    if (visited.contains(start)) continue;
    if (graph.neighbors(start).empty()) {
      isolated.insert(start);
      visited.insert(start);
      continue;
    }
    std::vector<NodeId> component;
    std::vector<NodeId> stack{start};
    visited.insert(start);
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      component.push_back(u);
      for (NodeId v : graph.neighbors(u)) {
        if (visited.insert(v).second) stack.push_back(v);
      }
    }
    std::sort(component.begin(), component.end());
    components.push_back(std::move(component));
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
}

// Divergence restricted to one component, in component order.
Eigen::VectorXd component_divergence(const RankingGraph& graph,
                                     const std::vector<NodeId>& component) {
  Eigen::VectorXd div = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(component.size()));
  for (std::size_t i = 0; i < component.size(); ++i) {
    double sum = 0.0;
    for (NodeId v : graph.neighbors(component[i])) sum += graph.weight(component[i], v);
    div[static_cast<Eigen::Index>(i)] = sum;
  }
  return div;
}

// Dense solve of L s = div on the sum-zero subspace. Adding the rank-one
// term (1/m) * ones fills the null space, so a plain SPD factorization
// applies; the solution automatically sums to zero because div does.
Eigen::VectorXd solve_direct(const RankingGraph& graph,
                             const std::vector<NodeId>& component,
                             const Eigen::VectorXd& div) {
  const auto m = static_cast<Eigen::Index>(component.size());
  const auto index = index_nodes(component);
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  for (std::size_t i = 0; i < component.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const auto& adj = graph.neighbors(component[i]);
    lhs(row, row) += static_cast<double>(adj.size());
    for (NodeId v : adj) lhs(row, index.at(v)) -= 1.0;
  }
  return lhs.ldlt().solve(div);
}

// Matrix-free conjugate gradient on the Laplacian system. The Laplacian is
// singular with null space spanned by the constant vector; starting from zero
// with div orthogonal to it keeps iterates in the solvable subspace.
Eigen::VectorXd solve_cg(const RankingGraph& graph,
                         const std::vector<NodeId>& component,
                         const Eigen::VectorXd& div, const SolveOptions& options) {
  const auto m = static_cast<Eigen::Index>(component.size());
  const auto index = index_nodes(component);

  std::vector<std::vector<int>> adj(component.size());
  for (std::size_t i = 0; i < component.size(); ++i)
    for (NodeId v : graph.neighbors(component[i])) adj[i].push_back(index.at(v));

  auto apply_laplacian = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double acc = static_cast<double>(adj[static_cast<std::size_t>(i)].size()) * x[i];
      for (int j : adj[static_cast<std::size_t>(i)]) acc -= x[j];
      y[i] = acc;
    }
    return y;
  };

  const int cap = options.max_iterations
                      ? *options.max_iterations
                      : options.max_iter_factor * static_cast<int>(component.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd r = div;
  Eigen::VectorXd p = r;
  double rho = r.squaredNorm();
  if (std::sqrt(rho) <= options.tolerance) return x;
  for (int it = 0; it < cap; ++it) {
    const Eigen::VectorXd q = apply_laplacian(p);
    const double denom = p.dot(q);
    if (denom <= 0.0) break;  // numerically exhausted search direction
    const double alpha = rho / denom;
    x += alpha * p;
    r -= alpha * q;
    const double rho_next = r.squaredNorm();
    if (std::sqrt(rho_next) <= options.tolerance) {
      x.array() -= x.mean();
      return x;
    }
    p = r + (rho_next / rho) * p;
    rho = rho_next;
  }
  throw SolverError("conjugate gradient did not converge within " +
                        std::to_string(cap) + " iterations",
                    std::sqrt(r.squaredNorm()));
}

}  // namespace

LaplacianSystem laplacian_divergence(const RankingGraph& graph) {
  LaplacianSystem system;
  system.order = graph.nodes();
  const auto n = static_cast<Eigen::Index>(system.order.size());
  const auto index = index_nodes(system.order);
  system.laplacian = Eigen::MatrixXd::Zero(n, n);
  system.divergence = Eigen::VectorXd::Zero(n);
  for (const auto& [key, edge] : graph.edges()) {
    const auto a = index.at(key.first);
    const auto b = index.at(key.second);
    system.laplacian(a, a) += 1.0;
    system.laplacian(b, b) += 1.0;
    system.laplacian(a, b) -= 1.0;
    system.laplacian(b, a) -= 1.0;
    system.divergence[a] += edge.weight;
    system.divergence[b] -= edge.weight;
  }
  return system;
}

HodgeResult solve_scores(const RankingGraph& graph, const SolveOptions& options) {
  if (!(options.tolerance > 0.0))
    throw ValidationError("solve: tolerance must be > 0");

  HodgeResult result;
  split_components(graph, result.components, result.unscored);
  for (NodeId id : result.unscored) result.scores[id] = 0.0;

  for (const auto& component : result.components) {
    const Eigen::VectorXd div = component_divergence(graph, component);
    const bool direct =
        options.method == SolveMethod::kDirect ||
        (options.method == SolveMethod::kAuto &&
         component.size() <= static_cast<std::size_t>(options.direct_component_limit));
    Eigen::VectorXd s = direct ? solve_direct(graph, component, div)
                               : solve_cg(graph, component, div, options);
    s.array() -= s.mean();  // component scores sum to zero
    for (std::size_t i = 0; i < component.size(); ++i)
      result.scores[component[i]] = s[static_cast<Eigen::Index>(i)];
  }

  result.residuals = edge_residuals(graph, result.scores);
  if (graph.edge_count() > 0) result.cycle_ratio = cycle_ratio(graph, result.scores);
  return result;
}

double cycle_ratio(const RankingGraph& graph, const ScoreVector& scores) {
  if (graph.edges().empty())
    throw ValidationError("cycle ratio: undefined on an empty edge set");
  double rss = 0.0;
  double total = 0.0;
  for (const auto& [key, edge] : graph.edges()) {
    const double fit = scores.at(key.first) - scores.at(key.second);
    const double r = fit - edge.weight;
    rss += r * r;
    total += edge.weight * edge.weight;
  }
  if (total == 0.0) return 0.0;  // all-zero weights fit exactly
  return rss / total;
}

std::map<EdgeKey, double> edge_residuals(const RankingGraph& graph,
                                         const ScoreVector& scores) {
  std::map<EdgeKey, double> residuals;
  for (const auto& [key, edge] : graph.edges()) {
    const double fit = scores.at(key.first) - scores.at(key.second);
    residuals[key] = fit - edge.weight;
  }
  return residuals;
}

}  // namespace fbr
