#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fbr/errors.hpp"
#include "fbr/hodge.hpp"
#include "fbr/ranking.hpp"
#include "fbr/rng.hpp"
#include "oracle.hpp"

using namespace fbr;

namespace {

NodeId id(std::int64_t v) { return NodeId{v}; }

std::vector<NodeId> four() { return {id(1), id(2), id(3), id(4)}; }

// Path 1-2-3-4 where each higher node beats its lower neighbor:
// canonical weights Y_ab on (low, high) are all -1.
RankingGraph chain_graph() {
  return RankingGraph::from_edges(four(), {{id(1), id(2), -1, 1},
                                           {id(2), id(3), -1, 1},
                                           {id(3), id(4), -1, 1}});
}

// Chain plus a 3-cycle among {2,3,4}: node 2 beats node 4.
RankingGraph three_cycle_graph() {
  return RankingGraph::from_edges(four(), {{id(1), id(2), -1, 1},
                                           {id(2), id(3), -1, 1},
                                           {id(3), id(4), -1, 1},
                                           {id(2), id(4), 1, 1}});
}

// Chain plus the closing edge: node 1 beats node 4, a 4-cycle.
RankingGraph four_cycle_graph() {
  return RankingGraph::from_edges(four(), {{id(1), id(2), -1, 1},
                                           {id(2), id(3), -1, 1},
                                           {id(3), id(4), -1, 1},
                                           {id(1), id(4), 1, 1}});
}

// Triangle with unit weights along 1->2->3 and 1->3: consistent direction but
// inconsistent magnitudes (two paths from 1 to 3 disagree).
RankingGraph magnitude_triangle() {
  return RankingGraph::from_edges({id(1), id(2), id(3)}, {{id(1), id(2), -1, 1},
                                                          {id(2), id(3), -1, 1},
                                                          {id(1), id(3), -1, 1}});
}

void check_scores(const ScoreVector& got, const std::vector<double>& want, double tol) {
  REQUIRE(got.size() == want.size());
  std::size_t i = 0;
  for (const auto& [node, score] : got) {
    CHECK(std::abs(score - want[i]) < tol);
    ++i;
  }
}

SolveOptions direct_opts() {
  SolveOptions o;
  o.method = SolveMethod::kDirect;
  return o;
}

SolveOptions cg_opts() {
  SolveOptions o;
  o.method = SolveMethod::kConjugateGradient;
  return o;
}

}  // namespace

TEST_CASE("golden chain: oracle confirms, both solvers reproduce") {
  const RankingGraph graph = chain_graph();
  const std::vector<double> want{-1.5, -0.5, 0.5, 1.5};

  check_scores(oracle::scores(graph), want, 1e-9);
  CHECK(oracle::cycle_ratio(graph, oracle::scores(graph)) < 1e-12);

  for (const auto& opts : {direct_opts(), cg_opts()}) {
    const HodgeResult result = solve_scores(graph, opts);
    check_scores(result.scores, want, 1e-9);
    REQUIRE(result.cycle_ratio.has_value());
    CHECK(*result.cycle_ratio < 1e-9);
    CHECK(result.unscored.empty());
    REQUIRE(result.components.size() == 1);
    CHECK(result.components[0] == four());
  }

  const LaplacianSystem system = laplacian_divergence(graph);
  CHECK(system.order == four());
  CHECK(system.laplacian(0, 0) == 1.0);
  CHECK(system.laplacian(1, 1) == 2.0);
  CHECK(system.laplacian(0, 1) == -1.0);
  CHECK(system.laplacian(0, 2) == 0.0);
  CHECK(system.divergence(0) == -1.0);
  CHECK(system.divergence(1) == 0.0);
  CHECK(system.divergence(2) == 0.0);
  CHECK(system.divergence(3) == 1.0);
}

TEST_CASE("golden 3-cycle: scores flatten and cycle ratio is 0.75") {
  const RankingGraph graph = three_cycle_graph();
  const std::vector<double> want{-0.75, 0.25, 0.25, 0.25};

  check_scores(oracle::scores(graph), want, 1e-9);
  CHECK(std::abs(oracle::cycle_ratio(graph, oracle::scores(graph)) - 0.75) < 1e-9);

  for (const auto& opts : {direct_opts(), cg_opts()}) {
    const HodgeResult result = solve_scores(graph, opts);
    check_scores(result.scores, want, 1e-9);
    CHECK(std::abs(*result.cycle_ratio - 0.75) < 1e-9);
  }
}

TEST_CASE("golden 4-cycle: pure cycle, all-zero scores, ratio 1") {
  const RankingGraph graph = four_cycle_graph();
  const std::vector<double> want{0, 0, 0, 0};

  check_scores(oracle::scores(graph), want, 1e-9);
  CHECK(std::abs(oracle::cycle_ratio(graph, oracle::scores(graph)) - 1.0) < 1e-9);

  for (const auto& opts : {direct_opts(), cg_opts()}) {
    const HodgeResult result = solve_scores(graph, opts);
    check_scores(result.scores, want, 1e-9);
    CHECK(std::abs(*result.cycle_ratio - 1.0) < 1e-9);
  }
}

TEST_CASE("golden magnitude triangle: ratio 1/9 from bounded weights") {
  const RankingGraph graph = magnitude_triangle();
  const std::vector<double> want{-2.0 / 3.0, 0.0, 2.0 / 3.0};

  check_scores(oracle::scores(graph), want, 1e-9);
  CHECK(std::abs(oracle::cycle_ratio(graph, oracle::scores(graph)) - 1.0 / 9.0) < 1e-9);

  for (const auto& opts : {direct_opts(), cg_opts()}) {
    const HodgeResult result = solve_scores(graph, opts);
    check_scores(result.scores, want, 1e-9);
    CHECK(std::abs(*result.cycle_ratio - 1.0 / 9.0) < 1e-9);

    CHECK(std::abs(result.residuals.at(make_edge_key(id(1), id(2))) - 1.0 / 3.0) < 1e-9);
    CHECK(std::abs(result.residuals.at(make_edge_key(id(2), id(3))) - 1.0 / 3.0) < 1e-9);
    CHECK(std::abs(result.residuals.at(make_edge_key(id(1), id(3))) + 1.0 / 3.0) < 1e-9);
  }
}

TEST_CASE("components, isolated nodes, and empty graphs") {
  // two components {1,2} and {3,4,5}, plus isolated node 9
  const RankingGraph graph = RankingGraph::from_edges(
      {id(1), id(2), id(3), id(4), id(5), id(9)},
      {{id(1), id(2), 1, 1}, {id(3), id(4), 0.5, 2}, {id(4), id(5), -0.5, 2}});

  const HodgeResult result = solve_scores(graph);
  REQUIRE(result.components.size() == 2);
  CHECK(result.components[0] == std::vector<NodeId>{id(1), id(2)});
  CHECK(result.components[1] == std::vector<NodeId>{id(3), id(4), id(5)});
  CHECK(result.unscored == std::set<NodeId>{id(9)});
  CHECK(result.scores.at(id(9)) == 0.0);

  // exact tree fit: s3 - s4 = 0.5, s4 - s5 = -0.5, component sums zero
  check_scores(result.scores, {0.5, -0.5, 1.0 / 6, -1.0 / 3, 1.0 / 6, 0.0}, 1e-9);
  check_scores(oracle::scores(graph), {0.5, -0.5, 1.0 / 6, -1.0 / 3, 1.0 / 6, 0.0}, 1e-9);

  for (const auto& component : result.components) {
    double sum = 0.0;
    for (const NodeId node : component) sum += result.scores.at(node);
    CHECK(std::abs(sum) < 1e-12);
  }

  // edgeless graph: no cycle ratio, everyone unscored
  const RankingGraph empty = RankingGraph::from_edges({id(1), id(2)}, {});
  const HodgeResult none = solve_scores(empty);
  CHECK_FALSE(none.cycle_ratio.has_value());
  CHECK(none.unscored.size() == 2);
  CHECK(none.components.empty());
  CHECK_THROWS_AS(cycle_ratio(empty, none.scores), ValidationError);

  // all-zero weights: perfectly fit by zero scores
  const RankingGraph zeros =
      RankingGraph::from_edges({id(1), id(2)}, {{id(1), id(2), 0, 2}});
  const HodgeResult zfit = solve_scores(zeros);
  CHECK(*zfit.cycle_ratio == 0.0);
  CHECK(std::abs(zfit.scores.at(id(1))) < 1e-12);
}

TEST_CASE("solver options validate and cap") {
  const RankingGraph graph = chain_graph();
  SolveOptions bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(solve_scores(graph, bad), ValidationError);

  // a 60-node path cannot converge in one CG iteration
  std::vector<NodeId> nodes;
  std::vector<std::tuple<NodeId, NodeId, double, int>> edges;
  for (int i = 0; i < 60; ++i) nodes.push_back(id(i));
  for (int i = 0; i + 1 < 60; ++i) edges.emplace_back(id(i), id(i + 1), -1.0, 1);
  const RankingGraph longpath = RankingGraph::from_edges(nodes, edges);

  SolveOptions capped = cg_opts();
  capped.max_iterations = 1;
  try {
    solve_scores(longpath, capped);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual_norm() > 0.0);
  }
}

TEST_CASE("both solvers match the dense oracle on random graphs") {
  Rng rng(1234);
  int solved = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const RankingGraph graph = oracle::random_graph(rng, 2 + static_cast<int>(rng.below(7)),
                                                    0.2 + 0.7 * rng.uniform01());
    const ScoreVector expect = oracle::scores(graph);
    for (const auto& opts : {direct_opts(), cg_opts()}) {
      const HodgeResult result = solve_scores(graph, opts);
      for (const auto& [node, score] : result.scores)
        CHECK(std::abs(score - expect.at(node)) < 1e-6);
      if (!graph.edges().empty()) {
        CHECK(std::abs(*result.cycle_ratio - oracle::cycle_ratio(graph, expect)) < 1e-8);
        ++solved;
      }
    }
  }
  CHECK(solved > 100);
}

TEST_CASE("residuals are divergence-free and orthogonal to the fit") {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    const RankingGraph graph = oracle::random_graph(rng, 3 + static_cast<int>(rng.below(6)),
                                                    0.3 + 0.6 * rng.uniform01());
    if (graph.edges().empty()) continue;
    const HodgeResult result = solve_scores(graph);

    // gradient of the objective vanishes at the optimum
    CHECK(oracle::grad_inf_norm(graph, result.scores) < 1e-8);
    CHECK(oracle::fd_grad_inf_norm(graph, result.scores) < 1e-4);

    // per-node signed residual sums (divergence of the cyclic part) are zero
    std::map<NodeId, double> div;
    for (const auto& [key, r] : result.residuals) {
      div[key.first] += r;
      div[key.second] -= r;
    }
    for (const auto& [node, d] : div) CHECK(std::abs(d) < 1e-8);

    // residual orthogonal to the gradient flow s_a - s_b
    double dot = 0.0;
    for (const auto& [key, r] : result.residuals)
      dot += r * (result.scores.at(key.first) - result.scores.at(key.second));
    CHECK(std::abs(dot) < 1e-8);
  }
}

TEST_CASE("solves are deterministic and auto method is consistent") {
  Rng rng(5150);
  const RankingGraph graph = oracle::random_graph(rng, 8, 0.6);

  const HodgeResult a = solve_scores(graph);
  const HodgeResult b = solve_scores(graph);
  CHECK(a.scores == b.scores);  // bitwise equality
  CHECK(a.residuals == b.residuals);

  SolveOptions force_cg;  // auto with a tiny direct limit must take the CG path
  force_cg.direct_component_limit = 1;
  const HodgeResult c = solve_scores(graph, force_cg);
  for (const auto& [node, score] : c.scores)
    CHECK(std::abs(score - a.scores.at(node)) < 1e-8);
}
