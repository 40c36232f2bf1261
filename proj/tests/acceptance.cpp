// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is independent; all run even after a failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fbr/hodge.hpp"
#include "fbr/io.hpp"
#include "fbr/mechanism.hpp"
#include "fbr/ranking.hpp"
#include "fbr/rng.hpp"
#include "fbr/sim.hpp"
#include "oracle.hpp"

using namespace fbr;
namespace fs = std::filesystem;

namespace {

NodeId id(std::int64_t v) { return NodeId{v}; }

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

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

// ---------------------------------------------------------------------------
// 1. Four hand-checked topologies: the independent least-squares oracle
// confirms each constant first, then the production solver must match.

struct Golden {
  const char* name;
  RankingGraph graph;
  std::vector<double> scores;  // by ascending node id
  double ratio;
};

std::vector<Golden> golden_cases() {
  const std::vector<NodeId> four{id(1), id(2), id(3), id(4)};
  std::vector<Golden> cases;
  cases.push_back({"chain",
                   RankingGraph::from_edges(four, {{id(1), id(2), -1, 1},
                                                   {id(2), id(3), -1, 1},
                                                   {id(3), id(4), -1, 1}}),
                   {-1.5, -0.5, 0.5, 1.5},
                   0.0});
  cases.push_back({"chain+3cycle",
                   RankingGraph::from_edges(four, {{id(1), id(2), -1, 1},
                                                   {id(2), id(3), -1, 1},
                                                   {id(3), id(4), -1, 1},
                                                   {id(2), id(4), 1, 1}}),
                   {-0.75, 0.25, 0.25, 0.25},
                   0.75});
  cases.push_back({"4cycle",
                   RankingGraph::from_edges(four, {{id(1), id(2), -1, 1},
                                                   {id(2), id(3), -1, 1},
                                                   {id(3), id(4), -1, 1},
                                                   {id(1), id(4), 1, 1}}),
                   {0.0, 0.0, 0.0, 0.0},
                   1.0});
  cases.push_back({"magnitude-triangle",
                   RankingGraph::from_edges({id(1), id(2), id(3)}, {{id(1), id(2), -1, 1},
                                                                    {id(2), id(3), -1, 1},
                                                                    {id(1), id(3), -1, 1}}),
                   {-2.0 / 3.0, 0.0, 2.0 / 3.0},
                   1.0 / 9.0});
  return cases;
}

bool scores_match(const ScoreVector& got, const std::vector<double>& want, double tol) {
  if (got.size() != want.size()) return false;
  std::size_t i = 0;
  for (const auto& [node, score] : got)
    if (!close(score, want[i++], tol)) return false;
  return true;
}

bool criterion_golden(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  for (const Golden& g : golden_cases()) {
    const ScoreVector reference = oracle::scores(g.graph);
    if (!scores_match(reference, g.scores, 1e-9)) ok = false;
    if (!close(oracle::cycle_ratio(g.graph, reference), g.ratio, 1e-9)) ok = false;

    const HodgeResult result = solve_scores(g.graph, direct_opts());
    if (!scores_match(result.scores, g.scores, 1e-9)) ok = false;
    if (!result.cycle_ratio || !close(*result.cycle_ratio, g.ratio, 1e-9)) ok = false;
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (elapsed >= 1.0) ok = false;

  std::ostringstream out;
  out << "4 topologies oracle-confirmed, " << elapsed << "s";
  detail = out.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 2. Exhaustive strategy-proofness: over every labeled network on up to five
// nodes, with complete neighbor rankings, no alternative ranking a deviator
// can submit moves their own leave-one-out score or threshold membership.

bool criterion_strategy_proofness(std::string& detail) {
  const auto start = std::chrono::steady_clock::now();
  long long graphs = 0, alternatives = 0, violations = 0;

  for (int n = 2; n <= 5; ++n) {
    std::vector<NodeId> nodes;
    for (int i = 1; i <= n; ++i) nodes.push_back(id(i));
    std::vector<std::pair<NodeId, NodeId>> pairs;
    for (int i = 1; i <= n; ++i)
      for (int j = i + 1; j <= n; ++j) pairs.emplace_back(id(i), id(j));

    for (std::uint64_t mask = 0; mask < (1ull << pairs.size()); ++mask) {
      std::vector<std::pair<NodeId, NodeId>> edges;
      for (std::size_t b = 0; b < pairs.size(); ++b)
        if (mask >> b & 1) edges.push_back(pairs[b]);
      const SocialNetwork network(nodes, edges);
      ++graphs;

      // one id-sorted profile, one seeded-random profile
      for (int profile = 0; profile < 2; ++profile) {
        Rng rng(Rng::derive(Rng::derive(0x5eedULL, static_cast<std::uint64_t>(n)), mask));
        std::vector<Report> reports;
        for (const NodeId ranker : network.nodes()) {
          if (network.neighbors(ranker).empty()) continue;
          Report r;
          r.ranker = ranker;
          r.ranking = network.neighbors(ranker);
          if (profile == 1) rng.shuffle(r.ranking);
          reports.push_back(std::move(r));
        }
        if (reports.empty()) continue;

        const LeaveOneOutScores base = leave_one_out_scores(reports, network);
        const TargetingOutcome base_out = target_threshold(base.scores, 0.0, base.unscored);

        for (std::size_t ri = 0; ri < reports.size(); ++ri) {
          const NodeId deviator = reports[ri].ranker;
          std::vector<NodeId> perm = network.neighbors(deviator);  // sorted
          do {
            std::vector<Report> deviated = reports;
            deviated[ri].ranking = perm;
            const LeaveOneOutScores dev = leave_one_out_scores(deviated, network);
            const TargetingOutcome dev_out = target_threshold(dev.scores, 0.0, dev.unscored);
            ++alternatives;
            const bool score_same = base.scores.at(deviator) == dev.scores.at(deviator);
            const bool status_same =
                base.unscored.contains(deviator) == dev.unscored.contains(deviator);
            const bool member_same =
                base_out.targeted.contains(deviator) == dev_out.targeted.contains(deviator);
            if (!score_same || !status_same || !member_same) ++violations;
          } while (std::next_permutation(perm.begin(), perm.end()));
        }
      }
    }
  }

  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream out;
  out << graphs << " networks, " << alternatives << " deviations, " << violations
      << " violations, " << elapsed << "s";
  detail = out.str();
  return violations == 0 && elapsed < 300.0;
}

// ---------------------------------------------------------------------------
// 3. Both solver paths agree with the dense pseudoinverse oracle on random
// small graphs.

bool criterion_oracle_equivalence(std::string& detail) {
  Rng rng(0xFBACCEULL);
  long long checked = 0, failed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));  // 2..8 nodes
    const double p = 0.15 + 0.8 * rng.uniform01();
    const RankingGraph graph = oracle::random_graph(rng, n, p);

    const ScoreVector want = oracle::scores(graph);
    const double want_ratio = oracle::cycle_ratio(graph, want);
    for (const auto& opts : {direct_opts(), cg_opts()}) {
      const HodgeResult result = solve_scores(graph, opts);
      ++checked;
      bool ok = true;
      for (const auto& [node, score] : result.scores)
        if (!close(score, want.at(node), 1e-6)) ok = false;
      if (graph.edge_count() > 0) {
        if (!result.cycle_ratio || !close(*result.cycle_ratio, want_ratio, 1e-8)) ok = false;
      } else if (result.cycle_ratio) {
        ok = false;
      }
      if (!ok) ++failed;
    }
  }
  std::ostringstream out;
  out << checked << " solver/graph runs (1000 graphs, both methods), " << failed << " mismatches";
  detail = out.str();
  return failed == 0;
}

// ---------------------------------------------------------------------------
// 4. A coalition of two can strictly gain under a threshold: on the path
// 1-2-3, node 2's flipped report raises node 1's leave-one-out score across a
// cutoff of 0 while node 2's own membership is untouched.

bool criterion_coalition_gain(std::string& detail) {
  const SocialNetwork network({id(1), id(2), id(3)}, {{id(1), id(2)}, {id(2), id(3)}});
  const std::vector<Report> honest{{id(1), {id(2)}, {}},
                                   {id(2), {id(1), id(3)}, {}},
                                   {id(3), {id(2)}, {}}};
  const std::vector<Report> flipped{{id(1), {id(2)}, {}},
                                    {id(2), {id(3), id(1)}, {}}};

  const CoalitionAudit audit = audit_coalition(honest, network, MechanismConfig::threshold(0.0),
                                               {id(1), id(2)}, flipped);

  const double before = audit.original.scores.at(id(1));
  const double after = audit.deviated.scores.at(id(1));
  bool ok = close(before, -0.5, 1e-9) && close(after, 0.5, 1e-9);
  if (!(after > before)) ok = false;
  if (!(before < 0.0 && 0.0 < after)) ok = false;  // the cutoff separates them
  if (!audit.members.at(id(1)).changed() || !audit.members.at(id(1)).after) ok = false;
  if (audit.members.at(id(2)).changed()) ok = false;

  std::ostringstream out;
  out << "member score " << before << " -> " << after << " across cutoff 0";
  detail = out.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 5. Quota tie handling on the triangle: a decisive profile seats the same
// node under every policy; the fully symmetric profile is a three-way tie the
// seeded policy must break uniformly.

bool criterion_quota_anonymity(std::string& detail) {
  const SocialNetwork triangle({id(1), id(2), id(3)},
                               {{id(1), id(2)}, {id(2), id(3)}, {id(1), id(3)}});
  const std::vector<Report> decisive{{id(1), {id(3), id(2)}, {}},
                                     {id(2), {id(3), id(1)}, {}},
                                     {id(3), {id(1), id(2)}, {}}};
  const std::vector<Report> symmetric{{id(1), {id(2), id(3)}, {}},
                                      {id(2), {id(3), id(1)}, {}},
                                      {id(3), {id(1), id(2)}, {}}};
  bool ok = true;

  const LeaveOneOutScores loo_decisive = leave_one_out_scores(decisive, triangle);
  for (const TiePolicy policy :
       {TiePolicy::kIncludeAllTies, TiePolicy::kExcludeAllTies, TiePolicy::kSeededUniformRandom})
    for (const std::uint64_t seed : {0ull, 1ull, 7ull, 991ull}) {
      const TargetingOutcome out =
          target_quota(loo_decisive.scores, 0.34, policy, seed, loo_decisive.unscored);
      if (out.targeted != std::set<NodeId>{id(2)}) ok = false;
    }

  const LeaveOneOutScores loo_symmetric = leave_one_out_scores(symmetric, triangle);
  std::map<NodeId, int> hits{{id(1), 0}, {id(2), 0}, {id(3), 0}};
  const int trials = 10000;
  for (int seed = 0; seed < trials; ++seed) {
    const TargetingOutcome out =
        target_quota(loo_symmetric.scores, 0.34, TiePolicy::kSeededUniformRandom,
                     static_cast<std::uint64_t>(seed), loo_symmetric.unscored);
    if (out.targeted.size() != 1) {
      ok = false;
      continue;
    }
    ++hits[*out.targeted.begin()];
  }
  std::ostringstream out;
  out << "selection frequencies";
  for (const auto& [node, count] : hits) {
    const double freq = static_cast<double>(count) / trials;
    if (!close(freq, 1.0 / 3.0, 0.02)) ok = false;
    out << " " << freq;
  }
  detail = out.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 6. Structural properties on fuzzed inputs, plus simulation determinism and
// the density/cycle-ratio sweep.

double node_divergence(const std::map<EdgeKey, double>& residuals, NodeId u) {
  double total = 0.0;
  for (const auto& [key, r] : residuals) {
    if (key.first == u) total += r;
    if (key.second == u) total -= r;
  }
  return total;
}

bool fuzzed_graph_properties(const RankingGraph& graph, long long& failures) {
  const HodgeResult result = solve_scores(graph, direct_opts());
  bool ok = true;

  if (result.cycle_ratio && !(*result.cycle_ratio >= 0.0 && *result.cycle_ratio <= 1.0))
    ok = false;

  for (const NodeId node : graph.nodes())
    if (std::abs(node_divergence(result.residuals, node)) > 1e-8) ok = false;

  double dot = 0.0;
  for (const auto& [key, r] : result.residuals)
    dot += r * (result.scores.at(key.first) - result.scores.at(key.second));
  if (std::abs(dot) > 1e-8) ok = false;

  for (const auto& component : result.components) {
    double sum = 0.0;
    for (const NodeId node : component) sum += result.scores.at(node);
    if (std::abs(sum) > 1e-12) ok = false;
  }

  if (!ok) ++failures;
  return ok;
}

std::string file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool criterion_properties(std::string& detail) {
  long long failures = 0;
  Rng rng(0x9a75ULL);

  // fuzzed structural properties, on direct edge draws and on report-built graphs
  long long fuzzed = 0;
  for (int trial = 0; trial < 150; ++trial) {
    fuzzed_graph_properties(oracle::random_graph(rng, 3 + static_cast<int>(rng.below(10)),
                                                 0.1 + 0.85 * rng.uniform01()),
                            failures);
    ++fuzzed;
  }
  for (int trial = 0; trial < 150; ++trial) {
    const SocialNetwork network =
        oracle::random_network(rng, 3 + static_cast<int>(rng.below(10)),
                               0.1 + 0.85 * rng.uniform01());
    fuzzed_graph_properties(build_ranking_graph(oracle::random_reports(rng, network), network),
                            failures);
    ++fuzzed;
  }

  // permutation equivariance: relabeling the nodes relabels the scores
  long long relabelings = 0;
  for (int base = 0; base < 10; ++base) {
    const int n = 4 + static_cast<int>(rng.below(6));
    const RankingGraph graph = oracle::random_graph(rng, n, 0.6);
    const HodgeResult original = solve_scores(graph, direct_opts());
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<NodeId> image = graph.nodes();
      rng.shuffle(image);
      std::map<NodeId, NodeId> sigma;
      for (std::size_t i = 0; i < image.size(); ++i)
        sigma[graph.nodes()[i]] = NodeId{image[i].value + 100};

      std::vector<NodeId> new_nodes;
      for (const NodeId node : graph.nodes()) new_nodes.push_back(sigma.at(node));
      std::vector<std::tuple<NodeId, NodeId, double, int>> new_edges;
      for (const auto& [key, edge] : graph.edges())
        new_edges.emplace_back(sigma.at(key.first), sigma.at(key.second), edge.weight,
                               edge.count);
      const HodgeResult permuted =
          solve_scores(RankingGraph::from_edges(new_nodes, new_edges), direct_opts());

      ++relabelings;
      bool ok = true;
      for (const NodeId node : graph.nodes())
        if (!close(original.scores.at(node), permuted.scores.at(sigma.at(node)), 1e-9))
          ok = false;
      if (original.cycle_ratio.has_value() != permuted.cycle_ratio.has_value()) ok = false;
      if (original.cycle_ratio &&
          !close(*original.cycle_ratio, *permuted.cycle_ratio, 1e-12))
        ok = false;
      if (!ok) ++failures;
    }
  }

  // simulation determinism: identical artifacts from a repeated run
  {
    ExperimentConfig config;
    config.networks = {NetworkModel::erdos_renyi(16, 0.3)};
    config.noise = NoiseModel::flip_logistic(0.8);
    config.mechanism.config = MechanismConfig::threshold(0.0);
    config.baseline_quota = 0.5;
    config.seeds = {1, 2, 3};
    config.threads = 2;

    const fs::path dir = fs::temp_directory_path() / "fbr-acceptance";
    fs::create_directories(dir);
    const ExperimentResult first = run_experiment(config);
    const ExperimentResult second = run_experiment(config);
    write_runs_csv((dir / "runs_a.csv").string(), first, config.networks);
    write_runs_csv((dir / "runs_b.csv").string(), second, config.networks);
    write_theta_hist_csv((dir / "theta_a.csv").string(), first);
    write_theta_hist_csv((dir / "theta_b.csv").string(), second);
    write_cycle_hist_csv((dir / "cycle_a.csv").string(), first);
    write_cycle_hist_csv((dir / "cycle_b.csv").string(), second);
    const bool identical =
        file_bytes(dir / "runs_a.csv") == file_bytes(dir / "runs_b.csv") &&
        file_bytes(dir / "theta_a.csv") == file_bytes(dir / "theta_b.csv") &&
        file_bytes(dir / "cycle_a.csv") == file_bytes(dir / "cycle_b.csv") &&
        experiment_summary(config, first) == experiment_summary(config, second);
    if (!identical) ++failures;
  }

  // density sweep: the most cyclic runs live in the sparsest networks
  double overall_density = 0.0, top_density = 0.0;
  {
    std::vector<std::uint64_t> seeds(200);
    std::iota(seeds.begin(), seeds.end(), 1);
    const std::vector<DensityCycleRow> rows = cycle_ratio_experiment(
        {NetworkModel::erdos_renyi(30, 0.1), NetworkModel::erdos_renyi(30, 0.3),
         NetworkModel::erdos_renyi(30, 0.6)},
        ThetaModel{}, NoiseModel::flip_logistic(1.0), 1.0, seeds, 2);

    std::vector<std::pair<double, double>> by_ratio;  // (ratio, density)
    for (const DensityCycleRow& row : rows)
      if (row.cycle_ratio) by_ratio.emplace_back(*row.cycle_ratio, row.density);
    std::sort(by_ratio.begin(), by_ratio.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    const std::size_t decile = by_ratio.size() / 10;
    if (decile == 0 || by_ratio.size() < rows.size() / 2) {
      ++failures;
    } else {
      for (const auto& [ratio, density] : by_ratio) overall_density += density;
      overall_density /= static_cast<double>(by_ratio.size());
      for (std::size_t i = 0; i < decile; ++i) top_density += by_ratio[i].second;
      top_density /= static_cast<double>(decile);
      if (!(top_density < overall_density)) ++failures;
    }
  }

  std::ostringstream out;
  out << fuzzed << " fuzzed graphs, " << relabelings
      << " relabelings, deterministic re-run, top-decile density " << top_density << " vs "
      << overall_density << " overall, " << failures << " failures";
  detail = out.str();
  return failures == 0;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*run)(std::string&);
  };
  const std::vector<Criterion> criteria{
      {"golden examples reproduce", criterion_golden},
      {"exhaustive strategy-proofness on small networks", criterion_strategy_proofness},
      {"solvers match the dense oracle", criterion_oracle_equivalence},
      {"coalition gain under a threshold", criterion_coalition_gain},
      {"quota ties break anonymously", criterion_quota_anonymity},
      {"structural properties and determinism", criterion_properties},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string detail;
    const bool ok = criteria[i].run(detail);
    if (!ok) ++failures;
    std::printf("[%s] %zu %s (%s)\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
