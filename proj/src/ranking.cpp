#include "fbr/ranking.hpp"

#include <algorithm>
#include <cmath>

#include "fbr/errors.hpp"

namespace fbr {

namespace {

const std::vector<NodeId> kNoNeighbors{};

std::vector<NodeId> sorted_unique(std::vector<NodeId> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

}  // namespace

SocialNetwork::SocialNetwork(std::vector<NodeId> nodes,
                             const std::vector<std::pair<NodeId, NodeId>>& edges) {
  nodes_ = sorted_unique(std::move(nodes));
  for (NodeId id : nodes_) adjacency_[id];
  for (const auto& [a, b] : edges) {
    if (a == b)
      throw ValidationError("network: self-loop on node " + to_string(a));
    if (!adjacency_.contains(a))
      throw ValidationError("network: edge references unknown node " + to_string(a));
    if (!adjacency_.contains(b))
      throw ValidationError("network: edge references unknown node " + to_string(b));
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& [id, adj] : adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    edge_count_ += adj.size();
  }
  edge_count_ /= 2;
}

const std::vector<NodeId>& SocialNetwork::neighbors(NodeId id) const {
  auto it = adjacency_.find(id);
  if (it == adjacency_.end())
    throw ValidationError("network: unknown node " + to_string(id));
  return it->second;
}

bool SocialNetwork::has_node(NodeId id) const { return adjacency_.contains(id); }

bool SocialNetwork::has_edge(NodeId a, NodeId b) const {
  auto it = adjacency_.find(a);
  if (it == adjacency_.end()) return false;
  return std::binary_search(it->second.begin(), it->second.end(), b);
}

double SocialNetwork::density() const {
  const auto n = nodes_.size();
  if (n < 2) return 0.0;
  return static_cast<double>(edge_count_) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

void validate_report(const Report& report, const SocialNetwork& network) {
  if (!network.has_node(report.ranker))
    throw ValidationError("report by node " + to_string(report.ranker) +
                          ": ranker is not in the network");
  std::set<NodeId> seen;
  for (NodeId id : report.ranking) {
    if (id == report.ranker)
      throw ValidationError("report by node " + to_string(report.ranker) +
                            ": ranker appears in own ranking");
    if (!seen.insert(id).second)
      throw ValidationError("report by node " + to_string(report.ranker) +
                            ": duplicate node " + to_string(id) + " in ranking");
    if (!network.has_edge(report.ranker, id))
      throw ValidationError("report by node " + to_string(report.ranker) + ": node " +
                            to_string(id) + " is not a neighbor");
  }
  for (NodeId id : report.unknown) {
    if (id == report.ranker)
      throw ValidationError("report by node " + to_string(report.ranker) +
                            ": ranker appears in own unknown set");
    if (seen.contains(id))
      throw ValidationError("report by node " + to_string(report.ranker) + ": node " +
                            to_string(id) + " is both ranked and unknown");
    if (!network.has_edge(report.ranker, id))
      throw ValidationError("report by node " + to_string(report.ranker) + ": node " +
                            to_string(id) + " is not a neighbor");
  }
}

std::vector<Comparison> pairwise_from_ranking(const Report& report) {
  std::set<NodeId> seen;
  for (NodeId id : report.ranking) {
    if (id == report.ranker)
      throw ValidationError("report by node " + to_string(report.ranker) +
                            ": ranker appears in own ranking");
    if (!seen.insert(id).second)
      throw ValidationError("report by node " + to_string(report.ranker) +
                            ": duplicate node " + to_string(id) + " in ranking");
    if (report.unknown.contains(id))
      throw ValidationError("report by node " + to_string(report.ranker) + ": node " +
                            to_string(id) + " is both ranked and unknown");
  }
  std::vector<Comparison> out;
  const auto& r = report.ranking;  // lowest first
  out.reserve(r.size() < 2 ? 0 : r.size() * (r.size() - 1) / 2);
  for (std::size_t hi = 1; hi < r.size(); ++hi)
    for (std::size_t lo = 0; lo < hi; ++lo)
      out.push_back(Comparison{r[hi], r[lo], report.ranker});
  return out;
}

std::vector<Comparison> pairwise_from_ranking(const Report& report,
                                              const SocialNetwork& network) {
  validate_report(report, network);
  return pairwise_from_ranking(report);
}

RankingGraph RankingGraph::from_edges(
    std::vector<NodeId> nodes,
    const std::vector<std::tuple<NodeId, NodeId, double, int>>& edges) {
  RankingGraph g;
  g.nodes_ = sorted_unique(std::move(nodes));
  for (const auto& [a, b, weight, count] : edges) {
    if (a == b)
      throw ValidationError("ranking graph: self-edge on node " + to_string(a));
    if (!std::binary_search(g.nodes_.begin(), g.nodes_.end(), a) ||
        !std::binary_search(g.nodes_.begin(), g.nodes_.end(), b))
      throw ValidationError("ranking graph: edge references node outside the node set");
    if (count < 1)
      throw ValidationError("ranking graph: edge count must be >= 1");
    if (std::abs(weight) > 1.0 + 1e-12)
      throw ValidationError("ranking graph: |weight| must be <= 1");
    const EdgeKey key = make_edge_key(a, b);
    const double oriented = (a < b) ? weight : -weight;
    if (g.edges_.contains(key))
      throw ValidationError("ranking graph: duplicate edge");
    g.insert_edge(key, RankingEdge{oriented, count});
  }
  g.finalize();
  return g;
}

void RankingGraph::insert_edge(EdgeKey key, RankingEdge edge) {
  edges_[key] = edge;
  adjacency_[key.first].push_back(key.second);
  adjacency_[key.second].push_back(key.first);
}

void RankingGraph::finalize() {
  for (auto& [id, adj] : adjacency_) std::sort(adj.begin(), adj.end());
}

double RankingGraph::weight(NodeId i, NodeId j) const {
  auto it = edges_.find(make_edge_key(i, j));
  if (it == edges_.end()) return 0.0;
  return i < j ? it->second.weight : -it->second.weight;
}

bool RankingGraph::has_edge(NodeId i, NodeId j) const {
  return edges_.contains(make_edge_key(i, j));
}

bool RankingGraph::has_node(NodeId id) const {
  return std::binary_search(nodes_.begin(), nodes_.end(), id);
}

const std::vector<NodeId>& RankingGraph::neighbors(NodeId id) const {
  auto it = adjacency_.find(id);
  return it == adjacency_.end() ? kNoNeighbors : it->second;
}

RankingGraph aggregate_comparisons(std::vector<NodeId> nodes,
                                   const std::vector<Comparison>& comparisons) {
  RankingGraph g;
  g.nodes_ = sorted_unique(std::move(nodes));
  // Integer sums keep aggregation exact and order-independent.
  std::map<EdgeKey, std::pair<long long, int>> sums;
  for (const Comparison& c : comparisons) {
    if (c.above == c.below)
      throw ValidationError("comparison by node " + to_string(c.ranker) +
                            ": node compared with itself");
    if (!g.has_node(c.above) || !g.has_node(c.below))
      throw ValidationError("comparison by node " + to_string(c.ranker) +
                            ": references node outside the node set");
    auto& [sum, count] = sums[make_edge_key(c.above, c.below)];
    sum += (c.above < c.below) ? +1 : -1;
    ++count;
  }
  for (const auto& [key, sc] : sums) {
    const auto& [sum, count] = sc;
    g.insert_edge(key, RankingEdge{static_cast<double>(sum) / count, count});
  }
  g.finalize();
  return g;
}

RankingGraph build_ranking_graph(const std::vector<Report>& reports,
                                 const SocialNetwork& network,
                                 std::optional<NodeId> exclude) {
  if (exclude && !network.has_node(*exclude))
    throw ValidationError("exclude: node " + to_string(*exclude) +
                          " is not in the network");
  std::set<NodeId> rankers;
  std::vector<Comparison> comparisons;
  for (const Report& report : reports) {
    if (!rankers.insert(report.ranker).second)
      throw ValidationError("duplicate report by node " + to_string(report.ranker));
    auto expanded = pairwise_from_ranking(report, network);
    if (exclude && report.ranker == *exclude) continue;
    comparisons.insert(comparisons.end(), expanded.begin(), expanded.end());
  }
  return aggregate_comparisons(network.nodes(), comparisons);
}

SocialNetwork infer_network(const std::vector<Report>& reports) {
  std::vector<NodeId> nodes;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const Report& report : reports) {
    nodes.push_back(report.ranker);
    for (NodeId id : report.ranking) {
      nodes.push_back(id);
      edges.emplace_back(report.ranker, id);
    }
    for (NodeId id : report.unknown) {
      nodes.push_back(id);
      edges.emplace_back(report.ranker, id);
    }
  }
  return SocialNetwork(std::move(nodes), edges);
}

}  // namespace fbr
