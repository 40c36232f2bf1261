#pragma once

// Domain types for friend-based rank reports over a social network, and the
// aggregation of pairwise comparisons into a weighted ranking graph.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace fbr {

// Opaque, totally ordered node identifier. Unique within a community.
struct NodeId {
  std::int64_t value = 0;
  auto operator<=>(const NodeId&) const = default;
};

inline std::string to_string(NodeId id) { return std::to_string(id.value); }

// Undirected social network constraining who may rank whom.
// No self-loops; immutable after construction.
class SocialNetwork {
 public:
  SocialNetwork() = default;
  SocialNetwork(std::vector<NodeId> nodes, const std::vector<std::pair<NodeId, NodeId>>& edges);

  const std::vector<NodeId>& nodes() const { return nodes_; }  // sorted ascending
  const std::vector<NodeId>& neighbors(NodeId id) const;       // sorted ascending
  bool has_node(NodeId id) const;
  bool has_edge(NodeId a, NodeId b) const;
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  double density() const;  // |E| / C(n,2); 0 when n < 2

 private:
  std::vector<NodeId> nodes_;
  std::map<NodeId, std::vector<NodeId>> adjacency_;
  std::size_t edge_count_ = 0;
};

// One ranker's strict ordering over a subset of their neighbors, lowest
// characteristic first. `unknown` holds neighbors the ranker declined to
// place; those contribute no comparisons.
struct Report {
  NodeId ranker;
  std::vector<NodeId> ranking;
  std::set<NodeId> unknown;
};

// A single pairwise judgment by `ranker`: `above` beats `below`.
// Every comparison counts +1 toward its above node and -1 toward its below.
struct Comparison {
  NodeId above;
  NodeId below;
  NodeId ranker;
};

// Unordered node pair stored as (low, high).
using EdgeKey = std::pair<NodeId, NodeId>;

inline EdgeKey make_edge_key(NodeId a, NodeId b) {
  return a < b ? EdgeKey{a, b} : EdgeKey{b, a};
}

struct RankingEdge {
  double weight = 0.0;  // mean comparison value, oriented low beats high
  int count = 0;        // number of contributing comparisons, >= 1
};

// Aggregated pairwise comparisons: node set plus antisymmetric edge weights
// in [-1, 1] with per-edge counts. Nodes with no incident comparisons stay in
// the node set as isolated nodes.
class RankingGraph {
 public:
  RankingGraph() = default;

  // Direct construction from already-aggregated edges (a, b, Y_ab, count).
  static RankingGraph from_edges(
      std::vector<NodeId> nodes,
      const std::vector<std::tuple<NodeId, NodeId, double, int>>& edges);

  const std::vector<NodeId>& nodes() const { return nodes_; }  // sorted ascending
  const std::map<EdgeKey, RankingEdge>& edges() const { return edges_; }

  // Y_{ij}: positive when i is ranked above j on balance. Antisymmetric.
  // 0 when the pair has no edge.
  double weight(NodeId i, NodeId j) const;
  bool has_edge(NodeId i, NodeId j) const;
  bool has_node(NodeId id) const;
  const std::vector<NodeId>& neighbors(NodeId id) const;  // sorted ascending
  std::size_t degree(NodeId id) const { return neighbors(id).size(); }
  std::size_t edge_count() const { return edges_.size(); }

 private:
  friend RankingGraph aggregate_comparisons(std::vector<NodeId>,
                                            const std::vector<Comparison>&);
  void insert_edge(EdgeKey key, RankingEdge edge);
  void finalize();

  std::vector<NodeId> nodes_;
  std::map<EdgeKey, RankingEdge> edges_;
  std::map<NodeId, std::vector<NodeId>> adjacency_;
};

// Throws ValidationError naming the ranker and the offending node when the
// report breaks an invariant: ranked/unknown nodes must be neighbors of the
// ranker, no self-ranking, no duplicates, ranking and unknown disjoint.
void validate_report(const Report& report, const SocialNetwork& network);

// Expands a strict ranking into all implied pairwise comparisons:
// m ranked nodes yield m(m-1)/2 comparisons. Unknown entries contribute
// nothing. The network overload validates against it first; the other checks
// only the network-free invariants.
std::vector<Comparison> pairwise_from_ranking(const Report& report);
std::vector<Comparison> pairwise_from_ranking(const Report& report,
                                              const SocialNetwork& network);

// Mean aggregation of comparisons over the given node set. Comparisons must
// reference nodes from the set; order of the input never affects the result.
RankingGraph aggregate_comparisons(std::vector<NodeId> nodes,
                                   const std::vector<Comparison>& comparisons);

// Aggregates all reports against the network. At most one report per ranker.
// When `exclude` is set, that node's report is dropped before aggregation;
// the node itself stays in the graph.
RankingGraph build_ranking_graph(const std::vector<Report>& reports,
                                 const SocialNetwork& network,
                                 std::optional<NodeId> exclude = std::nullopt);

// Smallest network consistent with the reports: an edge from each ranker to
// every node they ranked or marked unknown. Used when no explicit network
// file is supplied.
SocialNetwork infer_network(const std::vector<Report>& reports);

}  // namespace fbr
