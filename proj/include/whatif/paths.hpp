#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "whatif/demand.hpp"
#include "whatif/error.hpp"
#include "whatif/network.hpp"

namespace whatif {

struct Path {
  OdPair od;
  std::vector<RoadId> roads;
  double flow = 0.0;
  double travel_time = 0.0;

  friend bool operator==(const Path&, const Path&) = default;
};

/// Networks at or below this many nodes get every simple path.
inline constexpr std::size_t kExhaustivePathNodeLimit = 8;

namespace detail {

/// Outgoing roads per node, each list ordered by road id.
class Adjacency {
 public:
  explicit Adjacency(const RoadNetwork& network) {
    for (const auto& [id, r] : network.roads()) out_[r.from].push_back(&r);
  }

  const std::vector<const Road*>& out(NodeId n) const {
    static const std::vector<const Road*> none;
    auto it = out_.find(n);
    return it == out_.end() ? none : it->second;
  }

 private:
  std::map<NodeId, std::vector<const Road*>> out_;
};

struct Candidate {
  double cost = 0.0;
  std::vector<RoadId> roads;

  friend bool operator<(const Candidate& a, const Candidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.roads < b.roads;
  }
};

inline double fftt_cost(const RoadNetwork& network, const std::vector<RoadId>& roads) {
  double c = 0.0;
  for (RoadId r : roads) c += network.road(r).fftt;
  return c;
}

/// Depth-first enumeration of all simple paths.
inline void all_simple_paths(const RoadNetwork& network, const Adjacency& adj, NodeId at,
                             NodeId target, std::set<NodeId>& visited, std::vector<RoadId>& stack,
                             std::vector<Candidate>& out) {
  if (at == target) {
    out.push_back({fftt_cost(network, stack), stack});
    return;
  }
  for (const Road* r : adj.out(at)) {
    if (visited.contains(r->to)) continue;
    visited.insert(r->to);
    stack.push_back(r->id);
    all_simple_paths(network, adj, r->to, target, visited, stack, out);
    stack.pop_back();
    visited.erase(r->to);
  }
}

/// Dijkstra on free-flow times with ties broken by the lexicographically
/// smallest road-id sequence. Roads and nodes in the blocked sets are skipped.
inline std::optional<std::vector<RoadId>> shortest_path(const Adjacency& adj, NodeId source,
                                                        NodeId target,
                                                        const std::set<RoadId>& blocked_roads,
                                                        const std::set<NodeId>& blocked_nodes) {
  struct Label {
    double dist;
    std::vector<RoadId> roads;
    NodeId node;
  };
  auto worse = [](const Label& a, const Label& b) {
    if (a.dist != b.dist) return a.dist > b.dist;
    return a.roads > b.roads;
  };
  std::map<NodeId, Candidate> best;
  std::set<NodeId> settled;
  std::priority_queue<Label, std::vector<Label>, decltype(worse)> queue(worse);
  best[source] = {0.0, {}};
  queue.push({0.0, {}, source});
  while (!queue.empty()) {
    Label cur = queue.top();
    queue.pop();
    if (settled.contains(cur.node)) continue;
    settled.insert(cur.node);
    if (cur.node == target) return cur.roads;
    for (const Road* r : adj.out(cur.node)) {
      if (blocked_roads.contains(r->id) || blocked_nodes.contains(r->to) || settled.contains(r->to))
        continue;
      Candidate next{cur.dist + r->fftt, cur.roads};
      next.roads.push_back(r->id);
      auto it = best.find(r->to);
      if (it == best.end() || next < it->second) {
        best[r->to] = next;
        queue.push({next.cost, next.roads, r->to});
      }
    }
  }
  return std::nullopt;
}

inline std::vector<NodeId> path_nodes(const RoadNetwork& network, NodeId origin,
                                      const std::vector<RoadId>& roads) {
  std::vector<NodeId> nodes{origin};
  for (RoadId r : roads) nodes.push_back(network.road(r).to);
  return nodes;
}

/// Yen's K shortest loopless paths.
inline std::vector<Candidate> yen_k_shortest(const RoadNetwork& network, const Adjacency& adj,
                                             NodeId origin, NodeId destination, std::size_t k) {
  std::vector<Candidate> accepted;
  auto first = shortest_path(adj, origin, destination, {}, {});
  if (!first) return accepted;
  accepted.push_back({fftt_cost(network, *first), *first});

  std::set<Candidate> pending;
  while (accepted.size() < k) {
    const std::vector<RoadId> prev = accepted.back().roads;
    const std::vector<NodeId> prev_nodes = path_nodes(network, origin, prev);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const NodeId spur = prev_nodes[i];
      const std::vector<RoadId> root(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(i));

      std::set<RoadId> blocked_roads;
      for (const Candidate& a : accepted)
        if (a.roads.size() > i && std::equal(root.begin(), root.end(), a.roads.begin()))
          blocked_roads.insert(a.roads[i]);
      std::set<NodeId> blocked_nodes(prev_nodes.begin(), prev_nodes.begin() + static_cast<std::ptrdiff_t>(i));

      auto tail = shortest_path(adj, spur, destination, blocked_roads, blocked_nodes);
      if (!tail) continue;
      std::vector<RoadId> full = root;
      full.insert(full.end(), tail->begin(), tail->end());
      Candidate c{fftt_cost(network, full), std::move(full)};
      bool known = false;
      for (const Candidate& a : accepted)
        if (a.roads == c.roads) known = true;
      if (!known) pending.insert(std::move(c));
    }
    if (pending.empty()) break;
    accepted.push_back(*pending.begin());
    pending.erase(pending.begin());
  }
  return accepted;
}

}  // namespace detail

/// Candidate route set for one OD pair, shortest free-flow time first with
/// ties broken lexicographically on road ids. Small networks (at most
/// kExhaustivePathNodeLimit nodes) return every simple path; larger ones the
/// `k_paths` shortest loopless paths.
inline std::vector<Path> enumerate_paths(const RoadNetwork& network, OdPair od, std::size_t k_paths) {
  if (k_paths < 1) throw ValidationError("k_paths must be at least 1");
  if (od.origin == od.destination)
    throw ValidationError("OD pair " + to_string(od) + " has identical origin and destination");
  if (!network.has_node(od.origin) || !network.has_node(od.destination))
    throw UnreachableOdError("OD pair " + to_string(od) + " references a node outside the network");

  const detail::Adjacency adj(network);
  std::vector<detail::Candidate> found;
  if (network.nodes().size() <= kExhaustivePathNodeLimit) {
    std::set<NodeId> visited{od.origin};
    std::vector<RoadId> stack;
    detail::all_simple_paths(network, adj, od.origin, od.destination, visited, stack, found);
    std::sort(found.begin(), found.end());
  } else {
    found = detail::yen_k_shortest(network, adj, od.origin, od.destination, k_paths);
  }
  if (found.empty()) throw UnreachableOdError("OD pair " + to_string(od) + " is unreachable");

  std::vector<Path> paths;
  paths.reserve(found.size());
  for (auto& c : found) paths.push_back(Path{od, std::move(c.roads), 0.0, 0.0});
  return paths;
}

}  // namespace whatif
