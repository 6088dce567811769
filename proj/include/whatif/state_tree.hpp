#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "whatif/assignment.hpp"
#include "whatif/demand.hpp"
#include "whatif/error.hpp"
#include "whatif/network.hpp"

namespace whatif {

enum class StateId : std::int64_t {};

constexpr std::int64_t to_int(StateId id) noexcept { return static_cast<std::int64_t>(id); }
inline std::string to_string(StateId id) { return "state " + std::to_string(to_int(id)); }

// The four road-level countermeasures.

struct SetCapacity {
  RoadId road{};
  double capacity = 0.0;
  friend bool operator==(const SetCapacity&, const SetCapacity&) = default;
};

struct SetFftt {
  RoadId road{};
  double fftt = 0.0;
  friend bool operator==(const SetFftt&, const SetFftt&) = default;
};

struct CloseRoad {
  RoadId road{};
  friend bool operator==(const CloseRoad&, const CloseRoad&) = default;
};

struct BuildRoad {
  BuildRoadSpec spec;
  /// Filled in when the modification is applied; replay reuses them.
  std::vector<RoadId> assigned_ids;
  friend bool operator==(const BuildRoad&, const BuildRoad&) = default;
};

using Modification = std::variant<SetCapacity, SetFftt, CloseRoad, BuildRoad>;

inline std::string_view kind_name(const Modification& m) {
  return std::visit(
      [](const auto& v) -> std::string_view {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SetCapacity>) return "set_capacity";
        else if constexpr (std::is_same_v<T, SetFftt>) return "set_fftt";
        else if constexpr (std::is_same_v<T, CloseRoad>) return "close_road";
        else return "build_road";
      },
      m);
}

/// Construction and expansion rates per kilometre.
struct CostParams {
  double surface_per_km = 4'000'000.0;
  double tunnel_per_km = 14'000'000.0;

  void validate() const {
    if (!(surface_per_km > 0.0) || !(tunnel_per_km > 0.0))
      throw ValidationError("cost rates must be positive");
  }
  friend bool operator==(const CostParams&, const CostParams&) = default;
};

/// Applies a modification to a network. BuildRoad without assigned ids draws
/// them from the network.
inline RoadNetwork apply_to_network(const RoadNetwork& network, const Modification& m) {
  return std::visit(
      [&](const auto& v) -> RoadNetwork {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SetCapacity>) return set_capacity(network, v.road, v.capacity);
        else if constexpr (std::is_same_v<T, SetFftt>) return set_fftt(network, v.road, v.fftt);
        else if constexpr (std::is_same_v<T, CloseRoad>) return close_road(network, v.road);
        else return build_road(network, v.spec, v.assigned_ids);
      },
      m);
}

/// Cost of one modification. Capacity increases pay the surface rate over
/// the full road length; new roads pay the surface or tunnel rate per km and
/// per direction. Narrowing, FFTT changes and closures cost nothing.
inline double modification_cost(const RoadNetwork& before, const RoadNetwork& after,
                                 const Modification& m, const CostParams& costs) {
  if (const auto* v = std::get_if<SetCapacity>(&m)) {
    if (v->capacity > before.road(v->road).capacity)
      return costs.surface_per_km * road_length_km(before, v->road);
    return 0.0;
  }
  if (const auto* v = std::get_if<BuildRoad>(&m)) {
    const double rate = v->spec.kind == RoadKind::tunnel ? costs.tunnel_per_km : costs.surface_per_km;
    const double length = road_length_km(after, v->assigned_ids.at(0));
    return rate * length * (v->spec.two_way ? 2.0 : 1.0);
  }
  return 0.0;
}

struct StateNode {
  StateId id{};
  std::optional<StateId> parent;
  std::optional<Modification> modification;
  std::shared_ptr<const RoadNetwork> network;
  std::shared_ptr<const AssignmentResult> assignment;
  double metric = 0.0;
  double step_cost = 0.0;
  double cumulative_cost = 0.0;
  std::vector<StateId> children;
};

/// Relative metric changes; positive means the state is better.
struct MetricDeltas {
  double vs_initial = 0.0;
  double vs_parent = 0.0;
  bool parent_applicable = false;  // false at the root
};

/// A child state computed against a parent but not yet inserted in the tree.
struct PendingState {
  StateId parent{};
  Modification modification;
  std::shared_ptr<const RoadNetwork> network;
  std::shared_ptr<const AssignmentResult> assignment;
  double metric = 0.0;
  double step_cost = 0.0;
};

/// Branching history of network states. The root holds the original
/// network; every other node holds the result of applying one modification
/// to its parent.
///
/// Not internally synchronized for mutation. `prepare` only reads the tree
/// (plus an atomic road-id counter) so it may run concurrently with other
/// const calls; `commit` and `delete_state` need exclusive access.
class StateTree {
 public:
  static StateTree create(RoadNetwork initial, DemandTable demands, AssignmentParams params = {},
                          CostParams costs = {}) {
    params.validate();
    costs.validate();
    initial.validate();
    StateTree tree;
    tree.demands_ = std::move(demands);
    tree.params_ = params;
    tree.costs_ = costs;
    tree.next_road_id_.store(to_int(initial.next_road_id()));

    StateNode root;
    root.id = StateId{0};
    root.network = std::make_shared<const RoadNetwork>(std::move(initial));
    root.assignment =
        std::make_shared<const AssignmentResult>(solve_sue(*root.network, tree.demands_, params));
    root.metric = total_system_travel_time(*root.assignment);
    tree.nodes_.emplace(root.id, std::move(root));
    tree.next_state_id_ = 1;
    return tree;
  }

  StateTree(const StateTree& other)
      : demands_(other.demands_),
        params_(other.params_),
        costs_(other.costs_),
        nodes_(other.nodes_),
        next_state_id_(other.next_state_id_),
        next_road_id_(other.next_road_id_.load()) {}
  StateTree(StateTree&& other) noexcept
      : demands_(std::move(other.demands_)),
        params_(other.params_),
        costs_(other.costs_),
        nodes_(std::move(other.nodes_)),
        next_state_id_(other.next_state_id_),
        next_road_id_(other.next_road_id_.load()) {}
  StateTree& operator=(StateTree other) noexcept {
    demands_ = std::move(other.demands_);
    params_ = other.params_;
    costs_ = other.costs_;
    nodes_ = std::move(other.nodes_);
    next_state_id_ = other.next_state_id_;
    next_road_id_.store(other.next_road_id_.load());
    return *this;
  }

  StateId root_id() const noexcept { return StateId{0}; }
  const StateNode& root() const { return node(root_id()); }
  const DemandTable& demands() const noexcept { return demands_; }
  const AssignmentParams& assignment_params() const noexcept { return params_; }
  const CostParams& cost_params() const noexcept { return costs_; }
  const std::map<StateId, StateNode>& nodes() const noexcept { return nodes_; }
  StateId next_state_id() const noexcept { return StateId{next_state_id_}; }

  bool contains(StateId id) const { return nodes_.contains(id); }

  const StateNode& node(StateId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw NotFoundError("unknown " + to_string(id));
    return it->second;
  }

  /// Builds the child network and solves its assignment without touching
  /// the tree.
  PendingState prepare(StateId parent_id, Modification modification) const {
    const StateNode& parent = node(parent_id);
    if (auto* build = std::get_if<BuildRoad>(&modification)) {
      const std::size_t count = build->spec.two_way ? 2 : 1;
      if (build->assigned_ids.empty()) {
        const std::int64_t first = next_road_id_.fetch_add(static_cast<std::int64_t>(count));
        for (std::size_t i = 0; i < count; ++i)
          build->assigned_ids.push_back(RoadId{first + static_cast<std::int64_t>(i)});
      } else {
        reserve_road_ids(build->assigned_ids);
      }
    }
    auto network = std::make_shared<const RoadNetwork>(apply_to_network(*parent.network, modification));
    auto assignment = std::make_shared<const AssignmentResult>(solve_sue(*network, demands_, params_));
    PendingState out;
    out.parent = parent_id;
    out.step_cost = modification_cost(*parent.network, *network, modification, costs_);
    out.metric = total_system_travel_time(*assignment);
    out.modification = std::move(modification);
    out.network = std::move(network);
    out.assignment = std::move(assignment);
    return out;
  }

  /// Inserts a prepared child. Fails when its parent was deleted meanwhile.
  StateId commit(PendingState pending) {
    auto parent_it = nodes_.find(pending.parent);
    if (parent_it == nodes_.end())
      throw NotFoundError("parent " + to_string(pending.parent) + " no longer exists");
    StateNode child;
    child.id = StateId{next_state_id_++};
    child.parent = pending.parent;
    child.modification = std::move(pending.modification);
    child.network = std::move(pending.network);
    child.assignment = std::move(pending.assignment);
    child.metric = pending.metric;
    child.step_cost = pending.step_cost;
    child.cumulative_cost = parent_it->second.cumulative_cost + pending.step_cost;
    parent_it->second.children.push_back(child.id);
    const StateId id = child.id;
    nodes_.emplace(id, std::move(child));
    return id;
  }

  StateId apply_modification(StateId parent, Modification modification) {
    return commit(prepare(parent, std::move(modification)));
  }

  /// Removes a state with all its descendants; returns their ids in
  /// pre-order.
  std::vector<StateId> delete_state(StateId id) {
    const StateNode& target = node(id);
    if (!target.parent) throw ConflictError("the root state cannot be deleted");
    std::vector<StateId> removed;
    std::vector<StateId> stack{id};
    while (!stack.empty()) {
      const StateId cur = stack.back();
      stack.pop_back();
      removed.push_back(cur);
      const auto& kids = nodes_.at(cur).children;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    auto& siblings = nodes_.at(*target.parent).children;
    siblings.erase(std::remove(siblings.begin(), siblings.end(), id), siblings.end());
    for (StateId r : removed) nodes_.erase(r);
    return removed;
  }

  MetricDeltas metric_deltas(StateId id) const {
    const StateNode& n = node(id);
    auto rel = [](double base, double cur) { return base == 0.0 ? 0.0 : (base - cur) / base; };
    MetricDeltas d;
    d.vs_initial = rel(root().metric, n.metric);
    if (n.parent) {
      d.vs_parent = rel(node(*n.parent).metric, n.metric);
      d.parent_applicable = true;
    }
    return d;
  }

  /// Ids from the root down to `id`, inclusive.
  std::vector<StateId> lineage(StateId id) const {
    std::vector<StateId> out;
    for (std::optional<StateId> cur = id; cur; cur = node(*cur).parent) out.push_back(*cur);
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  friend class SessionCodec;

  StateTree() = default;

  void reserve_road_ids(const std::vector<RoadId>& ids) const {
    for (RoadId r : ids) {
      std::int64_t cur = next_road_id_.load();
      while (cur <= to_int(r) && !next_road_id_.compare_exchange_weak(cur, to_int(r) + 1)) {
      }
    }
  }

  DemandTable demands_;
  AssignmentParams params_;
  CostParams costs_;
  std::map<StateId, StateNode> nodes_;
  std::int64_t next_state_id_ = 0;
  mutable std::atomic<std::int64_t> next_road_id_{1};
};

}  // namespace whatif
