#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "whatif/error.hpp"

namespace whatif {

enum class NodeId : std::int64_t {};
enum class RoadId : std::int64_t {};

constexpr std::int64_t to_int(NodeId id) noexcept { return static_cast<std::int64_t>(id); }
constexpr std::int64_t to_int(RoadId id) noexcept { return static_cast<std::int64_t>(id); }

inline std::string to_string(NodeId id) { return "node " + std::to_string(to_int(id)); }
inline std::string to_string(RoadId id) { return "road " + std::to_string(to_int(id)); }

/// How intersection coordinates are interpreted.
///  - lonlat: x = longitude, y = latitude, in degrees; lengths by great-circle distance.
///  - planar: arbitrary cartesian units scaled by `km_per_unit`.
enum class Projection { lonlat, planar };

inline constexpr double kEarthRadiusKm = 6371.0;

struct Position {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Position&, const Position&) = default;
};

struct Intersection {
  NodeId id{};
  Position position;

  friend bool operator==(const Intersection&, const Intersection&) = default;
};

/// Construction type of a road, relevant only for costing.
enum class RoadKind { surface, tunnel };

struct Road {
  RoadId id{};
  NodeId from{};
  NodeId to{};
  double capacity = 0.0;  // vehicles per unit time
  double fftt = 0.0;      // free-flow travel time
  /// Authoritative length supplied by an input file. Absent means "derive
  /// from endpoint geometry".
  std::optional<double> length_km;
  RoadKind kind = RoadKind::surface;

  friend bool operator==(const Road&, const Road&) = default;
};

/// Great-circle distance between two lon/lat positions (degrees).
inline double haversine_km(Position a, Position b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double phi1 = a.y * deg;
  const double phi2 = b.y * deg;
  const double dphi = (b.y - a.y) * deg;
  const double dlambda = (b.x - a.x) * deg;
  const double s = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

/// Directed road graph with static attributes.
///
/// A network is filled once through add_node/add_road and then treated as an
/// immutable value; the edit functions below (set_capacity, close_road, ...)
/// return modified copies. Nodes and roads are kept ordered by id so that
/// every traversal is deterministic.
class RoadNetwork {
 public:
  explicit RoadNetwork(Projection projection = Projection::lonlat, double km_per_unit = 1.0)
      : projection_(projection), km_per_unit_(km_per_unit) {
    if (!(km_per_unit > 0.0)) throw ValidationError("planar scale must be positive");
  }

  Projection projection() const noexcept { return projection_; }
  double km_per_unit() const noexcept { return km_per_unit_; }

  const std::map<NodeId, Intersection>& nodes() const noexcept { return nodes_; }
  const std::map<RoadId, Road>& roads() const noexcept { return roads_; }

  /// Smallest id never handed out in this network's lineage.
  RoadId next_road_id() const noexcept { return next_road_id_; }

  bool has_node(NodeId id) const { return nodes_.contains(id); }

  const Intersection& node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw NotFoundError("unknown " + to_string(id));
    return it->second;
  }

  const Road* find_road(RoadId id) const {
    auto it = roads_.find(id);
    return it == roads_.end() ? nullptr : &it->second;
  }

  const Road& road(RoadId id) const {
    if (const Road* r = find_road(id)) return *r;
    throw NotFoundError("unknown " + to_string(id));
  }

  const Road* find_road_between(NodeId from, NodeId to) const {
    for (const auto& [id, r] : roads_)
      if (r.from == from && r.to == to) return &r;
    return nullptr;
  }

  void add_node(const Intersection& node) {
    check_position(node);
    if (!nodes_.emplace(node.id, node).second)
      throw ValidationError("duplicate " + to_string(node.id));
  }

  /// Replace the position of an existing node (used when coordinates arrive
  /// from a separate file).
  void set_position(NodeId id, Position p) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw NotFoundError("unknown " + to_string(id));
    Intersection updated{id, p};
    check_position(updated);
    it->second = updated;
  }

  void add_road(const Road& road) {
    check_road(road);
    if (roads_.contains(road.id)) throw ValidationError("duplicate " + to_string(road.id));
    if (find_road_between(road.from, road.to))
      throw ValidationError("a road from " + to_string(road.from) + " to " + to_string(road.to) +
                            " already exists");
    roads_.emplace(road.id, road);
    next_road_id_ = RoadId{std::max(to_int(next_road_id_), to_int(road.id) + 1)};
  }

  void reserve_road_ids(RoadId next) {
    next_road_id_ = RoadId{std::max(to_int(next_road_id_), to_int(next))};
  }

  /// Re-checks every invariant; throws ValidationError on the first violation.
  void validate() const {
    for (const auto& [id, n] : nodes_) check_position(n);
    std::map<std::pair<NodeId, NodeId>, RoadId> seen;
    for (const auto& [id, r] : roads_) {
      check_road(r);
      if (!seen.emplace(std::pair{r.from, r.to}, id).second)
        throw ValidationError("parallel roads between " + to_string(r.from) + " and " +
                              to_string(r.to));
    }
  }

  friend bool operator==(const RoadNetwork&, const RoadNetwork&) = default;

 private:
  friend RoadNetwork close_road(const RoadNetwork&, RoadId);
  friend RoadNetwork set_capacity(const RoadNetwork&, RoadId, double);
  friend RoadNetwork set_fftt(const RoadNetwork&, RoadId, double);

  void check_position(const Intersection& n) const {
    if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y))
      throw ValidationError(to_string(n.id) + " has a non-finite position");
    if (projection_ == Projection::lonlat &&
        (std::abs(n.position.x) > 180.0 || std::abs(n.position.y) > 90.0))
      throw ValidationError(to_string(n.id) + " lies outside longitude/latitude range");
  }

  void check_road(const Road& r) const {
    if (!nodes_.contains(r.from) || !nodes_.contains(r.to))
      throw ValidationError(to_string(r.id) + " references a missing endpoint");
    if (r.from == r.to) throw ValidationError(to_string(r.id) + " is a self-loop");
    if (!(r.capacity > 0.0) || !std::isfinite(r.capacity))
      throw ValidationError(to_string(r.id) + " capacity must be positive");
    if (!(r.fftt > 0.0) || !std::isfinite(r.fftt))
      throw ValidationError(to_string(r.id) + " free-flow time must be positive");
    if (r.length_km && !(*r.length_km >= 0.0))
      throw ValidationError(to_string(r.id) + " length must be nonnegative");
  }

  Projection projection_;
  double km_per_unit_;
  std::map<NodeId, Intersection> nodes_;
  std::map<RoadId, Road> roads_;
  RoadId next_road_id_{1};
};

/// Distance between two nodes under the network's projection.
inline double distance_km(const RoadNetwork& network, NodeId a, NodeId b) {
  const Position pa = network.node(a).position;
  const Position pb = network.node(b).position;
  if (network.projection() == Projection::lonlat) return haversine_km(pa, pb);
  return std::hypot(pb.x - pa.x, pb.y - pa.y) * network.km_per_unit();
}

/// File-supplied length when present, otherwise endpoint distance.
inline double road_length_km(const RoadNetwork& network, RoadId id) {
  const Road& r = network.road(id);
  if (r.length_km) return *r.length_km;
  if (!network.has_node(r.from) || !network.has_node(r.to))
    throw ValidationError(to_string(id) + " references a missing endpoint");
  return distance_km(network, r.from, r.to);
}

inline RoadNetwork set_capacity(const RoadNetwork& network, RoadId id, double capacity) {
  if (!(capacity > 0.0) || !std::isfinite(capacity))
    throw ValidationError("capacity must be positive");
  network.road(id);
  RoadNetwork out = network;
  out.roads_.at(id).capacity = capacity;
  return out;
}

inline RoadNetwork set_fftt(const RoadNetwork& network, RoadId id, double fftt) {
  if (!(fftt > 0.0) || !std::isfinite(fftt))
    throw ValidationError("free-flow time must be positive");
  network.road(id);
  RoadNetwork out = network;
  out.roads_.at(id).fftt = fftt;
  return out;
}

/// Removes a road. Its endpoints stay in the network even when isolated.
inline RoadNetwork close_road(const RoadNetwork& network, RoadId id) {
  network.road(id);
  RoadNetwork out = network;
  out.roads_.erase(id);
  return out;
}

struct BuildRoadSpec {
  NodeId from{};
  NodeId to{};
  bool two_way = false;
  RoadKind kind = RoadKind::surface;
  std::optional<double> capacity;
  std::optional<double> fftt;

  friend bool operator==(const BuildRoadSpec&, const BuildRoadSpec&) = default;
};

/// Defaults for a new road: mean capacity of the existing roads, and a
/// free-flow time scaled from the network-wide FFTT-per-km ratio.
struct NewRoadDefaults {
  double capacity = 0.0;
  double fftt_per_km = 0.0;
};

inline NewRoadDefaults new_road_defaults(const RoadNetwork& network) {
  if (network.roads().empty())
    throw ValidationError("cannot derive new-road defaults from a network without roads");
  double cap = 0.0, fftt = 0.0, len = 0.0;
  for (const auto& [id, r] : network.roads()) {
    cap += r.capacity;
    fftt += r.fftt;
    len += road_length_km(network, id);
  }
  const double n = static_cast<double>(network.roads().size());
  if (!(len > 0.0))
    throw ValidationError("cannot derive a default free-flow time: existing roads have zero length");
  return {cap / n, (fftt / n) / (len / n)};
}

/// Adds one road (or a pair of opposite roads when two_way). `ids` may supply
/// the ids to use; otherwise fresh ids are drawn from the network.
inline RoadNetwork build_road(const RoadNetwork& network, const BuildRoadSpec& spec,
                              std::span<const RoadId> ids = {}) {
  if (!network.has_node(spec.from)) throw NotFoundError("unknown " + to_string(spec.from));
  if (!network.has_node(spec.to)) throw NotFoundError("unknown " + to_string(spec.to));
  if (spec.from == spec.to) throw ValidationError("a road needs two distinct endpoints");
  const std::size_t count = spec.two_way ? 2 : 1;
  if (!ids.empty() && ids.size() != count)
    throw ValidationError("expected " + std::to_string(count) + " road ids");

  if (network.find_road_between(spec.from, spec.to))
    throw ValidationError("a road from " + to_string(spec.from) + " to " + to_string(spec.to) +
                          " already exists");
  if (spec.two_way && network.find_road_between(spec.to, spec.from))
    throw ValidationError("a road from " + to_string(spec.to) + " to " + to_string(spec.from) +
                          " already exists");

  const double length = distance_km(network, spec.from, spec.to);
  double capacity = 0.0, fftt = 0.0;
  if (!spec.capacity || !spec.fftt) {
    const NewRoadDefaults d = new_road_defaults(network);
    capacity = d.capacity;
    fftt = d.fftt_per_km * length;
  }
  if (spec.capacity) capacity = *spec.capacity;
  if (spec.fftt) fftt = *spec.fftt;

  RoadNetwork out = network;
  std::int64_t next = to_int(network.next_road_id());
  auto id_at = [&](std::size_t i) { return ids.empty() ? RoadId{next + static_cast<std::int64_t>(i)} : ids[i]; };
  out.add_road(Road{id_at(0), spec.from, spec.to, capacity, fftt, std::nullopt, spec.kind});
  if (spec.two_way)
    out.add_road(Road{id_at(1), spec.to, spec.from, capacity, fftt, std::nullopt, spec.kind});
  return out;
}

/// Equality on (nodes, {from, to, capacity, fftt, length}) ignoring road ids.
inline bool structurally_equal(const RoadNetwork& a, const RoadNetwork& b) {
  if (a.nodes() != b.nodes() || a.roads().size() != b.roads().size()) return false;
  using Key = std::tuple<NodeId, NodeId, double, double, double>;
  auto keys = [](const RoadNetwork& n) {
    std::vector<Key> out;
    for (const auto& [id, r] : n.roads())
      out.emplace_back(r.from, r.to, r.capacity, r.fftt, road_length_km(n, id));
    std::sort(out.begin(), out.end());
    return out;
  };
  return keys(a) == keys(b);
}

}  // namespace whatif
