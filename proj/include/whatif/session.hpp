#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "whatif/error.hpp"
#include "whatif/network.hpp"
#include "whatif/state_tree.hpp"

// Session documents: the full state tree as one JSON text.
//
// Only inputs are stored (root network, demand, parameters and the
// modification of every node); assignments are recomputed on load and the
// stored metrics and costs must be reproduced. Output is canonical: keys
// sorted, two-space indentation, LF newlines, floats with 17 significant
// digits.

namespace whatif {

inline constexpr int kSessionSchemaVersion = 1;

namespace json_detail {

using nlohmann::json;

inline void write_number(std::string& out, const json& v) {
  if (v.is_number_integer()) {
    out += std::to_string(v.get<std::int64_t>());
    return;
  }
  if (v.is_number_unsigned()) {
    out += std::to_string(v.get<std::uint64_t>());
    return;
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError("cannot serialize a non-finite number");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  out += buf;
}

inline void write_canonical(std::string& out, const json& v, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, item] : v.items()) {  // std::map order: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += inner + json(key).dump() + ": ";
        write_canonical(out, item, indent + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        write_canonical(out, v[i], indent + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float:
      write_number(out, v);
      return;
    default:
      out += v.dump();
  }
}

template <typename T>
T field(const json& obj, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError("missing field '" + std::string(key) + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError("field '" + std::string(key) + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& obj, std::string_view key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ValidationError("field '" + std::string(key) + "' has the wrong type");
  }
}

inline void require_object(const json& v, std::string_view what) {
  if (!v.is_object()) throw ValidationError(std::string(what) + " must be a JSON object");
}

}  // namespace json_detail

/// Canonical text of any JSON value (sorted keys, %.17g floats, LF, no
/// trailing newline).
inline std::string canonical_dump(const nlohmann::json& v) {
  std::string out;
  json_detail::write_canonical(out, v, 0);
  return out;
}

inline std::string_view road_kind_name(RoadKind k) { return k == RoadKind::tunnel ? "tunnel" : "surface"; }

inline RoadKind parse_road_kind(std::string_view s) {
  if (s == "surface") return RoadKind::surface;
  if (s == "tunnel") return RoadKind::tunnel;
  throw ValidationError("road kind must be 'surface' or 'tunnel'");
}

inline nlohmann::json modification_to_json(const Modification& m) {
  nlohmann::json j;
  j["kind"] = std::string(kind_name(m));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, SetCapacity>) {
          j["road"] = to_int(v.road);
          j["capacity_veh_per_hr"] = v.capacity;
        } else if constexpr (std::is_same_v<T, SetFftt>) {
          j["road"] = to_int(v.road);
          j["fftt_min"] = v.fftt;
        } else if constexpr (std::is_same_v<T, CloseRoad>) {
          j["road"] = to_int(v.road);
        } else {
          j["from"] = to_int(v.spec.from);
          j["to"] = to_int(v.spec.to);
          j["two_way"] = v.spec.two_way;
          j["road_kind"] = std::string(road_kind_name(v.spec.kind));
          if (v.spec.capacity) j["capacity_veh_per_hr"] = *v.spec.capacity;
          if (v.spec.fftt) j["fftt_min"] = *v.spec.fftt;
          if (!v.assigned_ids.empty()) {
            auto ids = nlohmann::json::array();
            for (RoadId r : v.assigned_ids) ids.push_back(to_int(r));
            j["assigned_road_ids"] = ids;
          }
        }
      },
      m);
  return j;
}

inline Modification modification_from_json(const nlohmann::json& j) {
  using json_detail::field;
  using json_detail::optional_field;
  json_detail::require_object(j, "modification");
  const auto kind = field<std::string>(j, "kind");
  if (kind == "set_capacity")
    return SetCapacity{RoadId{field<std::int64_t>(j, "road")}, field<double>(j, "capacity_veh_per_hr")};
  if (kind == "set_fftt") return SetFftt{RoadId{field<std::int64_t>(j, "road")}, field<double>(j, "fftt_min")};
  if (kind == "close_road") return CloseRoad{RoadId{field<std::int64_t>(j, "road")}};
  if (kind == "build_road") {
    BuildRoad b;
    b.spec.from = NodeId{field<std::int64_t>(j, "from")};
    b.spec.to = NodeId{field<std::int64_t>(j, "to")};
    b.spec.two_way = optional_field<bool>(j, "two_way").value_or(false);
    b.spec.kind = parse_road_kind(optional_field<std::string>(j, "road_kind").value_or("surface"));
    b.spec.capacity = optional_field<double>(j, "capacity_veh_per_hr");
    b.spec.fftt = optional_field<double>(j, "fftt_min");
    if (auto ids = optional_field<std::vector<std::int64_t>>(j, "assigned_road_ids"))
      for (auto id : *ids) b.assigned_ids.push_back(RoadId{id});
    return b;
  }
  throw ValidationError("unknown modification kind '" + kind + "'");
}

inline nlohmann::json network_to_json(const RoadNetwork& network) {
  nlohmann::json j;
  j["projection"] = network.projection() == Projection::lonlat ? "lonlat" : "planar";
  j["km_per_unit"] = network.km_per_unit();
  auto nodes = nlohmann::json::array();
  for (const auto& [id, n] : network.nodes())
    nodes.push_back({{"id", to_int(id)}, {"x", n.position.x}, {"y", n.position.y}});
  j["nodes"] = nodes;
  auto roads = nlohmann::json::array();
  for (const auto& [id, r] : network.roads()) {
    nlohmann::json jr{{"id", to_int(id)},
                      {"from", to_int(r.from)},
                      {"to", to_int(r.to)},
                      {"capacity_veh_per_hr", r.capacity},
                      {"fftt_min", r.fftt},
                      {"road_kind", std::string(road_kind_name(r.kind))}};
    if (r.length_km) jr["length_km"] = *r.length_km;
    roads.push_back(jr);
  }
  j["roads"] = roads;
  j["next_road_id"] = to_int(network.next_road_id());
  return j;
}

inline RoadNetwork network_from_json(const nlohmann::json& j) {
  using json_detail::field;
  using json_detail::optional_field;
  json_detail::require_object(j, "network");
  const auto proj = field<std::string>(j, "projection");
  if (proj != "lonlat" && proj != "planar") throw ValidationError("projection must be 'lonlat' or 'planar'");
  RoadNetwork n(proj == "lonlat" ? Projection::lonlat : Projection::planar,
                optional_field<double>(j, "km_per_unit").value_or(1.0));
  for (const auto& jn : field<nlohmann::json>(j, "nodes")) {
    json_detail::require_object(jn, "node");
    n.add_node({NodeId{field<std::int64_t>(jn, "id")}, {field<double>(jn, "x"), field<double>(jn, "y")}});
  }
  for (const auto& jr : field<nlohmann::json>(j, "roads")) {
    json_detail::require_object(jr, "road");
    n.add_road(Road{RoadId{field<std::int64_t>(jr, "id")}, NodeId{field<std::int64_t>(jr, "from")},
                    NodeId{field<std::int64_t>(jr, "to")}, field<double>(jr, "capacity_veh_per_hr"),
                    field<double>(jr, "fftt_min"), optional_field<double>(jr, "length_km"),
                    parse_road_kind(optional_field<std::string>(jr, "road_kind").value_or("surface"))});
  }
  if (auto next = optional_field<std::int64_t>(j, "next_road_id")) n.reserve_road_ids(RoadId{*next});
  return n;
}

inline nlohmann::json demand_to_json(const DemandTable& demands) {
  auto out = nlohmann::json::array();
  for (const auto& [od, trips] : demands)
    out.push_back({{"origin", to_int(od.origin)}, {"destination", to_int(od.destination)}, {"trips", trips}});
  return out;
}

inline DemandTable demand_from_json(const nlohmann::json& j) {
  using json_detail::field;
  if (!j.is_array()) throw ValidationError("demand must be an array");
  DemandTable out;
  for (const auto& e : j) {
    json_detail::require_object(e, "demand entry");
    add_demand(out, {NodeId{field<std::int64_t>(e, "origin")}, NodeId{field<std::int64_t>(e, "destination")}},
               field<double>(e, "trips"));
  }
  return out;
}

inline nlohmann::json assignment_params_to_json(const AssignmentParams& p) {
  return {{"theta", p.theta},
          {"k_paths", p.k_paths},
          {"max_iters", p.max_iters},
          {"rel_gap_tol", p.rel_gap_tol},
          {"sra_big_step", p.sra_big_step},
          {"sra_small_step", p.sra_small_step}};
}

inline AssignmentParams assignment_params_from_json(const nlohmann::json& j) {
  using json_detail::optional_field;
  json_detail::require_object(j, "assignment parameters");
  AssignmentParams p;
  p.theta = optional_field<double>(j, "theta").value_or(p.theta);
  p.k_paths = optional_field<std::size_t>(j, "k_paths").value_or(p.k_paths);
  p.max_iters = optional_field<std::size_t>(j, "max_iters").value_or(p.max_iters);
  p.rel_gap_tol = optional_field<double>(j, "rel_gap_tol").value_or(p.rel_gap_tol);
  p.sra_big_step = optional_field<double>(j, "sra_big_step").value_or(p.sra_big_step);
  p.sra_small_step = optional_field<double>(j, "sra_small_step").value_or(p.sra_small_step);
  p.validate();
  return p;
}

inline nlohmann::json cost_params_to_json(const CostParams& c) {
  return {{"surface_per_km", c.surface_per_km}, {"tunnel_per_km", c.tunnel_per_km}};
}

inline CostParams cost_params_from_json(const nlohmann::json& j) {
  using json_detail::optional_field;
  json_detail::require_object(j, "cost parameters");
  CostParams c;
  c.surface_per_km = optional_field<double>(j, "surface_per_km").value_or(c.surface_per_km);
  c.tunnel_per_km = optional_field<double>(j, "tunnel_per_km").value_or(c.tunnel_per_km);
  c.validate();
  return c;
}

/// Reads and writes StateTree documents.
class SessionCodec {
 public:
  static nlohmann::json to_json(const StateTree& tree) {
    nlohmann::json j;
    j["schema_version"] = kSessionSchemaVersion;
    j["assignment"] = assignment_params_to_json(tree.params_);
    j["costs"] = cost_params_to_json(tree.costs_);
    j["network"] = network_to_json(*tree.root().network);
    j["demand"] = demand_to_json(tree.demands_);
    j["next_state_id"] = tree.next_state_id_;
    j["next_road_id"] = tree.next_road_id_.load();
    auto states = nlohmann::json::array();
    for (const auto& [id, n] : tree.nodes_) {
      nlohmann::json s;
      s["id"] = to_int(id);
      s["parent"] = n.parent ? nlohmann::json(to_int(*n.parent)) : nlohmann::json(nullptr);
      s["modification"] = n.modification ? modification_to_json(*n.modification) : nlohmann::json(nullptr);
      s["metric_veh_min"] = n.metric;
      s["step_cost"] = n.step_cost;
      s["cumulative_cost"] = n.cumulative_cost;
      states.push_back(s);
    }
    j["states"] = states;
    return j;
  }

  static StateTree from_json(const nlohmann::json& j) {
    using json_detail::field;
    json_detail::require_object(j, "session");
    const auto version = field<int>(j, "schema_version");
    if (version != kSessionSchemaVersion)
      throw ValidationError("unsupported schema_version " + std::to_string(version) + " (expected " +
                            std::to_string(kSessionSchemaVersion) + ")");

    const auto states = field<nlohmann::json>(j, "states");
    if (!states.is_array() || states.empty()) throw ValidationError("session has no states");

    // Check references before any solving.
    std::map<std::int64_t, const nlohmann::json*> by_id;
    for (const auto& s : states) {
      json_detail::require_object(s, "state");
      if (!by_id.emplace(field<std::int64_t>(s, "id"), &s).second)
        throw ValidationError("duplicate state id " + std::to_string(field<std::int64_t>(s, "id")));
    }
    if (by_id.begin()->first != 0 || json_detail::optional_field<std::int64_t>(*by_id.begin()->second, "parent"))
      throw ValidationError("state 0 must be the parentless root");
    for (const auto& [id, s] : by_id) {
      if (id == 0) continue;
      const auto parent = json_detail::optional_field<std::int64_t>(*s, "parent");
      if (!parent) throw ValidationError("state " + std::to_string(id) + " has no parent");
      if (!by_id.contains(*parent) || *parent >= id)
        throw ValidationError("state " + std::to_string(id) + " cites missing parent " + std::to_string(*parent));
      if (!s->contains("modification") || s->at("modification").is_null())
        throw ValidationError("state " + std::to_string(id) + " has no modification");
    }

    StateTree tree = StateTree::create(network_from_json(field<nlohmann::json>(j, "network")),
                                       demand_from_json(field<nlohmann::json>(j, "demand")),
                                       assignment_params_from_json(field<nlohmann::json>(j, "assignment")),
                                       cost_params_from_json(field<nlohmann::json>(j, "costs")));
    tree.next_road_id_.store(std::max(tree.next_road_id_.load(), field<std::int64_t>(j, "next_road_id")));
    check_replay(*by_id.at(0), tree.root());

    for (const auto& [id, s] : by_id) {
      if (id == 0) continue;
      PendingState pending = tree.prepare(StateId{field<std::int64_t>(*s, "parent")},
                                          modification_from_json(s->at("modification")));
      tree.next_state_id_ = id;
      const StateId got = tree.commit(std::move(pending));
      check_replay(*s, tree.node(got));
    }
    const auto next = field<std::int64_t>(j, "next_state_id");
    if (next <= by_id.rbegin()->first) throw ValidationError("next_state_id must exceed every state id");
    tree.next_state_id_ = next;
    return tree;
  }

 private:
  static void check_replay(const nlohmann::json& s, const StateNode& n) {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(b), 1e-300); };
    const auto id = std::to_string(to_int(n.id));
    if (!close(n.metric, json_detail::field<double>(s, "metric_veh_min")))
      throw ValidationError("state " + id + ": recomputed metric differs from the stored one");
    if (!close(n.step_cost, json_detail::field<double>(s, "step_cost")) ||
        !close(n.cumulative_cost, json_detail::field<double>(s, "cumulative_cost")))
      throw ValidationError("state " + id + ": recomputed cost differs from the stored one");
  }
};

inline std::string save_session(const StateTree& tree) {
  return canonical_dump(SessionCodec::to_json(tree)) + "\n";
}

inline StateTree load_session(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("session document: ") + e.what(), 0);
  }
  return SessionCodec::from_json(j);
}

}  // namespace whatif
