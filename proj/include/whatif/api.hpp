#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "whatif/analytics.hpp"
#include "whatif/error.hpp"
#include "whatif/session.hpp"
#include "whatif/state_tree.hpp"
#include "whatif/tntp.hpp"

// Transport-independent request handlers behind the HTTP service. Every
// handler returns a status code and a JSON body; service.hpp only routes.

namespace whatif::api {

using nlohmann::json;

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline Response reply(int status, const json& body) { return {status, body.dump(), "application/json"}; }

inline Response error_reply(int status, std::string_view message, json extra = json::object()) {
  extra["error"] = std::string(message);
  return reply(status, extra);
}

/// Built-in datasets resolved under a data directory.
struct DatasetFiles {
  std::string net, trips, coords;
  Projection projection;
};

inline std::optional<DatasetFiles> builtin_dataset(const std::filesystem::path& data_dir, std::string_view name) {
  if (name == "braess")
    return DatasetFiles{(data_dir / "braess/braess_net.tntp").string(), (data_dir / "braess/braess_trips.tntp").string(),
                        (data_dir / "braess/braess_node.tntp").string(), Projection::planar};
  if (name == "sioux_falls")
    return DatasetFiles{(data_dir / "sioux_falls/SiouxFalls_net.tntp").string(),
                        (data_dir / "sioux_falls/SiouxFalls_trips.tntp").string(),
                        (data_dir / "sioux_falls/SiouxFalls_node.tntp").string(), Projection::lonlat};
  return std::nullopt;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Projection parse_projection(std::string_view s) {
  if (s == "lonlat") return Projection::lonlat;
  if (s == "planar") return Projection::planar;
  throw ValidationError("projection must be 'lonlat' or 'planar'");
}

// ---- JSON views ----------------------------------------------------------

inline json state_summary(const StateTree& tree, const StateNode& n) {
  const MetricDeltas d = tree.metric_deltas(n.id);
  json j;
  j["id"] = to_int(n.id);
  j["parent"] = n.parent ? json(to_int(*n.parent)) : json(nullptr);
  j["modification"] = n.modification ? modification_to_json(*n.modification) : json(nullptr);
  j["metric_veh_min"] = n.metric;
  j["metric_delta_vs_initial"] = d.vs_initial;
  j["metric_delta_vs_parent"] = d.vs_parent;
  j["metric_delta_vs_parent_applicable"] = d.parent_applicable;
  j["step_cost"] = n.step_cost;
  j["cumulative_cost"] = n.cumulative_cost;
  j["converged"] = n.assignment->converged;
  j["iterations"] = n.assignment->iterations;
  j["final_rel_gap"] = n.assignment->final_rel_gap;
  auto kids = json::array();
  for (StateId c : n.children) kids.push_back(to_int(c));
  j["children"] = kids;
  return j;
}

inline json state_detail(const StateTree& tree, const StateNode& n) {
  json j;
  j["state"] = state_summary(tree, n);
  j["projection"] = n.network->projection() == Projection::lonlat ? "lonlat" : "planar";
  auto nodes = json::array();
  for (const auto& [id, node] : n.network->nodes())
    nodes.push_back({{"id", to_int(id)}, {"x", node.position.x}, {"y", node.position.y}});
  j["nodes"] = nodes;
  auto roads = json::array();
  for (const auto& [id, r] : n.network->roads()) {
    const RoadStatus& s = n.assignment->statuses.at(id);
    roads.push_back({{"id", to_int(id)},
                     {"from", to_int(r.from)},
                     {"to", to_int(r.to)},
                     {"capacity_veh_per_hr", r.capacity},
                     {"fftt_min", r.fftt},
                     {"length_km", road_length_km(*n.network, id)},
                     {"road_kind", std::string(road_kind_name(r.kind))},
                     {"volume_veh_per_hr", s.actual_volume},
                     {"time_min", s.actual_time}});
  }
  j["roads"] = roads;
  return j;
}

inline json indicators_to_json(const RoadIndicators& r) {
  json j{{"road", to_int(r.road)}, {"state_count", r.state_count}};
  for (Indicator i : kAllIndicators) j[std::string(indicator_name(i))] = indicator_value(r, i);
  return j;
}

inline json cell_to_json(const CellStatus& c) {
  json j{{"road", to_int(c.road)},
         {"state", to_int(c.state)},
         {"capacity_veh_per_hr", c.capacity},
         {"volume_veh_per_hr", c.volume},
         {"fftt_min", c.fftt},
         {"time_min", c.actual_time},
         {"new_road", c.is_new_road()}};
  j["delta_time_vs_initial_min"] = c.delta_time_vs_initial ? json(*c.delta_time_vs_initial) : json(nullptr);
  return j;
}

// ---- Sessions ------------------------------------------------------------

struct Session {
  explicit Session(StateTree t) : tree(std::move(t)) {}
  std::shared_mutex mutex;  // shared: reads and child preparation; exclusive: commit/delete
  StateTree tree;
};

struct Options {
  AssignmentParams assignment;
  CostParams costs;
  std::filesystem::path data_dir = ".";
  /// Modifications still solving after this long answer 202 with a poll token.
  std::chrono::milliseconds async_after{2000};
};

class Api {
 public:
  explicit Api(Options options = {}) : options_(std::move(options)) {}

  const Options& options() const { return options_; }

  /// Registers an existing tree; returns its session id.
  std::string add_session(StateTree tree) {
    std::lock_guard lock(sessions_mutex_);
    std::string id = "s" + std::to_string(++session_counter_);
    sessions_.emplace(id, std::make_shared<Session>(std::move(tree)));
    return id;
  }

  std::shared_ptr<Session> find_session(const std::string& sid) const {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(sid);
    return it == sessions_.end() ? nullptr : it->second;
  }

  /// POST /sessions
  Response create_session(std::string_view body) {
    return guarded([&] {
      const json req = parse_body(body);
      json_detail::require_object(req, "request");
      AssignmentParams params = options_.assignment;
      CostParams costs = options_.costs;
      if (auto it = req.find("assignment"); it != req.end()) params = merge_assignment(params, *it);
      if (auto it = req.find("costs"); it != req.end()) costs = merge_costs(costs, *it);

      tntp::Dataset data;
      if (auto name = json_detail::optional_field<std::string>(req, "dataset")) {
        auto files = builtin_dataset(options_.data_dir, *name);
        if (!files) return error_reply(404, "unknown dataset '" + *name + "'");
        data = tntp::load_dataset(read_file(files->net), read_file(files->trips), read_file(files->coords),
                                  files->projection);
      } else {
        const auto projection =
            parse_projection(json_detail::optional_field<std::string>(req, "projection").value_or("lonlat"));
        const auto coords = json_detail::optional_field<std::string>(req, "coords");
        data = tntp::load_dataset(json_detail::field<std::string>(req, "network"),
                                  json_detail::field<std::string>(req, "trips"),
                                  coords ? std::optional<std::string_view>(*coords) : std::nullopt, projection);
      }
      StateTree tree = StateTree::create(std::move(data.network), std::move(data.demands), params, costs);
      if (!tree.root().assignment->converged)
        return error_reply(503, "assignment did not converge within the iteration budget",
                           {{"partial", true}, {"final_rel_gap", tree.root().assignment->final_rel_gap}});
      json out = state_summary(tree, tree.root());
      json resp{{"root", out}, {"warnings", data.warnings}};
      resp["session_id"] = add_session(std::move(tree));
      return reply(201, resp);
    });
  }

  /// POST /sessions/import
  Response import_session(std::string_view body) {
    return guarded([&] {
      StateTree tree = load_session(body);
      json root = state_summary(tree, tree.root());
      json resp{{"root", root}};
      resp["session_id"] = add_session(std::move(tree));
      return reply(201, resp);
    });
  }

  /// GET /sessions/{sid}/export
  Response export_session(const std::string& sid) {
    return with_session(sid, [&](Session& s) {
      std::shared_lock lock(s.mutex);
      return Response{200, save_session(s.tree), "application/json"};
    });
  }

  /// GET /sessions/{sid}/tree
  Response get_tree(const std::string& sid) {
    return with_session(sid, [&](Session& s) {
      std::shared_lock lock(s.mutex);
      auto nodes = json::array();
      for (const auto& [id, n] : s.tree.nodes()) nodes.push_back(state_summary(s.tree, n));
      return reply(200, {{"session_id", sid},
                         {"root", to_int(s.tree.root_id())},
                         {"cost_params", cost_params_to_json(s.tree.cost_params())},
                         {"nodes", nodes}});
    });
  }

  /// GET /sessions/{sid}/states/{id}
  Response get_state(const std::string& sid, std::int64_t state) {
    return with_session(sid, [&](Session& s) {
      std::shared_lock lock(s.mutex);
      return reply(200, state_detail(s.tree, s.tree.node(StateId{state})));
    });
  }

  /// POST /sessions/{sid}/states/{id}/modifications
  Response post_modification(const std::string& sid, std::int64_t state, std::string_view body) {
    auto session = find_session(sid);
    if (!session) return error_reply(404, "unknown session '" + sid + "'");
    Modification mod;
    try {
      mod = modification_from_json(parse_body(body));
    } catch (const BadRequest& e) {
      return error_reply(400, e.what());
    } catch (const Error& e) {
      return error_reply(422, e.what());
    }
    {
      std::shared_lock lock(session->mutex);
      if (!session->tree.contains(StateId{state})) return error_reply(404, "unknown state " + std::to_string(state));
    }
    std::shared_future<Response> job =
        std::async(std::launch::async, [session, state, mod = std::move(mod)]() mutable {
          return apply(*session, StateId{state}, std::move(mod));
        }).share();
    if (job.wait_for(options_.async_after) == std::future_status::ready) return job.get();
    std::lock_guard lock(jobs_mutex_);
    const std::string token = "job" + std::to_string(++job_counter_);
    jobs_.emplace(token, job);
    return reply(202, {{"poll_token", token}, {"poll_url", "/jobs/" + token}});
  }

  /// GET /jobs/{token}
  Response poll_job(const std::string& token) {
    std::shared_future<Response> job;
    {
      std::lock_guard lock(jobs_mutex_);
      auto it = jobs_.find(token);
      if (it == jobs_.end()) return error_reply(404, "unknown job '" + token + "'");
      job = it->second;
    }
    if (job.wait_for(std::chrono::milliseconds(0)) != std::future_status::ready)
      return reply(200, {{"status", "pending"}, {"poll_token", token}});
    return job.get();
  }

  /// DELETE /sessions/{sid}/states/{id}
  Response delete_state(const std::string& sid, std::int64_t state) {
    return with_session(sid, [&](Session& s) {
      std::unique_lock lock(s.mutex);
      auto removed = s.tree.delete_state(StateId{state});
      auto ids = json::array();
      for (StateId r : removed) ids.push_back(to_int(r));
      return reply(200, {{"removed", ids}});
    });
  }

  /// GET /sessions/{sid}/states/{id}/roads/{rid}/od
  Response get_od(const std::string& sid, std::int64_t state, std::int64_t road) {
    return with_session(sid, [&](Session& s) {
      std::shared_lock lock(s.mutex);
      const auto flows = od_through_road(s.tree, StateId{state}, RoadId{road});
      auto nodes = json::array();
      double orig = 0.0, term = 0.0;
      for (const auto& [node, f] : flows) {
        nodes.push_back({{"node", to_int(node)},
                         {"originating_veh_per_hr", f.originating},
                         {"terminating_veh_per_hr", f.terminating}});
        orig += f.originating;
        term += f.terminating;
      }
      return reply(200, {{"state", state},
                         {"road", road},
                         {"nodes", nodes},
                         {"total_originating_veh_per_hr", orig},
                         {"total_terminating_veh_per_hr", term}});
    });
  }

  /// POST /sessions/{sid}/indicators
  ///   {"selected_states": [..], "filters": {"avg_flow": [lo, hi], ...},
  ///    "sort": {"key": "scope_flow_cap_ratio", "descending": true}, "bins": 20}
  Response post_indicators(const std::string& sid, std::string_view body) {
    return with_session(sid, [&](Session& s) {
      const json req = parse_body(body);
      json_detail::require_object(req, "request");
      std::shared_lock lock(s.mutex);

      std::set<StateId> selected;
      if (auto it = req.find("selected_states"); it != req.end()) {
        for (const auto& v : *it) selected.insert(StateId{v.get<std::int64_t>()});
      } else {
        for (const auto& [id, n] : s.tree.nodes()) selected.insert(id);
      }
      for (StateId id : selected) s.tree.node(id);

      std::map<Indicator, Range> filters;
      if (auto it = req.find("filters"); it != req.end() && !it->is_null()) {
        json_detail::require_object(*it, "filters");
        for (const auto& [name, bounds] : it->items()) {
          if (!bounds.is_array() || bounds.size() != 2) throw ValidationError("filter '" + name + "' must be [lo, hi]");
          filters[parse_indicator(name)] = Range{bounds[0].get<double>(), bounds[1].get<double>()};
        }
      }
      Indicator key = Indicator::scope_flow_cap_ratio;
      bool descending = true;
      if (auto it = req.find("sort"); it != req.end() && !it->is_null()) {
        key = parse_indicator(json_detail::optional_field<std::string>(*it, "key").value_or("scope_flow_cap_ratio"));
        descending = json_detail::optional_field<bool>(*it, "descending").value_or(true);
      }
      const auto bins = json_detail::optional_field<std::size_t>(req, "bins").value_or(kDefaultHistogramBins);

      const auto indicators = compute_indicators(s.tree, selected);
      const auto order = filter_and_rank(indicators, filters, key, descending);

      json out;
      auto ind = json::array();
      for (const auto& r : indicators) ind.push_back(indicators_to_json(r));
      out["indicators"] = ind;
      json hists = json::object();
      for (Indicator i : kAllIndicators) {
        std::vector<double> values;
        for (const auto& r : indicators) values.push_back(indicator_value(r, i));
        auto arr = json::array();
        if (!values.empty())
          for (const auto& b : histogram(values, bins)) arr.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count}});
        hists[std::string(indicator_name(i))] = arr;
      }
      out["histograms"] = hists;
      auto roads = json::array();
      for (RoadId r : order) roads.push_back(to_int(r));
      out["roads"] = roads;
      const std::vector<StateId> states(selected.begin(), selected.end());
      auto cells = json::array();
      for (const auto& c : cell_statuses(s.tree, states, order)) cells.push_back(cell_to_json(c));
      out["cells"] = cells;
      return reply(200, out);
    });
  }

 private:
  struct BadRequest : Error {
    using Error::Error;
  };

  static json parse_body(std::string_view body) {
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw BadRequest(std::string("malformed JSON: ") + e.what());
    }
  }

  static AssignmentParams merge_assignment(AssignmentParams base, const json& j) {
    json merged = assignment_params_to_json(base);
    json_detail::require_object(j, "assignment");
    merged.update(j);
    return assignment_params_from_json(merged);
  }

  static CostParams merge_costs(CostParams base, const json& j) {
    json merged = cost_params_to_json(base);
    json_detail::require_object(j, "costs");
    merged.update(j);
    return cost_params_from_json(merged);
  }

  static Response apply(Session& session, StateId parent, Modification mod) {
    try {
      PendingState pending;
      {
        std::shared_lock lock(session.mutex);
        pending = session.tree.prepare(parent, std::move(mod));
      }
      if (!pending.assignment->converged)
        return error_reply(503, "assignment did not converge within the iteration budget",
                           {{"partial", true},
                            {"final_rel_gap", pending.assignment->final_rel_gap},
                            {"metric_veh_min", pending.metric}});
      std::unique_lock lock(session.mutex);
      const StateId id = session.tree.commit(std::move(pending));
      return reply(201, state_summary(session.tree, session.tree.node(id)));
    } catch (const NotFoundError& e) {
      // The parent was checked beforehand, so a missing id here names a road
      // or node inside the modification, or a parent deleted meanwhile.
      return error_reply(422, e.what());
    } catch (const Error& e) {
      return error_reply(422, e.what());
    }
  }

  template <typename F>
  static Response guarded(F&& f) {
    try {
      return f();
    } catch (const BadRequest& e) {
      return error_reply(400, e.what());
    } catch (const ParseError& e) {
      return error_reply(400, e.what());
    } catch (const NotFoundError& e) {
      return error_reply(404, e.what());
    } catch (const ConflictError& e) {
      return error_reply(409, e.what());
    } catch (const Error& e) {
      return error_reply(422, e.what());
    } catch (const json::exception& e) {
      return error_reply(400, e.what());
    }
  }

  template <typename F>
  Response with_session(const std::string& sid, F&& f) {
    auto session = find_session(sid);
    if (!session) return error_reply(404, "unknown session '" + sid + "'");
    return guarded([&] { return f(*session); });
  }

  Options options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t session_counter_ = 0;
  std::mutex jobs_mutex_;
  std::map<std::string, std::shared_future<Response>> jobs_;
  std::uint64_t job_counter_ = 0;
};

}  // namespace whatif::api
