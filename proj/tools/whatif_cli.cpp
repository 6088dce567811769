// Command-line front end: run the HTTP service, solve one assignment to
// JSON, or validate input files.
//
// Every flag can also come from an APP_* environment variable
// (e.g. --k-paths <-> APP_K_PATHS); flags win.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "whatif/service.hpp"
#include "whatif/whatif.hpp"

#ifndef WHATIF_DATA_DIR
#define WHATIF_DATA_DIR "data"
#endif

namespace {

struct InputFlags {
  std::string network;
  std::string trips;
  std::string coords;
  std::string projection = "lonlat";
  double theta = 0.3;
  std::size_t k_paths = 8;
};

void add_input_flags(CLI::App* cmd, InputFlags& f, bool network_required, bool trips_required) {
  auto* net = cmd->add_option("--network", f.network, "TNTP link file")->envname("APP_NETWORK");
  if (network_required) net->required();
  auto* trips = cmd->add_option("--trips", f.trips, "TNTP trips file")->envname("APP_TRIPS");
  if (trips_required) trips->required();
  cmd->add_option("--coords", f.coords, "node coordinate file")->envname("APP_COORDS");
  cmd->add_option("--projection", f.projection, "coordinate interpretation")
      ->envname("APP_PROJECTION")
      ->check(CLI::IsMember({"lonlat", "planar"}));
}

void add_solver_flags(CLI::App* cmd, InputFlags& f) {
  cmd->add_option("--theta", f.theta, "logit dispersion")->envname("APP_THETA")->check(CLI::PositiveNumber);
  cmd->add_option("--k-paths", f.k_paths, "routes per OD pair")->envname("APP_K_PATHS")->check(CLI::PositiveNumber);
}

whatif::tntp::Dataset load(const InputFlags& f) {
  using whatif::api::read_file;
  const std::string coords = f.coords.empty() ? std::string{} : read_file(f.coords);
  return whatif::tntp::load_dataset(read_file(f.network), read_file(f.trips),
                                    f.coords.empty() ? std::nullopt : std::optional<std::string_view>(coords),
                                    whatif::api::parse_projection(f.projection));
}

whatif::AssignmentParams solver_params(const InputFlags& f) {
  whatif::AssignmentParams p;
  p.theta = f.theta;
  p.k_paths = f.k_paths;
  return p;
}

int run_assign(const InputFlags& f, const std::string& out_path) {
  auto data = load(f);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";
  const auto result = whatif::solve_sue(data.network, data.demands, solver_params(f));

  nlohmann::json out;
  out["converged"] = result.converged;
  out["iterations"] = result.iterations;
  out["final_rel_gap"] = result.final_rel_gap;
  out["metric_veh_min"] = whatif::total_system_travel_time(result);
  auto roads = nlohmann::json::array();
  for (const auto& [id, r] : data.network.roads()) {
    const auto& s = result.statuses.at(id);
    roads.push_back({{"id", whatif::to_int(id)},
                     {"from", whatif::to_int(r.from)},
                     {"to", whatif::to_int(r.to)},
                     {"capacity_veh_per_hr", r.capacity},
                     {"fftt_min", r.fftt},
                     {"volume_veh_per_hr", s.actual_volume},
                     {"time_min", s.actual_time}});
  }
  out["roads"] = roads;

  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw whatif::NotFoundError("cannot write " + out_path);
  os << whatif::canonical_dump(out) << "\n";
  std::cout << "wrote " << roads.size() << " road statuses to " << out_path
            << (result.converged ? "" : " (not converged)") << "\n";
  return result.converged ? 0 : 2;
}

int run_validate(const InputFlags& f) {
  using whatif::api::read_file;
  auto net = whatif::tntp::parse_network(read_file(f.network), whatif::api::parse_projection(f.projection));
  if (!f.coords.empty()) whatif::tntp::attach_coords(net.network, whatif::tntp::parse_coords(read_file(f.coords)));
  net.network.validate();
  for (const auto& w : net.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "network ok: " << net.network.nodes().size() << " nodes, " << net.network.roads().size()
            << " roads\n";
  if (!f.trips.empty()) {
    const auto trips = whatif::tntp::parse_trips(read_file(f.trips));
    for (const auto& w : trips.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& [od, v] : trips.demands)
      if (!net.network.has_node(od.origin) || !net.network.has_node(od.destination))
        throw whatif::ValidationError("OD pair " + whatif::to_string(od) + " references a node outside the network");
    std::cout << "trips ok: " << trips.listed_pairs << " OD pairs listed, " << trips.demands.size()
              << " with positive demand, total " << whatif::total_demand(trips.demands) << "\n";
  }
  return 0;
}

int run_serve(const InputFlags& f, const std::string& host, int port, const std::string& data_dir) {
  whatif::api::Options options;
  options.assignment = solver_params(f);
  options.data_dir = data_dir;
  whatif::api::Api api(options);

  if (!f.network.empty()) {
    if (f.trips.empty()) throw whatif::ValidationError("--network needs --trips");
    auto data = load(f);
    const auto sid = api.add_session(
        whatif::StateTree::create(std::move(data.network), std::move(data.demands), options.assignment));
    std::cout << "preloaded session " << sid << "\n";
  }

  httplib::Server server;
  whatif::mount_routes(server, api);
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    std::cerr << "error: cannot bind " << host << ":" << port << "\n";
    return 1;
  }
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  return server.listen_after_bind() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic what-if engine: stochastic user equilibrium over editable road networks"};
  app.require_subcommand(1);

  InputFlags serve_in, assign_in, validate_in;
  std::string host = "127.0.0.1", data_dir = WHATIF_DATA_DIR, out_path;
  int port = 8080;

  auto* serve = app.add_subcommand("serve", "start the HTTP/JSON service");
  add_input_flags(serve, serve_in, false, false);
  add_solver_flags(serve, serve_in);
  serve->add_option("--port", port, "TCP port, 0 picks a free one")->envname("APP_PORT");
  serve->add_option("--host", host, "bind address")->envname("APP_HOST");
  serve->add_option("--data-dir", data_dir, "directory with built-in datasets")->envname("APP_DATA_DIR");

  auto* assign = app.add_subcommand("assign", "solve one equilibrium and write JSON");
  add_input_flags(assign, assign_in, true, true);
  add_solver_flags(assign, assign_in);
  assign->add_option("--out", out_path, "output JSON file")->envname("APP_OUT")->required();

  auto* validate = app.add_subcommand("validate", "parse and check input files");
  add_input_flags(validate, validate_in, true, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return run_serve(serve_in, host, port, data_dir);
    if (*assign) return run_assign(assign_in, out_path);
    if (*validate) return run_validate(validate_in);
  } catch (const whatif::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
