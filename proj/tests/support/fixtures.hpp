#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "whatif/tntp.hpp"
#include "whatif/whatif.hpp"

#ifndef WHATIF_DATA_DIR
#error "WHATIF_DATA_DIR must point at the data directory"
#endif

namespace fixtures {

inline std::string data_path(const std::string& rel) { return std::string(WHATIF_DATA_DIR) + "/" + rel; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Four-node Braess network: road 1 = 1->2, 2 = 1->3, 3 = 3->2, 4 = 3->4,
/// 5 = 2->4, one OD pair 1->4 with 1000 trips.
inline whatif::tntp::Dataset braess() {
  return whatif::tntp::load_dataset(slurp(data_path("braess/braess_net.tntp")),
                                    slurp(data_path("braess/braess_trips.tntp")),
                                    slurp(data_path("braess/braess_node.tntp")), whatif::Projection::planar);
}

inline whatif::tntp::Dataset sioux_falls() {
  return whatif::tntp::load_dataset(slurp(data_path("sioux_falls/SiouxFalls_net.tntp")),
                                    slurp(data_path("sioux_falls/SiouxFalls_trips.tntp")),
                                    slurp(data_path("sioux_falls/SiouxFalls_node.tntp")),
                                    whatif::Projection::lonlat);
}

/// Planar network (1 unit = 1 km) from explicit node positions and roads
/// {from, to, capacity, fftt}; road ids follow input order from 1.
struct RoadSpec {
  std::int64_t from, to;
  double capacity, fftt;
};

inline whatif::RoadNetwork planar(const std::vector<whatif::Position>& nodes, const std::vector<RoadSpec>& roads) {
  whatif::RoadNetwork n(whatif::Projection::planar);
  for (std::size_t i = 0; i < nodes.size(); ++i)
    n.add_node({whatif::NodeId{static_cast<std::int64_t>(i + 1)}, nodes[i]});
  std::int64_t id = 1;
  for (const auto& r : roads)
    n.add_road({whatif::RoadId{id++}, whatif::NodeId{r.from}, whatif::NodeId{r.to}, r.capacity, r.fftt,
                std::nullopt, whatif::RoadKind::surface});
  return n;
}

struct RandomCase {
  whatif::RoadNetwork network{whatif::Projection::planar};
  whatif::DemandTable demands;
};

/// Random directed network on `nodes` nodes with up to `max_ods` reachable
/// OD pairs. Deterministic for a given generator state.
inline RandomCase random_case(std::mt19937_64& rng, std::size_t nodes, std::size_t max_ods, double edge_prob) {
  std::uniform_real_distribution<double> pos(0.0, 10.0), fftt(1.0, 10.0), cap(50.0, 500.0), dem(10.0, 300.0),
      coin(0.0, 1.0);
  RandomCase c;
  for (std::size_t i = 1; i <= nodes; ++i)
    c.network.add_node({whatif::NodeId{static_cast<std::int64_t>(i)}, {pos(rng), pos(rng)}});
  std::int64_t id = 1;
  for (std::size_t a = 1; a <= nodes; ++a)
    for (std::size_t b = 1; b <= nodes; ++b)
      if (a != b && coin(rng) < edge_prob)
        c.network.add_road({whatif::RoadId{id++}, whatif::NodeId{static_cast<std::int64_t>(a)},
                            whatif::NodeId{static_cast<std::int64_t>(b)}, cap(rng), fftt(rng), std::nullopt,
                            whatif::RoadKind::surface});
  std::uniform_int_distribution<std::int64_t> pick(1, static_cast<std::int64_t>(nodes));
  for (std::size_t attempt = 0; attempt < 50 && c.demands.size() < max_ods; ++attempt) {
    whatif::OdPair od{whatif::NodeId{pick(rng)}, whatif::NodeId{pick(rng)}};
    if (od.origin == od.destination || c.demands.contains(od)) continue;
    try {
      whatif::enumerate_paths(c.network, od, 8);
    } catch (const whatif::UnreachableOdError&) {
      continue;
    }
    c.demands[od] = dem(rng);
  }
  return c;
}

}  // namespace fixtures
