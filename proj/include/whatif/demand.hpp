#pragma once

#include <cmath>
#include <compare>
#include <map>
#include <string>

#include "whatif/error.hpp"
#include "whatif/network.hpp"

namespace whatif {

struct OdPair {
  NodeId origin{};
  NodeId destination{};

  friend auto operator<=>(const OdPair&, const OdPair&) = default;
};

inline std::string to_string(const OdPair& od) {
  return "(" + std::to_string(to_int(od.origin)) + " -> " + std::to_string(to_int(od.destination)) + ")";
}

/// Trips per OD pair. Ordered so that every pass over the table is
/// deterministic.
using DemandTable = std::map<OdPair, double>;

/// Inserts a demand entry, enforcing the table invariants. Zero-trip
/// entries are silently dropped since they contribute nothing.
inline void add_demand(DemandTable& table, OdPair od, double trips) {
  if (od.origin == od.destination)
    throw ValidationError("OD pair " + to_string(od) + " has identical origin and destination");
  if (!std::isfinite(trips) || trips < 0.0)
    throw ValidationError("OD pair " + to_string(od) + " has negative or non-finite demand");
  if (trips == 0.0) return;
  if (!table.emplace(od, trips).second) throw ValidationError("duplicate OD pair " + to_string(od));
}

inline double total_demand(const DemandTable& table) {
  double sum = 0.0;
  for (const auto& [od, trips] : table) sum += trips;
  return sum;
}

}  // namespace whatif
