#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "whatif/choice.hpp"
#include "whatif/demand.hpp"
#include "whatif/error.hpp"
#include "whatif/network.hpp"
#include "whatif/paths.hpp"

namespace whatif {

struct AssignmentParams {
  double theta = 0.3;             // logit dispersion, per unit of travel time
  std::size_t k_paths = 8;        // route-set size per OD pair
  std::size_t max_iters = 1000;   // averaging steps before giving up
  double rel_gap_tol = 1e-4;      // stop when ||aux - current||_1 / max(||current||_1, 1) <= tol
  double sra_big_step = 2.0;      // added to the step denominator when the gap grows
  double sra_small_step = 0.1;    // added otherwise

  void validate() const {
    if (!(theta > 0.0)) throw ValidationError("theta must be positive");
    if (k_paths < 1) throw ValidationError("k_paths must be at least 1");
    if (!(rel_gap_tol > 0.0)) throw ValidationError("rel_gap_tol must be positive");
    if (!(sra_big_step > 0.0) || !(sra_small_step > 0.0))
      throw ValidationError("SRA step increments must be positive");
  }

  friend bool operator==(const AssignmentParams&, const AssignmentParams&) = default;
};

struct RoadStatus {
  RoadId road{};
  double actual_volume = 0.0;
  double actual_time = 0.0;

  friend bool operator==(const RoadStatus&, const RoadStatus&) = default;
};

struct AssignmentResult {
  std::map<RoadId, RoadStatus> statuses;
  std::map<OdPair, std::vector<Path>> path_flows;
  std::size_t iterations = 0;
  bool converged = false;
  double final_rel_gap = 0.0;

  friend bool operator==(const AssignmentResult&, const AssignmentResult&) = default;
};

/// Sum over roads of volume * time: the total travel time of all drivers.
inline double total_system_travel_time(const AssignmentResult& result) {
  double sum = 0.0;
  for (const auto& [id, s] : result.statuses) sum += s.actual_volume * s.actual_time;
  return sum;
}

/// Called with the full assignment implied by every iterate, including the
/// initial free-flow load and the returned one.
using IterateObserver = std::function<void(const AssignmentResult&)>;

namespace detail {

/// Flattened route sets: road ids mapped to dense indices, paths stored
/// back to back with per-OD offsets.
class RouteSets {
 public:
  RouteSets(const RoadNetwork& network, const DemandTable& demands, std::size_t k_paths) {
    for (const auto& [id, r] : network.roads()) {
      road_index_.emplace(id, roads_.size());
      roads_.push_back(&r);
    }
    std::vector<std::string> unreachable;
    for (const auto& [od, trips] : demands) {
      if (trips <= 0.0) continue;
      std::vector<Path> paths;
      try {
        paths = enumerate_paths(network, od, k_paths);
      } catch (const UnreachableOdError&) {
        unreachable.push_back(to_string(od));
        continue;
      }
      ods_.push_back({od, trips, paths_.size(), paths.size()});
      for (const Path& p : paths) {
        std::vector<std::size_t> idx;
        idx.reserve(p.roads.size());
        for (RoadId r : p.roads) idx.push_back(road_index_.at(r));
        paths_.push_back(std::move(idx));
        path_roads_.push_back(p.roads);
      }
    }
    if (!unreachable.empty()) {
      std::string msg = "unreachable OD pairs:";
      for (const auto& s : unreachable) msg += " " + s;
      throw UnreachableOdError(msg);
    }
  }

  struct Od {
    OdPair od;
    double demand;
    std::size_t first;
    std::size_t count;
  };

  const std::vector<const Road*>& roads() const { return roads_; }
  const std::vector<Od>& ods() const { return ods_; }
  std::size_t path_count() const { return paths_.size(); }

  std::vector<double> link_flows(const std::vector<double>& path_flows) const {
    std::vector<double> f(roads_.size(), 0.0);
    for (std::size_t p = 0; p < paths_.size(); ++p)
      for (std::size_t e : paths_[p]) f[e] += path_flows[p];
    return f;
  }

  std::vector<double> link_times(const std::vector<double>& link_flows) const {
    std::vector<double> t(roads_.size());
    for (std::size_t e = 0; e < roads_.size(); ++e)
      t[e] = bpr_time(roads_[e]->fftt, roads_[e]->capacity, link_flows[e]);
    return t;
  }

  double path_time(std::size_t p, const std::vector<double>& link_times) const {
    double t = 0.0;
    for (std::size_t e : paths_[p]) t += link_times[e];
    return t;
  }

  /// Demand of every OD pair split over its routes by the logit model.
  std::vector<double> logit_load(const std::vector<double>& link_times, double theta) const {
    std::vector<double> out(paths_.size());
    std::vector<double> times, probs;
    for (const Od& od : ods_) {
      times.resize(od.count);
      probs.resize(od.count);
      for (std::size_t i = 0; i < od.count; ++i) times[i] = path_time(od.first + i, link_times);
      logit_split(times, theta, probs);
      for (std::size_t i = 0; i < od.count; ++i) out[od.first + i] = od.demand * probs[i];
    }
    return out;
  }

  AssignmentResult materialize(const std::vector<double>& path_flows) const {
    AssignmentResult r;
    const auto f = link_flows(path_flows);
    const auto t = link_times(f);
    for (std::size_t e = 0; e < roads_.size(); ++e)
      r.statuses.emplace(roads_[e]->id, RoadStatus{roads_[e]->id, f[e], t[e]});
    for (const Od& od : ods_) {
      auto& list = r.path_flows[od.od];
      for (std::size_t i = 0; i < od.count; ++i) {
        const std::size_t p = od.first + i;
        list.push_back(Path{od.od, path_roads_[p], path_flows[p], path_time(p, t)});
      }
    }
    return r;
  }

 private:
  std::map<RoadId, std::size_t> road_index_;
  std::vector<const Road*> roads_;
  std::vector<Od> ods_;
  std::vector<std::vector<std::size_t>> paths_;
  std::vector<std::vector<RoadId>> path_roads_;
};

inline double l1(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double l1_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace detail

/// Stochastic user equilibrium by self-regulated averaging.
///
/// Route sets are fixed up front (see enumerate_paths). Starting from the
/// logit load at free-flow times, each iteration computes the auxiliary
/// logit load y at the current travel times and moves the path flows
/// h <- h + (y - h) / beta. beta starts at 1 and grows by sra_big_step when
/// the link-flow gap ||y - h|| increased since the previous iteration, by
/// sra_small_step otherwise.
///
/// Converges when the auxiliary gap itself is below rel_gap_tol, so the
/// returned flows are a fixed point of "load by logit at own times" to that
/// tolerance. When max_iters runs out the iterate with the smallest gap is
/// returned with converged = false.
inline AssignmentResult solve_sue(const RoadNetwork& network, const DemandTable& demands,
                                  const AssignmentParams& params = {},
                                  const IterateObserver& observer = {}) {
  params.validate();
  const detail::RouteSets routes(network, demands, params.k_paths);

  std::vector<double> free_flow(routes.roads().size());
  for (std::size_t e = 0; e < free_flow.size(); ++e) free_flow[e] = routes.roads()[e]->fftt;
  std::vector<double> h = routes.logit_load(free_flow, params.theta);

  std::vector<double> best = h;
  double best_gap = std::numeric_limits<double>::infinity();
  double prev_gap = 0.0;
  double beta = 1.0;
  std::size_t n = 0;
  bool converged = false;
  for (;; ++n) {
    const auto f = routes.link_flows(h);
    const auto y = routes.logit_load(routes.link_times(f), params.theta);
    const double gap = detail::l1_diff(routes.link_flows(y), f) / std::max(detail::l1(f), 1.0);
    if (observer) {
      AssignmentResult snapshot = routes.materialize(h);
      snapshot.iterations = n;
      snapshot.final_rel_gap = gap;
      observer(snapshot);
    }
    if (gap < best_gap) {
      best_gap = gap;
      best = h;
    }
    if (gap <= params.rel_gap_tol) {
      converged = true;
      break;
    }
    if (n == params.max_iters) break;
    if (n > 0) beta += gap > prev_gap ? params.sra_big_step : params.sra_small_step;
    prev_gap = gap;
    for (std::size_t p = 0; p < h.size(); ++p) h[p] += (y[p] - h[p]) / beta;
  }

  // A converged iterate is also the best one: every earlier gap exceeded tol.
  AssignmentResult result = routes.materialize(best);
  result.iterations = n;
  result.converged = converged;
  result.final_rel_gap = best_gap;
  return result;
}

}  // namespace whatif
