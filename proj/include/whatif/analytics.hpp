#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "whatif/error.hpp"
#include "whatif/network.hpp"
#include "whatif/state_tree.hpp"

namespace whatif {

/// Per-road statistics over a selection of states: means and ranges of
/// flow, flow/capacity, travel time and fftt/travel time.
struct RoadIndicators {
  RoadId road{};
  double avg_flow = 0.0;
  double avg_flow_cap_ratio = 0.0;
  double avg_time = 0.0;
  double avg_fftt_time_ratio = 0.0;
  double scope_flow = 0.0;
  double scope_flow_cap_ratio = 0.0;
  double scope_time = 0.0;
  double scope_fftt_time_ratio = 0.0;
  std::size_t state_count = 0;  // selected states containing the road
};

enum class Indicator {
  avg_flow,
  avg_flow_cap_ratio,
  avg_time,
  avg_fftt_time_ratio,
  scope_flow,
  scope_flow_cap_ratio,
  scope_time,
  scope_fftt_time_ratio,
};

inline constexpr std::array<Indicator, 8> kAllIndicators{
    Indicator::avg_flow,   Indicator::avg_flow_cap_ratio,   Indicator::avg_time,
    Indicator::avg_fftt_time_ratio, Indicator::scope_flow, Indicator::scope_flow_cap_ratio,
    Indicator::scope_time, Indicator::scope_fftt_time_ratio,
};

inline std::string_view indicator_name(Indicator i) {
  switch (i) {
    case Indicator::avg_flow: return "avg_flow";
    case Indicator::avg_flow_cap_ratio: return "avg_flow_cap_ratio";
    case Indicator::avg_time: return "avg_time";
    case Indicator::avg_fftt_time_ratio: return "avg_fftt_time_ratio";
    case Indicator::scope_flow: return "scope_flow";
    case Indicator::scope_flow_cap_ratio: return "scope_flow_cap_ratio";
    case Indicator::scope_time: return "scope_time";
    case Indicator::scope_fftt_time_ratio: return "scope_fftt_time_ratio";
  }
  return "";
}

inline Indicator parse_indicator(std::string_view name) {
  for (Indicator i : kAllIndicators)
    if (indicator_name(i) == name) return i;
  throw ValidationError("unknown indicator '" + std::string(name) + "'");
}

inline double indicator_value(const RoadIndicators& r, Indicator i) {
  switch (i) {
    case Indicator::avg_flow: return r.avg_flow;
    case Indicator::avg_flow_cap_ratio: return r.avg_flow_cap_ratio;
    case Indicator::avg_time: return r.avg_time;
    case Indicator::avg_fftt_time_ratio: return r.avg_fftt_time_ratio;
    case Indicator::scope_flow: return r.scope_flow;
    case Indicator::scope_flow_cap_ratio: return r.scope_flow_cap_ratio;
    case Indicator::scope_time: return r.scope_time;
    case Indicator::scope_fftt_time_ratio: return r.scope_fftt_time_ratio;
  }
  return 0.0;
}

namespace detail {

struct RunningRange {
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
};

}  // namespace detail

/// Indicators for every road present in at least one selected state. The
/// statistics of a road only cover the states in which it exists.
inline std::vector<RoadIndicators> compute_indicators(const StateTree& tree,
                                                      const std::set<StateId>& selected) {
  if (selected.empty()) throw ValidationError("indicator selection is empty");
  struct Acc {
    detail::RunningRange flow, flow_cap, time, fftt_time;
    std::size_t count = 0;
  };
  std::map<RoadId, Acc> acc;
  for (StateId sid : selected) {
    const StateNode& s = tree.node(sid);
    for (const auto& [rid, road] : s.network->roads()) {
      const RoadStatus& st = s.assignment->statuses.at(rid);
      Acc& a = acc[rid];
      a.flow.add(st.actual_volume);
      a.flow_cap.add(st.actual_volume / road.capacity);
      a.time.add(st.actual_time);
      a.fftt_time.add(road.fftt / st.actual_time);
      ++a.count;
    }
  }
  std::vector<RoadIndicators> out;
  out.reserve(acc.size());
  for (const auto& [rid, a] : acc) {
    const double n = static_cast<double>(a.count);
    RoadIndicators r;
    r.road = rid;
    r.avg_flow = a.flow.sum / n;
    r.avg_flow_cap_ratio = a.flow_cap.sum / n;
    r.avg_time = a.time.sum / n;
    r.avg_fftt_time_ratio = a.fftt_time.sum / n;
    r.scope_flow = a.flow.hi - a.flow.lo;
    r.scope_flow_cap_ratio = a.flow_cap.hi - a.flow_cap.lo;
    r.scope_time = a.time.hi - a.time.lo;
    r.scope_fftt_time_ratio = a.fftt_time.hi - a.fftt_time.lo;
    r.state_count = a.count;
    out.push_back(r);
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Roads passing every inclusive range filter, ordered by `sort_key`; ties
/// go to the smaller road id.
inline std::vector<RoadId> filter_and_rank(std::span<const RoadIndicators> indicators,
                                           const std::map<Indicator, Range>& filters,
                                           Indicator sort_key, bool descending) {
  for (const auto& [ind, range] : filters)
    if (!(range.lo <= range.hi))
      throw ValidationError("filter on " + std::string(indicator_name(ind)) + " has lo > hi");

  std::vector<const RoadIndicators*> kept;
  for (const RoadIndicators& r : indicators) {
    bool pass = true;
    for (const auto& [ind, range] : filters) {
      const double v = indicator_value(r, ind);
      if (v < range.lo || v > range.hi) pass = false;
    }
    if (pass) kept.push_back(&r);
  }
  std::sort(kept.begin(), kept.end(), [&](const RoadIndicators* a, const RoadIndicators* b) {
    const double va = indicator_value(*a, sort_key);
    const double vb = indicator_value(*b, sort_key);
    if (va != vb) return descending ? va > vb : va < vb;
    return a->road < b->road;
  });
  std::vector<RoadId> out;
  out.reserve(kept.size());
  for (const auto* r : kept) out.push_back(r->road);
  return out;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

inline constexpr std::size_t kDefaultHistogramBins = 20;

/// Equal-width bins over [min, max]; each bin is [lo, hi) except the last,
/// which is closed. All-equal input yields one bin holding everything.
inline std::vector<HistogramBin> histogram(std::span<const double> values,
                                           std::size_t bin_count = kDefaultHistogramBins) {
  if (values.empty()) throw ValidationError("histogram of an empty set");
  if (bin_count < 1) throw ValidationError("histogram needs at least one bin");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn, hi = *mx;
  if (lo == hi) return {HistogramBin{lo, hi, values.size()}};

  const double width = (hi - lo) / static_cast<double>(bin_count);
  std::vector<HistogramBin> bins(bin_count);
  for (std::size_t i = 0; i < bin_count; ++i) {
    bins[i].lo = lo + width * static_cast<double>(i);
    bins[i].hi = i + 1 == bin_count ? hi : lo + width * static_cast<double>(i + 1);
  }
  for (double v : values) {
    auto i = static_cast<std::size_t>((v - lo) / width);
    i = std::min(i, bin_count - 1);
    // Guard against rounding at the computed edges.
    while (i > 0 && v < bins[i].lo) --i;
    while (i + 1 < bin_count && v >= bins[i + 1].lo) ++i;
    ++bins[i].count;
  }
  return bins;
}

struct OdThroughFlow {
  double originating = 0.0;
  double terminating = 0.0;
};

/// For every equilibrium path using `road`, credits its flow to the path's
/// origin (originating) and destination (terminating).
inline std::map<NodeId, OdThroughFlow> od_through_road(const StateTree& tree, StateId state,
                                                       RoadId road) {
  const StateNode& s = tree.node(state);
  s.network->road(road);
  std::map<NodeId, OdThroughFlow> out;
  for (const auto& [od, paths] : s.assignment->path_flows) {
    for (const Path& p : paths) {
      if (std::find(p.roads.begin(), p.roads.end(), road) == p.roads.end()) continue;
      out[od.origin].originating += p.flow;
      out[od.destination].terminating += p.flow;
    }
  }
  std::erase_if(out, [](const auto& kv) {
    return kv.second.originating == 0.0 && kv.second.terminating == 0.0;
  });
  return out;
}

struct CellStatus {
  RoadId road{};
  StateId state{};
  double capacity = 0.0;
  double volume = 0.0;
  double fftt = 0.0;
  double actual_time = 0.0;
  /// t(initial) - t(state): positive is an improvement. Absent for roads
  /// that did not exist in the initial state.
  std::optional<double> delta_time_vs_initial;

  bool is_new_road() const { return !delta_time_vs_initial.has_value(); }
};

/// One cell per (road, state) pair where the road exists, in road-major order.
inline std::vector<CellStatus> cell_statuses(const StateTree& tree, std::span<const StateId> states,
                                             std::span<const RoadId> roads) {
  const StateNode& root = tree.root();
  for (StateId sid : states) tree.node(sid);
  for (RoadId rid : roads) {
    bool known = false;
    for (StateId sid : states)
      if (tree.node(sid).network->find_road(rid)) known = true;
    if (!known && !root.network->find_road(rid))
      throw NotFoundError("unknown " + to_string(rid) + " in the selected states");
  }
  std::vector<CellStatus> out;
  for (RoadId rid : roads) {
    const Road* initial = root.network->find_road(rid);
    for (StateId sid : states) {
      const StateNode& s = tree.node(sid);
      const Road* r = s.network->find_road(rid);
      if (!r) continue;
      const RoadStatus& st = s.assignment->statuses.at(rid);
      CellStatus c{rid, sid, r->capacity, st.actual_volume, r->fftt, st.actual_time, std::nullopt};
      if (initial) c.delta_time_vs_initial = root.assignment->statuses.at(rid).actual_time - st.actual_time;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace whatif
