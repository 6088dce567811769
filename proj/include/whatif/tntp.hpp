#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "whatif/choice.hpp"
#include "whatif/demand.hpp"
#include "whatif/error.hpp"
#include "whatif/network.hpp"

// Readers and writers for the TNTP plain-text benchmark layout:
//   *_net.tntp    metadata block, then one row per directed link
//   *_trips.tntp  metadata block, then "Origin r" blocks of "s : v;" entries
//   *_node.tntp   "node x y ;" rows

namespace whatif::tntp {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> to_int64(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Drops a trailing ';' and everything after a '~' comment marker.
inline std::string_view strip_row(std::string_view line) {
  if (auto c = line.find('~'); c != std::string_view::npos) line = line.substr(0, c);
  line = trim(line);
  if (!line.empty() && line.back() == ';') line = trim(line.substr(0, line.size() - 1));
  return line;
}

struct Metadata {
  std::map<std::string, std::string, std::less<>> values;
  std::size_t body_start = 0;  // index of the first line after <END OF METADATA>
};

inline Metadata read_metadata(const std::vector<std::string_view>& lines) {
  Metadata md;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '~') continue;
    if (line.front() != '<') throw ParseError("expected a metadata line '<KEY> value'", i + 1);
    const auto close = line.find('>');
    if (close == std::string_view::npos) throw ParseError("unterminated metadata key", i + 1);
    std::string key(trim(line.substr(1, close - 1)));
    if (key == "END OF METADATA") {
      md.body_start = i + 1;
      return md;
    }
    md.values[key] = std::string(trim(line.substr(close + 1)));
  }
  throw ParseError("missing <END OF METADATA>", lines.size());
}

inline std::optional<std::int64_t> metadata_int(const Metadata& md, std::string_view key) {
  auto it = md.values.find(key);
  if (it == md.values.end()) return std::nullopt;
  auto v = to_int64(it->second);
  if (!v) throw ParseError("metadata <" + std::string(key) + "> is not an integer", 0);
  return v;
}

inline std::optional<double> metadata_double(const Metadata& md, std::string_view key) {
  auto it = md.values.find(key);
  if (it == md.values.end()) return std::nullopt;
  auto v = to_double(it->second);
  if (!v) throw ParseError("metadata <" + std::string(key) + "> is not a number", 0);
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

struct NetworkFile {
  std::int64_t zones = 0;
  std::int64_t node_count = 0;
  std::int64_t first_thru_node = 1;
  std::int64_t link_count = 0;
  RoadNetwork network;
  std::vector<std::string> warnings;
};

/// Parses a link file. Nodes 1..<NUMBER OF NODES> are created at the origin
/// (attach coordinates with attach_coords); road i is the i-th data row.
/// The b/power columns are read but the BPR curve stays (0.15, 4).
inline NetworkFile parse_network(std::string_view text, Projection projection = Projection::lonlat,
                                 double km_per_unit = 1.0) {
  const auto lines = detail::split_lines(text);
  const auto md = detail::read_metadata(lines);
  NetworkFile out{0, 0, 1, 0, RoadNetwork(projection, km_per_unit), {}};
  const auto nodes = detail::metadata_int(md, "NUMBER OF NODES");
  const auto links = detail::metadata_int(md, "NUMBER OF LINKS");
  if (!nodes || *nodes < 0) throw ParseError("missing <NUMBER OF NODES>", 0);
  if (!links || *links < 0) throw ParseError("missing <NUMBER OF LINKS>", 0);
  out.node_count = *nodes;
  out.link_count = *links;
  out.zones = detail::metadata_int(md, "NUMBER OF ZONES").value_or(0);
  out.first_thru_node = detail::metadata_int(md, "FIRST THRU NODE").value_or(1);

  for (std::int64_t n = 1; n <= *nodes; ++n) out.network.add_node({NodeId{n}, {}});

  std::int64_t rows = 0;
  std::size_t nonstandard_bpr = 0;
  for (std::size_t i = md.body_start; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto row = detail::strip_row(lines[i]);
    if (row.empty()) continue;
    const auto tok = detail::tokens(row);
    if (tok.size() < 5) throw ParseError("link row needs at least 5 columns", line_no);
    const auto from = detail::to_int64(tok[0]);
    const auto to = detail::to_int64(tok[1]);
    if (!from || !to) throw ParseError("link endpoints must be integers", line_no);
    std::vector<double> num;
    for (std::size_t k = 2; k < tok.size(); ++k) {
      auto v = detail::to_double(tok[k]);
      if (!v) throw ParseError("column " + std::to_string(k + 1) + " is not a number", line_no);
      num.push_back(*v);
    }
    const double capacity = num[0], length = num[1], fftt = num[2];
    if (num.size() >= 5 && (num[3] != kBprAlpha || num[4] != kBprPower)) ++nonstandard_bpr;
    if (*from < 1 || *from > *nodes || *to < 1 || *to > *nodes)
      throw ParseError("link endpoint outside 1.." + std::to_string(*nodes), line_no);
    if (!(capacity > 0.0)) throw ParseError("capacity must be positive", line_no);
    if (!(fftt > 0.0)) throw ParseError("free-flow time must be positive", line_no);
    if (length < 0.0) throw ParseError("length must be nonnegative", line_no);
    ++rows;
    try {
      out.network.add_road(Road{RoadId{rows}, NodeId{*from}, NodeId{*to}, capacity, fftt, length,
                                RoadKind::surface});
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (rows != *links)
    throw ParseError("declared " + std::to_string(*links) + " links but found " +
                         std::to_string(rows),
                     lines.size());
  if (nonstandard_bpr > 0)
    out.warnings.push_back(std::to_string(nonstandard_bpr) +
                           " link rows specify BPR parameters other than (0.15, 4); using (0.15, 4)");
  return out;
}

struct TripsFile {
  std::int64_t zones = 0;
  double declared_total = 0.0;
  /// Distinct origin != destination entries listed in the file, including
  /// zero-valued ones.
  std::size_t listed_pairs = 0;
  DemandTable demands;  // positive entries only
  std::vector<std::string> warnings;
};

inline TripsFile parse_trips(std::string_view text) {
  const auto lines = detail::split_lines(text);
  const auto md = detail::read_metadata(lines);
  TripsFile out;
  const auto total = detail::metadata_double(md, "TOTAL OD FLOW");
  if (!total) throw ParseError("missing <TOTAL OD FLOW>", 0);
  out.declared_total = *total;
  out.zones = detail::metadata_int(md, "NUMBER OF ZONES").value_or(0);

  std::optional<std::int64_t> origin;
  std::set<OdPair> listed;
  double raw_sum = 0.0;
  for (std::size_t i = md.body_start; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = detail::trim(lines[i]);
    if (auto c = line.find('~'); c != std::string_view::npos) line = detail::trim(line.substr(0, c));
    if (line.empty()) continue;
    if (line.starts_with("Origin")) {
      const auto tok = detail::tokens(line);
      if (tok.size() != 2) throw ParseError("expected 'Origin <node>'", line_no);
      origin = detail::to_int64(tok[1]);
      if (!origin || *origin < 1) throw ParseError("origin must be a positive integer", line_no);
      continue;
    }
    if (!origin) throw ParseError("demand entry before any 'Origin' line", line_no);
    std::size_t pos = 0;
    while (pos < line.size()) {
      auto semi = line.find(';', pos);
      if (semi == std::string_view::npos) semi = line.size();
      const auto entry = detail::trim(line.substr(pos, semi - pos));
      pos = semi + 1;
      if (entry.empty()) continue;
      const auto colon = entry.find(':');
      if (colon == std::string_view::npos) throw ParseError("expected 'destination : trips'", line_no);
      const auto dest = detail::to_int64(detail::trim(entry.substr(0, colon)));
      const auto trips = detail::to_double(detail::trim(entry.substr(colon + 1)));
      if (!dest || *dest < 1) throw ParseError("destination must be a positive integer", line_no);
      if (!trips || *trips < 0.0) throw ParseError("trips must be a nonnegative number", line_no);
      raw_sum += *trips;
      const OdPair od{NodeId{*origin}, NodeId{*dest}};
      if (*dest == *origin) {
        if (*trips > 0.0)
          out.warnings.push_back("line " + std::to_string(line_no) + ": dropped self-pair " +
                                 to_string(od));
        continue;
      }
      if (!listed.insert(od).second) throw ParseError("duplicate OD pair " + to_string(od), line_no);
      add_demand(out.demands, od, *trips);
    }
  }
  out.listed_pairs = listed.size();
  const double scale = std::max(std::abs(out.declared_total), 1.0);
  if (std::abs(raw_sum - out.declared_total) > 1e-6 * scale)
    throw ParseError("entries sum to " + detail::format_double(raw_sum) +
                         " but <TOTAL OD FLOW> declares " + detail::format_double(out.declared_total),
                     0);
  return out;
}

/// Node coordinate rows "node x y". A non-numeric first row is a header.
inline std::map<NodeId, Position> parse_coords(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::map<NodeId, Position> out;
  bool first = true;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto row = detail::strip_row(lines[i]);
    if (row.empty()) continue;
    const auto tok = detail::tokens(row);
    const auto id = tok.empty() ? std::nullopt : detail::to_int64(tok[0]);
    if (first && !id) {
      first = false;
      continue;
    }
    first = false;
    if (tok.size() < 3 || !id) throw ParseError("expected 'node x y'", i + 1);
    const auto x = detail::to_double(tok[1]);
    const auto y = detail::to_double(tok[2]);
    if (!x || !y) throw ParseError("coordinates must be numbers", i + 1);
    if (!out.emplace(NodeId{*id}, Position{*x, *y}).second)
      throw ParseError("duplicate coordinates for " + to_string(NodeId{*id}), i + 1);
  }
  return out;
}

/// Places every node of `network`. Nodes without coordinates, or
/// coordinates for unknown nodes, are reported together.
inline void attach_coords(RoadNetwork& network, const std::map<NodeId, Position>& coords) {
  std::string missing, unknown;
  for (const auto& [id, n] : network.nodes())
    if (!coords.contains(id)) missing += " " + std::to_string(to_int(id));
  for (const auto& [id, p] : coords)
    if (!network.has_node(id)) unknown += " " + std::to_string(to_int(id));
  if (!missing.empty()) throw ValidationError("nodes without coordinates:" + missing);
  if (!unknown.empty()) throw ValidationError("coordinates for unknown nodes:" + unknown);
  for (const auto& [id, p] : coords) network.set_position(id, p);
}

/// Writes a link file readable by parse_network. Node count is the largest
/// node id; roads are written in id order.
inline std::string serialize_network(const RoadNetwork& network) {
  std::int64_t max_node = 0;
  for (const auto& [id, n] : network.nodes()) max_node = std::max(max_node, to_int(id));
  std::ostringstream os;
  os << "<NUMBER OF ZONES> " << max_node << "\n"
     << "<NUMBER OF NODES> " << max_node << "\n"
     << "<FIRST THRU NODE> 1\n"
     << "<NUMBER OF LINKS> " << network.roads().size() << "\n"
     << "<END OF METADATA>\n\n"
     << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
  for (const auto& [id, r] : network.roads()) {
    os << '\t' << to_int(r.from) << '\t' << to_int(r.to) << '\t' << detail::format_double(r.capacity)
       << '\t' << detail::format_double(road_length_km(network, id)) << '\t'
       << detail::format_double(r.fftt) << "\t0.15\t4\t0\t0\t1\t;\n";
  }
  return os.str();
}

/// Network, optional coordinates and demand loaded together.
struct Dataset {
  RoadNetwork network;
  DemandTable demands;
  std::size_t listed_od_pairs = 0;
  std::vector<std::string> warnings;
};

inline Dataset load_dataset(std::string_view net_text, std::string_view trips_text,
                            std::optional<std::string_view> coords_text,
                            Projection projection = Projection::lonlat) {
  NetworkFile net = parse_network(net_text, projection);
  TripsFile trips = parse_trips(trips_text);
  if (coords_text) attach_coords(net.network, parse_coords(*coords_text));
  Dataset d{std::move(net.network), std::move(trips.demands), trips.listed_pairs, std::move(net.warnings)};
  d.warnings.insert(d.warnings.end(), trips.warnings.begin(), trips.warnings.end());
  return d;
}

}  // namespace whatif::tntp
