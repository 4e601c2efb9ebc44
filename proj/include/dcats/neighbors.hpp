#pragma once

// Neighbor sets for a target location under three criteria: shortest road
// distance, best-matching daily pattern, and great-circle distance.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/io.hpp"
#include "dcats/metadata.hpp"
#include "dcats/parallel.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

/// Haversine great-circle distance in kilometers.
inline double geodetic_distance(GeoPoint a, GeoPoint b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.latitude - a.latitude) * rad;
  const double dlon = (b.longitude - a.longitude) * rad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(a.latitude * rad) * std::cos(b.latitude * rad) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

inline GeoPoint point_of(const LocationMeta& m) { return {m.latitude, m.longitude}; }

// ---------------------------------------------------------------------------
// Road graph

struct RoadEdge {
  LocationId from = 0;
  LocationId to = 0;
  double length_km = 0.0;
};

/// Weighted undirected graph over location ids.
class RoadGraph {
 public:
  void add_node(LocationId id) { adjacency_.try_emplace(id); }

  void add_edge(LocationId a, LocationId b, double length_km) {
    if (a == b) throw DataError("road graph: self-loop at " + std::to_string(a));
    if (!(length_km > 0.0) || !std::isfinite(length_km)) {
      throw DataError("road graph: edge " + std::to_string(a) + "-" + std::to_string(b) +
                      " must have positive finite length");
    }
    adjacency_[a].push_back({b, length_km});
    adjacency_[b].push_back({a, length_km});
    edges_.push_back({a, b, length_km});
  }

  [[nodiscard]] bool contains(LocationId id) const { return adjacency_.contains(id); }
  [[nodiscard]] const std::vector<RoadEdge>& edges() const noexcept { return edges_; }
  [[nodiscard]] std::size_t n_nodes() const noexcept { return adjacency_.size(); }

  [[nodiscard]] std::vector<LocationId> nodes() const {
    std::vector<LocationId> out;
    out.reserve(adjacency_.size());
    for (const auto& [id, _] : adjacency_) out.push_back(id);
    return out;
  }

  /// Dijkstra from `source`; unreachable nodes are absent from the result.
  [[nodiscard]] std::map<LocationId, double> distances_from(LocationId source) const {
    if (!contains(source)) throw LookupError("location_id " + std::to_string(source) + " is not in the road graph");
    std::map<LocationId, double> dist;
    using Item = std::pair<double, LocationId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.push({0.0, source});
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (const auto& [v, w] : adjacency_.at(u)) {
        const double nd = d + w;
        const auto it = dist.find(v);
        if (it == dist.end() || nd < it->second) {
          dist[v] = nd;
          heap.push({nd, v});
        }
      }
    }
    return dist;
  }

  /// Every node id must have a metadata record.
  void check_nodes(const MetadataDB& db) const {
    for (const auto& [id, _] : adjacency_) {
      if (!db.contains(id)) throw DataError("road graph node " + std::to_string(id) + " has no metadata record");
    }
  }

 private:
  struct Arc {
    LocationId to;
    double length_km;
  };
  std::map<LocationId, std::vector<Arc>> adjacency_;
  std::vector<RoadEdge> edges_;
};

/// Shortest path length in km; nullopt when b is unreachable from a.
inline std::optional<double> road_distance(const RoadGraph& graph, LocationId a, LocationId b) {
  if (!graph.contains(b)) throw LookupError("location_id " + std::to_string(b) + " is not in the road graph");
  const auto dist = graph.distances_from(a);
  const auto it = dist.find(b);
  if (it == dist.end()) return std::nullopt;
  return it->second;
}

/// Chains the sensors of each freeway in order of their position along the
/// freeway's principal axis; edge length is the geodetic distance.
inline RoadGraph build_road_graph(const MetadataDB& db) {
  RoadGraph graph;
  std::map<std::string, std::vector<const LocationMeta*>> by_freeway;
  for (const auto& [id, m] : db.records()) {
    graph.add_node(id);
    if (!m.freeway.empty()) by_freeway[m.freeway].push_back(&m);
  }
  constexpr double rad = std::numbers::pi / 180.0;
  for (auto& [name, members] : by_freeway) {
    if (members.size() < 2) continue;
    // Local equirectangular projection around the centroid.
    double lat0 = 0.0;
    double lon0 = 0.0;
    for (const auto* m : members) {
      lat0 += m->latitude;
      lon0 += m->longitude;
    }
    lat0 /= static_cast<double>(members.size());
    lon0 /= static_cast<double>(members.size());
    const double kx = kEarthRadiusKm * rad * std::cos(lat0 * rad);
    const double ky = kEarthRadiusKm * rad;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto* m : members) {
      const double x = (m->longitude - lon0) * kx;
      const double y = (m->latitude - lat0) * ky;
      sxx += x * x;
      sxy += x * y;
      syy += y * y;
    }
    // Leading eigenvector of the 2x2 scatter matrix.
    const double angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    const double ux = std::cos(angle);
    const double uy = std::sin(angle);
    std::vector<std::pair<double, const LocationMeta*>> order;
    for (const auto* m : members) {
      const double x = (m->longitude - lon0) * kx;
      const double y = (m->latitude - lat0) * ky;
      order.emplace_back(x * ux + y * uy, m);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->location_id < b.second->location_id;
    });
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto* a = order[i - 1].second;
      const auto* b = order[i].second;
      const double d = std::max(geodetic_distance(point_of(*a), point_of(*b)), 1e-6);
      graph.add_edge(a->location_id, b->location_id, d);
    }
  }
  return graph;
}

/// Edge list CSV `from_id,to_id,length_km`.
inline RoadGraph load_road_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open road graph " + path.string());
  std::string line;
  if (!std::getline(in, line) || io::trim(line) != "from_id,to_id,length_km") {
    throw DataError(path.string() + ": row 0 (header): expected from_id,to_id,length_km");
  }
  RoadGraph graph;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_csv_line(line);
    const std::string where = path.string() + ": row " + std::to_string(row_number);
    if (f.size() != 3) throw DataError(where + ": expected 3 fields");
    const auto a = io::parse_int<LocationId>(f[0]);
    const auto b = io::parse_int<LocationId>(f[1]);
    const auto w = io::parse_double(f[2]);
    if (!a || !b || !w) throw DataError(where + ": invalid edge");
    try {
      graph.add_edge(*a, *b, *w);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return graph;
}

inline void save_road_graph(const RoadGraph& graph, const std::filesystem::path& path) {
  std::string out = "from_id,to_id,length_km\n";
  for (const auto& e : graph.edges()) {
    out += std::to_string(e.from) + ',' + std::to_string(e.to) + ',' + io::format_double(e.length_km) + '\n';
  }
  io::write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Pattern similarity

namespace detail {

/// Mean, inverse centered norm and flatness of every length-m window.
struct WindowStats {
  std::vector<double> mean;
  std::vector<double> inv_norm;
  std::vector<char> flat;
  // Diagonal update terms: df[i] = (x[i+m]-x[i])/2, dg[i] = (x[i+m]-mu[i+1]) + (x[i]-mu[i]).
  std::vector<double> df;
  std::vector<double> dg;
};

inline WindowStats window_stats(std::span<const double> x, std::size_t m) {
  const std::size_t n = x.size() - m + 1;
  WindowStats s;
  s.mean.resize(n);
  s.inv_norm.resize(n);
  s.flat.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t k = 0; k < m; ++k) mu += x[i + k];
    mu /= static_cast<double>(m);
    double ss = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double d = x[i + k] - mu;
      ss += d * d;
      scale = std::max(scale, std::abs(x[i + k]));
    }
    s.mean[i] = mu;
    const double tol = 1e-12 * std::max(1.0, scale);
    s.flat[i] = ss <= static_cast<double>(m) * tol * tol;
    s.inv_norm[i] = s.flat[i] ? 0.0 : 1.0 / std::sqrt(ss);
  }
  s.df.assign(n, 0.0);
  s.dg.assign(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    s.df[i] = (x[i + m] - x[i]) / 2.0;
    s.dg[i] = (x[i + m] - s.mean[i + 1]) + (x[i] - s.mean[i]);
  }
  return s;
}

inline double centered_dot(std::span<const double> x, std::size_t i, double mx, std::span<const double> y,
                           std::size_t j, double my, std::size_t m) {
  double c = 0.0;
  for (std::size_t k = 0; k < m; ++k) c += (x[i + k] - mx) * (y[j + k] - my);
  return c;
}

/// Visits every (i, j) window pair diagonal by diagonal with the centered
/// cross product updated in O(1) per step. Calls visit(i, j, corr) for every
/// pair where neither window is flat.
template <typename Visit>
void for_each_window_pair(std::span<const double> x, const WindowStats& sx, std::span<const double> y,
                          const WindowStats& sy, std::size_t m, Visit&& visit) {
  const auto nx = static_cast<std::ptrdiff_t>(sx.mean.size());
  const auto ny = static_cast<std::ptrdiff_t>(sy.mean.size());
  for (std::ptrdiff_t d = -(ny - 1); d < nx; ++d) {
    std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, d));
    std::size_t j = static_cast<std::size_t>(i - d);
    double cov = centered_dot(x, i, sx.mean[i], y, j, sy.mean[j], m);
    while (true) {
      if (!sx.flat[i] && !sy.flat[j]) visit(i, j, cov * sx.inv_norm[i] * sy.inv_norm[j]);
      if (i + 1 >= sx.mean.size() || j + 1 >= sy.mean.size()) break;
      cov += sx.df[i] * sy.dg[j] + sy.df[j] * sx.dg[i];
      ++i;
      ++j;
    }
  }
}

}  // namespace detail

/// Highest Pearson correlation between any length-m window of x and any
/// length-m window of y. Flat windows are excluded; the result is clamped to
/// [-1, 1] and symmetric in its arguments.
inline double pattern_similarity(std::span<const double> x, std::span<const double> y, std::size_t m) {
  if (m < 3 || x.size() < m || y.size() < m) {
    throw ConfigError("pattern_similarity needs m >= 3 and both series at least m long");
  }
  // Canonical argument order makes the floating-point path identical for (x, y) and (y, x).
  if (std::lexicographical_compare(y.begin(), y.end(), x.begin(), x.end())) std::swap(x, y);
  const auto sx = detail::window_stats(x, m);
  const auto sy = detail::window_stats(y, m);
  double best = -std::numeric_limits<double>::infinity();
  detail::for_each_window_pair(x, sx, y, sy, m, [&](std::size_t, std::size_t, double r) { best = std::max(best, r); });
  if (!std::isfinite(best)) throw DataError("pattern similarity undefined: every window is constant in a series");
  return std::clamp(best, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Neighbor sets

enum class NeighborKind { road, pattern, geodetic };

inline std::string to_string(NeighborKind k) {
  switch (k) {
    case NeighborKind::road: return "road";
    case NeighborKind::pattern: return "pattern";
    case NeighborKind::geodetic: return "geodetic";
  }
  return "?";
}

struct NeighborEntry {
  LocationId location_id = 0;
  NeighborKind kind = NeighborKind::pattern;
  double value = 0.0;  // similarity for pattern, km otherwise

  [[nodiscard]] Annotation annotation() const {
    return kind == NeighborKind::pattern ? Annotation{Annotation::Kind::similarity, value}
                                         : Annotation{Annotation::Kind::distance, value};
  }
  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

struct NeighborSets {
  LocationId target = 0;
  std::vector<NeighborEntry> road;
  std::vector<NeighborEntry> pattern;
  std::vector<NeighborEntry> geodetic;

  /// Distinct ids across the three lists in road, pattern, geodetic order.
  [[nodiscard]] std::vector<LocationId> pool() const {
    std::vector<LocationId> out;
    for (const auto* list : {&road, &pattern, &geodetic}) {
      for (const auto& e : *list) {
        if (std::find(out.begin(), out.end(), e.location_id) == out.end()) out.push_back(e.location_id);
      }
    }
    return out;
  }

  [[nodiscard]] bool empty() const { return road.empty() && pattern.empty() && geodetic.empty(); }
};

struct NeighborConfig {
  std::size_t k = 10;
  std::size_t pattern_window = 0;  // 0: one day
  std::size_t pattern_suffix = 0;  // 0: whole train range
  std::size_t threads = 1;
};

/// Ranks all other locations by the three criteria. Ties break by ascending id;
/// nodes unreachable by road are left out of the road list.
inline NeighborSets build_neighbor_sets(const TimeSeriesStore& store, const MetadataDB& db, const RoadGraph& graph,
                                        LocationId target, IndexRange train_range, const NeighborConfig& cfg) {
  if (!store.contains(target)) throw LookupError("unknown target location_id " + std::to_string(target));
  const auto& target_meta = db.at(target);
  const std::size_t m = cfg.pattern_window ? cfg.pattern_window : static_cast<std::size_t>(store.steps_per_day());
  IndexRange pattern_range = train_range;
  if (cfg.pattern_suffix > 0 && cfg.pattern_suffix < train_range.size()) {
    pattern_range.begin = train_range.end - cfg.pattern_suffix;
  }

  std::vector<LocationId> candidates;
  for (LocationId id : store.ids()) {
    if (id != target) candidates.push_back(id);
  }
  std::sort(candidates.begin(), candidates.end());

  NeighborSets sets;
  sets.target = target;

  auto take = [&](std::vector<NeighborEntry> all, bool descending) {
    std::sort(all.begin(), all.end(), [&](const NeighborEntry& a, const NeighborEntry& b) {
      if (a.value != b.value) return descending ? a.value > b.value : a.value < b.value;
      return a.location_id < b.location_id;
    });
    if (all.size() > cfg.k) all.resize(cfg.k);
    return all;
  };

  if (graph.contains(target)) {
    std::vector<NeighborEntry> road;
    for (const auto& [id, d] : graph.distances_from(target)) {
      if (id != target && store.contains(id)) road.push_back({id, NeighborKind::road, d});
    }
    sets.road = take(std::move(road), false);
  }

  std::vector<NeighborEntry> geo;
  for (LocationId id : candidates) {
    geo.push_back({id, NeighborKind::geodetic, geodetic_distance(point_of(target_meta), point_of(db.at(id)))});
  }
  sets.geodetic = take(std::move(geo), false);

  const auto x = store.series(target).subspan(pattern_range.begin, pattern_range.size());
  std::vector<std::optional<double>> sims(candidates.size());
  parallel_for(candidates.size(), cfg.threads, [&](std::size_t c) {
    const auto y = store.series(candidates[c]).subspan(pattern_range.begin, pattern_range.size());
    try {
      sims[c] = pattern_similarity(x, y, m);
    } catch (const DataError&) {
      // flat series carry no pattern; leave them out of the list
    }
  });
  std::vector<NeighborEntry> pat;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (sims[c]) pat.push_back({candidates[c], NeighborKind::pattern, *sims[c]});
  }
  sets.pattern = take(std::move(pat), true);
  return sets;
}

/// Diagnostic CSV `target_id,kind,rank,neighbor_id,value`.
inline std::string neighbor_sets_csv(std::span<const NeighborSets> all) {
  std::string out = "target_id,kind,rank,neighbor_id,value\n";
  for (const auto& s : all) {
    for (const auto* list : {&s.road, &s.pattern, &s.geodetic}) {
      for (std::size_t r = 0; r < list->size(); ++r) {
        const auto& e = (*list)[r];
        out += std::to_string(s.target) + ',' + to_string(e.kind) + ',' + std::to_string(r + 1) + ',' +
               std::to_string(e.location_id) + ',' + io::format_double(e.value) + '\n';
      }
    }
  }
  return out;
}

}  // namespace dcats
