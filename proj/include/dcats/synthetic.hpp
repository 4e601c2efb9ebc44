#pragma once

// Clustered synthetic traffic: each cluster shares a daily profile and noise
// dynamics; cluster-mates sit along one freeway, freeways run side by side.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/io.hpp"
#include "dcats/metadata.hpp"
#include "dcats/neighbors.hpp"
#include "dcats/templates.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

struct SyntheticSpec {
  std::size_t n_clusters = 3;
  std::size_t series_per_cluster = 20;
  std::size_t n_steps = 4800;
  /// Innovation scale relative to a series' level.
  double noise_sigma = 0.08;
  std::uint64_t seed = 0;
  int interval_minutes = 15;
  int steps_per_day = 96;
  /// Chance that a given day of a series carries an incident.
  double incident_rate = 0.03;
  /// Spacing between neighboring sensors on a freeway and between freeways.
  double sensor_spacing_km = 1.0;
  double freeway_spacing_km = 0.6;
};

struct SyntheticData {
  TimeSeriesStore store;
  MetadataDB metadata;
  RoadGraph graph;
  std::map<LocationId, int> labels;
};

namespace detail {

inline constexpr const char* kCities[] = {"Alder Grove", "Bellmont", "Cedar Falls", "Dunmore", "Eastvale",
                                          "Fairhaven",   "Glenrock", "Harbor View", "Ironwood", "Juniper Hills"};
inline constexpr const char* kCounties[] = {"Mariposa", "Sierra", "Tulare", "Modoc", "Plumas"};

/// Per-cluster daily shape (mean 1) and noise dynamics.
struct ClusterProfile {
  std::vector<double> shape;
  double ar = 0.0;
  double ar_scale = 1.0;
  double white_scale = 1.0;
  double weekend_factor = 1.0;
};

inline ClusterProfile make_cluster_profile(std::size_t cluster, int steps_per_day, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ClusterProfile p;
  p.shape.assign(static_cast<std::size_t>(steps_per_day), 0.0);
  const double day = static_cast<double>(steps_per_day);
  // Peak hours rotate with the cluster so shapes differ clearly.
  const double base_hour = 6.0 + 4.5 * static_cast<double>(cluster % 4);
  const int n_bumps = 2 + static_cast<int>(cluster % 2);
  struct Bump {
    double center, width, height;
  };
  std::vector<Bump> bumps;
  for (int b = 0; b < n_bumps; ++b) {
    const double hour = std::fmod(base_hour + 9.0 * b + 2.0 * u(rng), 24.0);
    bumps.push_back({hour / 24.0 * day, (0.6 + 1.8 * u(rng)) / 24.0 * day, 0.6 + 0.9 * u(rng)});
  }
  for (std::size_t t = 0; t < p.shape.size(); ++t) {
    double v = 0.25;
    for (const auto& bump : bumps) {
      double d = std::abs(static_cast<double>(t) - bump.center);
      d = std::min(d, day - d);
      v += bump.height * std::exp(-0.5 * (d / bump.width) * (d / bump.width));
    }
    p.shape[t] = v;
  }
  double mean = 0.0;
  for (double v : p.shape) mean += v;
  mean /= day;
  for (double& v : p.shape) v /= mean;
  // Noise regimes: clean, heavy measurement noise, slow drift.
  struct Regime {
    double ar, ar_scale, white_scale;
  };
  constexpr Regime regimes[] = {{0.9, 0.1, 0.5}, {0.9, 0.1, 4.0}, {0.98, 1.0, 0.5}};
  const Regime regime = regimes[cluster % 3];
  p.ar = regime.ar;
  p.ar_scale = regime.ar_scale;
  p.white_scale = regime.white_scale;
  p.weekend_factor = 0.55 + 0.4 * u(rng);
  return p;
}

/// Linear interpolation of a periodic shape at fractional position t.
inline double shape_at(const std::vector<double>& shape, double t) {
  const double n = static_cast<double>(shape.size());
  t = std::fmod(t, n);
  if (t < 0) t += n;
  const auto i = static_cast<std::size_t>(t);
  const double f = t - static_cast<double>(i);
  return shape[i] * (1.0 - f) + shape[(i + 1) % shape.size()] * f;
}

}  // namespace detail

/// Deterministic: equal SyntheticSpec values give byte-identical data.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_clusters == 0 || spec.series_per_cluster == 0 || spec.n_steps == 0) {
    throw ConfigError("synthetic spec counts must be positive");
  }
  if (spec.steps_per_day <= 0 || spec.interval_minutes <= 0) throw ConfigError("synthetic spec: bad time grid");
  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");

  std::mt19937_64 rng(io::splitmix64(spec.seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n_loc = spec.n_clusters * spec.series_per_cluster;
  const std::size_t T = spec.n_steps;
  const auto day = static_cast<std::size_t>(spec.steps_per_day);
  std::vector<LocationId> ids(n_loc);
  std::vector<double> values(n_loc * T);
  SyntheticData out;

  constexpr double base_lat = 34.05;
  constexpr double base_lon = -118.25;
  constexpr double km_per_deg_lat = std::numbers::pi * kEarthRadiusKm / 180.0;
  const double km_per_deg_lon = km_per_deg_lat * std::cos(base_lat * std::numbers::pi / 180.0);

  for (std::size_t c = 0; c < spec.n_clusters; ++c) {
    const auto profile = detail::make_cluster_profile(c, spec.steps_per_day, rng);
    const std::string freeway = (c % 2 ? "SR-" : "I-") + std::to_string(5 + 100 * c + 5 * (c % 3));
    const int lanes = 3 + static_cast<int>(c % 3);
    const std::string county = detail::kCounties[c % std::size(detail::kCounties)];
    LocationId previous = -1;
    GeoPoint previous_point{};
    for (std::size_t s = 0; s < spec.series_per_cluster; ++s) {
      const std::size_t r = c * spec.series_per_cluster + s;
      const LocationId id = static_cast<LocationId>(100 + r);
      ids[r] = id;
      out.labels[id] = static_cast<int>(c);

      const double level = 150.0 + 450.0 * u(rng);
      const double amplitude = 0.85 + 0.3 * u(rng);
      const double phase = (u(rng) - 0.5) * 4.0;
      const double sigma = spec.noise_sigma * level;
      double noise = 0.0;
      double* row = values.data() + r * T;
      for (std::size_t t = 0; t < T; ++t) {
        const bool weekend = (t / day) % 7 >= 5;
        const double base = detail::shape_at(profile.shape, static_cast<double>(t) + phase);
        noise = profile.ar * noise + profile.ar_scale * sigma * gauss(rng);
        row[t] = level * (1.0 + amplitude * (base - 1.0)) * (weekend ? profile.weekend_factor : 1.0) + noise +
                 profile.white_scale * sigma * gauss(rng);
      }
      for (std::size_t d = 0; d * day < T; ++d) {
        if (u(rng) >= spec.incident_rate) continue;
        const std::size_t start = d * day + static_cast<std::size_t>(u(rng) * static_cast<double>(day));
        const auto len = static_cast<std::size_t>(4 + u(rng) * 12);
        const double factor = u(rng) < 0.5 ? 0.2 : 1.8;
        for (std::size_t t = start; t < std::min(T, start + len); ++t) row[t] *= factor;
      }
      for (std::size_t t = 0; t < T; ++t) row[t] = std::max(0.0, row[t]);

      LocationMeta meta;
      meta.location_id = id;
      meta.latitude = base_lat + static_cast<double>(c) * spec.freeway_spacing_km / km_per_deg_lat;
      meta.longitude = base_lon + static_cast<double>(s) * spec.sensor_spacing_km / km_per_deg_lon;
      const std::size_t city_idx = (c * 3 + s / 7) % std::size(detail::kCities);
      meta.city = detail::kCities[city_idx];
      meta.county = county;
      meta.population = 20000 + static_cast<std::int64_t>(city_idx) * 13750;
      meta.freeway = freeway;
      meta.lanes = lanes;
      out.metadata.insert(meta);

      out.graph.add_node(id);
      if (previous >= 0) {
        out.graph.add_edge(previous, id, std::max(1e-6, geodetic_distance(previous_point, point_of(meta))));
      }
      previous = id;
      previous_point = point_of(meta);
    }
  }
  out.store = TimeSeriesStore(std::move(ids), std::move(values), T, spec.interval_minutes, spec.steps_per_day);
  return out;
}

/// Writes series.csv, series.bin, metadata.csv, background.txt, graph.csv and labels.csv.
inline void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir,
                            IndexRange volume_range, const TemplateSet& templates = default_templates()) {
  std::filesystem::create_directories(dir);
  save_store_csv(data.store, dir / "series.csv");
  save_store_binary(data.store, dir / "series.bin");
  MetadataDB db = data.metadata;
  fill_missing_volumes(db, data.store, volume_range);
  save_metadata(db, dir / "metadata.csv");
  io::write_text_file(dir / "background.txt", default_background(db, templates));
  save_road_graph(data.graph, dir / "graph.csv");
  std::string labels = "location_id,cluster\n";
  for (const auto& [id, c] : data.labels) labels += std::to_string(id) + ',' + std::to_string(c) + '\n';
  io::write_text_file(dir / "labels.csv", labels);
}

inline std::map<LocationId, int> load_labels(const std::filesystem::path& path) {
  const auto text = io::read_text_file(path);
  std::map<LocationId, int> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const auto line = io::trim(std::string_view(text).substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "location_id,cluster") throw DataError(path.string() + ": expected header location_id,cluster");
      continue;
    }
    const auto cells = io::split_csv_line(line);
    const auto id = cells.size() == 2 ? io::parse_int<LocationId>(cells[0]) : std::nullopt;
    const auto c = cells.size() == 2 ? io::parse_int<int>(cells[1]) : std::nullopt;
    if (!id || !c) throw DataError(path.string() + ": malformed row " + std::to_string(line_no));
    out[*id] = *c;
  }
  return out;
}

}  // namespace dcats
