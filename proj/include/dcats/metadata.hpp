#pragma once

// Per-location metadata and its natural-language rendering for prompts.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/io.hpp"
#include "dcats/templates.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

struct LocationMeta {
  LocationId location_id = 0;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string city;
  std::string county;
  std::optional<std::int64_t> population;
  std::string freeway;
  std::optional<int> lanes;
  std::optional<std::int64_t> historical_total_volume;

  /// Throws DataError describing the first violated invariant.
  void validate(const std::string& where = {}) const {
    const std::string prefix = where.empty() ? "location " + std::to_string(location_id) : where;
    if (!(latitude >= -90.0 && latitude <= 90.0)) {
      throw DataError(prefix + ": latitude " + io::format_double(latitude) + " outside [-90, 90]");
    }
    if (!(longitude >= -180.0 && longitude <= 180.0)) {
      throw DataError(prefix + ": longitude " + io::format_double(longitude) + " outside [-180, 180]");
    }
    if (lanes && *lanes < 1) throw DataError(prefix + ": lanes must be >= 1");
    if (population && *population < 0) throw DataError(prefix + ": population must be >= 0");
  }
};

class MetadataDB {
 public:
  std::string background_text;

  void insert(LocationMeta meta, const std::string& where = {}) {
    meta.validate(where);
    const auto id = meta.location_id;
    if (!records_.emplace(id, std::move(meta)).second) {
      throw DataError((where.empty() ? std::string("metadata") : where) + ": duplicate location_id " +
                      std::to_string(id));
    }
  }

  [[nodiscard]] bool contains(LocationId id) const { return records_.contains(id); }

  [[nodiscard]] const LocationMeta& at(LocationId id) const {
    const auto it = records_.find(id);
    if (it == records_.end()) throw LookupError("no metadata for location_id " + std::to_string(id));
    return it->second;
  }

  [[nodiscard]] LocationMeta& at(LocationId id) {
    const auto it = records_.find(id);
    if (it == records_.end()) throw LookupError("no metadata for location_id " + std::to_string(id));
    return it->second;
  }

  [[nodiscard]] const std::map<LocationId, LocationMeta>& records() const noexcept { return records_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }

 private:
  std::map<LocationId, LocationMeta> records_;
};

inline constexpr std::string_view kMetadataHeader =
    "location_id,latitude,longitude,city,county,population,freeway,lanes,historical_total_volume";

/// Reads the metadata CSV; `background_path`, when given, supplies the dataset description.
inline MetadataDB load_metadata(const std::filesystem::path& path,
                                const std::filesystem::path& background_path = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metadata " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty metadata file");
  const auto header = io::split_csv_line(line);
  const auto expected = io::split_csv_line(kMetadataHeader);
  if (header.size() != expected.size()) {
    throw DataError(path.string() + ": row 0 (header): expected " + std::string(kMetadataHeader));
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (io::trim(header[i]) != expected[i]) {
      throw DataError(path.string() + ": row 0 (header): column " + std::to_string(i) + " should be " +
                      expected[i]);
    }
  }
  MetadataDB db;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (io::trim(line).empty()) continue;
    const auto f = io::split_csv_line(line);
    const std::string where = path.string() + ": row " + std::to_string(row_number);
    if (f.size() != expected.size()) {
      throw DataError(where + ": expected " + std::to_string(expected.size()) + " fields, got " +
                      std::to_string(f.size()));
    }
    LocationMeta m;
    const auto id = io::parse_int<LocationId>(f[0]);
    const auto lat = io::parse_double(f[1]);
    const auto lon = io::parse_double(f[2]);
    if (!id) throw DataError(where + ": invalid location_id");
    if (!lat || !lon) throw DataError(where + ": invalid coordinates");
    m.location_id = *id;
    m.latitude = *lat;
    m.longitude = *lon;
    m.city = std::string(io::trim(f[3]));
    m.county = std::string(io::trim(f[4]));
    if (!io::trim(f[5]).empty()) {
      m.population = io::parse_int<std::int64_t>(f[5]);
      if (!m.population) throw DataError(where + ": invalid population");
    }
    m.freeway = std::string(io::trim(f[6]));
    if (!io::trim(f[7]).empty()) {
      m.lanes = io::parse_int<int>(f[7]);
      if (!m.lanes) throw DataError(where + ": invalid lanes");
    }
    if (!io::trim(f[8]).empty()) {
      m.historical_total_volume = io::parse_int<std::int64_t>(f[8]);
      if (!m.historical_total_volume) throw DataError(where + ": invalid historical_total_volume");
    }
    db.insert(std::move(m), where);
  }
  if (!background_path.empty()) db.background_text = std::string(io::trim(io::read_text_file(background_path)));
  return db;
}

inline void save_metadata(const MetadataDB& db, const std::filesystem::path& path) {
  std::string out(kMetadataHeader);
  out += '\n';
  auto opt = [](const auto& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& [id, m] : db.records()) {
    out += std::to_string(id) + ',' + io::format_double(m.latitude) + ',' + io::format_double(m.longitude) +
           ',' + io::csv_escape(m.city) + ',' + io::csv_escape(m.county) + ',' + opt(m.population) + ',' +
           io::csv_escape(m.freeway) + ',' + opt(m.lanes) + ',' + opt(m.historical_total_volume) + '\n';
  }
  io::write_text_file(path, out);
}

/// Every series in the store must have a metadata record.
inline void check_covers(const MetadataDB& db, const TimeSeriesStore& store) {
  for (LocationId id : store.ids()) {
    if (!db.contains(id)) throw DataError("location_id " + std::to_string(id) + " has no metadata record");
  }
}

/// Missing volumes become the rounded train-range sum of the series.
inline void fill_missing_volumes(MetadataDB& db, const TimeSeriesStore& store, IndexRange train_range) {
  for (LocationId id : store.ids()) {
    auto& m = db.at(id);
    if (m.historical_total_volume) continue;
    const auto xs = store.series(id).subspan(train_range.begin, train_range.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    m.historical_total_volume = static_cast<std::int64_t>(std::llround(sum));
  }
}

/// Dataset description from the `background` template when no background file was supplied.
inline std::string default_background(const MetadataDB& db, const TemplateSet& templates) {
  if (db.size() == 0) return {};
  return templates.render("background",
                          {{"n_locations", io::format_thousands(static_cast<std::int64_t>(db.size()))},
                           {"min_location_id", io::format_thousands(db.records().begin()->first)},
                           {"max_location_id", io::format_thousands(db.records().rbegin()->first)}});
}

// ---------------------------------------------------------------------------
// Rendering

/// What a neighbor entry is annotated with in prompts.
struct Annotation {
  enum class Kind { similarity, distance };
  Kind kind = Kind::similarity;
  double value = 0.0;

  [[nodiscard]] std::string text() const {
    if (kind == Kind::similarity) return "similarity=" + io::format_fixed(value, 4);
    return "distance=" + io::format_fixed(value, 2) + "km";
  }
};

namespace detail {

inline std::string render_location_impl(const LocationMeta& m, const std::optional<Annotation>& annotation,
                                        const TemplateSet& templates) {
  std::string fields;
  if (annotation) fields += ", " + annotation->text();
  if (m.historical_total_volume) fields += ", historical_total_volume=" + std::to_string(*m.historical_total_volume);
  std::string population;
  if (m.population) {
    population = templates.render("population_sentence",
                                  {{"city", m.city}, {"population", io::format_thousands(*m.population)}});
  }
  std::string freeway;
  if (!m.freeway.empty()) {
    freeway = m.lanes ? templates.render("freeway_sentence",
                                         {{"freeway", m.freeway}, {"lanes", std::to_string(*m.lanes)}})
                      : templates.render("freeway_sentence_no_lanes", {{"freeway", m.freeway}});
  }
  return templates.render("location", {{"id", std::to_string(m.location_id)},
                                       {"fields", fields},
                                       {"city", m.city},
                                       {"county", m.county},
                                       {"state", templates.get("state")},
                                       {"population_sentence", population},
                                       {"freeway_sentence", freeway}});
}

}  // namespace detail

/// One-paragraph description of a location, e.g.
/// "location_id=1201, historical_total_volume=2229867. This location is in Campbell, ...".
inline std::string render_location(const MetadataDB& db, LocationId id,
                                   const TemplateSet& templates = default_templates()) {
  return detail::render_location_impl(db.at(id), std::nullopt, templates);
}

/// The location description with the similarity or distance inserted after the id.
inline std::string render_neighbor_entry(const MetadataDB& db, LocationId id, Annotation annotation,
                                         const TemplateSet& templates = default_templates()) {
  return detail::render_location_impl(db.at(id), annotation, templates);
}

}  // namespace dcats
