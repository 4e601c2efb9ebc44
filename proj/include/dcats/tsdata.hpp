#pragma once

// Time-series storage, train/validation/test splitting, window extraction and
// per-location normalization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/io.hpp"

namespace dcats {

using LocationId = std::int64_t;

/// Half-open interval [begin, end) over time-step indices.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
  [[nodiscard]] bool empty() const noexcept { return size() == 0; }
  [[nodiscard]] bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Immutable matrix of univariate series, one row per location.
class TimeSeriesStore {
 public:
  TimeSeriesStore() = default;

  TimeSeriesStore(std::vector<LocationId> ids, std::vector<double> values, std::size_t n_steps,
                  int interval_minutes = 15, int steps_per_day = 96)
      : ids_(std::move(ids)),
        values_(std::move(values)),
        n_steps_(n_steps),
        interval_minutes_(interval_minutes),
        steps_per_day_(steps_per_day) {
    if (interval_minutes_ <= 0 || steps_per_day_ <= 0) {
      throw ConfigError("interval_minutes and steps_per_day must be positive");
    }
    if (values_.size() != ids_.size() * n_steps_) {
      throw DataError("value matrix does not match n_locations x n_steps");
    }
    for (std::size_t r = 0; r < ids_.size(); ++r) {
      if (!index_.emplace(ids_[r], r).second) {
        throw DataError("row " + std::to_string(r + 1) + ": duplicate location_id " +
                        std::to_string(ids_[r]));
      }
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw DataError("store values must be finite");
    }
  }

  [[nodiscard]] std::size_t n_locations() const noexcept { return ids_.size(); }
  [[nodiscard]] std::size_t n_steps() const noexcept { return n_steps_; }
  [[nodiscard]] int interval_minutes() const noexcept { return interval_minutes_; }
  [[nodiscard]] int steps_per_day() const noexcept { return steps_per_day_; }
  [[nodiscard]] const std::vector<LocationId>& ids() const noexcept { return ids_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }

  [[nodiscard]] bool contains(LocationId id) const { return index_.contains(id); }

  [[nodiscard]] std::size_t row_of(LocationId id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw LookupError("unknown location_id " + std::to_string(id));
    return it->second;
  }

  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * n_steps_, n_steps_);
  }

  [[nodiscard]] std::span<const double> series(LocationId id) const { return row(row_of(id)); }

  friend bool operator==(const TimeSeriesStore& a, const TimeSeriesStore& b) {
    return a.ids_ == b.ids_ && a.values_ == b.values_ && a.n_steps_ == b.n_steps_ &&
           a.interval_minutes_ == b.interval_minutes_ && a.steps_per_day_ == b.steps_per_day_;
  }

 private:
  std::vector<LocationId> ids_;
  std::vector<double> values_;
  std::size_t n_steps_ = 0;
  int interval_minutes_ = 15;
  int steps_per_day_ = 96;
  std::unordered_map<LocationId, std::size_t> index_;
};

namespace detail {

/// Last observation carried forward; a leading gap takes the first valid value.
inline void impute_row(std::vector<std::optional<double>>& row, std::size_t row_number) {
  const auto first = std::find_if(row.begin(), row.end(), [](const auto& v) { return v.has_value(); });
  if (first == row.end()) {
    throw DataError("row " + std::to_string(row_number) + ": no valid values");
  }
  double last = **first;
  for (auto& v : row) {
    if (v) last = *v;
    else v = last;
  }
}

constexpr std::string_view kStoreMagic = "DCATSTS1";

}  // namespace detail

/// Reads the CSV form `location_id,v_0,...,v_{T-1}`. Empty or NaN cells are imputed.
inline TimeSeriesStore load_store_csv(const std::filesystem::path& path, int interval_minutes = 15,
                                      int steps_per_day = 96) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line) || io::trim(line).empty()) {
    throw DataError(path.string() + ": empty dataset file");
  }
  const auto header = io::split_csv_line(line);
  if (header.size() < 2 || io::trim(header[0]) != "location_id") {
    throw DataError(path.string() + ": row 0 (header): expected location_id,v_0,...");
  }
  for (std::size_t c = 1; c < header.size(); ++c) {
    if (io::trim(header[c]) != "v_" + std::to_string(c - 1)) {
      throw DataError(path.string() + ": row 0 (header): column " + std::to_string(c) +
                      " should be v_" + std::to_string(c - 1));
    }
  }
  const std::size_t n_steps = header.size() - 1;
  std::vector<LocationId> ids;
  std::vector<double> values;
  std::unordered_map<LocationId, std::size_t> seen;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (io::trim(line).empty()) continue;
    const auto fields = io::split_csv_line(line);
    const std::string where = path.string() + ": row " + std::to_string(row_number);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    const auto id = io::parse_int<LocationId>(fields[0]);
    if (!id) throw DataError(where + ": invalid location_id '" + fields[0] + "'");
    if (!seen.emplace(*id, row_number).second) {
      throw DataError(where + ": duplicate location_id " + std::to_string(*id));
    }
    std::vector<std::optional<double>> row(n_steps);
    for (std::size_t c = 0; c < n_steps; ++c) {
      const auto t = io::trim(fields[c + 1]);
      if (t.empty() || t == "nan" || t == "NaN" || t == "NA") continue;
      const auto v = io::parse_double(t);
      if (!v) throw DataError(where + ": invalid value '" + std::string(t) + "'");
      if (std::isfinite(*v)) row[c] = *v;
    }
    detail::impute_row(row, row_number);
    ids.push_back(*id);
    for (const auto& v : row) values.push_back(*v);
  }
  if (ids.empty()) throw DataError(path.string() + ": no data rows");
  return TimeSeriesStore(std::move(ids), std::move(values), n_steps, interval_minutes, steps_per_day);
}

inline void save_store_csv(const TimeSeriesStore& store, const std::filesystem::path& path) {
  std::string out = "location_id";
  for (std::size_t t = 0; t < store.n_steps(); ++t) out += ",v_" + std::to_string(t);
  out += '\n';
  for (std::size_t r = 0; r < store.n_locations(); ++r) {
    out += std::to_string(store.ids()[r]);
    for (double v : store.row(r)) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  io::write_text_file(path, out);
}

/// Flat binary sidecar: magic, u64 n_locations, u64 n_steps, u32 interval,
/// u32 steps_per_day, i64 ids[n], f64 values row-major. All little-endian.
inline void save_store_binary(const TimeSeriesStore& store, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  io::write_magic(out, detail::kStoreMagic);
  io::write_le<std::uint64_t>(out, store.n_locations());
  io::write_le<std::uint64_t>(out, store.n_steps());
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.interval_minutes()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.steps_per_day()));
  for (LocationId id : store.ids()) io::write_le<std::int64_t>(out, id);
  for (double v : store.values()) io::write_le<double>(out, v);
}

inline TimeSeriesStore load_store_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  io::expect_magic(in, detail::kStoreMagic, path.string());
  const auto n_loc = io::read_le<std::uint64_t>(in);
  const auto n_steps = io::read_le<std::uint64_t>(in);
  const auto interval = io::read_le<std::uint32_t>(in);
  const auto per_day = io::read_le<std::uint32_t>(in);
  std::vector<LocationId> ids(n_loc);
  for (auto& id : ids) id = io::read_le<std::int64_t>(in);
  std::vector<double> values(n_loc * n_steps);
  for (auto& v : values) v = io::read_le<double>(in);
  return TimeSeriesStore(std::move(ids), std::move(values), n_steps, static_cast<int>(interval),
                         static_cast<int>(per_day));
}

/// Dispatches on extension: `.bin` is the binary sidecar, anything else CSV.
inline TimeSeriesStore load_store(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return load_store_binary(path);
  return load_store_csv(path);
}

// ---------------------------------------------------------------------------
// Splits

struct SplitRatio {
  std::size_t train = 6;
  std::size_t val = 2;
  std::size_t test = 2;
};

struct SplitView {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

/// Train and validation lengths are floored; the remainder goes to test.
/// Every segment must hold at least `min_segment` steps.
inline SplitView split(std::size_t n_steps, SplitRatio ratio, std::size_t min_segment = 1) {
  if (ratio.train == 0 || ratio.val == 0 || ratio.test == 0) {
    throw ConfigError("split ratio parts must be positive");
  }
  const std::size_t total = ratio.train + ratio.val + ratio.test;
  const std::size_t n_train = n_steps * ratio.train / total;
  const std::size_t n_val = n_steps * ratio.val / total;
  const std::size_t n_test = n_steps - n_train - n_val;
  if (n_train < min_segment || n_val < min_segment || n_test < min_segment) {
    throw ConfigError("split of " + std::to_string(n_steps) + " steps gives segments (" +
                      std::to_string(n_train) + ", " + std::to_string(n_val) + ", " +
                      std::to_string(n_test) + "); each needs at least " +
                      std::to_string(min_segment) + " steps");
  }
  return SplitView{{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, n_steps}};
}

inline SplitView split(const TimeSeriesStore& store, SplitRatio ratio, std::size_t min_segment = 1) {
  return split(store.n_steps(), ratio, min_segment);
}

// ---------------------------------------------------------------------------
// Windows

struct WindowEntry {
  LocationId location_id = 0;
  std::size_t start = 0;
  friend bool operator==(const WindowEntry&, const WindowEntry&) = default;
};

/// Input/target windows: input is [start, start+input_len), target the next `horizon` steps.
struct WindowSet {
  std::vector<WindowEntry> entries;
  std::size_t input_len = 96;
  std::size_t horizon = 12;

  [[nodiscard]] std::size_t size() const noexcept { return entries.size(); }
  [[nodiscard]] bool empty() const noexcept { return entries.empty(); }
};

inline std::size_t windows_per_location(std::size_t range_len, std::size_t input_len,
                                        std::size_t horizon, std::size_t stride) {
  const std::size_t span = input_len + horizon;
  if (range_len < span) return 0;
  return (range_len - span) / stride + 1;
}

inline WindowSet make_windows(const TimeSeriesStore& store, IndexRange range,
                              std::span<const LocationId> location_ids, std::size_t input_len,
                              std::size_t horizon, std::size_t stride = 1) {
  if (input_len == 0 || horizon == 0 || stride == 0) {
    throw ConfigError("input_len, horizon and stride must be >= 1");
  }
  if (range.end > store.n_steps()) throw ConfigError("window range exceeds series length");
  WindowSet set{{}, input_len, horizon};
  const std::size_t count = windows_per_location(range.size(), input_len, horizon, stride);
  set.entries.reserve(count * location_ids.size());
  for (LocationId id : location_ids) {
    (void)store.row_of(id);
    for (std::size_t k = 0; k < count; ++k) set.entries.push_back({id, range.begin + k * stride});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kScalerEpsilon = 1e-8;

/// Per-location z-score parameters, aligned to store rows.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  [[nodiscard]] double apply(std::size_t row, double x) const { return (x - mean[row]) / std[row]; }
  [[nodiscard]] double invert(std::size_t row, double z) const { return z * std[row] + mean[row]; }

  [[nodiscard]] std::vector<double> apply(std::size_t row, std::span<const double> xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [&](double x) { return apply(row, x); });
    return out;
  }

  [[nodiscard]] std::vector<double> invert(std::size_t row, std::span<const double> zs) const {
    std::vector<double> out(zs.size());
    std::transform(zs.begin(), zs.end(), out.begin(), [&](double z) { return invert(row, z); });
    return out;
  }
};

/// Fits mean and population standard deviation on the train range only.
inline Scaler fit_scaler(const TimeSeriesStore& store, IndexRange train_range) {
  if (train_range.empty() || train_range.end > store.n_steps()) {
    throw ConfigError("scaler needs a non-empty train range inside the series");
  }
  Scaler s;
  s.mean.resize(store.n_locations());
  s.std.resize(store.n_locations());
  const double n = static_cast<double>(train_range.size());
  for (std::size_t r = 0; r < store.n_locations(); ++r) {
    const auto xs = store.row(r).subspan(train_range.begin, train_range.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    s.mean[r] = mean;
    s.std[r] = std::max(std::sqrt(ss / n), kScalerEpsilon);
  }
  return s;
}

/// The store's values after z-scoring every row; the training/evaluation view.
class NormalizedStore {
 public:
  NormalizedStore(const TimeSeriesStore& store, Scaler scaler)
      : store_(&store), scaler_(std::move(scaler)), values_(store.values().size()) {
    const std::size_t n = store.n_steps();
    for (std::size_t r = 0; r < store.n_locations(); ++r) {
      const auto row = store.row(r);
      for (std::size_t t = 0; t < n; ++t) values_[r * n + t] = scaler_.apply(r, row[t]);
    }
  }

  [[nodiscard]] const TimeSeriesStore& store() const noexcept { return *store_; }
  [[nodiscard]] const Scaler& scaler() const noexcept { return scaler_; }

  [[nodiscard]] std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * store_->n_steps(), store_->n_steps());
  }
  [[nodiscard]] std::span<const double> series(LocationId id) const { return row(store_->row_of(id)); }

 private:
  const TimeSeriesStore* store_;
  Scaler scaler_;
  std::vector<double> values_;
};

}  // namespace dcats
