#pragma once

// Discord scoring with a self-join matrix profile and removal of the most
// anomalous training days.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/io.hpp"
#include "dcats/neighbors.hpp"
#include "dcats/parallel.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

/// For each subsequence, the z-normalized Euclidean distance to its nearest
/// neighbor outside the trivial-match zone. Entries with no defined neighbor
/// hold +inf and index -1.
struct MatrixProfile {
  std::vector<double> distances;
  std::vector<std::int64_t> indices;
  std::size_t window = 0;
  std::size_t exclusion = 0;
};

/// Self-join matrix profile, O(n^2) time and O(n) memory. A pair is a match
/// candidate when |i - j| > exclusion (default m/2). Two flat windows are at
/// distance 0; a flat window is never compared with a non-flat one.
inline MatrixProfile matrix_profile(std::span<const double> x, std::size_t m,
                                    std::optional<std::size_t> exclusion = std::nullopt) {
  if (m < 3) throw ConfigError("matrix profile window must be >= 3");
  if (x.size() < 2 * m) {
    throw DataError("matrix profile needs a series of at least 2m = " + std::to_string(2 * m) + " steps, got " +
                    std::to_string(x.size()));
  }
  const std::size_t excl = exclusion.value_or(m / 2);
  const auto stats = detail::window_stats(x, m);
  const std::size_t n = stats.mean.size();
  MatrixProfile mp;
  mp.window = m;
  mp.exclusion = excl;
  // Track best correlation; convert to distance at the end.
  std::vector<double> best_corr(n, -std::numeric_limits<double>::infinity());
  mp.indices.assign(n, -1);
  const double two_m = 2.0 * static_cast<double>(m);
  auto offer = [&](std::size_t i, std::size_t j, double r) {
    if (r > best_corr[i]) {
      best_corr[i] = r;
      mp.indices[i] = static_cast<std::int64_t>(j);
    }
  };
  for (std::size_t d = excl + 1; d < n; ++d) {
    double cov = detail::centered_dot(x, 0, stats.mean[0], x, d, stats.mean[d], m);
    for (std::size_t i = 0, j = d; j < n; ++i, ++j) {
      if (i > 0) cov += stats.df[i - 1] * stats.dg[j - 1] + stats.df[j - 1] * stats.dg[i - 1];
      const bool fi = stats.flat[i];
      const bool fj = stats.flat[j];
      if (fi && fj) {
        offer(i, j, 1.0);
        offer(j, i, 1.0);
      } else if (!fi && !fj) {
        const double r = cov * stats.inv_norm[i] * stats.inv_norm[j];
        offer(i, j, r);
        offer(j, i, r);
      }
    }
  }
  mp.distances.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (mp.indices[i] < 0) {
      mp.distances[i] = std::numeric_limits<double>::infinity();
    } else {
      const double r = std::min(1.0, best_corr[i]);
      mp.distances[i] = std::sqrt(std::max(0.0, two_m * (1.0 - r)));
    }
  }
  return mp;
}

/// Per-location anomaly scores for consecutive non-overlapping days of the
/// training range. A trailing partial day is not scored.
struct DiscordScores {
  std::map<LocationId, std::vector<double>> day_scores;
  std::size_t day_len = 96;
  std::size_t range_begin = 0;
  std::size_t window = 24;

  [[nodiscard]] const std::vector<double>& of(LocationId id) const {
    const auto it = day_scores.find(id);
    if (it == day_scores.end()) throw LookupError("no discord scores for location_id " + std::to_string(id));
    return it->second;
  }
};

/// Score of a day = largest finite profile value among subsequences starting in it.
inline std::vector<double> day_scores_from_profile(const MatrixProfile& mp, std::size_t series_len,
                                                   std::size_t day_len) {
  const std::size_t n_days = series_len / day_len;
  std::vector<double> scores(n_days, 0.0);
  for (std::size_t d = 0; d < n_days; ++d) {
    const std::size_t end = std::min((d + 1) * day_len, mp.distances.size());
    for (std::size_t i = d * day_len; i < end; ++i) {
      if (std::isfinite(mp.distances[i])) scores[d] = std::max(scores[d], mp.distances[i]);
    }
  }
  return scores;
}

inline DiscordScores discord_scores(const TimeSeriesStore& store, std::span<const LocationId> location_ids,
                                    IndexRange train_range, std::size_t m, std::size_t threads = 1) {
  DiscordScores out;
  out.day_len = static_cast<std::size_t>(store.steps_per_day());
  out.range_begin = train_range.begin;
  out.window = m;
  std::vector<std::vector<double>> per(location_ids.size());
  parallel_for(location_ids.size(), threads, [&](std::size_t k) {
    const auto x = store.series(location_ids[k]).subspan(train_range.begin, train_range.size());
    per[k] = day_scores_from_profile(matrix_profile(x, m), x.size(), out.day_len);
  });
  for (std::size_t k = 0; k < location_ids.size(); ++k) out.day_scores[location_ids[k]] = std::move(per[k]);
  return out;
}

/// Number of days removed for a fraction; tolerant of 0.1 * 30 style rounding.
inline std::size_t pruned_day_count(double fraction, std::size_t n_days) {
  if (fraction <= 0.0) return 0;
  const double raw = fraction * static_cast<double>(n_days);
  return std::min(n_days, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
}

/// Indices of the top ceil(fraction * n_days) days by score; ties go to the earlier day.
inline std::vector<std::size_t> top_anomalous_days(std::span<const double> scores, double fraction) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(pruned_day_count(fraction, scores.size()));
  std::sort(order.begin(), order.end());
  return order;
}

/// Drops windows whose input span overlaps a pruned day of their location.
inline WindowSet prune_anomalous(const WindowSet& windows, const DiscordScores& scores, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("prune fraction must be in [0, 1)");
  if (fraction == 0.0) return windows;
  std::map<LocationId, std::vector<std::size_t>> pruned;
  WindowSet out{{}, windows.input_len, windows.horizon};
  out.entries.reserve(windows.size());
  for (const auto& w : windows.entries) {
    auto it = pruned.find(w.location_id);
    if (it == pruned.end()) it = pruned.emplace(w.location_id, top_anomalous_days(scores.of(w.location_id), fraction)).first;
    const std::size_t lo = w.start;
    const std::size_t hi = w.start + windows.input_len;
    bool hit = false;
    for (std::size_t d : it->second) {
      const std::size_t day_lo = scores.range_begin + d * scores.day_len;
      const std::size_t day_hi = day_lo + scores.day_len;
      if (lo < day_hi && day_lo < hi) {
        hit = true;
        break;
      }
    }
    if (!hit) out.entries.push_back(w);
  }
  return out;
}

/// Diagnostic CSV `location_id,day_index,score,pruned`.
inline std::string discord_scores_csv(const DiscordScores& scores, double fraction) {
  std::string out = "location_id,day_index,score,pruned\n";
  for (const auto& [id, days] : scores.day_scores) {
    const auto top = top_anomalous_days(days, fraction);
    const std::set<std::size_t> hit(top.begin(), top.end());
    for (std::size_t d = 0; d < days.size(); ++d) {
      out += std::to_string(id) + ',' + std::to_string(d) + ',' + io::format_double(days[d]) + ',' +
             (hit.contains(d) ? "1" : "0") + '\n';
    }
  }
  return out;
}

}  // namespace dcats
