#pragma once

// Slow, direct reference implementations used as test oracles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace oracle {

/// Pearson correlation of two equal-length windows, two-pass in long double.
/// nullopt when either window has zero variance.
inline std::optional<long double> pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size();
  long double ma = 0, mb = 0;
  for (std::size_t k = 0; k < m; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= m;
  mb /= m;
  long double sab = 0, saa = 0, sbb = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const long double da = a[k] - ma, db = b[k] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

/// Max Pearson over every pair of length-m windows.
inline double max_pair_pearson(std::span<const double> x, std::span<const double> y, std::size_t m) {
  long double best = -std::numeric_limits<long double>::infinity();
  for (std::size_t i = 0; i + m <= x.size(); ++i) {
    for (std::size_t j = 0; j + m <= y.size(); ++j) {
      if (const auto r = pearson(x.subspan(i, m), y.subspan(j, m))) best = std::max(best, *r);
    }
  }
  return static_cast<double>(best);
}

/// z-normalized Euclidean distance between windows. Two flat windows are at
/// distance 0; a flat window has no distance to a non-flat one.
inline std::optional<long double> znorm_distance(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size();
  long double ma = 0, mb = 0;
  for (std::size_t k = 0; k < m; ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= m;
  mb /= m;
  long double sa = 0, sb = 0;
  for (std::size_t k = 0; k < m; ++k) {
    sa += (a[k] - ma) * (a[k] - ma);
    sb += (b[k] - mb) * (b[k] - mb);
  }
  if (sa == 0 && sb == 0) return 0.0L;
  if (sa == 0 || sb == 0) return std::nullopt;
  sa = std::sqrt(sa / m);
  sb = std::sqrt(sb / m);
  long double d2 = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const long double za = (a[k] - ma) / sa, zb = (b[k] - mb) / sb;
    d2 += (za - zb) * (za - zb);
  }
  return std::sqrt(d2);
}

/// Matrix profile by direct comparison of every non-trivial window pair,
/// exclusion half-width `excl` (|i - j| <= excl is trivial).
inline std::vector<double> matrix_profile(std::span<const double> x, std::size_t m, std::size_t excl) {
  const std::size_t n = x.size() - m + 1;
  std::vector<double> out(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    long double best = std::numeric_limits<long double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if ((i > j ? i - j : j - i) <= excl) continue;
      if (const auto d = znorm_distance(x.subspan(i, m), x.subspan(j, m))) best = std::min(best, *d);
    }
    out[i] = static_cast<double>(best);
  }
  return out;
}

struct Metrics {
  double mae, rmse, mape;
};

/// Straight-line MAE/RMSE/MAPE; MAPE skips |y| <= floor and is in percent.
inline Metrics metrics(const std::vector<double>& yhat, const std::vector<double>& y, double floor = 1.0) {
  long double a = 0, s = 0, p = 0;
  std::size_t np = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double e = static_cast<long double>(yhat[i]) - y[i];
    a += std::fabs(e);
    s += e * e;
    if (std::fabs(y[i]) > floor) {
      p += std::fabs(e) / std::fabs(static_cast<long double>(y[i]));
      ++np;
    }
  }
  const long double n = static_cast<long double>(y.size());
  return {static_cast<double>(a / n), static_cast<double>(std::sqrt(s / n)),
          np ? static_cast<double>(100 * p / np) : 0.0};
}

/// Great-circle distance by the spherical law of cosines.
inline double great_circle_km(double lat1, double lon1, double lat2, double lon2, double radius = 6371.0) {
  const long double r = std::numbers::pi_v<long double> / 180;
  const long double c = std::sin(lat1 * r) * std::sin(lat2 * r) +
                        std::cos(lat1 * r) * std::cos(lat2 * r) * std::cos((lon2 - lon1) * r);
  return static_cast<double>(radius * std::acos(std::clamp<long double>(c, -1, 1)));
}

/// Shortest path by enumerating every simple path (tiny graphs only).
struct Edge {
  int a, b;
  double w;
};

inline std::optional<double> shortest_simple_path(int n, const std::vector<Edge>& edges, int s, int t) {
  if (s == t) return 0.0;
  std::optional<double> best;
  std::vector<char> used(n, 0);
  auto dfs = [&](auto&& self, int u, double acc) -> void {
    if (u == t) {
      if (!best || acc < *best) best = acc;
      return;
    }
    used[u] = 1;
    for (const auto& e : edges) {
      int v = -1;
      if (e.a == u) v = e.b;
      else if (e.b == u) v = e.a;
      if (v >= 0 && !used[v]) self(self, v, acc + e.w);
    }
    used[u] = 0;
  };
  dfs(dfs, s, 0.0);
  return best;
}

}  // namespace oracle
