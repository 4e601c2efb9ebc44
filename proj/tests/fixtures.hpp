#pragma once

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dcats/agent.hpp"
#include "dcats/metadata.hpp"
#include "dcats/neighbors.hpp"

namespace fixtures {

/// Target 1201 with ten described neighbors 1200, 1202..1210.
inline dcats::MetadataDB prompt_db() {
  dcats::MetadataDB db;
  for (dcats::LocationId id = 1200; id <= 1210; ++id) {
    dcats::LocationMeta m;
    m.location_id = id;
    m.latitude = 37.2 + 0.01 * (id - 1200);
    m.longitude = -121.9 - 0.01 * (id - 1200);
    m.city = id % 2 ? "Campbell" : "San Jose";
    m.county = "Santa Clara";
    m.population = 41700 + 1000 * (id - 1200);
    m.freeway = id < 1205 ? "SR87-N" : "I-280-S";
    m.lanes = 2 + id % 3;
    m.historical_total_volume = 2000000 + 1000 * (id - 1200);
    db.insert(m);
  }
  return db;
}

inline dcats::NeighborSets prompt_sets() {
  using dcats::NeighborKind;
  dcats::NeighborSets s;
  s.target = 1201;
  s.road = {{1200, NeighborKind::road, 1.25}, {1202, NeighborKind::road, 2.5}, {1203, NeighborKind::road, 3.75}};
  s.pattern = {{1205, NeighborKind::pattern, 0.9849},
               {1207, NeighborKind::pattern, 0.97},
               {1204, NeighborKind::pattern, 0.95},
               {1209, NeighborKind::pattern, 0.9},
               {1210, NeighborKind::pattern, 0.8},
               {1206, NeighborKind::pattern, 0.7}};
  s.geodetic = {{1200, NeighborKind::geodetic, 1.5}, {1202, NeighborKind::geodetic, 1.6}, {1208, NeighborKind::geodetic, 2.0}};
  return s;
}

/// Proposals 1..k over distinct ids from `pool`, with one-line explanations.
inline std::vector<dcats::Proposal> random_proposals(std::mt19937_64& rng, const std::vector<dcats::LocationId>& pool) {
  static const std::vector<std::string> words = {"road",  "pattern", "mix",     "(upstream)", "lanes", "I-280",
                                                 "0.97",  "county,", "similar", "volume.",    "3km",   "diverse"};
  const std::size_t k = 1 + rng() % 7;
  std::vector<dcats::Proposal> out;
  for (std::size_t i = 0; i < k; ++i) {
    dcats::Proposal p;
    p.index = static_cast<int>(i + 1);
    const std::size_t n_words = 1 + rng() % 12;
    for (std::size_t w = 0; w < n_words; ++w) {
      if (w) p.explanation += ' ';
      p.explanation += words[rng() % words.size()];
    }
    auto ids = pool;
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(1 + rng() % ids.size());
    p.neighbor_ids = ids;
    out.push_back(std::move(p));
  }
  return out;
}

inline std::set<dcats::LocationId> id_set(const std::vector<dcats::LocationId>& ids) { return {ids.begin(), ids.end()}; }

}  // namespace fixtures
