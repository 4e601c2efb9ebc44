#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "dcats/neighbors.hpp"
#include "dcats/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dcats;

TEST_CASE("geodetic distance", "[neighbors]") {
  CHECK(geodetic_distance({37.0, -122.0}, {37.0, -122.0}) == 0.0);
  CHECK(geodetic_distance({0.0, 0.0}, {0.0, 180.0}) == Catch::Approx(std::numbers::pi * 6371.0).margin(1e-6));
  CHECK(geodetic_distance({0.0, 0.0}, {0.0, 180.0}) == Catch::Approx(20015.1).margin(0.05));
  const double sf_la = geodetic_distance({37.7749, -122.4194}, {34.0522, -118.2437});
  CHECK(std::abs(sf_la - 559.0) <= 1.0);
  CHECK(std::abs(sf_la - oracle::great_circle_km(37.7749, -122.4194, 34.0522, -118.2437)) < 1e-6);
}

TEST_CASE("geodetic distance agrees with the law of cosines", "[neighbors][property]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = lat(rng), b = lon(rng), c = lat(rng), d = lon(rng);
    const double h = geodetic_distance({a, b}, {c, d});
    REQUIRE(h == geodetic_distance({c, d}, {a, b}));
    if (h > 1.0) REQUIRE(std::abs(h - oracle::great_circle_km(a, b, c, d)) < 1e-6);
  }
}

TEST_CASE("road distance basics", "[neighbors]") {
  RoadGraph g;
  g.add_edge(1, 2, 1.5);
  g.add_edge(3, 4, 2.0);
  CHECK(road_distance(g, 1, 1) == 0.0);
  CHECK(road_distance(g, 1, 2) == 1.5);
  CHECK_FALSE(road_distance(g, 1, 3).has_value());
  CHECK_THROWS_AS(road_distance(g, 1, 9), LookupError);
  CHECK_THROWS_AS(g.add_edge(5, 5, 1.0), DataError);
  CHECK_THROWS_AS(g.add_edge(5, 6, 0.0), DataError);
}

TEST_CASE("road distance matches exhaustive path search", "[neighbors]") {
  const std::vector<oracle::Edge> edges = {{0, 1, 2.0}, {1, 2, 2.5}, {0, 2, 5.0}, {2, 3, 1.0}, {1, 3, 4.0}, {3, 4, 0.5}};
  RoadGraph g;
  for (const auto& e : edges) g.add_edge(e.a, e.b, e.w);
  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) CHECK(*road_distance(g, a, b) == Catch::Approx(*oracle::shortest_simple_path(5, edges, a, b)).epsilon(1e-12));
  }
  CHECK(*road_distance(g, 0, 4) == 6.0);
}

TEST_CASE("road distance on random graphs", "[neighbors][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> w(0.1, 10.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 6);
    std::vector<oracle::Edge> edges;
    RoadGraph g;
    for (int v = 0; v < n; ++v) g.add_node(v);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (rng() % 3 == 0 || b == a + 1) edges.push_back({a, b, w(rng)});
      }
    }
    for (const auto& e : edges) g.add_edge(e.a, e.b, e.w);
    std::vector<std::vector<double>> d(n, std::vector<double>(n));
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        d[a][b] = *road_distance(g, a, b);
        REQUIRE(d[a][b] == Catch::Approx(*oracle::shortest_simple_path(n, edges, a, b)).epsilon(1e-12));
      }
    }
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        for (int c = 0; c < n; ++c) REQUIRE(d[a][c] <= d[a][b] + d[b][c] + 1e-9);
      }
    }
  }
}

TEST_CASE("road graph built from freeway order", "[neighbors]") {
  MetadataDB db;
  auto add = [&](LocationId id, double lon, std::string fw) {
    LocationMeta m;
    m.location_id = id;
    m.latitude = 34.0;
    m.longitude = lon;
    m.city = "A";
    m.county = "B";
    m.freeway = std::move(fw);
    db.insert(m);
  };
  add(5, -118.00, "I-5");
  add(2, -118.02, "I-5");
  add(9, -118.01, "I-5");
  add(4, -118.01, "I-10");
  add(7, -118.00, "");
  const auto g = build_road_graph(db);
  CHECK(g.n_nodes() == 5);
  REQUIRE(g.edges().size() == 2);
  CHECK(road_distance(g, 2, 5).value() ==
        Catch::Approx(geodetic_distance({34.0, -118.02}, {34.0, -118.01}) + geodetic_distance({34.0, -118.01}, {34.0, -118.0})));
  CHECK_FALSE(road_distance(g, 2, 4).has_value());
  CHECK_FALSE(road_distance(g, 7, 5).has_value());

  dcats::testing::TempDir dir("graph_rt");
  save_road_graph(g, dir / "g.csv");
  const auto back = load_road_graph(dir / "g.csv");
  CHECK(road_distance(back, 2, 5) == road_distance(g, 2, 5));
  io::write_text_file(dir / "bad.csv", "from_id,to_id,length_km\n1,2,-1\n");
  CHECK_THROWS_AS(load_road_graph(dir / "bad.csv"), DataError);
  RoadGraph extra = g;
  extra.add_edge(5, 77, 1.0);
  CHECK_THROWS_AS(extra.check_nodes(db), DataError);
}

TEST_CASE("pattern similarity examples", "[neighbors]") {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  CHECK(pattern_similarity(x, y, 4) == Catch::Approx(0.8).margin(1e-15));
  std::mt19937_64 rng(3);
  const auto r = dcats::testing::random_walk(300, rng);
  for (std::size_t m : {3u, 10u, 48u, 300u}) CHECK(pattern_similarity(r, r, m) == Catch::Approx(1.0).margin(1e-12));
  CHECK_THROWS_AS(pattern_similarity(x, y, 2), ConfigError);
  CHECK_THROWS_AS(pattern_similarity(x, y, 5), ConfigError);
  const std::vector<double> flat(50, 3.0);
  CHECK_THROWS_AS(pattern_similarity(flat, r, 10), DataError);
}

TEST_CASE("pattern similarity agrees with brute force", "[neighbors][property]") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<std::size_t> len(60, 260);
  for (int trial = 0; trial < 25; ++trial) {
    const auto x = trial % 2 ? dcats::testing::random_walk(len(rng), rng) : dcats::testing::gaussian(len(rng), rng);
    const auto y = dcats::testing::random_walk(len(rng), rng);
    const std::size_t m = 3 + rng() % 50;
    const double fast = pattern_similarity(x, y, m);
    REQUIRE(std::abs(fast - oracle::max_pair_pearson(x, y, m)) <= 1e-9);
    REQUIRE(fast == pattern_similarity(y, x, m));
    REQUIRE(fast >= -1.0);
    REQUIRE(fast <= 1.0);
  }
}

TEST_CASE("planted shared subsequence gives similarity one", "[neighbors][property]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = dcats::testing::gaussian(200, rng);
    auto y = dcats::testing::gaussian(150, rng);
    const std::size_t m = 48, i = rng() % (200 - m), j = rng() % (150 - m);
    const double scale = 0.5 + static_cast<double>(rng() % 100) / 10.0, shift = static_cast<double>(rng() % 50);
    for (std::size_t k = 0; k < m; ++k) y[j + k] = x[i + k] * scale + shift;
    REQUIRE(std::abs(pattern_similarity(x, y, m) - 1.0) <= 1e-9);
  }
}

TEST_CASE("flat windows are skipped", "[neighbors]") {
  std::mt19937_64 rng(4);
  auto x = dcats::testing::gaussian(120, rng);
  for (std::size_t k = 0; k < 40; ++k) x[k] = 5.0;
  const auto y = dcats::testing::gaussian(90, rng);
  CHECK(std::abs(pattern_similarity(x, y, 12) - oracle::max_pair_pearson(x, y, 12)) <= 1e-9);
}

namespace {

SyntheticData small_synthetic(double noise = SyntheticSpec{}.noise_sigma) {
  SyntheticSpec spec;
  spec.noise_sigma = noise;
  spec.series_per_cluster = 5;
  spec.n_steps = 1000;
  spec.seed = 4;
  return generate_synthetic(spec);
}

}  // namespace

TEST_CASE("neighbor sets on synthetic data", "[neighbors]") {
  const auto d = small_synthetic(0.02);
  const IndexRange train{0, 600};
  for (LocationId target : d.store.ids()) {
    const auto sets = build_neighbor_sets(d.store, d.metadata, d.graph, target, train, {10});
    for (const auto* list : {&sets.road, &sets.pattern, &sets.geodetic}) {
      REQUIRE(list->size() <= 10);
      for (const auto& e : *list) REQUIRE(e.location_id != target);
    }
    REQUIRE(sets.geodetic.size() == 10);
    REQUIRE(sets.pattern.size() == 10);
    REQUIRE(sets.road.size() == 4);
    REQUIRE(d.labels.at(sets.pattern.front().location_id) == d.labels.at(target));
    for (const auto& e : sets.pattern) {
      if (d.labels.at(e.location_id) != d.labels.at(target)) REQUIRE(sets.pattern.front().value > e.value);
    }
  }
  CHECK_THROWS_AS(build_neighbor_sets(d.store, d.metadata, d.graph, 5, train, {10}), LookupError);
}

TEST_CASE("neighbor rankings match brute-force rankings", "[neighbors]") {
  const auto d = small_synthetic();
  const IndexRange train{0, 600};
  const std::size_t k = 6;
  for (LocationId target : {d.store.ids()[0], d.store.ids()[7], d.store.ids()[14]}) {
    const auto sets = build_neighbor_sets(d.store, d.metadata, d.graph, target, train, {k});
    auto ranked = [&](auto value_of, bool descending) {
      std::vector<std::pair<double, LocationId>> all;
      for (LocationId id : d.store.ids()) {
        if (id == target) continue;
        if (const auto v = value_of(id)) all.emplace_back(descending ? -*v : *v, id);
      }
      std::sort(all.begin(), all.end());
      std::vector<LocationId> out;
      for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
      return out;
    };
    auto ids_of = [](const std::vector<NeighborEntry>& list) {
      std::vector<LocationId> out;
      for (const auto& e : list) out.push_back(e.location_id);
      return out;
    };
    const auto& tm = d.metadata.at(target);
    CHECK(ids_of(sets.geodetic) == ranked([&](LocationId id) -> std::optional<double> {
            const auto& m = d.metadata.at(id);
            return oracle::great_circle_km(tm.latitude, tm.longitude, m.latitude, m.longitude);
          }, false));
    CHECK(ids_of(sets.road) == ranked([&](LocationId id) { return road_distance(d.graph, target, id); }, false));
    const auto x = d.store.series(target).subspan(0, 600);
    CHECK(ids_of(sets.pattern) == ranked([&](LocationId id) -> std::optional<double> {
            return oracle::max_pair_pearson(x, d.store.series(id).subspan(0, 600), 96);
          }, true));
  }
}

TEST_CASE("pattern suffix restricts the compared range", "[neighbors]") {
  const auto d = small_synthetic();
  NeighborConfig cfg{5, 48, 200};
  const auto sets = build_neighbor_sets(d.store, d.metadata, d.graph, 100, {0, 600}, cfg);
  const auto x = d.store.series(100).subspan(400, 200);
  for (const auto& e : sets.pattern) {
    REQUIRE(std::abs(e.value - oracle::max_pair_pearson(x, d.store.series(e.location_id).subspan(400, 200), 48)) <= 1e-9);
  }
}

TEST_CASE("neighbor csv", "[neighbors]") {
  const auto d = small_synthetic();
  const auto sets = build_neighbor_sets(d.store, d.metadata, d.graph, 100, {0, 600}, {2});
  const auto csv = neighbor_sets_csv(std::span(&sets, 1));
  CHECK(csv.starts_with("target_id,kind,rank,neighbor_id,value\n100,road,1,"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 + 2 + 2);
  CHECK(sets.pool().size() >= 2);
}
