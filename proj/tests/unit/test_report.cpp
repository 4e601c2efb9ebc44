#include <catch_amalgamated.hpp>

#include "dcats/report.hpp"
#include "test_util.hpp"

using namespace dcats;

namespace {

EvalMetrics metrics(double mae, double rmse, double mape) {
  EvalMetrics m;
  m.mae = mae;
  m.rmse = rmse;
  m.mape = mape;
  m.per_step_mae = {mae};
  m.n_points = 1;
  return m;
}

QueryResult result(LocationId target, double base_mae, double ours_mae, std::string explanation) {
  QueryResult r;
  r.target = target;
  r.kind = ModelKind::linear;
  r.backend = "scripted:oracle";
  r.rounds = 1;
  r.complete = true;
  r.best.proposal = {1, std::move(explanation), {1, 2}};
  r.best.validation = metrics(ours_mae, ours_mae * 2, 10.0);
  r.records = {r.best};
  r.best_so_far = {ours_mae};
  r.test = metrics(ours_mae, 72.91, 14.20);
  r.baselines = BaselineMetrics{metrics(40, 80, 16), metrics(40, 80, 16), metrics(base_mae, 74.01, 15.12),
                                metrics(base_mae, 74.01, 15.12)};
  r.audit.test_evaluations = 1;
  return r;
}

}  // namespace

TEST_CASE("improvement percent", "[report]") {
  CHECK(improvement_percent(37.31, 35.91) == Catch::Approx(3.7523).margin(1e-4));
  CHECK(io::format_fixed(improvement_percent(37.31, 35.91), 2) == "3.75");
  // Unrounded table entries inside [37.305, 37.315) x [35.905, 35.915) reach 3.77.
  CHECK(io::format_fixed(improvement_percent(37.3149, 35.9051), 2) == "3.78");
  CHECK(io::format_fixed(improvement_percent(37.312, 35.906), 2) == "3.77");
  CHECK(improvement_percent(10, 10) == 0.0);
  CHECK(improvement_percent(10, 12) < 0.0);
  CHECK_THROWS_AS(improvement_percent(0.0, 1.0), DataError);
}

TEST_CASE("mean of per-query metrics", "[report]") {
  const auto a = metrics(1, 2, 3), b = metrics(3, 4, 5);
  const auto m = mean_metrics({&a, &b});
  CHECK(m.mae == 2.0);
  CHECK(m.rmse == 3.0);
  CHECK(m.mape == 4.0);
  CHECK_THROWS_AS(mean_metrics({}), DataError);
}

TEST_CASE("metrics table layout", "[report]") {
  const auto f = build_report({result(5, 37.31, 35.91, "road network")});
  CHECK(f.metrics_md.find("| Method | MAE | RMSE | MAPE |") != std::string::npos);
  CHECK(f.metrics_md.find("| Linear | 37.31 | 74.01 | 15.12% |") != std::string::npos);
  CHECK(f.metrics_md.find("| Linear+DCATS | 35.91 | 72.91 | 14.20% |") != std::string::npos);
  CHECK(f.metrics_md.find("| % improvement | 3.75% | 1.49% | 6.08% |") != std::string::npos);
  CHECK(f.metrics_csv.find("linear,all_data,1,37.3100,74.0100,15.1200\n") != std::string::npos);
  CHECK(f.queries_csv.find("linear,5,1,1,") != std::string::npos);
}

TEST_CASE("explanation term counts", "[report]") {
  std::vector<QueryResult> rs;
  for (int i = 0; i < 4; ++i) rs.push_back(result(i, 10, 9, "road network"));
  const auto f = build_report(rs);
  CHECK(f.terms_csv == "term,count\nnetwork,4\nroad,4\n");
  CHECK(explanation_tokens("The ROAD, and 42 the network!") == std::vector<std::string>{"road", "network"});
}

TEST_CASE("trace order and incomplete results", "[report]") {
  auto partial = result(3, 10, 9, "x");
  partial.complete = false;
  partial.baselines.reset();
  const auto f = build_report({result(9, 10, 9, "a"), partial, result(1, 10, 9, "b")});
  const auto first = nlohmann::json::parse(f.trace_jsonl.substr(0, f.trace_jsonl.find('\n')));
  CHECK(first["target"] == 1);
  CHECK(std::count(f.trace_jsonl.begin(), f.trace_jsonl.end(), '\n') == 3);
  CHECK(f.metrics_csv.find("linear,all_data,2,") != std::string::npos);
  CHECK_THROWS_AS(build_report({}), DataError);
}

TEST_CASE("emit and reload", "[report]") {
  dcats::testing::TempDir dir("report");
  const std::vector<QueryResult> rs{result(2, 10, 9, "road"), result(4, 12, 10, "pattern")};
  emit_report(rs, dir.path());
  for (const char* name : {"metrics_table.md", "metrics_table.csv", "explanation_terms.csv", "queries.csv", "trace.jsonl"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  const auto back = load_query_results(dir.path());
  REQUIRE(back.size() == 2);
  CHECK(build_report(back).trace_jsonl == build_report(rs).trace_jsonl);
  io::write_text_file(dir / "junk.jsonl", "{\"x\":1}\n");
  CHECK_THROWS_AS(load_query_results(dir.path()), DataError);
  CHECK_THROWS_AS(load_query_results(dir / "missing"), DataError);
}
