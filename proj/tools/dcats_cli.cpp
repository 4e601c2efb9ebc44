// dcats command-line front end.
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 agent failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcats/dcats.hpp"
#include "dcats/http_transport.hpp"

namespace fs = std::filesystem;
using namespace dcats;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitAgent = 4;

bool g_quiet = false;

void log_line(const std::string& msg) {
  if (!g_quiet) std::cerr << "[dcats] " << msg << '\n';
}

/// Config file written next to prepared or synthesized data.
void write_data_config(const fs::path& dir, const DataPaths& paths) {
  RunConfig rc;
  rc.data = paths;
  io::write_text_file(dir / "dcats.conf", config_to_text(rc));
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) throw ConfigError("--config is required");
  return load_config(path);
}

std::vector<LocationId> read_targets(const fs::path& path) {
  const auto text = io::read_text_file(path);
  std::vector<LocationId> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    auto line = io::trim(std::string_view(text).substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = io::trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto id = io::parse_int<LocationId>(line);
    if (!id) {
      if (line_no == 1 && line == "location_id") continue;
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": not a location id");
    }
    out.push_back(*id);
  }
  if (out.empty()) throw DataError("no targets in " + path.string());
  return out;
}

std::unique_ptr<AgentBackend> make_backend(const RunConfig& rc, std::uint64_t seed) {
  if (rc.backend == "llm") {
    auto settings = rc.llm;
    load_api_key_from_env(settings);
    if (settings.api_key.empty()) log_line(std::string(kApiKeyEnv) + " is not set; sending requests without a key");
    return std::make_unique<LlmBackend>(settings, std::make_shared<HttplibTransport>(settings.timeout_seconds));
  }
  ScriptedOptions so;
  so.proposal_size = rc.proposal_size;
  const auto strategy = parse_strategy(rc.backend);
  if (strategy == ScriptedStrategy::oracle) {
    if (rc.data.labels.empty()) throw ConfigError("the oracle backend needs data.labels");
    so.labels = load_labels(rc.data.labels);
  }
  return std::make_unique<ScriptedBackend>(strategy, seed, std::move(so));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t clusters = 3;
  std::size_t per_cluster = 20;
  std::size_t steps = 4800;
  std::uint64_t seed = 0;
  double noise = SyntheticSpec{}.noise_sigma;
  std::string out;
};

int cmd_synth(const SynthArgs& a) {
  SyntheticSpec spec;
  spec.n_clusters = a.clusters;
  spec.series_per_cluster = a.per_cluster;
  spec.n_steps = a.steps;
  spec.seed = a.seed;
  spec.noise_sigma = a.noise;
  const auto data = generate_synthetic(spec);
  const RunConfig defaults;
  const auto s = split(spec.n_steps, defaults.split_ratio, defaults.input_len + defaults.horizon);
  write_synthetic(data, a.out, s.train);
  DataPaths paths;
  paths.series = "series.bin";
  paths.metadata = "metadata.csv";
  paths.graph = "graph.csv";
  paths.background = "background.txt";
  paths.labels = "labels.csv";
  paths.interval_minutes = spec.interval_minutes;
  paths.steps_per_day = spec.steps_per_day;
  write_data_config(a.out, paths);
  log_line("wrote " + std::to_string(data.store.n_locations()) + " series x " + std::to_string(spec.n_steps) +
           " steps to " + a.out);
  return 0;
}

struct PrepareArgs {
  std::string data, meta, graph, background, out;
  int interval_minutes = 15;
  int steps_per_day = 96;
};

int cmd_prepare(const PrepareArgs& a) {
  const fs::path series(a.data);
  auto store = series.extension() == ".bin" ? load_store_binary(series)
                                            : load_store_csv(series, a.interval_minutes, a.steps_per_day);
  auto db = load_metadata(a.meta, a.background);
  auto graph = a.graph.empty() ? build_road_graph(db) : load_road_graph(a.graph);
  RunConfig rc;
  rc.data.interval_minutes = store.interval_minutes();
  rc.data.steps_per_day = store.steps_per_day();
  const Workspace ws(store, db, graph, rc);

  const fs::path out(a.out);
  fs::create_directories(out);
  save_store_binary(ws.store(), out / "series.bin");
  save_metadata(ws.db(), out / "metadata.csv");
  save_road_graph(ws.graph(), out / "graph.csv");
  const auto background =
      ws.db().background_text.empty() ? default_background(ws.db(), ws.templates()) : ws.db().background_text;
  io::write_text_file(out / "background.txt", background);
  DataPaths paths;
  paths.series = "series.bin";
  paths.metadata = "metadata.csv";
  paths.graph = "graph.csv";
  paths.background = "background.txt";
  paths.interval_minutes = rc.data.interval_minutes;
  paths.steps_per_day = rc.data.steps_per_day;
  write_data_config(out, paths);
  log_line("validated " + std::to_string(ws.store().n_locations()) + " locations; train/val/test = " +
           std::to_string(ws.split_view().train.size()) + "/" + std::to_string(ws.split_view().val.size()) + "/" +
           std::to_string(ws.split_view().test.size()));
  return 0;
}

struct NeighborsArgs {
  std::string config, out;
  std::vector<LocationId> targets;
  std::optional<std::size_t> k;
};

int cmd_neighbors(const NeighborsArgs& a) {
  auto rc = load_run_config(a.config);
  if (a.k) rc.neighbors.k = *a.k;
  rc.neighbors.threads = rc.threads;
  rc.validate();
  const auto ws = load_workspace(rc);
  std::vector<NeighborSets> sets;
  for (LocationId t : a.targets) sets.push_back(ws->neighbors(t));
  io::write_text_file(a.out, neighbor_sets_csv(sets));
  return 0;
}

struct PretrainArgs {
  std::string config, model, out;
};

int cmd_pretrain(const PretrainArgs& a) {
  auto rc = load_run_config(a.config);
  if (!a.model.empty()) rc.model = parse_model_kind(a.model);
  const auto ws = load_workspace(rc);
  const auto model = pretrain_foundation(*ws, rc.model, {}, log_line);
  save_checkpoint(model, a.out);
  const auto& s = ws->split_view();
  log_line("saved " + display_name(rc.model) + " foundation (" + std::to_string(model.parameters.size()) +
           " parameters) to " + a.out + "; train range " + std::to_string(s.train.size()) + " steps");
  return 0;
}

struct RunArgs {
  std::string config, targets_file, backend, model, foundation, out = "runs";
  std::vector<LocationId> targets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_rounds, threads;
};

int cmd_run(const RunArgs& a) {
  auto rc = load_run_config(a.config);
  if (!a.backend.empty()) rc.backend = a.backend;
  if (!a.model.empty()) rc.model = parse_model_kind(a.model);
  if (a.seed) rc.seed = *a.seed;
  if (a.max_rounds) rc.max_rounds = *a.max_rounds;
  if (a.threads) rc.threads = *a.threads;
  rc.neighbors.threads = rc.threads;
  rc.validate();
  if (rc.backend != "llm") (void)parse_strategy(rc.backend);

  auto targets = a.targets;
  if (!a.targets_file.empty()) {
    const auto more = read_targets(a.targets_file);
    targets.insert(targets.end(), more.begin(), more.end());
  }
  if (targets.empty()) throw ConfigError("give --target or --targets");

  const auto ws = load_workspace(rc);
  for (LocationId t : targets) {
    if (!ws->store().contains(t)) throw LookupError("unknown target location_id " + std::to_string(t));
  }
  const Model foundation =
      a.foundation.empty() ? pretrain_foundation(*ws, rc.model, rc.cache_dir, log_line) : load_checkpoint(a.foundation);
  if (foundation.config != rc.model_config(rc.model)) {
    throw ConfigError("foundation checkpoint does not match the configured model");
  }
  const Model all_data = all_data_model(*ws, foundation, rc.prune_fraction, rc.cache_dir, log_line);

  const fs::path out(a.out);
  fs::create_directories(out / "transcripts");
  std::vector<QueryResult> results;
  std::string timings = "target,rounds,records,wall_seconds\n";
  auto flush = [&] {
    std::string trace;
    for (const auto& r : results) trace += to_json(r).dump() + "\n";
    io::write_text_file(out / "trace.jsonl", trace);
    io::write_text_file(out / "timings.csv", timings);
    if (!results.empty()) emit_report(results, out / "report");
  };

  for (LocationId target : targets) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto qc = make_query_config(rc, target);
    const auto baselines = run_baselines(*ws, foundation, all_data, target);
    auto backend = make_backend(rc, qc.seed);
    const auto transcript_path = out / "transcripts" / (std::to_string(target) + ".jsonl");
    fs::remove(transcript_path);
    TranscriptLog transcript(transcript_path);
    QueryOptions options;
    options.baseline_mae = baselines.all_data_val.mae;
    options.threads = rc.threads;
    options.transcript = &transcript;
    options.partial_path = out / "partial" / (std::to_string(target) + ".json");
    log_line("query " + std::to_string(target) + " (" + backend->identity() + ")");
    QueryResult result;
    try {
      result = run_query(*ws, foundation, qc, *backend, options);
    } catch (const AgentError&) {
      flush();
      throw;
    }
    result.baselines = baselines;
    double wall = 0.0;
    for (const auto& r : result.records) wall += r.wall_seconds;
    timings += std::to_string(target) + "," + std::to_string(result.rounds) + "," +
               std::to_string(result.records.size()) + "," +
               io::format_fixed(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 3) +
               "\n";
    log_line("query " + std::to_string(target) + ": " + std::to_string(result.rounds) + " rounds, val MAE " +
             format_mae(result.best.mae()) + " vs all-data " + format_mae(baselines.all_data_val.mae) +
             ", test MAE " + format_mae(result.test.mae));
    results.push_back(std::move(result));
  }
  flush();
  return 0;
}

int cmd_report(const std::string& runs, const std::string& out) {
  const auto results = load_query_results(runs);
  emit_report(results, out);
  log_line("report for " + std::to_string(results.size()) + " queries in " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcats: agent-driven neighbor selection for time series fine-tuning"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress messages");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a clustered synthetic dataset");
  s->add_option("--clusters", synth.clusters, "Number of clusters")->capture_default_str();
  s->add_option("--per-cluster", synth.per_cluster, "Series per cluster")->capture_default_str();
  s->add_option("--steps", synth.steps, "Steps per series")->capture_default_str();
  s->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  s->add_option("--noise", synth.noise, "Noise scale relative to level")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  PrepareArgs prep;
  auto* p = app.add_subcommand("prepare", "Validate a dataset and write a cached copy");
  p->add_option("--data", prep.data, "Series CSV or .bin")->required();
  p->add_option("--meta", prep.meta, "Metadata CSV")->required();
  p->add_option("--graph", prep.graph, "Road graph edge list");
  p->add_option("--background", prep.background, "Dataset description text");
  p->add_option("--interval-minutes", prep.interval_minutes)->capture_default_str();
  p->add_option("--steps-per-day", prep.steps_per_day)->capture_default_str();
  p->add_option("--out", prep.out, "Output directory")->required();

  NeighborsArgs nb;
  auto* n = app.add_subcommand("neighbors", "Write the three neighbor lists of targets as CSV");
  n->add_option("--config", nb.config, "Run config")->required();
  n->add_option("--target", nb.targets, "Target location id (repeatable)")->required();
  n->add_option("--k", nb.k, "List length");
  n->add_option("--out", nb.out, "Output CSV")->required();

  PretrainArgs pt;
  auto* t = app.add_subcommand("pretrain", "Pretrain a foundation model on every location");
  t->add_option("--model", pt.model, "linear, mlp or sparsetsf")->check(CLI::IsMember({"linear", "mlp", "sparsetsf"}));
  t->add_option("--config", pt.config, "Run config")->required();
  t->add_option("--out", pt.out, "Checkpoint file")->required();

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run queries and write traces, transcripts and a report");
  r->add_option("--config", run.config, "Run config")->required();
  auto* target_opt = r->add_option("--target", run.targets, "Target location id (repeatable)");
  auto* targets_opt = r->add_option("--targets", run.targets_file, "File with one target id per line");
  target_opt->excludes(targets_opt);
  r->add_option("--backend", run.backend, "llm, oracle, greedy, random or repeat")
      ->check(CLI::IsMember({"llm", "oracle", "greedy", "random", "repeat"}));
  r->add_option("--model", run.model, "linear, mlp or sparsetsf")->check(CLI::IsMember({"linear", "mlp", "sparsetsf"}));
  r->add_option("--seed", run.seed, "Master seed");
  r->add_option("--max-rounds", run.max_rounds, "Round cap");
  r->add_option("--threads", run.threads, "Worker threads (0: all cores)");
  r->add_option("--foundation", run.foundation, "Pretrained checkpoint to use instead of the cache");
  r->add_option("--out", run.out, "Output directory")->capture_default_str();

  std::string report_runs, report_out;
  auto* rep = app.add_subcommand("report", "Rebuild report files from run traces");
  rep->add_option("--runs", report_runs, "Directory with *.jsonl traces")->required();
  rep->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*p) return cmd_prepare(prep);
    if (*n) return cmd_neighbors(nb);
    if (*t) return cmd_pretrain(pt);
    if (*r) return cmd_run(run);
    if (*rep) return cmd_report(report_runs, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const AgentError& e) {
    std::cerr << "agent error: " << e.what() << '\n';
    return kExitAgent;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
