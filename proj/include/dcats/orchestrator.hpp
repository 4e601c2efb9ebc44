#pragma once

// The query loop: propose, evaluate, refine, stop. Also foundation
// pretraining with an on-disk cache, the two baselines, and QueryResult JSON.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcats/agent.hpp"
#include "dcats/anomaly.hpp"
#include "dcats/backend.hpp"
#include "dcats/config.hpp"
#include "dcats/error.hpp"
#include "dcats/forecast.hpp"
#include "dcats/io.hpp"
#include "dcats/metadata.hpp"
#include "dcats/neighbors.hpp"
#include "dcats/parallel.hpp"
#include "dcats/templates.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

using LogFn = std::function<void(const std::string&)>;

struct QueryConfig {
  LocationId target_id = 0;
  std::size_t n_proposals = 5;
  std::size_t max_rounds = 5;
  double prune_fraction = 0.10;
  ModelKind kind = ModelKind::linear;
  TrainConfig pretrain{30, 256, 1e-3, OptimizerKind::adam, LossKind::mse, 3, 0};
  TrainConfig finetune{10, 256, 1e-4, OptimizerKind::adam, LossKind::mse, 3, 0};
  std::string backend = "oracle";
  std::uint64_t seed = 0;

  void validate() const {
    if (max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
    if (n_proposals < 1) throw ConfigError("n_proposals must be >= 1");
    if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) throw ConfigError("prune fraction must be in [0, 1)");
  }
};

/// Seed of one query, independent of which other queries run.
inline std::uint64_t query_seed(std::uint64_t master_seed, LocationId target) {
  return io::splitmix64(master_seed ^ io::fnv1a(std::to_string(target)));
}

inline QueryConfig make_query_config(const RunConfig& rc, LocationId target) {
  QueryConfig qc;
  qc.target_id = target;
  qc.n_proposals = rc.n_proposals;
  qc.max_rounds = rc.max_rounds;
  qc.prune_fraction = rc.prune_fraction;
  qc.kind = rc.model;
  qc.pretrain = rc.pretrain;
  qc.finetune = rc.finetune;
  qc.backend = rc.backend;
  qc.seed = query_seed(rc.seed, target);
  return qc;
}

// ---------------------------------------------------------------------------
// Workspace

/// Immutable data shared by all queries, plus lazily built caches.
class Workspace {
 public:
  Workspace(TimeSeriesStore store, MetadataDB db, RoadGraph graph, RunConfig config,
            TemplateSet templates = default_templates())
      : store_(std::move(store)),
        db_(std::move(db)),
        graph_(std::move(graph)),
        config_(std::move(config)),
        templates_(std::move(templates)) {
    config_.validate();
    check_covers(db_, store_);
    graph_.check_nodes(db_);
    split_ = split(store_, config_.split_ratio, config_.input_len + config_.horizon);
    if (split_.train.size() < 2 * config_.anomaly_window) {
      throw ConfigError("train range is shorter than two anomaly windows");
    }
    fill_missing_volumes(db_, store_, split_.train);
    data_ = std::make_unique<NormalizedStore>(store_, fit_scaler(store_, split_.train));
  }

  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  [[nodiscard]] const TimeSeriesStore& store() const noexcept { return store_; }
  [[nodiscard]] const MetadataDB& db() const noexcept { return db_; }
  [[nodiscard]] const RoadGraph& graph() const noexcept { return graph_; }
  [[nodiscard]] const RunConfig& config() const noexcept { return config_; }
  [[nodiscard]] const TemplateSet& templates() const noexcept { return templates_; }
  [[nodiscard]] const SplitView& split_view() const noexcept { return split_; }
  [[nodiscard]] const NormalizedStore& data() const noexcept { return *data_; }

  /// Day scores of every location over the train range.
  [[nodiscard]] const DiscordScores& discord() const {
    std::call_once(discord_once_, [&] {
      discord_ = discord_scores(store_, store_.ids(), split_.train, config_.anomaly_window, config_.threads);
    });
    return discord_;
  }

  [[nodiscard]] NeighborSets neighbors(LocationId target) const {
    {
      std::lock_guard lock(mutex_);
      if (const auto it = neighbor_cache_.find(target); it != neighbor_cache_.end()) return it->second;
    }
    auto sets = build_neighbor_sets(store_, db_, graph_, target, split_.train, config_.neighbors);
    std::lock_guard lock(mutex_);
    return neighbor_cache_.emplace(target, std::move(sets)).first->second;
  }

  [[nodiscard]] WindowSet train_windows(std::span<const LocationId> ids) const {
    return make_windows(store_, split_.train, ids, config_.input_len, config_.horizon, config_.stride);
  }

  [[nodiscard]] WindowSet pruned_train_windows(std::span<const LocationId> ids, double fraction) const {
    auto windows = train_windows(ids);
    if (fraction == 0.0) return windows;
    return prune_anomalous(windows, discord(), fraction);
  }

  [[nodiscard]] WindowSet val_windows(std::span<const LocationId> ids) const {
    return make_windows(store_, split_.val, ids, config_.input_len, config_.horizon, config_.stride);
  }

  /// Fingerprint of the data, split, windowing and anomaly settings.
  [[nodiscard]] std::uint64_t fingerprint() const {
    std::uint64_t h = io::fnv1a({reinterpret_cast<const char*>(store_.values().data()), store_.values().size_bytes()});
    h = io::fnv1a({reinterpret_cast<const char*>(store_.ids().data()), store_.ids().size() * sizeof(LocationId)}, h);
    const std::string s = std::to_string(split_.train.end) + ":" + std::to_string(split_.val.end) + ":" +
                          std::to_string(config_.input_len) + ":" + std::to_string(config_.horizon) + ":" +
                          std::to_string(config_.stride) + ":" + std::to_string(config_.anomaly_window);
    return io::fnv1a(s, h);
  }

 private:
  TimeSeriesStore store_;
  MetadataDB db_;
  RoadGraph graph_;
  RunConfig config_;
  TemplateSet templates_;
  SplitView split_{};
  std::unique_ptr<NormalizedStore> data_;
  mutable std::once_flag discord_once_;
  mutable DiscordScores discord_;
  mutable std::mutex mutex_;
  mutable std::map<LocationId, NeighborSets> neighbor_cache_;
};

/// Loads the files named in the config. Without a graph file, the road graph
/// is built by chaining locations along each freeway.
inline std::unique_ptr<Workspace> load_workspace(const RunConfig& config) {
  if (config.data.series.empty()) throw ConfigError("data.series is not set");
  if (config.data.metadata.empty()) throw ConfigError("data.metadata is not set");
  auto store = config.data.series.extension() == ".bin"
                   ? load_store_binary(config.data.series)
                   : load_store_csv(config.data.series, config.data.interval_minutes, config.data.steps_per_day);
  auto db = load_metadata(config.data.metadata, config.data.background);
  auto graph = config.data.graph.empty() ? build_road_graph(db) : load_road_graph(config.data.graph);
  auto templates = config.data.templates.empty() ? default_templates() : load_templates(config.data.templates);
  return std::make_unique<Workspace>(std::move(store), std::move(db), std::move(graph), config, std::move(templates));
}

// ---------------------------------------------------------------------------
// Foundation and baselines

namespace detail {

inline std::string train_config_key(const TrainConfig& t) {
  return std::to_string(t.epochs) + "," + std::to_string(t.batch_size) + "," + io::format_double(t.learning_rate) + "," +
         std::to_string(static_cast<int>(t.optimizer)) + "," + std::to_string(static_cast<int>(t.loss)) + "," +
         std::to_string(t.patience) + "," + std::to_string(t.seed);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline Model cached_model(const std::filesystem::path& path, const LogFn& log, const std::function<Model()>& make) {
  if (!path.empty() && std::filesystem::exists(path)) {
    if (log) log("loaded cached checkpoint " + path.string());
    return load_checkpoint(path);
  }
  auto model = make();
  if (!path.empty()) save_checkpoint(model, path);
  return model;
}

}  // namespace detail

inline std::uint64_t foundation_key(const Workspace& ws, const ModelConfig& mc, const TrainConfig& tc) {
  const std::string s = to_string(mc.kind) + "|" + std::to_string(mc.input_len) + "|" + std::to_string(mc.horizon) + "|" +
                        std::to_string(mc.hidden) + "|" + std::to_string(mc.period) + "|" + std::to_string(mc.seed) +
                        "|" + detail::train_config_key(tc);
  return io::fnv1a(s, ws.fingerprint());
}

/// Trains one model on every location's training windows, with early stopping
/// on every location's validation windows. With a cache directory, a
/// checkpoint keyed by data and configuration is reused.
inline Model pretrain_foundation(const Workspace& ws, ModelKind kind, const std::filesystem::path& cache_dir = {},
                                 const LogFn& log = {}) {
  const auto mc = ws.config().model_config(kind);
  const auto& tc = ws.config().pretrain;
  const std::filesystem::path path =
      cache_dir.empty() ? std::filesystem::path{}
                        : cache_dir / ("foundation_" + to_string(kind) + "_" + detail::hex64(foundation_key(ws, mc, tc)) + ".ckpt");
  return detail::cached_model(path, log, [&] {
    if (log) log("pretraining " + display_name(kind) + " foundation");
    const auto& ids = ws.store().ids();
    const auto windows = ws.train_windows(ids);
    const auto val = ws.val_windows(ids);
    auto result = train(init_model(mc), windows, ws.data(), tc, &val);
    if (log) {
      log("foundation " + to_string(kind) + ": best epoch " + std::to_string(result.best_epoch) + ", val loss " +
          io::format_double(result.val_loss.empty() ? 0.0 : result.val_loss[result.best_epoch - 1]));
    }
    return result.model;
  });
}

/// Foundation fine-tuned on every location's pruned training windows.
inline Model all_data_model(const Workspace& ws, const Model& foundation, double prune_fraction,
                            const std::filesystem::path& cache_dir = {}, const LogFn& log = {}) {
  const auto& tc = ws.config().finetune;
  std::uint64_t key = io::fnv1a(foundation.parameters.size() ? std::string_view(reinterpret_cast<const char*>(foundation.parameters.data()),
                                                                                foundation.parameters.size() * sizeof(double))
                                                             : std::string_view{},
                                ws.fingerprint());
  key = io::fnv1a(detail::train_config_key(tc) + "|" + io::format_double(prune_fraction), key);
  const std::filesystem::path path =
      cache_dir.empty() ? std::filesystem::path{}
                        : cache_dir / ("alldata_" + to_string(foundation.config.kind) + "_" + detail::hex64(key) + ".ckpt");
  return detail::cached_model(path, log, [&] {
    if (log) log("fine-tuning " + display_name(foundation.config.kind) + " on all locations");
    const auto& ids = ws.store().ids();
    const auto windows = ws.pruned_train_windows(ids, prune_fraction);
    const auto val = ws.val_windows(ids);
    return fine_tune(foundation, windows, ws.data(), tc, &val).model;
  });
}

struct BaselineMetrics {
  EvalMetrics foundation_val;
  EvalMetrics foundation_test;
  EvalMetrics all_data_val;
  EvalMetrics all_data_test;
};

/// Foundation-only and all-data fine-tune, scored on the target's validation and test ranges.
inline BaselineMetrics run_baselines(const Workspace& ws, const Model& foundation, const Model& all_data,
                                     LocationId target) {
  const auto& s = ws.split_view();
  return {evaluate(foundation, ws.data(), target, s.val), evaluate(foundation, ws.data(), target, s.test),
          evaluate(all_data, ws.data(), target, s.val), evaluate(all_data, ws.data(), target, s.test)};
}

// ---------------------------------------------------------------------------
// Proposal evaluation

/// Counts evaluations per range so tests can assert the test range is read once.
struct RangeAudit {
  std::size_t validation_evaluations = 0;
  std::size_t test_evaluations = 0;
};

struct EvaluatedProposal {
  ExperimentRecord record;
  std::optional<Model> model;
};

/// Fine-tunes a copy of the foundation on the target plus the proposal's
/// neighbors (pruned) and scores it on the target's validation range.
/// Early stopping watches the validation windows of the same locations.
inline EvaluatedProposal evaluate_proposal(const Workspace& ws, const Model& foundation, const Proposal& proposal,
                                           const QueryConfig& qc, int round = 1) {
  const auto t0 = std::chrono::steady_clock::now();
  EvaluatedProposal out;
  out.record.proposal = proposal;
  out.record.round = round;
  std::vector<LocationId> ids{qc.target_id};
  for (LocationId id : proposal.neighbor_ids) {
    if (id != qc.target_id && std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  auto fail = [&](std::string reason) {
    out.record.failed = true;
    out.record.failure_reason = std::move(reason);
    out.record.validation = EvalMetrics{};
    out.record.validation.mae = out.record.validation.rmse = out.record.validation.mape =
        std::numeric_limits<double>::infinity();
  };
  try {
    const auto windows = ws.pruned_train_windows(ids, qc.prune_fraction);
    if (windows.empty()) {
      fail("no training windows after pruning");
    } else {
      auto tc = qc.finetune;
      tc.seed = qc.seed;
      const auto val = ws.val_windows(ids);
      auto model = fine_tune(foundation, windows, ws.data(), tc, &val).model;
      out.record.validation = evaluate(model, ws.data(), qc.target_id, ws.split_view().val);
      out.model = std::move(model);
    }
  } catch (const TrainingError& e) {
    fail(e.what());
  }
  out.record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Lowest validation MAE; ties go to the earlier round, then the lower proposal index.
inline const ExperimentRecord& select_best(const std::vector<ExperimentRecord>& records) {
  const ExperimentRecord* best = nullptr;
  for (const auto& r : records) {
    if (r.failed || !std::isfinite(r.mae())) continue;
    if (!best || r.mae() < best->mae() ||
        (r.mae() == best->mae() &&
         (r.round < best->round || (r.round == best->round && r.proposal.index < best->proposal.index)))) {
      best = &r;
    }
  }
  if (!best) throw DataError("every proposal failed; nothing to select");
  return *best;
}

// ---------------------------------------------------------------------------
// Query loop

struct QueryResult {
  LocationId target = 0;
  ModelKind kind = ModelKind::linear;
  std::string backend;
  std::uint64_t seed = 0;
  std::vector<ExperimentRecord> records;
  ExperimentRecord best;
  std::vector<double> best_so_far;
  std::size_t rounds = 0;
  EvalMetrics test;
  std::optional<BaselineMetrics> baselines;
  std::vector<std::string> notes;
  std::string transcript;
  RangeAudit audit;
  bool complete = false;
  std::string error;
};

struct QueryOptions {
  std::optional<double> baseline_mae;
  std::size_t threads = 1;
  TranscriptLog* transcript = nullptr;
  /// Where a partial result is written when the agent fails hard.
  std::filesystem::path partial_path;
};

inline nlohmann::ordered_json to_json(const QueryResult& r);

namespace detail {

inline std::set<LocationId> presented_ids(const NeighborSets& sets) {
  const auto pool = sets.pool();
  return {pool.begin(), pool.end()};
}

inline std::string describe_rejections(const ParseResult& parsed) {
  std::string out;
  for (const auto& r : parsed.rejections) {
    if (!out.empty()) out += "; ";
    out += "proposal " + std::to_string(r.index) + ": " + r.reason;
  }
  return out;
}

}  // namespace detail

/// Runs the propose/evaluate/refine loop for one target. Stops after a round
/// with no record strictly better than the best so far, or at max_rounds. The
/// selected model is then scored once on the test range.
inline QueryResult run_query(const Workspace& ws, const Model& foundation, const QueryConfig& qc, AgentBackend& backend,
                             const QueryOptions& options = {}) {
  qc.validate();
  if (foundation.config.kind != qc.kind) throw ConfigError("foundation model kind does not match the query");
  QueryResult result;
  result.target = qc.target_id;
  result.kind = qc.kind;
  result.backend = backend.identity();
  result.seed = qc.seed;
  if (options.transcript && !options.transcript->path().empty()) {
    result.transcript = options.transcript->path().filename().string();
  }
  if (qc.prune_fraction > 0.0) result.notes.push_back("pruning applies to every sub-dataset series, target included");

  const auto& templates = ws.templates();
  const auto ctx = make_prompt_context(ws.db(), ws.neighbors(qc.target_id), qc.n_proposals, templates);
  const auto valid_ids = detail::presented_ids(ctx.neighbors);
  std::optional<Model> best_model;
  double best_mae = std::numeric_limits<double>::infinity();

  auto save_partial = [&](const std::string& error) {
    result.error = error;
    if (!options.partial_path.empty()) io::write_text_file(options.partial_path, to_json(result).dump() + "\n");
  };

  try {
    for (std::size_t round = 1; round <= qc.max_rounds; ++round) {
      const int r = static_cast<int>(round);
      const std::string prompt =
          round == 1 ? build_initial_prompt(ctx, templates)
                     : build_refinement_prompt(ctx, result.records, select_best(result.records), templates,
                                               options.baseline_mae);
      AgentRequest request{prompt, r, &ctx, result.records};
      ParseResult parsed;
      try {
        parsed = parse_proposals(complete(backend, request, options.transcript), valid_ids, qc.n_proposals,
                                 qc.target_id);
      } catch (const ProposalParseError& e) {
        result.notes.push_back("round " + std::to_string(round) + ": unusable reply, re-prompted (" + e.what() + ")");
        request.prompt = prompt + templates.render("reprompt_suffix", {{"problem", e.what()}});
        parsed = parse_proposals(complete(backend, request, options.transcript), valid_ids, qc.n_proposals,
                                 qc.target_id);
      }
      if (!parsed.rejections.empty()) {
        result.notes.push_back("round " + std::to_string(round) + ": rejected " + detail::describe_rejections(parsed));
      }

      std::vector<EvaluatedProposal> evaluated(parsed.proposals.size());
      parallel_for(parsed.proposals.size(), options.threads, [&](std::size_t i) {
        evaluated[i] = evaluate_proposal(ws, foundation, parsed.proposals[i], qc, r);
      });
      result.audit.validation_evaluations += evaluated.size();
      result.rounds = round;

      bool improved = false;
      for (auto& e : evaluated) {
        if (!e.record.failed && e.record.mae() < best_mae) {
          best_mae = e.record.mae();
          best_model = std::move(e.model);
          improved = true;
        }
        result.records.push_back(std::move(e.record));
      }
      result.best_so_far.push_back(best_mae);
      if (!improved) break;
    }
  } catch (const AgentError& e) {
    save_partial(e.what());
    throw;
  }

  result.best = select_best(result.records);
  if (!best_model) throw DataError("best record has no model");
  result.test = evaluate(*best_model, ws.data(), qc.target_id, ws.split_view().test);
  ++result.audit.test_evaluations;
  result.complete = true;
  return result;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::ordered_json number(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const EvalMetrics& m) {
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (double v : m.per_step_mae) steps.push_back(detail::number(v));
  return {{"mae", detail::number(m.mae)},        {"rmse", detail::number(m.rmse)},
          {"mape", detail::number(m.mape)},      {"per_step_mae", steps},
          {"n_points", m.n_points},              {"mape_excluded", m.mape_excluded}};
}

inline EvalMetrics metrics_from_json(const nlohmann::json& j) {
  EvalMetrics m;
  m.mae = detail::number_from(j.at("mae"));
  m.rmse = detail::number_from(j.at("rmse"));
  m.mape = detail::number_from(j.at("mape"));
  for (const auto& v : j.at("per_step_mae")) m.per_step_mae.push_back(detail::number_from(v));
  m.n_points = j.at("n_points").get<std::size_t>();
  m.mape_excluded = j.at("mape_excluded").get<std::size_t>();
  return m;
}

/// Wall-clock time is left out so equal runs serialize identically.
inline nlohmann::ordered_json to_json(const ExperimentRecord& r) {
  nlohmann::ordered_json j = {{"round", r.round},
                              {"proposal", r.proposal.index},
                              {"explanation", r.proposal.explanation},
                              {"neighbors", r.proposal.neighbor_ids},
                              {"validation", to_json(r.validation)},
                              {"failed", r.failed}};
  if (r.failed) j["failure_reason"] = r.failure_reason;
  return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json& j) {
  ExperimentRecord r;
  r.round = j.at("round").get<int>();
  r.proposal.index = j.at("proposal").get<int>();
  r.proposal.explanation = j.at("explanation").get<std::string>();
  r.proposal.neighbor_ids = j.at("neighbors").get<std::vector<LocationId>>();
  r.validation = metrics_from_json(j.at("validation"));
  r.failed = j.at("failed").get<bool>();
  if (r.failed) r.failure_reason = j.value("failure_reason", "");
  return r;
}

inline nlohmann::ordered_json to_json(const QueryResult& r) {
  nlohmann::ordered_json records = nlohmann::ordered_json::array();
  for (const auto& rec : r.records) records.push_back(to_json(rec));
  nlohmann::ordered_json best_so_far = nlohmann::ordered_json::array();
  for (double v : r.best_so_far) best_so_far.push_back(detail::number(v));
  nlohmann::ordered_json j = {
      {"target", r.target},
      {"model", to_string(r.kind)},
      {"backend", r.backend},
      {"seed", r.seed},
      {"complete", r.complete},
      {"rounds", r.rounds},
      {"best_so_far", best_so_far},
      {"records", records},
  };
  if (r.complete) {
    j["best"] = to_json(r.best);
    j["test"] = to_json(r.test);
  }
  if (r.baselines) {
    j["baselines"] = {{"foundation", {{"validation", to_json(r.baselines->foundation_val)},
                                      {"test", to_json(r.baselines->foundation_test)}}},
                      {"all_data", {{"validation", to_json(r.baselines->all_data_val)},
                                    {"test", to_json(r.baselines->all_data_test)}}}};
  }
  j["audit"] = {{"validation_evaluations", r.audit.validation_evaluations},
                {"test_evaluations", r.audit.test_evaluations}};
  j["notes"] = r.notes;
  if (!r.transcript.empty()) j["transcript"] = r.transcript;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

inline QueryResult query_result_from_json(const nlohmann::json& j) {
  QueryResult r;
  r.target = j.at("target").get<LocationId>();
  r.kind = parse_model_kind(j.at("model").get<std::string>());
  r.backend = j.at("backend").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.complete = j.at("complete").get<bool>();
  r.rounds = j.at("rounds").get<std::size_t>();
  for (const auto& v : j.at("best_so_far")) r.best_so_far.push_back(detail::number_from(v));
  for (const auto& rec : j.at("records")) r.records.push_back(record_from_json(rec));
  if (r.complete) {
    r.best = record_from_json(j.at("best"));
    r.test = metrics_from_json(j.at("test"));
  }
  if (j.contains("baselines")) {
    const auto& b = j.at("baselines");
    r.baselines = BaselineMetrics{metrics_from_json(b.at("foundation").at("validation")),
                                  metrics_from_json(b.at("foundation").at("test")),
                                  metrics_from_json(b.at("all_data").at("validation")),
                                  metrics_from_json(b.at("all_data").at("test"))};
  }
  r.audit.validation_evaluations = j.at("audit").at("validation_evaluations").get<std::size_t>();
  r.audit.test_evaluations = j.at("audit").at("test_evaluations").get<std::size_t>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  r.transcript = j.value("transcript", "");
  r.error = j.value("error", "");
  return r;
}

}  // namespace dcats
