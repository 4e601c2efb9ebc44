#pragma once

// Key-value run configuration. One `key = value` per line, `#` starts a
// comment. Relative paths resolve against the config file's directory.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcats/backend.hpp"
#include "dcats/error.hpp"
#include "dcats/forecast.hpp"
#include "dcats/io.hpp"
#include "dcats/neighbors.hpp"
#include "dcats/tsdata.hpp"

namespace dcats {

struct DataPaths {
  std::filesystem::path series;
  std::filesystem::path metadata;
  std::filesystem::path graph;
  std::filesystem::path background;
  std::filesystem::path labels;
  std::filesystem::path templates;
  int interval_minutes = 15;
  int steps_per_day = 96;
};

/// Everything a run needs besides the data itself.
struct RunConfig {
  DataPaths data;
  SplitRatio split_ratio{6, 2, 2};
  std::size_t input_len = 96;
  std::size_t horizon = 12;
  std::size_t stride = 1;
  ModelKind model = ModelKind::linear;
  std::size_t hidden = 32;
  std::size_t period = 12;
  std::uint64_t model_seed = 0;
  TrainConfig pretrain{30, 256, 1e-3, OptimizerKind::adam, LossKind::mse, 3, 0};
  TrainConfig finetune{10, 256, 1e-4, OptimizerKind::adam, LossKind::mse, 3, 0};
  std::size_t n_proposals = 5;
  std::size_t max_rounds = 5;
  double prune_fraction = 0.10;
  std::size_t proposal_size = 5;
  std::string backend = "oracle";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t anomaly_window = 24;
  NeighborConfig neighbors{};
  LlmSettings llm{};
  std::filesystem::path cache_dir = "cache";

  [[nodiscard]] ModelConfig model_config(ModelKind kind) const {
    return {kind, input_len, horizon, hidden, period, model_seed};
  }

  void validate() const {
    if (input_len == 0 || horizon == 0 || stride == 0) throw ConfigError("window sizes must be >= 1");
    if (max_rounds < 1) throw ConfigError("query.max_rounds must be >= 1");
    if (n_proposals < 1) throw ConfigError("query.n_proposals must be >= 1");
    if (proposal_size < 1) throw ConfigError("query.proposal_size must be >= 1");
    if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) throw ConfigError("query.prune_fraction must be in [0, 1)");
    if (anomaly_window < 3) throw ConfigError("anomaly.window must be >= 3");
    if (neighbors.k < 1) throw ConfigError("neighbors.k must be >= 1");
    for (const auto* tc : {&pretrain, &finetune}) {
      if (tc->batch_size == 0) throw ConfigError("batch_size must be >= 1");
      if (!(tc->learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    }
    model_config(model).validate();
  }
};

namespace detail {

inline SplitRatio parse_ratio(std::string_view v) {
  const auto a = v.find(':');
  const auto b = a == std::string_view::npos ? a : v.find(':', a + 1);
  if (b == std::string_view::npos) throw ConfigError("split.ratio must look like 6:2:2");
  const auto x = io::parse_int<std::size_t>(v.substr(0, a));
  const auto y = io::parse_int<std::size_t>(v.substr(a + 1, b - a - 1));
  const auto z = io::parse_int<std::size_t>(v.substr(b + 1));
  if (!x || !y || !z || *x == 0 || *y == 0 || *z == 0) throw ConfigError("split.ratio parts must be positive integers");
  return {*x, *y, *z};
}

inline OptimizerKind parse_optimizer(std::string_view v) {
  if (v == "adam") return OptimizerKind::adam;
  if (v == "sgd") return OptimizerKind::sgd;
  throw ConfigError("optimizer must be adam or sgd, got '" + std::string(v) + "'");
}

inline LossKind parse_loss(std::string_view v) {
  if (v == "mse") return LossKind::mse;
  if (v == "mae") return LossKind::mae;
  throw ConfigError("loss must be mse or mae, got '" + std::string(v) + "'");
}

template <class T>
T require_int(std::string_view key, std::string_view v) {
  const auto x = io::parse_int<T>(v);
  if (!x) throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return *x;
}

inline double require_double(std::string_view key, std::string_view v) {
  const auto x = io::parse_double(v);
  if (!x) throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return *x;
}

using Setter = std::function<void(RunConfig&, std::string_view, const std::filesystem::path&)>;

inline void add_train_keys(std::map<std::string, Setter, std::less<>>& keys, const std::string& prefix,
                           TrainConfig RunConfig::*member) {
  keys[prefix + ".epochs"] = [=](RunConfig& c, std::string_view v, auto&) {
    (c.*member).epochs = require_int<std::size_t>(prefix + ".epochs", v);
  };
  keys[prefix + ".batch_size"] = [=](RunConfig& c, std::string_view v, auto&) {
    (c.*member).batch_size = require_int<std::size_t>(prefix + ".batch_size", v);
  };
  keys[prefix + ".learning_rate"] = [=](RunConfig& c, std::string_view v, auto&) {
    (c.*member).learning_rate = require_double(prefix + ".learning_rate", v);
  };
  keys[prefix + ".optimizer"] = [=](RunConfig& c, std::string_view v, auto&) { (c.*member).optimizer = parse_optimizer(v); };
  keys[prefix + ".loss"] = [=](RunConfig& c, std::string_view v, auto&) { (c.*member).loss = parse_loss(v); };
  keys[prefix + ".patience"] = [=](RunConfig& c, std::string_view v, auto&) {
    (c.*member).patience = require_int<std::size_t>(prefix + ".patience", v);
  };
  keys[prefix + ".seed"] = [=](RunConfig& c, std::string_view v, auto&) {
    (c.*member).seed = require_int<std::uint64_t>(prefix + ".seed", v);
  };
}

inline const std::map<std::string, Setter, std::less<>>& config_keys() {
  static const auto keys = [] {
    std::map<std::string, Setter, std::less<>> k;
    auto path_key = [&](const std::string& name, std::filesystem::path DataPaths::*member) {
      k[name] = [member](RunConfig& c, std::string_view v, const std::filesystem::path& base) {
        std::filesystem::path p{std::string(v)};
        c.data.*member = p.is_relative() && !base.empty() ? base / p : p;
      };
    };
    path_key("data.series", &DataPaths::series);
    path_key("data.metadata", &DataPaths::metadata);
    path_key("data.graph", &DataPaths::graph);
    path_key("data.background", &DataPaths::background);
    path_key("data.labels", &DataPaths::labels);
    path_key("data.templates", &DataPaths::templates);
    k["data.interval_minutes"] = [](RunConfig& c, std::string_view v, auto&) {
      c.data.interval_minutes = require_int<int>("data.interval_minutes", v);
    };
    k["data.steps_per_day"] = [](RunConfig& c, std::string_view v, auto&) {
      c.data.steps_per_day = require_int<int>("data.steps_per_day", v);
    };
    k["split.ratio"] = [](RunConfig& c, std::string_view v, auto&) { c.split_ratio = parse_ratio(v); };
    k["window.input_len"] = [](RunConfig& c, std::string_view v, auto&) {
      c.input_len = require_int<std::size_t>("window.input_len", v);
    };
    k["window.horizon"] = [](RunConfig& c, std::string_view v, auto&) {
      c.horizon = require_int<std::size_t>("window.horizon", v);
    };
    k["window.stride"] = [](RunConfig& c, std::string_view v, auto&) {
      c.stride = require_int<std::size_t>("window.stride", v);
    };
    k["model.kind"] = [](RunConfig& c, std::string_view v, auto&) {
      try {
        c.model = parse_model_kind(v);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
    };
    k["model.hidden"] = [](RunConfig& c, std::string_view v, auto&) { c.hidden = require_int<std::size_t>("model.hidden", v); };
    k["model.period"] = [](RunConfig& c, std::string_view v, auto&) { c.period = require_int<std::size_t>("model.period", v); };
    k["model.seed"] = [](RunConfig& c, std::string_view v, auto&) { c.model_seed = require_int<std::uint64_t>("model.seed", v); };
    add_train_keys(k, "pretrain", &RunConfig::pretrain);
    add_train_keys(k, "finetune", &RunConfig::finetune);
    k["query.n_proposals"] = [](RunConfig& c, std::string_view v, auto&) {
      c.n_proposals = require_int<std::size_t>("query.n_proposals", v);
    };
    k["query.max_rounds"] = [](RunConfig& c, std::string_view v, auto&) {
      c.max_rounds = require_int<std::size_t>("query.max_rounds", v);
    };
    k["query.prune_fraction"] = [](RunConfig& c, std::string_view v, auto&) {
      c.prune_fraction = require_double("query.prune_fraction", v);
    };
    k["query.proposal_size"] = [](RunConfig& c, std::string_view v, auto&) {
      c.proposal_size = require_int<std::size_t>("query.proposal_size", v);
    };
    k["query.backend"] = [](RunConfig& c, std::string_view v, auto&) { c.backend = std::string(v); };
    k["query.seed"] = [](RunConfig& c, std::string_view v, auto&) { c.seed = require_int<std::uint64_t>("query.seed", v); };
    k["threads"] = [](RunConfig& c, std::string_view v, auto&) { c.threads = require_int<std::size_t>("threads", v); };
    k["anomaly.window"] = [](RunConfig& c, std::string_view v, auto&) {
      c.anomaly_window = require_int<std::size_t>("anomaly.window", v);
    };
    k["neighbors.k"] = [](RunConfig& c, std::string_view v, auto&) { c.neighbors.k = require_int<std::size_t>("neighbors.k", v); };
    k["neighbors.pattern_window"] = [](RunConfig& c, std::string_view v, auto&) {
      c.neighbors.pattern_window = require_int<std::size_t>("neighbors.pattern_window", v);
    };
    k["neighbors.pattern_suffix"] = [](RunConfig& c, std::string_view v, auto&) {
      c.neighbors.pattern_suffix = require_int<std::size_t>("neighbors.pattern_suffix", v);
    };
    k["llm.endpoint"] = [](RunConfig& c, std::string_view v, auto&) { c.llm.endpoint = std::string(v); };
    k["llm.model"] = [](RunConfig& c, std::string_view v, auto&) { c.llm.model = std::string(v); };
    k["llm.temperature"] = [](RunConfig& c, std::string_view v, auto&) {
      c.llm.temperature = require_double("llm.temperature", v);
    };
    k["llm.system_prompt"] = [](RunConfig& c, std::string_view v, auto&) { c.llm.system_prompt = std::string(v); };
    k["llm.response_path"] = [](RunConfig& c, std::string_view v, auto&) { c.llm.response_path = std::string(v); };
    k["llm.max_attempts"] = [](RunConfig& c, std::string_view v, auto&) {
      c.llm.max_attempts = require_int<int>("llm.max_attempts", v);
    };
    k["llm.backoff_initial_ms"] = [](RunConfig& c, std::string_view v, auto&) {
      c.llm.backoff_initial_ms = require_int<int>("llm.backoff_initial_ms", v);
    };
    k["llm.backoff_max_ms"] = [](RunConfig& c, std::string_view v, auto&) {
      c.llm.backoff_max_ms = require_int<int>("llm.backoff_max_ms", v);
    };
    k["llm.timeout_seconds"] = [](RunConfig& c, std::string_view v, auto&) {
      c.llm.timeout_seconds = require_int<int>("llm.timeout_seconds", v);
    };
    k["cache.dir"] = [](RunConfig& c, std::string_view v, const std::filesystem::path& base) {
      std::filesystem::path p{std::string(v)};
      c.cache_dir = p.is_relative() && !base.empty() ? base / p : p;
    };
    return k;
  }();
  return keys;
}

}  // namespace detail

/// Every accepted key, sorted.
inline std::vector<std::string> config_key_names() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_keys()) out.push_back(k);
  return out;
}

/// Applies `key = value` lines on top of `base`. Unknown or repeated keys are errors.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}, const std::filesystem::path& base_dir = {}) {
  const auto& keys = detail::config_keys();
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = io::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const auto key = io::trim(line.substr(0, eq));
    const auto value = io::trim(line.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + std::string(key) + "'");
    if (const auto [s, fresh] = seen.emplace(std::string(key), line_no); !fresh) {
      throw ConfigError(where + ": '" + std::string(key) + "' already set on line " + std::to_string(s->second));
    }
    try {
      it->second(base, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, std::move(base), path.parent_path());
}

/// Canonical text of a config; parse_config(to_text(c)) reproduces c.
inline std::string config_to_text(const RunConfig& c) {
  auto train = [](const std::string& p, const TrainConfig& t) {
    return p + ".epochs = " + std::to_string(t.epochs) + "\n" + p + ".batch_size = " + std::to_string(t.batch_size) +
           "\n" + p + ".learning_rate = " + io::format_double(t.learning_rate) + "\n" + p +
           ".optimizer = " + (t.optimizer == OptimizerKind::adam ? "adam" : "sgd") + "\n" + p +
           ".loss = " + (t.loss == LossKind::mse ? "mse" : "mae") + "\n" + p +
           ".patience = " + std::to_string(t.patience) + "\n" + p + ".seed = " + std::to_string(t.seed) + "\n";
  };
  std::string out;
  auto path = [&](const char* k, const std::filesystem::path& p) {
    if (!p.empty()) out += std::string(k) + " = " + p.generic_string() + "\n";
  };
  path("data.series", c.data.series);
  path("data.metadata", c.data.metadata);
  path("data.graph", c.data.graph);
  path("data.background", c.data.background);
  path("data.labels", c.data.labels);
  path("data.templates", c.data.templates);
  out += "data.interval_minutes = " + std::to_string(c.data.interval_minutes) + "\n";
  out += "data.steps_per_day = " + std::to_string(c.data.steps_per_day) + "\n";
  out += "split.ratio = " + std::to_string(c.split_ratio.train) + ":" + std::to_string(c.split_ratio.val) + ":" +
         std::to_string(c.split_ratio.test) + "\n";
  out += "window.input_len = " + std::to_string(c.input_len) + "\n";
  out += "window.horizon = " + std::to_string(c.horizon) + "\n";
  out += "window.stride = " + std::to_string(c.stride) + "\n";
  out += "model.kind = " + to_string(c.model) + "\n";
  out += "model.hidden = " + std::to_string(c.hidden) + "\n";
  out += "model.period = " + std::to_string(c.period) + "\n";
  out += "model.seed = " + std::to_string(c.model_seed) + "\n";
  out += train("pretrain", c.pretrain);
  out += train("finetune", c.finetune);
  out += "query.n_proposals = " + std::to_string(c.n_proposals) + "\n";
  out += "query.max_rounds = " + std::to_string(c.max_rounds) + "\n";
  out += "query.prune_fraction = " + io::format_double(c.prune_fraction) + "\n";
  out += "query.proposal_size = " + std::to_string(c.proposal_size) + "\n";
  out += "query.backend = " + c.backend + "\n";
  out += "query.seed = " + std::to_string(c.seed) + "\n";
  out += "threads = " + std::to_string(c.threads) + "\n";
  out += "anomaly.window = " + std::to_string(c.anomaly_window) + "\n";
  out += "neighbors.k = " + std::to_string(c.neighbors.k) + "\n";
  out += "neighbors.pattern_window = " + std::to_string(c.neighbors.pattern_window) + "\n";
  out += "neighbors.pattern_suffix = " + std::to_string(c.neighbors.pattern_suffix) + "\n";
  out += "llm.endpoint = " + c.llm.endpoint + "\n";
  out += "llm.model = " + c.llm.model + "\n";
  out += "llm.temperature = " + io::format_double(c.llm.temperature) + "\n";
  out += "llm.system_prompt = " + c.llm.system_prompt + "\n";
  out += "llm.response_path = " + c.llm.response_path + "\n";
  out += "llm.max_attempts = " + std::to_string(c.llm.max_attempts) + "\n";
  out += "llm.backoff_initial_ms = " + std::to_string(c.llm.backoff_initial_ms) + "\n";
  out += "llm.backoff_max_ms = " + std::to_string(c.llm.backoff_max_ms) + "\n";
  out += "llm.timeout_seconds = " + std::to_string(c.llm.timeout_seconds) + "\n";
  out += "cache.dir = " + c.cache_dir.generic_string() + "\n";
  return out;
}

}  // namespace dcats
