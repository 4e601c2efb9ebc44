#pragma once

// Agent backends: an HTTP chat-completion client with retries, a canned mock,
// and scripted strategies for offline runs. Every call goes through
// complete(), which appends one transcript entry.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dcats/agent.hpp"
#include "dcats/error.hpp"
#include "dcats/io.hpp"

namespace dcats {

/// What a backend gets to see. Scripted backends read the structured context;
/// the LLM backend only sends `prompt`.
struct AgentRequest {
  std::string prompt;
  int round = 1;
  const PromptContext* context = nullptr;
  std::span<const ExperimentRecord> history;
};

struct Completion {
  std::string text;
  int attempts = 1;
};

class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  [[nodiscard]] virtual std::string identity() const = 0;
  virtual Completion complete(const AgentRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Transcripts

struct TranscriptEntry {
  std::string timestamp;
  int round = 0;
  std::string prompt;
  std::string response;
  int attempt_count = 0;
  std::string error;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Append-only exchange log; optionally mirrored to a JSON-lines file.
class TranscriptLog {
 public:
  TranscriptLog() = default;
  explicit TranscriptLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  }

  void append(TranscriptEntry entry) {
    std::lock_guard lock(mutex_);
    if (!path_.empty()) {
      nlohmann::json j = {{"timestamp", entry.timestamp}, {"round", entry.round},
                          {"prompt", entry.prompt},       {"response", entry.response},
                          {"attempt_count", entry.attempt_count}};
      if (!entry.error.empty()) j["error"] = entry.error;
      std::ofstream out(path_, std::ios::app | std::ios::binary);
      out << j.dump() << '\n';
    }
    entries_.push_back(std::move(entry));
  }

  [[nodiscard]] std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

  [[nodiscard]] std::vector<TranscriptEntry> entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
  }

  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
};

/// Sends the request and logs exactly one transcript entry, failed or not.
inline std::string complete(AgentBackend& backend, const AgentRequest& request, TranscriptLog* log = nullptr) {
  try {
    auto c = backend.complete(request);
    if (log) log->append({utc_timestamp(), request.round, request.prompt, c.text, c.attempts, {}});
    return std::move(c.text);
  } catch (const RetryExhaustedError& e) {
    if (log) log->append({utc_timestamp(), request.round, request.prompt, {}, -1, e.what()});
    throw;
  } catch (const std::exception& e) {
    if (log) log->append({utc_timestamp(), request.round, request.prompt, {}, -1, e.what()});
    throw;
  }
}

// ---------------------------------------------------------------------------
// Mock

/// Returns canned replies in order; the last one repeats.
class MockBackend : public AgentBackend {
 public:
  explicit MockBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {
    if (replies_.empty()) throw ConfigError("mock backend needs at least one reply");
  }
  [[nodiscard]] std::string identity() const override { return "mock"; }
  Completion complete(const AgentRequest&) override {
    const auto& r = replies_[std::min(next_, replies_.size() - 1)];
    ++next_;
    return {r, 1};
  }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Scripted strategies

enum class ScriptedStrategy { oracle, greedy_pattern, random, repeat };

inline ScriptedStrategy parse_strategy(std::string_view s) {
  if (s == "oracle") return ScriptedStrategy::oracle;
  if (s == "greedy" || s == "greedy-pattern") return ScriptedStrategy::greedy_pattern;
  if (s == "random") return ScriptedStrategy::random;
  if (s == "repeat") return ScriptedStrategy::repeat;
  throw ConfigError("unknown scripted strategy '" + std::string(s) + "'");
}

inline std::string to_string(ScriptedStrategy s) {
  switch (s) {
    case ScriptedStrategy::oracle: return "oracle";
    case ScriptedStrategy::greedy_pattern: return "greedy-pattern";
    case ScriptedStrategy::random: return "random";
    case ScriptedStrategy::repeat: return "repeat";
  }
  return "?";
}

namespace detail {

/// Describes which neighbor lists the chosen ids come from.
inline std::string criteria_explanation(const NeighborSets& sets, const std::vector<LocationId>& ids,
                                        std::string_view lead) {
  auto count_in = [&](const std::vector<NeighborEntry>& list) {
    return std::count_if(ids.begin(), ids.end(), [&](LocationId id) {
      return std::any_of(list.begin(), list.end(), [&](const NeighborEntry& e) { return e.location_id == id; });
    });
  };
  std::vector<std::pair<long, std::string>> parts = {
      {static_cast<long>(count_in(sets.road)), "road network proximity"},
      {static_cast<long>(count_in(sets.pattern)), "temporal pattern similarity"},
      {static_cast<long>(count_in(sets.geodetic)), "geodetic distance"},
  };
  std::stable_sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::string text(lead);
  text += " Selected neighbors come mainly from ";
  text += parts[0].second;
  if (parts[1].first > 0) text += ", supported by " + parts[1].second;
  if (parts[2].first > 0) text += " and " + parts[2].second;
  text += ".";
  return text;
}

}  // namespace detail

struct ScriptedOptions {
  /// Size of the first initial proposal; each later one grows by `size_step`.
  std::size_t proposal_size = 5;
  std::size_t size_step = 2;
  /// Ground-truth cluster per location; required by the oracle strategy.
  std::map<LocationId, int> labels;
};

/// Offline stand-in for the LLM. Replies are a pure function of
/// (context, history, round, seed) and use the agent output format.
class ScriptedBackend : public AgentBackend {
 public:
  ScriptedBackend(ScriptedStrategy strategy, std::uint64_t seed, ScriptedOptions options = {})
      : strategy_(strategy), seed_(seed), options_(std::move(options)) {
    if (options_.proposal_size == 0) throw ConfigError("proposal size must be >= 1");
    if (strategy_ == ScriptedStrategy::oracle && options_.labels.empty()) {
      throw ConfigError("oracle strategy needs cluster labels");
    }
  }

  [[nodiscard]] std::string identity() const override { return "scripted:" + to_string(strategy_); }

  Completion complete(const AgentRequest& request) override {
    if (!request.context) throw AgentError("scripted backend needs the prompt context");
    return {render_proposals(propose(*request.context, request.history, request.round)), 1};
  }

  [[nodiscard]] std::vector<Proposal> propose(const PromptContext& ctx, std::span<const ExperimentRecord> history,
                                              int round) const {
    const auto pool = candidate_pool(ctx);
    if (strategy_ == ScriptedStrategy::repeat || round <= 1 || history.empty()) return initial(ctx, pool);
    return refine(ctx, pool, history, round);
  }

 private:
  [[nodiscard]] std::mt19937_64 rng_for(int round, std::size_t proposal) const {
    std::uint64_t s = io::splitmix64(seed_ ^ 0x5851f42d4c957f2dULL);
    s = io::splitmix64(s + static_cast<std::uint64_t>(round));
    s = io::splitmix64(s + proposal);
    return std::mt19937_64(s);
  }

  [[nodiscard]] std::size_t size_of(std::size_t proposal) const {
    return options_.proposal_size + options_.size_step * proposal;
  }

  [[nodiscard]] std::vector<LocationId> candidate_pool(const PromptContext& ctx) const {
    auto pool = ctx.neighbors.pool();
    if (strategy_ == ScriptedStrategy::oracle) {
      const auto it = options_.labels.find(ctx.target);
      if (it == options_.labels.end()) throw AgentError("oracle: no label for target " + std::to_string(ctx.target));
      const int cluster = it->second;
      std::erase_if(pool, [&](LocationId id) {
        const auto l = options_.labels.find(id);
        return l == options_.labels.end() || l->second != cluster;
      });
    }
    if (pool.empty()) throw AgentError("scripted backend: no candidate neighbors");
    return pool;
  }

  [[nodiscard]] std::vector<Proposal> initial(const PromptContext& ctx, const std::vector<LocationId>& pool) const {
    std::vector<Proposal> out;
    for (std::size_t i = 0; i < ctx.n_proposals; ++i) {
      Proposal p;
      p.index = static_cast<int>(i + 1);
      switch (strategy_) {
        case ScriptedStrategy::greedy_pattern:
        case ScriptedStrategy::repeat: {
          const std::size_t want = size_of(i);
          for (const auto& e : ctx.neighbors.pattern) {
            if (p.neighbor_ids.size() >= want) break;
            p.neighbor_ids.push_back(e.location_id);
          }
          if (p.neighbor_ids.empty()) p.neighbor_ids.push_back(pool.front());
          p.explanation = detail::criteria_explanation(
              ctx.neighbors, p.neighbor_ids, "Takes the locations whose daily pattern best matches the target.");
          break;
        }
        case ScriptedStrategy::oracle:
        case ScriptedStrategy::random: {
          auto rng = rng_for(1, i);
          auto shuffled = pool;
          std::shuffle(shuffled.begin(), shuffled.end(), rng);
          shuffled.resize(std::min(size_of(i), shuffled.size()));
          p.neighbor_ids = std::move(shuffled);
          p.explanation = detail::criteria_explanation(
              ctx.neighbors, p.neighbor_ids,
              strategy_ == ScriptedStrategy::oracle ? "Groups locations that behave like the target."
                                                    : "Samples a varied set of candidate locations.");
          break;
        }
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  /// Swaps one id of the incumbent best proposal per new proposal.
  [[nodiscard]] std::vector<Proposal> refine(const PromptContext& ctx, const std::vector<LocationId>& pool,
                                             std::span<const ExperimentRecord> history, int round) const {
    const auto ranked = rank_records(std::vector<ExperimentRecord>(history.begin(), history.end()));
    const auto& incumbent = ranked.front().proposal.neighbor_ids;
    std::vector<Proposal> out;
    for (std::size_t i = 0; i < ctx.n_proposals; ++i) {
      auto rng = rng_for(round, i);
      Proposal p;
      p.index = static_cast<int>(i + 1);
      p.neighbor_ids = incumbent;
      std::vector<LocationId> unused;
      for (LocationId id : pool) {
        if (std::find(incumbent.begin(), incumbent.end(), id) == incumbent.end()) unused.push_back(id);
      }
      if (!unused.empty() && !p.neighbor_ids.empty()) {
        std::uniform_int_distribution<std::size_t> out_pick(0, p.neighbor_ids.size() - 1);
        std::uniform_int_distribution<std::size_t> in_pick(0, unused.size() - 1);
        const std::size_t slot = out_pick(rng);
        p.neighbor_ids[slot] = unused[in_pick(rng)];
      } else if (p.neighbor_ids.size() > 1) {
        std::uniform_int_distribution<std::size_t> out_pick(0, p.neighbor_ids.size() - 1);
        p.neighbor_ids.erase(p.neighbor_ids.begin() + static_cast<std::ptrdiff_t>(out_pick(rng)));
      }
      p.explanation = detail::criteria_explanation(ctx.neighbors, p.neighbor_ids,
                                                   "Refines the best proposal so far by swapping one location.");
      out.push_back(std::move(p));
    }
    return out;
  }

  ScriptedStrategy strategy_;
  std::uint64_t seed_;
  ScriptedOptions options_;
};

// ---------------------------------------------------------------------------
// LLM over HTTP

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Network failure (connection refused, timeout): always retryable.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

inline constexpr const char* kApiKeyEnv = "DCATS_LLM_API_KEY";

struct LlmSettings {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4-turbo";
  double temperature = 0.0;
  std::string api_key;
  std::string system_prompt = "You are a data scientist who builds time series forecasting models.";
  /// JSON pointer to the assistant text in the response.
  std::string response_path = "/choices/0/message/content";
  int max_attempts = 4;
  int backoff_initial_ms = 1000;
  int backoff_max_ms = 16000;
  int timeout_seconds = 120;
};

/// Sleeps between attempts; replaceable so tests run instantly.
using SleepFn = std::function<void(std::chrono::milliseconds)>;

class LlmBackend : public AgentBackend {
 public:
  LlmBackend(LlmSettings settings, std::shared_ptr<HttpTransport> transport, SleepFn sleep = {})
      : settings_(std::move(settings)), transport_(std::move(transport)), sleep_(std::move(sleep)) {
    if (!transport_) throw ConfigError("LLM backend needs a transport");
    if (settings_.max_attempts < 1) throw ConfigError("llm.max_attempts must be >= 1");
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  [[nodiscard]] std::string identity() const override { return "llm:" + settings_.model; }

  [[nodiscard]] std::string request_body(const std::string& prompt) const {
    nlohmann::json body = {
        {"model", settings_.model},
        {"messages", nlohmann::json::array({{{"role", "system"}, {"content", settings_.system_prompt}},
                                            {{"role", "user"}, {"content", prompt}}})},
        {"temperature", settings_.temperature},
    };
    return body.dump();
  }

  Completion complete(const AgentRequest& request) override {
    const auto body = request_body(request.prompt);
    std::vector<std::pair<std::string, std::string>> headers = {{"Content-Type", "application/json"}};
    if (!settings_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + settings_.api_key);
    std::string last_problem;
    for (int attempt = 1; attempt <= settings_.max_attempts; ++attempt) {
      if (attempt > 1) sleep_(backoff(attempt - 1));
      HttpResponse resp;
      try {
        resp = transport_->post(settings_.endpoint, body, headers);
      } catch (const TransportError& e) {
        last_problem = std::string("network error: ") + e.what();
        continue;
      }
      if (resp.status == 401 || resp.status == 403) {
        throw AuthenticationError("LLM endpoint rejected credentials (HTTP " + std::to_string(resp.status) +
                                  "); check " + kApiKeyEnv);
      }
      if (resp.status == 429 || resp.status >= 500) {
        last_problem = "HTTP " + std::to_string(resp.status);
        continue;
      }
      if (resp.status < 200 || resp.status >= 300) {
        throw AgentError("LLM request failed with HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 500));
      }
      return {extract_text(resp.body), attempt};
    }
    throw RetryExhaustedError("LLM request failed after " + std::to_string(settings_.max_attempts) +
                              " attempts (last: " + last_problem + ")");
  }

  /// Delay before retry number `retry` (1-based): initial * 2^(retry-1), capped.
  [[nodiscard]] std::chrono::milliseconds backoff(int retry) const {
    long long d = settings_.backoff_initial_ms;
    for (int i = 1; i < retry && d < settings_.backoff_max_ms; ++i) d *= 2;
    return std::chrono::milliseconds(std::min<long long>(d, settings_.backoff_max_ms));
  }

  [[nodiscard]] std::string extract_text(const std::string& body) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedResponseError(std::string("LLM response is not JSON: ") + e.what());
    }
    const nlohmann::json* node = nullptr;
    try {
      node = &j.at(nlohmann::json::json_pointer(settings_.response_path));
    } catch (const nlohmann::json::exception&) {
      throw MalformedResponseError("LLM response has nothing at " + settings_.response_path);
    }
    if (!node->is_string()) throw MalformedResponseError("LLM response field " + settings_.response_path + " is not text");
    auto text = node->get<std::string>();
    if (io::trim(text).empty()) throw MalformedResponseError("LLM response text is empty");
    return text;
  }

 private:
  LlmSettings settings_;
  std::shared_ptr<HttpTransport> transport_;
  SleepFn sleep_;
};

/// Reads the API key from the environment into `settings`.
inline void load_api_key_from_env(LlmSettings& settings) {
  if (const char* key = std::getenv(kApiKeyEnv)) settings.api_key = key;
}

}  // namespace dcats
