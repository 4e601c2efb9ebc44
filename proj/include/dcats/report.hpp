#pragma once

// Report files for a batch of query results: metrics tables per model kind,
// explanation term counts, a per-query summary and the JSON-lines trace.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/forecast.hpp"
#include "dcats/io.hpp"
#include "dcats/orchestrator.hpp"

namespace dcats {

/// (base - ours) / base * 100.
inline double improvement_percent(double base, double ours) {
  if (base == 0.0) throw DataError("improvement against a zero baseline is undefined");
  return (base - ours) / base * 100.0;
}

struct MetricMeans {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
};

/// Mean over queries of the per-query metrics.
inline MetricMeans mean_metrics(const std::vector<const EvalMetrics*>& per_query) {
  if (per_query.empty()) throw DataError("no metrics to average");
  MetricMeans m;
  for (const auto* e : per_query) {
    m.mae += e->mae;
    m.rmse += e->rmse;
    m.mape += e->mape;
  }
  const auto n = static_cast<double>(per_query.size());
  return {m.mae / n, m.rmse / n, m.mape / n};
}

inline const std::set<std::string, std::less<>>& stop_words() {
  static const std::set<std::string, std::less<>> words = {
      "a",     "about", "above", "after",  "again", "all",   "also",  "an",    "and",   "any",   "are",   "as",
      "at",    "be",    "been",  "before", "being", "both",  "but",   "by",    "can",   "could", "did",   "do",
      "does",  "each",  "for",   "from",   "had",   "has",   "have",  "having", "he",   "her",   "here",  "his",
      "how",   "i",     "if",    "in",     "into",  "is",    "it",    "its",   "itself", "just", "may",   "might",
      "more",  "most",  "much",  "must",   "my",    "no",    "nor",   "not",   "of",    "off",   "on",    "once",
      "only",  "or",    "other", "our",    "out",   "over",  "own",   "same",  "she",   "should", "so",   "some",
      "such",  "than",  "that",  "the",    "their", "them",  "then",  "there", "these", "they",  "this",  "those",
      "through", "to",  "too",   "under",  "until", "up",    "very",  "was",   "we",    "were",  "what",  "when",
      "where", "which", "while", "who",    "whom",  "why",   "will",  "with",  "would", "you",   "your"};
  return words;
}

/// Lowercased alphabetic tokens with stop words and numbers removed.
inline std::vector<std::string> explanation_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    const bool has_alpha = std::any_of(cur.begin(), cur.end(), [](unsigned char c) { return std::isalpha(c); });
    if (has_alpha && cur.size() > 1 && !stop_words().contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

/// `term,count` sorted by descending count, then term.
inline std::string term_frequency_csv(const std::vector<std::string>& explanations) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : explanations) {
    for (auto& t : explanation_tokens(e)) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::string out = "term,count\n";
  for (const auto& [t, c] : rows) out += t + ',' + std::to_string(c) + '\n';
  return out;
}

namespace detail {

inline std::string pct(double v) { return io::format_fixed(v, 2) + "%"; }

inline std::string table_row(const std::string& label, const MetricMeans& m) {
  return "| " + label + " | " + io::format_fixed(m.mae, 2) + " | " + io::format_fixed(m.rmse, 2) + " | " + pct(m.mape) +
         " |\n";
}

inline std::string improvement_row(const MetricMeans& base, const MetricMeans& ours) {
  return "| % improvement | " + pct(improvement_percent(base.mae, ours.mae)) + " | " +
         pct(improvement_percent(base.rmse, ours.rmse)) + " | " + pct(improvement_percent(base.mape, ours.mape)) + " |\n";
}

inline std::vector<const QueryResult*> sorted_results(const std::vector<QueryResult>& results) {
  std::vector<const QueryResult*> out;
  for (const auto& r : results) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(), [](const QueryResult* a, const QueryResult* b) {
    if (a->kind != b->kind) return a->kind < b->kind;
    return a->target < b->target;
  });
  return out;
}

}  // namespace detail

struct ReportFiles {
  std::string metrics_md;
  std::string metrics_csv;
  std::string terms_csv;
  std::string queries_csv;
  std::string trace_jsonl;
};

/// Builds every report file in memory. Only complete results with baselines
/// enter the metrics tables; every result enters the trace.
inline ReportFiles build_report(const std::vector<QueryResult>& results) {
  if (results.empty()) throw DataError("report needs at least one query result");
  const auto sorted = detail::sorted_results(results);
  ReportFiles f;
  std::map<ModelKind, std::vector<const QueryResult*>> by_kind;
  std::vector<std::string> explanations;
  for (const auto* r : sorted) {
    f.trace_jsonl += to_json(*r).dump() + "\n";
    if (!r->complete) continue;
    explanations.push_back(r->best.proposal.explanation);
    if (r->baselines) by_kind[r->kind].push_back(r);
  }

  std::string main_table = "| Method | MAE | RMSE | MAPE |\n|---|---:|---:|---:|\n";
  std::string foundation_table = main_table;
  f.metrics_csv = "model,method,queries,mae,rmse,mape\n";
  for (const auto& [kind, rs] : by_kind) {
    std::vector<const EvalMetrics*> base, found, ours;
    for (const auto* r : rs) {
      base.push_back(&r->baselines->all_data_test);
      found.push_back(&r->baselines->foundation_test);
      ours.push_back(&r->test);
    }
    const auto mb = mean_metrics(base), mf = mean_metrics(found), mo = mean_metrics(ours);
    const auto name = display_name(kind);
    main_table += detail::table_row(name, mb) + detail::table_row(name + "+DCATS", mo) + detail::improvement_row(mb, mo);
    foundation_table += detail::table_row(name + " (foundation)", mf) + detail::table_row(name + "+DCATS", mo) +
                        detail::improvement_row(mf, mo);
    auto csv = [&](const std::string& method, const MetricMeans& m) {
      f.metrics_csv += to_string(kind) + "," + method + "," + std::to_string(rs.size()) + "," + io::format_fixed(m.mae, 4) +
                       "," + io::format_fixed(m.rmse, 4) + "," + io::format_fixed(m.mape, 4) + "\n";
    };
    csv("all_data", mb);
    csv("foundation", mf);
    csv("dcats", mo);
  }
  std::size_t n_queries = 0;
  for (const auto& [_, rs] : by_kind) n_queries = std::max(n_queries, rs.size());
  f.metrics_md = "# Test-range accuracy\n\nMeans over queries of per-query means across all horizon steps";
  f.metrics_md += n_queries ? " (up to " + std::to_string(n_queries) + " queries per model).\n" : ".\n";
  f.metrics_md += "Baseline: foundation fine-tuned on every location.\n\n";
  if (by_kind.empty()) {
    f.metrics_md += "No complete query with baselines.\n";
  } else {
    f.metrics_md += main_table + "\n## Against the foundation alone\n\n" + foundation_table;
  }

  f.terms_csv = term_frequency_csv(explanations);

  f.queries_csv =
      "model,target,rounds,records,baseline_val_mae,dcats_val_mae,val_improvement,baseline_test_mae,dcats_test_mae,"
      "test_improvement\n";
  for (const auto* r : sorted) {
    if (!r->complete || !r->baselines) continue;
    const double bv = r->baselines->all_data_val.mae, ov = r->best.mae();
    const double bt = r->baselines->all_data_test.mae, ot = r->test.mae;
    f.queries_csv += to_string(r->kind) + "," + std::to_string(r->target) + "," + std::to_string(r->rounds) + "," +
                     std::to_string(r->records.size()) + "," + io::format_fixed(bv, 4) + "," + io::format_fixed(ov, 4) +
                     "," + io::format_fixed(improvement_percent(bv, ov), 2) + "," + io::format_fixed(bt, 4) + "," +
                     io::format_fixed(ot, 4) + "," + io::format_fixed(improvement_percent(bt, ot), 2) + "\n";
  }
  return f;
}

/// Writes metrics_table.md, metrics_table.csv, explanation_terms.csv, queries.csv and trace.jsonl.
inline void emit_report(const std::vector<QueryResult>& results, const std::filesystem::path& out_dir) {
  const auto f = build_report(results);
  io::write_text_file(out_dir / "metrics_table.md", f.metrics_md);
  io::write_text_file(out_dir / "metrics_table.csv", f.metrics_csv);
  io::write_text_file(out_dir / "explanation_terms.csv", f.terms_csv);
  io::write_text_file(out_dir / "queries.csv", f.queries_csv);
  io::write_text_file(out_dir / "trace.jsonl", f.trace_jsonl);
}

/// Reads every QueryResult line of every *.jsonl file directly inside `dir`.
inline std::vector<QueryResult> load_query_results(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<QueryResult> out;
  for (const auto& p : files) {
    const auto text = io::read_text_file(p);
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const auto line = io::trim(std::string_view(text).substr(pos, nl - pos));
      pos = nl + 1;
      ++line_no;
      if (line.empty()) continue;
      try {
        out.push_back(query_result_from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw DataError(p.string() + ":" + std::to_string(line_no) + ": not a query result (" + e.what() + ")");
      }
    }
  }
  if (out.empty()) throw DataError("no query results under " + dir.string());
  return out;
}

}  // namespace dcats
