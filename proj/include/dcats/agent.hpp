#pragma once

// Prompt construction for the initial and refinement rounds, and extraction of
// proposals from free-form agent replies.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dcats/error.hpp"
#include "dcats/forecast.hpp"
#include "dcats/io.hpp"
#include "dcats/metadata.hpp"
#include "dcats/neighbors.hpp"
#include "dcats/templates.hpp"

namespace dcats {

struct Proposal {
  int index = 1;
  std::string explanation;
  std::vector<LocationId> neighbor_ids;
  friend bool operator==(const Proposal&, const Proposal&) = default;
};

/// Everything the prompts need about one query.
struct PromptContext {
  LocationId target = 0;
  std::string target_description;
  NeighborSets neighbors;
  std::string neighbor_text;
  std::size_t n_proposals = 5;
  std::string background;
};

struct ExperimentRecord {
  Proposal proposal;
  EvalMetrics validation;
  int round = 1;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string failure_reason;

  [[nodiscard]] double mae() const {
    return failed ? std::numeric_limits<double>::infinity() : validation.mae;
  }
};

/// Numbered entries of the three neighbor lists, each under its explanatory header.
inline std::string render_neighbor_sets(const MetadataDB& db, const NeighborSets& sets, const TemplateSet& templates) {
  std::string out;
  auto section = [&](std::string_view header, const std::vector<NeighborEntry>& list) {
    if (!out.empty()) out += '\n';
    out += templates.get(header);
    out += '\n';
    if (list.empty()) {
      out += "  (none)\n";
      return;
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      out += "  " + std::to_string(i + 1) + ". " +
             render_neighbor_entry(db, list[i].location_id, list[i].annotation(), templates) + '\n';
    }
  };
  section("neighbors_road", sets.road);
  section("neighbors_pattern", sets.pattern);
  section("neighbors_geodetic", sets.geodetic);
  if (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

inline PromptContext make_prompt_context(const MetadataDB& db, NeighborSets sets, std::size_t n_proposals,
                                         const TemplateSet& templates) {
  if (n_proposals == 0) throw ConfigError("n_proposals must be >= 1");
  PromptContext ctx;
  ctx.target = sets.target;
  ctx.target_description = render_location(db, sets.target, templates);
  ctx.neighbor_text = render_neighbor_sets(db, sets, templates);
  ctx.neighbors = std::move(sets);
  ctx.n_proposals = n_proposals;
  ctx.background = db.background_text.empty() ? default_background(db, templates) : db.background_text;
  return ctx;
}

/// Background, task, guidelines, neighbor sets and output format.
inline std::string build_initial_prompt(const PromptContext& ctx, const TemplateSet& templates) {
  if (ctx.neighbors.empty()) throw AgentError("no neighbors to propose from for location_id " + std::to_string(ctx.target));
  if (ctx.n_proposals == 0) throw ConfigError("n_proposals must be >= 1");
  return templates.render("initial_prompt", {{"background", ctx.background},
                                             {"target_id", std::to_string(ctx.target)},
                                             {"target_description", ctx.target_description},
                                             {"n_proposals", std::to_string(ctx.n_proposals)},
                                             {"neighbor_sets", ctx.neighbor_text},
                                             {"output_format", templates.get("output_format")}});
}

inline std::string format_mae(double mae) { return std::isfinite(mae) ? io::format_fixed(mae, 4) : "failed"; }

/// History sorted best-first: ascending MAE, then earlier round, then lower proposal index.
inline std::vector<ExperimentRecord> rank_records(std::vector<ExperimentRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const ExperimentRecord& a, const ExperimentRecord& b) {
    if (a.mae() != b.mae()) return a.mae() < b.mae();
    if (a.round != b.round) return a.round < b.round;
    return a.proposal.index < b.proposal.index;
  });
  return records;
}

inline std::string render_candidate_list(const NeighborSets& sets) {
  std::string out;
  auto line = [&](std::string_view label, const std::vector<NeighborEntry>& list) {
    out += "- ";
    out += label;
    out += ": ";
    if (list.empty()) out += "(none)";
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i) out += ", ";
      const auto& e = list[i];
      out += std::to_string(e.location_id) + " (" +
             (e.kind == NeighborKind::pattern ? io::format_fixed(e.value, 4) : io::format_fixed(e.value, 2) + "km") + ")";
    }
    out += '\n';
  };
  line("road network", sets.road);
  line("temporal pattern similarity", sets.pattern);
  line("geodetic distance", sets.geodetic);
  out.pop_back();
  return out;
}

/// Objective, background, ranked experiment results, task, additional
/// considerations and output format.
inline std::string build_refinement_prompt(const PromptContext& ctx, const std::vector<ExperimentRecord>& history,
                                           const ExperimentRecord& best, const TemplateSet& templates,
                                           std::optional<double> baseline_mae = std::nullopt) {
  if (history.empty()) throw AgentError("refinement prompt needs at least one experiment record");
  const auto ranked = rank_records(history);
  std::string results;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    if (i) results += '\n';
    results += "Proposal " + std::to_string(i + 1) + "\nExplanation: " + r.proposal.explanation + "\nNeighbors: [";
    for (std::size_t k = 0; k < r.proposal.neighbor_ids.size(); ++k) {
      if (k) results += ", ";
      results += std::to_string(r.proposal.neighbor_ids[k]);
    }
    results += "]\nPerformance (Mean Absolute Error): " + format_mae(r.mae());
    if (r.failed) results += " (" + r.failure_reason + ")";
    results += '\n';
  }
  if (!results.empty() && results.back() == '\n') results.pop_back();
  std::string baseline_line;
  if (baseline_mae) baseline_line = templates.render("baseline_line", {{"baseline_mae", format_mae(*baseline_mae)}}) + '\n';
  return templates.render("refinement_prompt", {{"target_id", std::to_string(ctx.target)},
                                                {"target_description", ctx.target_description},
                                                {"baseline_line", baseline_line},
                                                {"best_mae", format_mae(best.mae())},
                                                {"experiment_results", results},
                                                {"n_proposals", std::to_string(ctx.n_proposals)},
                                                {"candidate_list", render_candidate_list(ctx.neighbors)},
                                                {"output_format", templates.get("output_format")}});
}

// ---------------------------------------------------------------------------
// Output format

/// Proposals in the agent output format, blocks separated by a blank line.
inline std::string render_proposals(const std::vector<Proposal>& proposals) {
  std::string out;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& p = proposals[i];
    if (i) out += '\n';
    out += "Proposal " + std::to_string(p.index) + "\nExplanation: " + p.explanation + "\nNeighbors: [";
    for (std::size_t k = 0; k < p.neighbor_ids.size(); ++k) {
      if (k) out += ", ";
      out += std::to_string(p.neighbor_ids[k]);
    }
    out += "]\n";
  }
  return out;
}

struct ProposalRejection {
  int index = 0;
  std::string reason;
};

struct ParseResult {
  std::vector<Proposal> proposals;
  std::vector<ProposalRejection> rejections;
};

namespace detail {

/// Strips markdown decoration such as "**", "#", "-", "`" from both ends.
inline std::string_view strip_decoration(std::string_view s) {
  constexpr std::string_view deco = " \t\r*#_`->:";
  const auto b = s.find_first_not_of(deco);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(deco);
  return s.substr(b, e - b + 1);
}

inline bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) return false;
  }
  return true;
}

/// "Proposal 3" header (any decoration) -> 3.
inline std::optional<long long> proposal_header(std::string_view line) {
  auto s = strip_decoration(line);
  if (!iequals_prefix(s, "proposal")) return std::nullopt;
  s.remove_prefix(8);
  s = strip_decoration(s);
  if (s.empty()) return std::nullopt;
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
  if (digits == 0 || digits > 9) return std::nullopt;
  // "Proposal 2: Road-heavy mix" carries a title after a separator.
  auto rest = s.substr(digits);
  const auto b = rest.find_first_not_of(" \t*_");
  if (b != std::string_view::npos && rest[b] != ':' && rest[b] != '-' && rest[b] != '(') return std::nullopt;
  return io::parse_int<long long>(s.substr(0, digits));
}

/// Text after "label:" when the (decoration-stripped) line starts with it.
inline std::optional<std::string_view> labeled(std::string_view line, std::string_view label) {
  std::string_view s = line;
  const auto b = s.find_first_not_of(" \t*-_#`");
  if (b == std::string_view::npos) return std::nullopt;
  s.remove_prefix(b);
  if (!iequals_prefix(s, label)) return std::nullopt;
  s.remove_prefix(label.size());
  const auto colon = s.find_first_not_of("*_ \t");
  if (colon == std::string_view::npos || s[colon] != ':') return std::nullopt;
  s.remove_prefix(colon + 1);
  const auto after = s.find_first_not_of("*_");
  return io::trim(after == std::string_view::npos ? std::string_view{} : s.substr(after));
}

struct RawBlock {
  long long index = 0;
  std::string explanation;
  std::string neighbors;
  bool has_neighbors = false;
  bool neighbors_closed = false;
};

}  // namespace detail

/// Extracts proposal blocks from free text. A block is rejected when its
/// neighbor list is missing or malformed, empty, repeats an id, names the
/// target, or names an id outside `valid_ids`. At most `n_expected` accepted
/// proposals are returned. Throws ProposalParseError when none is valid.
inline ParseResult parse_proposals(std::string_view text, const std::set<LocationId>& valid_ids, std::size_t n_expected,
                                   std::optional<LocationId> target = std::nullopt) {
  std::vector<detail::RawBlock> blocks;
  enum class Field { none, explanation, neighbors } field = Field::none;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (const auto idx = detail::proposal_header(line)) {
      blocks.push_back({*idx, {}, {}, false, false});
      field = Field::none;
      continue;
    }
    if (blocks.empty()) continue;
    auto& blk = blocks.back();
    if (const auto e = detail::labeled(line, "explanation")) {
      blk.explanation = std::string(*e);
      field = Field::explanation;
      continue;
    }
    if (const auto n = detail::labeled(line, "neighbors")) {
      blk.neighbors = std::string(*n);
      blk.has_neighbors = true;
      blk.neighbors_closed = blk.neighbors.find(']') != std::string::npos;
      field = blk.neighbors_closed ? Field::none : Field::neighbors;
      continue;
    }
    const auto t = io::trim(line);
    if (field == Field::explanation) {
      if (t.empty() || t.starts_with("```")) {
        field = Field::none;
      } else {
        blk.explanation += ' ';
        blk.explanation += t;
      }
    } else if (field == Field::neighbors) {
      blk.neighbors += ' ';
      blk.neighbors += t;
      if (t.find(']') != std::string_view::npos) {
        blk.neighbors_closed = true;
        field = Field::none;
      }
    }
  }

  ParseResult result;
  for (const auto& blk : blocks) {
    const int index = blk.index >= 0 && blk.index <= std::numeric_limits<int>::max() ? static_cast<int>(blk.index) : 0;
    auto reject = [&](std::string reason) { result.rejections.push_back({index, std::move(reason)}); };
    if (blk.index < 1) {
      reject("proposal number must be >= 1");
      continue;
    }
    if (!blk.has_neighbors) {
      reject("missing Neighbors line");
      continue;
    }
    const auto open = blk.neighbors.find('[');
    const auto close = blk.neighbors.find(']');
    if (open == std::string::npos || close == std::string::npos || close < open) {
      reject("malformed neighbor list");
      continue;
    }
    std::vector<LocationId> ids;
    bool malformed = false;
    std::string_view inner = std::string_view(blk.neighbors).substr(open + 1, close - open - 1);
    std::size_t p = 0;
    while (p <= inner.size()) {
      auto comma = inner.find(',', p);
      if (comma == std::string_view::npos) comma = inner.size();
      auto tok = io::trim(inner.substr(p, comma - p));
      p = comma + 1;
      if (tok.empty()) {
        if (comma == inner.size() && ids.empty() && io::trim(inner).empty()) break;
        malformed = true;
        break;
      }
      while (!tok.empty() && (tok.front() == '`' || tok.front() == '\'' || tok.front() == '"')) tok.remove_prefix(1);
      while (!tok.empty() && (tok.back() == '`' || tok.back() == '\'' || tok.back() == '"')) tok.remove_suffix(1);
      if (detail::iequals_prefix(tok, "location_id=")) tok.remove_prefix(12);
      const auto id = io::parse_int<LocationId>(tok);
      if (!id) {
        malformed = true;
        break;
      }
      ids.push_back(*id);
    }
    if (malformed) {
      reject("malformed neighbor list");
      continue;
    }
    if (ids.empty()) {
      reject("empty neighbor list");
      continue;
    }
    std::set<LocationId> seen;
    std::string problem;
    for (LocationId id : ids) {
      if (!seen.insert(id).second) {
        problem = "duplicate";
        break;
      }
      if (target && id == *target) {
        problem = "target location included";
        break;
      }
      if (!valid_ids.contains(id)) {
        problem = "out-of-pool id " + std::to_string(id);
        break;
      }
    }
    if (!problem.empty()) {
      reject(problem);
      continue;
    }
    if (result.proposals.size() < n_expected) {
      result.proposals.push_back({index, std::string(io::trim(blk.explanation)), std::move(ids)});
    }
  }
  if (result.proposals.empty()) {
    std::string msg = "no valid proposal in agent reply";
    if (blocks.empty()) msg += " (no 'Proposal N' blocks found)";
    for (const auto& r : result.rejections) msg += "; proposal " + std::to_string(r.index) + ": " + r.reason;
    throw ProposalParseError(msg);
  }
  return result;
}

}  // namespace dcats
