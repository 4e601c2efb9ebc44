#include <catch_amalgamated.hpp>

#include <random>
#include <string>

#include "dcats/agent.hpp"
#include "fixtures.hpp"

using namespace dcats;

namespace {

PromptContext context(std::size_t n = 5) {
  return make_prompt_context(fixtures::prompt_db(), fixtures::prompt_sets(), n, default_templates());
}

ExperimentRecord record(int round, int index, double mae, std::vector<LocationId> ids = {1200}) {
  ExperimentRecord r;
  r.round = round;
  r.proposal = {index, "note " + std::to_string(index), std::move(ids)};
  r.validation.mae = mae;
  return r;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("initial prompt sections", "[agent]") {
  const auto ctx = context();
  const auto text = build_initial_prompt(ctx, default_templates());
  for (const char* h : {"# Background\n", "# Task\n", "## Guidelines:\n", "## Neighbor Sets:\n", "# Output Format\n"}) {
    CHECK(count_of(text, h) == 1);
  }
  CHECK(text.find("# Background") < text.find("# Task"));
  CHECK(text.find("# Task") < text.find("## Guidelines:"));
  CHECK(text.find("## Guidelines:") < text.find("## Neighbor Sets:"));
  CHECK(text.find("## Neighbor Sets:") < text.find("# Output Format"));
  CHECK(text.find("We request 5 proposals") != std::string::npos);
  CHECK(text.find("- Ensure each location is selected only once per proposal.") != std::string::npos);
  CHECK(text.find("location_id=1205, similarity=0.9849") != std::string::npos);
  CHECK(text.find("location_id=1200, distance=1.25km") != std::string::npos);
  CHECK(build_initial_prompt(ctx, default_templates()) == text);
  CHECK(build_initial_prompt(context(3), default_templates()).find("We request 3 proposals") != std::string::npos);
}

TEST_CASE("initial prompt needs neighbors", "[agent]") {
  auto sets = fixtures::prompt_sets();
  sets.road.clear();
  sets.pattern.clear();
  sets.geodetic.clear();
  const auto ctx = make_prompt_context(fixtures::prompt_db(), sets, 5, default_templates());
  CHECK_THROWS_AS(build_initial_prompt(ctx, default_templates()), AgentError);
  CHECK_THROWS_AS(make_prompt_context(fixtures::prompt_db(), fixtures::prompt_sets(), 0, default_templates()),
                  ConfigError);
}

TEST_CASE("refinement prompt sections and ranking", "[agent]") {
  const auto ctx = context();
  const std::vector<ExperimentRecord> history{record(1, 1, 9.1), record(1, 2, 7.419), record(1, 3, 8.2)};
  const auto text = build_refinement_prompt(ctx, history, history[1], default_templates(), 9.5);
  for (const char* h : {"# Objective\n", "# Background\n", "# Previous Experiment Results (Ranked from Best to Worst)\n",
                        "# Task\n", "# Additional Considerations\n", "# Output Format\n"}) {
    CHECK(count_of(text, h) == 1);
  }
  CHECK(text.find("Best performance achieved (Mean Absolute Error): 7.4190") != std::string::npos);
  CHECK(text.find("Baseline performance (Mean Absolute Error): 9.5000") != std::string::npos);
  CHECK(count_of(text, "Performance (Mean Absolute Error): ") == 3);
  const auto a = text.find("Performance (Mean Absolute Error): 7.4190\n");
  const auto b = text.find("Performance (Mean Absolute Error): 8.2000\n");
  const auto c = text.find("Performance (Mean Absolute Error): 9.1000\n");
  const auto header = text.find("Ranked from Best to Worst");
  CHECK(header < a);
  CHECK(a < b);
  CHECK(b < c);
  CHECK(text.find("Explanation: note 2\nNeighbors: [1200]") != std::string::npos);
  CHECK(build_refinement_prompt(ctx, history, history[1], default_templates(), 9.5) == text);
  CHECK(build_refinement_prompt(ctx, history, history[1], default_templates()).find("Baseline performance") ==
        std::string::npos);
  CHECK_THROWS_AS(build_refinement_prompt(ctx, {}, history[1], default_templates()), AgentError);
}

TEST_CASE("failed records rank last", "[agent]") {
  auto failed = record(1, 1, 1.0);
  failed.failed = true;
  failed.failure_reason = "no windows";
  const auto ranked = rank_records({failed, record(2, 3, 5.0), record(1, 2, 5.0)});
  CHECK(ranked[0].round == 1);
  CHECK(ranked[0].proposal.index == 2);
  CHECK(ranked[1].round == 2);
  CHECK(ranked[2].failed);
  const auto text = build_refinement_prompt(context(), {failed, record(1, 2, 5.0)}, record(1, 2, 5.0), default_templates());
  CHECK(text.find("Performance (Mean Absolute Error): failed (no windows)") != std::string::npos);
}

TEST_CASE("parse the output format example", "[agent]") {
  const std::set<LocationId> pool{1200, 1202, 1205};
  const auto r = parse_proposals("Proposal 1\nExplanation: mix criteria\nNeighbors: [1200, 1202, 1205]", pool, 5);
  REQUIRE(r.proposals.size() == 1);
  CHECK(r.proposals[0] == Proposal{1, "mix criteria", {1200, 1202, 1205}});
  CHECK(r.rejections.empty());
}

TEST_CASE("parse rejects invalid blocks individually", "[agent]") {
  const std::set<LocationId> pool{1200, 1202, 1205};
  const std::string text =
      "Proposal 1\nExplanation: dup\nNeighbors: [1200, 1200]\n\n"
      "Proposal 2\nExplanation: outsider\nNeighbors: [1200, 9999]\n\n"
      "Proposal 3\nExplanation: target\nNeighbors: [1201]\n\n"
      "Proposal 4\nExplanation: empty\nNeighbors: []\n\n"
      "Proposal 5\nExplanation: no list\n\n"
      "Proposal 6\nExplanation: junk\nNeighbors: [12a0]\n\n"
      "Proposal 7\nExplanation: fine\nNeighbors: [1205]\n";
  const auto r = parse_proposals(text, pool, 5, 1201);
  REQUIRE(r.proposals.size() == 1);
  CHECK(r.proposals[0].index == 7);
  REQUIRE(r.rejections.size() == 6);
  CHECK(r.rejections[0].reason == "duplicate");
  CHECK(r.rejections[1].reason.starts_with("out-of-pool id 9999"));
  CHECK(r.rejections[2].reason == "target location included");
  CHECK(r.rejections[3].reason == "empty neighbor list");
  CHECK(r.rejections[4].reason == "missing Neighbors line");
  CHECK(r.rejections[5].reason == "malformed neighbor list");
  CHECK_THROWS_AS(parse_proposals("Proposal 1\nNeighbors: [1200, 1200]", pool, 5), ProposalParseError);
  CHECK_THROWS_AS(parse_proposals("", pool, 5), ProposalParseError);
}

TEST_CASE("parse tolerates markdown decoration and caps the count", "[agent]") {
  const std::set<LocationId> pool{1200, 1202, 1205};
  const std::string text =
      "Here you go:\n```\n**Proposal 1: road first**\n**Explanation:** road\ncontinues here\n"
      "**Neighbors:** [1200,\n 1202]\n```\n### Proposal 2\n- Explanation: b\n- Neighbors: [`1205`]\n"
      "Proposal 3\nExplanation: c\nNeighbors: [1202]\n";
  const auto r = parse_proposals(text, pool, 2);
  REQUIRE(r.proposals.size() == 2);
  CHECK(r.proposals[0] == Proposal{1, "road continues here", {1200, 1202}});
  CHECK(r.proposals[1] == Proposal{2, "b", {1205}});
}

TEST_CASE("render parse render round-trips", "[agent][property]") {
  const auto pool = fixtures::prompt_sets().pool();
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const auto ps = fixtures::random_proposals(rng, pool);
    const auto text = render_proposals(ps);
    const auto parsed = parse_proposals(text, fixtures::id_set(pool), ps.size(), 1201);
    CHECK(parsed.rejections.empty());
    CHECK(parsed.proposals == ps);
    CHECK(render_proposals(parsed.proposals) == text);
  }
}

TEST_CASE("parse never accepts ids outside the pool", "[agent][property]") {
  const auto pool = fixtures::prompt_sets().pool();
  const auto valid = fixtures::id_set(pool);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    auto ps = fixtures::random_proposals(rng, pool);
    for (auto& p : ps) {
      if (rng() % 2) p.neighbor_ids.push_back(static_cast<LocationId>(rng() % 3000));
    }
    try {
      for (const auto& p : parse_proposals(render_proposals(ps), valid, 10, 1201).proposals) {
        for (auto id : p.neighbor_ids) CHECK(valid.contains(id));
      }
    } catch (const ProposalParseError&) {
    }
  }
}

TEST_CASE("parse survives random bytes", "[agent][property]") {
  const std::set<LocationId> pool{1, 2, 3};
  std::mt19937_64 rng(29);
  const std::string alphabet = "Proposal Explanation Neighbors:[],0123\n\t*#`-";
  for (int trial = 0; trial < 2000; ++trial) {
    std::string text(rng() % 200, '\0');
    for (auto& ch : text) ch = trial % 2 ? static_cast<char>(rng() % 256) : alphabet[rng() % alphabet.size()];
    try {
      const auto r = parse_proposals(text, pool, 5);
      CHECK_FALSE(r.proposals.empty());
    } catch (const ProposalParseError&) {
    }
  }
}
