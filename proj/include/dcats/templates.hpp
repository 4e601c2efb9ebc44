#pragma once

// Named text templates with `${name}` placeholders. Defaults are compiled in;
// a template file can override any of them. File layout:
//
//   === section_name ===
//   text lines...
//
// A section's text runs until the next header; one trailing newline is dropped.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "dcats/error.hpp"
#include "dcats/io.hpp"

namespace dcats {

using TemplateVars = std::map<std::string, std::string, std::less<>>;

/// Replaces every `${key}`; inserted values are not rescanned.
inline std::string substitute(std::string_view text, const TemplateVars& vars) {
  std::string out;
  out.reserve(text.size() * 2);
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    const auto close = text.find('}', open + 2);
    if (close == std::string_view::npos) {
      throw ConfigError("unterminated placeholder in template");
    }
    out.append(text.substr(pos, open - pos));
    const auto key = text.substr(open + 2, close - open - 2);
    const auto it = vars.find(key);
    if (it == vars.end()) throw ConfigError("template placeholder ${" + std::string(key) + "} has no value");
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

class TemplateSet {
 public:
  [[nodiscard]] const std::string& get(std::string_view name) const {
    const auto it = sections_.find(name);
    if (it == sections_.end()) throw ConfigError("missing template section '" + std::string(name) + "'");
    return it->second;
  }

  [[nodiscard]] std::string render(std::string_view name, const TemplateVars& vars) const {
    return substitute(get(name), vars);
  }

  void set(std::string name, std::string text) { sections_[std::move(name)] = std::move(text); }

  [[nodiscard]] const std::map<std::string, std::string, std::less<>>& sections() const noexcept {
    return sections_;
  }

  /// Overrides sections with the ones found in `text`.
  void merge_from_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::string name;
    std::string body;
    auto flush = [&] {
      if (name.empty()) return;
      if (!body.empty() && body.back() == '\n') body.pop_back();
      sections_[name] = body;
    };
    while (std::getline(in, line)) {
      const auto t = io::trim(line);
      if (t.size() > 8 && t.starts_with("=== ") && t.ends_with(" ===")) {
        flush();
        name = std::string(io::trim(t.substr(4, t.size() - 8)));
        body.clear();
        continue;
      }
      if (name.empty()) {
        if (!t.empty()) throw ConfigError("template file: text before the first section header");
        continue;
      }
      body += line;
      body += '\n';
    }
    flush();
  }

  [[nodiscard]] std::string to_text() const {
    std::string out;
    for (const auto& [name, text] : sections_) {
      out += "=== " + name + " ===\n" + text + "\n";
    }
    return out;
  }

 private:
  std::map<std::string, std::string, std::less<>> sections_;
};

namespace detail {

inline constexpr std::string_view kDefaultTemplates = R"TPL(=== background ===
We have a spatio-temporal dataset containing ${n_locations} locations, each with a unique `location_id` (integer from ${min_location_id} to ${max_location_id}). Each location has a univariate time series representing traffic volume changes over time, split into training and validation datasets. Our goal is to build time series forecasting models for specific locations.
=== location ===
location_id=${id}${fields}. This location is in ${city}, a city located in ${county} County, ${state}.${population_sentence}${freeway_sentence}
=== population_sentence ===
 ${city} has a population of approximately ${population} residents.
=== freeway_sentence ===
 The location is on freeway ${freeway}, which has ${lanes} lanes.
=== freeway_sentence_no_lanes ===
 The location is on freeway ${freeway}.
=== state ===
California
=== initial_prompt ===
# Background
${background}

# Task
Construct a time series forecasting model for location `location_id=${target_id}`. Location details: ${target_description}

While we could use only data from `location_id=${target_id}`, including data from other locations may improve the model's performance. We request ${n_proposals} proposals, each suggesting a list of `location_id`s from the neighbors of `location_id=${target_id}`.

## Guidelines:
- Ensure each location is selected only once per proposal.
- Utilize the provided neighbor sets based on different criteria (road network, temporal pattern similarity, and geodetic distance).
- Consider the additional details provided for each location, including:
  - Similarity or Distance
  - Historical Total Volume
  - City
  - County
  - Population
  - Freeway
  - Number of Lanes
- Balance the selection of neighbors across different criteria to create diverse and informative proposals.
- Explain the rationale behind each proposal, highlighting how the selected neighbors might contribute to improving the forecasting model.

## Neighbor Sets:
${neighbor_sets}

${output_format}
=== neighbors_road ===
- Nearest Neighbors Selected Based on Road Network Distance.
Neighbors are selected based on the shortest distance along the road network between two locations, measured in kilometers. Locations connected by a short stretch of road tend to carry the same vehicles within minutes of each other, so their traffic volumes rise and fall together and share congestion events.
=== neighbors_pattern ===
- Nearest Neighbors Selected Based on Temporal Pattern Similarity.
Neighbors are selected based on the Pearson correlation coefficient between the most similar patterns observed at two locations. This correlation ranges from -1 to 1, indicating the strength and direction of the linear relationship between patterns. This neighbor selection method is particularly valuable because similar patterns across locations suggest that people passing by exhibit comparable behaviors. Consequently, sharing data between these locations when training a model can provide crucial insights into common temporal trends and significantly enhance the model's predictive capabilities. By focusing on temporal similarities rather than geographical proximity, this approach can uncover hidden relationships between seemingly unrelated locations, potentially leading to more nuanced and accurate predictions in various applications such as urban planning, traffic management, or consumer behavior analysis.
=== neighbors_geodetic ===
- Nearest Neighbors Selected Based on Geodetic Distance.
Neighbors are selected based on the great-circle distance between two locations, measured in kilometers. Nearby locations share weather, local events and land use, even when they are not on the same road.
=== output_format ===
# Output Format
Please output each proposal using the following format:
```
Proposal {proposal_number}
Explanation: {reasoning_behind_the_proposal}
Neighbors: [{location_id_for_neighbor_1}, {location_id_for_neighbor_2}, {location_id_for_neighbor_3}, ..., {location_id_for_last_neighbor}]
```
=== refinement_prompt ===
# Objective
Develop an improved time series forecasting model for `location_id=${target_id}`, leveraging data from other relevant locations.

# Background
- Target location: `location_id=${target_id}`
- Target location information: ${target_description}
${baseline_line}- Best performance achieved (Mean Absolute Error): ${best_mae}

# Previous Experiment Results (Ranked from Best to Worst)
${experiment_results}

# Task
Based on the experiment results, baseline performance, and best-so-far performance, provide a new set of proposals to further enhance the forecasting model. Each proposal should:
1. Include a list of `location_id`s selected from the neighbors of `location_id=${target_id}`
2. Ensure no duplicate selections within a single proposal
3. Aim to minimize the Mean Absolute Error (MAE)

We request ${n_proposals} proposals. Candidate neighbors of `location_id=${target_id}`:
${candidate_list}

# Additional Considerations
- Analyze the characteristics of the target location and its neighbors
- Identify patterns in successful proposals from previous experiments
- Explore diverse combinations of locations that may capture various aspects of time series behavior

${output_format}
=== baseline_line ===
- Baseline performance (Mean Absolute Error): ${baseline_mae}
=== reprompt_suffix ===


Your previous answer could not be used: ${problem}
Answer again with proposals that follow the output format exactly, one block per proposal, using only the listed neighbor `location_id`s.
)TPL";

}  // namespace detail

inline TemplateSet default_templates() {
  TemplateSet set;
  set.merge_from_text(detail::kDefaultTemplates);
  return set;
}

/// Defaults overridden by the sections present in `path`.
inline TemplateSet load_templates(const std::filesystem::path& path) {
  TemplateSet set = default_templates();
  set.merge_from_text(io::read_text_file(path));
  return set;
}

}  // namespace dcats
