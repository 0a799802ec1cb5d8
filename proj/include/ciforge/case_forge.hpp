#pragma once

#include "ciforge/gateway.hpp"
#include "ciforge/case.hpp"
#include "ciforge/norms.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ciforge::forge {

// "Permit", "Forbid and Exception", ... in classification-prompt order.
std::string type_phrase(const statute::Norm& seed);

std::string build_generation_prompt(const statute::Norm& seed, std::string_view law = statute::kDefaultLaw);

// Errors: UnparseableResponse when no background answer is present.
Case parse_case_response(std::string_view raw, const statute::Norm& seed);

bool feature_filter(const Case& c);
// f_norm: the seed's exact leaf id is among the cited ids.
bool norm_match(const Case& c, const statute::Norm& seed);
// f_conc: Applicable and compliance equal to the seed polarity.
bool conclusion_match(const Case& c, const statute::Norm& seed);
bool consistency_filter(const Case& c, const statute::Norm& seed);

enum class Selection { MinMax, HighestRouge };
Selection parse_selection(std::string_view s);
std::string_view to_string(Selection s);

struct SelectionOptions {
  Selection strategy = Selection::MinMax;
  bool diversity = true;     // false: seeded random pick per norm
  std::uint64_t seed = 0;
};

struct SelectionResult {
  CaseSet selected;
  std::vector<std::string> unfilled;  // norms with an empty pool
};

// Greedy over norms in canonical order. Each candidate is scored by its
// highest ROUGE-L against the backgrounds selected so far; MinMax takes the
// lowest score, HighestRouge the highest, earliest index on ties.
SelectionResult diversity_select(const std::map<std::string, std::vector<Case>>& candidates_per_norm,
                                 const SelectionOptions& opts = {});

struct SynthesisConfig {
  int samples_per_norm = 5;
  double temperature = 1.0;
  int max_tokens = 2048;
  bool feature_filter = true;
  bool norm_filter = true;
  bool conclusion_filter = true;
  SelectionOptions selection;
  std::string law = std::string(statute::kDefaultLaw);
};

struct SynthesisResult {
  CaseSet cases;
  std::map<std::string, std::vector<Case>> pools;  // survivors of the filters, per norm
  nlohmann::json manifest;
};

gateway::ChatRequest generation_request(const statute::Norm& seed, const SynthesisConfig& cfg = {});

SynthesisResult run_synthesis(const std::vector<statute::Norm>& seeds, gateway::ModelGateway& gw,
                              const SynthesisConfig& cfg = {});

}  // namespace ciforge::forge
