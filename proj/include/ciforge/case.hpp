#pragma once

#include "ciforge/answer_parsing.hpp"
#include "ciforge/ci_core.hpp"
#include "ciforge/labels.hpp"
#include "ciforge/norm_id.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ciforge {

enum class Provenance { Synthetic, Real };
std::string_view to_string(Provenance p);

struct Case {
  std::string background;
  answers::FeatureValues features;
  std::vector<NormId> cited_norm_ids;
  std::optional<Applicability> applicability;
  std::optional<Compliance> compliance;
  std::optional<NormId> seed_norm_id;
  Provenance provenance = Provenance::Synthetic;
  std::string raw_response;  // not exported

  const std::optional<std::string>& feature(answers::Feature f) const {
    return features[static_cast<std::size_t>(f)];
  }
  void set_feature(answers::Feature f, std::optional<std::string> v) {
    features[static_cast<std::size_t>(f)] = std::move(v);
  }

  // Throws Error{InvalidInput} when a vital feature is absent.
  ci::InformationFlow to_flow() const;

  // Keys: background, the eleven feature keys, cited_norm_ids,
  // applicability, compliance, seed_norm_id, provenance (absent -> null).
  nlohmann::json to_json() const;
  static Case from_json(const nlohmann::json& j);
};

// Lowercase hex SHA-256 of the whitespace-collapsed background.
std::string background_hash(const Case& c);

void save_cases(const std::filesystem::path& path, const std::vector<Case>& cases);
std::vector<Case> load_cases(const std::filesystem::path& path);
std::string cases_to_jsonl(const std::vector<Case>& cases);

struct CaseSet {
  std::vector<Case> cases;
  std::map<std::string, std::vector<std::size_t>> per_norm_index;  // canonical seed id -> case indices

  void add(Case c);
};

}  // namespace ciforge
