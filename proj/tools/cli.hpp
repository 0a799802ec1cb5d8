#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ciforge::cli {

struct PipelineConfig {
  // statute
  std::string statute_snapshot;
  std::string statute_xml;
  std::string ecfr_base = "https://www.ecfr.gov";
  std::string ecfr_date = "2024-01-01";
  int ecfr_title = 45;
  int ecfr_part = 164;
  std::string ecfr_subpart = "E";
  int classify_retry_budget = 2;

  // gateway
  std::string gateway_mode = "replay";
  std::string cassette;
  std::string api_base;
  std::string model = "gpt-4";
  int max_inflight = 4;
  int retry_budget = 3;

  // synthesis
  int samples_per_norm = 5;
  bool feature_filter = true;
  bool norm_filter = true;
  bool conclusion_filter = true;
  bool diversity = true;
  std::string selection = "min-max";

  // corpus
  std::string cap_snapshot;
  std::string cap_api;
  std::string keyword = "HIPAA Privacy Rule";
  std::string negative_keyword = "privacy violation";
  std::size_t max_results = 2000;

  // dataset
  std::optional<std::size_t> train_negatives;
  std::optional<std::size_t> test_negatives;
  bool oversample = false;
  bool random_negatives = false;

  std::string role_lexicon;
  std::string predicates;

  std::uint64_t seed = 0;
  std::string output_dir = "out";

  // Unknown keys and ill-typed values raise Error{Config}.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::string& path);
  nlohmann::json to_json() const;
  std::string sha256() const;
};

// Exit codes: 0 success, 1 runtime error, 2 configuration or usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ciforge::cli
