#pragma once

#include "ciforge/gateway.hpp"
#include "ciforge/case.hpp"
#include "ciforge/ci_core.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ciforge::corpus {

struct RealCaseRecord {
  std::string source_id;
  std::string court;
  std::string decision_text;
  std::size_t word_count = 0;
  std::string query_keyword;

  static RealCaseRecord make(std::string source_id, std::string court, std::string decision_text,
                             std::string query_keyword);
  nlohmann::json to_json() const;
};

struct FetchLimits {
  std::size_t max_results = 2000;
  std::size_t page_size = 100;
};

class CaseSource {
 public:
  virtual ~CaseSource() = default;
  // Relevance-ordered records for `keyword`, possibly with duplicates.
  virtual std::vector<RealCaseRecord> query(const std::string& keyword, const FetchLimits& limits) = 0;
};

// JSONL snapshot of {source_id, court, decision_text, query_keyword}. Records
// whose keyword differs (case-insensitively) are skipped; records without one
// take the queried keyword. Missing file: Error{SnapshotMissing}.
std::unique_ptr<CaseSource> snapshot_source(std::filesystem::path path);

// Paginated JSON search API: GET <base>/cases/?search=<kw>&page_size=<n>
// answering {results: [{id, court: {name}, casebody: {data: {opinions: [{text}]}}}], next}.
// Transport failures and non-200 replies: Error{NetworkError}.
std::unique_ptr<CaseSource> http_source(std::string base_url, std::string api_token = {},
                                        std::chrono::seconds timeout = std::chrono::seconds(60));

// Deduplicates by source_id (first wins) and truncates at max_results.
std::vector<RealCaseRecord> fetch_cases(const std::string& keyword, CaseSource& source, const FetchLimits& limits);

inline constexpr std::size_t kMinWords = 100;
inline constexpr std::size_t kMaxWords = 30000;

std::vector<RealCaseRecord> length_filter(const std::vector<RealCaseRecord>& records, std::size_t min_words = kMinWords,
                                          std::size_t max_words = kMaxWords);

void save_records(const std::filesystem::path& path, const std::vector<RealCaseRecord>& records);

std::string build_extraction_prompt(const RealCaseRecord& record, std::string_view law = "HIPAA Privacy Rule");

struct ExtractionFlags {
  bool missing_flow = false;          // a vital contextual feature is absent
  bool court_analysis = false;        // background retells the court's reasoning
  bool conclusion_uncertain = false;  // no Q5 answer, or Q4 verdicts disagree with it

  bool any() const { return missing_flow || court_analysis || conclusion_uncertain; }
  std::vector<std::string> names() const;
};

struct RealCaseExtraction {
  std::string source_id;
  std::string court;
  Case c;
  std::vector<ci::FlowVerdict> per_norm_verdicts;  // Q4, in answer order
  ExtractionFlags flags;

  nlohmann::json queue_entry() const;
};

// Parses one answer to the extraction prompt. Errors: UnparseableResponse.
RealCaseExtraction parse_extraction(std::string_view response, const RealCaseRecord& record);

gateway::ChatRequest extraction_request(const RealCaseRecord& record, std::string_view law = "HIPAA Privacy Rule");

std::vector<RealCaseExtraction> extract_real_cases(const std::vector<RealCaseRecord>& records,
                                                   gateway::ModelGateway& gw, std::string_view law = "HIPAA Privacy Rule");

// Real irrelevant records as NotApplicable cases, background = decision text.
Case negative_case(const RealCaseRecord& record);

// Human review results: JSONL of {source_id, action: keep|drop|replace, case?}.
// Replacements carry a full case object. Unknown source ids are ignored.
std::vector<RealCaseExtraction> apply_overrides(std::vector<RealCaseExtraction> extractions,
                                                const std::filesystem::path& overrides);

void save_annotation_queue(const std::filesystem::path& path, const std::vector<RealCaseExtraction>& extractions);

struct AssembleConfig {
  std::optional<std::size_t> train_negatives;  // default: number of applicability train positives
  std::optional<std::size_t> test_negatives;   // default: number of real applicable cases
  bool random_negatives = false;               // default: relevance order
  bool oversample_forbid = false;
  std::uint64_t seed = 0;
};

struct SplitCount {
  std::string split;
  std::string label;
  std::string provenance;
  std::size_t count = 0;
};

struct DatasetBundle {
  std::vector<Case> applicability_train;
  std::vector<Case> applicability_test;
  std::vector<Case> compliance_train;
  std::vector<Case> compliance_test;
  std::vector<SplitCount> split_manifest;
  std::size_t dropped_for_overlap = 0;

  nlohmann::json manifest_json() const;
  void save(const std::filesystem::path& dir) const;
};

// `forbid_pools` supplies extra forbid candidates per canonical seed id for
// oversampling (e.g. diversity-selection pools). Errors: InsufficientNegatives.
DatasetBundle assemble(const std::vector<Case>& synthetic, const std::vector<Case>& real_applicable,
                       const std::vector<Case>& real_irrelevant, const AssembleConfig& cfg = {},
                       const std::map<std::string, std::vector<Case>>& forbid_pools = {});

}  // namespace ciforge::corpus
