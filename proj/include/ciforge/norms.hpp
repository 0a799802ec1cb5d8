#pragma once

#include "ciforge/gateway.hpp"
#include "ciforge/labels.hpp"
#include "ciforge/statute_graph.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ciforge::statute {

enum class NormType { Definition, Permit, Forbid, Exception, Requirement, Other };

std::string_view to_string(NormType t);
// Exact strings only ("Definition", "Permit", ...).
std::optional<NormType> parse_norm_type(std::string_view s);

// One root-to-leaf path of the statute tree. `full_text` holds one
// "id: content" line per path node, root first.
struct Norm {
  std::string leaf_id;
  std::vector<std::string> path_ids;
  std::string full_text;
  std::set<NormType> types;
  std::map<NormType, std::string> type_payloads;
  std::optional<Polarity> polarity;  // set by seed_norms
  bool flagged = false;              // classification fell back to Other

  bool has(NormType t) const { return types.count(t) != 0; }

  nlohmann::json to_json() const;
  static Norm from_json(const nlohmann::json& j);
};

std::vector<Norm> extract_norms(const StatuteGraph& graph);

// Root-first "id: content" rendering of the path ending at node `i`.
std::string path_text(const StatuteGraph& graph, std::size_t i);

inline constexpr std::string_view kDefaultLaw = "HIPAA Privacy Rule";

std::string build_classification_prompt(const Norm& norm, std::string_view law = kDefaultLaw);

struct Classification {
  std::set<NormType> types;
  std::map<NormType, std::string> payloads;
};

// Reads the Q1 type answer and the Q2-Q8 annotations. nullopt when no
// regulation type can be recognised.
std::optional<Classification> parse_classification(std::string_view response);

struct ClassifyOptions {
  int retry_budget = 2;  // resamples after the first unparseable answer
  int max_tokens = 1024;
  std::string law = std::string(kDefaultLaw);
};

struct ClassifyStats {
  std::size_t resampled = 0;
  std::size_t flagged = 0;
};

// One temperature-0 call per norm; unparseable answers trigger a single
// resample call at generation temperature asking for `retry_budget` samples,
// taken in order. Exhaustion marks the norm Other and flags it. Output order
// matches input order.
// The exact requests classify_norms issues; fixtures are built from these.
gateway::ChatRequest classification_request(const Norm& norm, const ClassifyOptions& opts = {});
gateway::ChatRequest resample_request(const Norm& norm, const ClassifyOptions& opts = {});

std::vector<Norm> classify_norms(std::vector<Norm> norms, gateway::ModelGateway& gw, const ClassifyOptions& opts = {},
                                 ClassifyStats* stats = nullptr);

struct SeedSelection {
  std::vector<Norm> seeds;
  std::vector<std::string> ambiguous;  // typed both Permit and Forbid; excluded
  std::map<NormType, std::size_t> type_counts;
  std::size_t total = 0;
};

SeedSelection seed_norms(const std::vector<Norm>& norms);

void save_norms(const std::filesystem::path& path, const std::vector<Norm>& norms);
std::vector<Norm> load_norms(const std::filesystem::path& path);

// Canonical id -> root-first path text, for every node of a graph or for a
// list of norms. Used to attach norm content to compiled examples.
class NormIndex {
 public:
  static NormIndex from_graph(const StatuteGraph& graph);
  static NormIndex from_norms(const std::vector<Norm>& norms);

  std::optional<std::string> lookup(const std::string& id) const;
  std::size_t size() const { return texts_.size(); }

 private:
  std::map<std::string, std::string> texts_;
};

}  // namespace ciforge::statute
