#include "ciforge/corpus.hpp"

#include "ciforge/answer_parsing.hpp"
#include "ciforge/case_forge.hpp"
#include "ciforge/error.hpp"
#include "ciforge/gateway.hpp"
#include "ciforge/parallel.hpp"
#include "ciforge/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

namespace ciforge::corpus {

using nlohmann::json;

RealCaseRecord RealCaseRecord::make(std::string source_id, std::string court, std::string decision_text,
                                    std::string query_keyword) {
  RealCaseRecord r;
  r.source_id = std::move(source_id);
  r.court = std::move(court);
  r.decision_text = std::move(decision_text);
  r.word_count = text::word_count(r.decision_text);
  r.query_keyword = std::move(query_keyword);
  return r;
}

json RealCaseRecord::to_json() const {
  return {{"source_id", source_id}, {"court", court}, {"decision_text", decision_text},
          {"word_count", word_count}, {"query_keyword", query_keyword}};
}

namespace {

class SnapshotSource : public CaseSource {
 public:
  explicit SnapshotSource(std::filesystem::path path) : path_(std::move(path)) {}

  std::vector<RealCaseRecord> query(const std::string& keyword, const FetchLimits&) override {
    if (!std::filesystem::exists(path_)) throw Error(ErrorCode::SnapshotMissing, path_.string());
    std::vector<RealCaseRecord> out;
    std::size_t line_no = 0;
    for (const auto& line : text::read_lines(path_)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidInput, path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      std::string kw = j.value("query_keyword", "");
      if (!kw.empty() && !text::iequals(kw, keyword)) continue;
      std::string id = j.at("source_id").is_string() ? j.at("source_id").get<std::string>() : j.at("source_id").dump();
      out.push_back(RealCaseRecord::make(std::move(id), j.value("court", ""), j.at("decision_text").get<std::string>(),
                                         kw.empty() ? keyword : kw));
    }
    return out;
  }

 private:
  std::filesystem::path path_;
};

class HttpSource : public CaseSource {
 public:
  HttpSource(std::string base_url, std::string token, std::chrono::seconds timeout) : token_(std::move(token)) {
    auto [origin, prefix] = gateway::split_base_url(base_url);
    origin_ = origin;
    prefix_ = prefix;
    client_ = std::make_unique<httplib::Client>(origin_);
    client_->set_connection_timeout(timeout);
    client_->set_read_timeout(timeout);
    client_->set_follow_location(true);
  }

  std::vector<RealCaseRecord> query(const std::string& keyword, const FetchLimits& limits) override {
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Token " + token_);
    std::vector<RealCaseRecord> out;
    httplib::Params params{{"search", keyword}, {"page_size", std::to_string(limits.page_size)}};
    std::string path = prefix_ + "/cases/";
    bool first = true;
    std::set<std::string> visited;
    while (out.size() < limits.max_results) {
      if (!visited.insert(path).second) break;
      auto res = first ? client_->Get(path, params, headers) : client_->Get(path, headers);
      first = false;
      if (!res) throw Error(ErrorCode::NetworkError, "case search failed: " + httplib::to_string(res.error()));
      if (res->status != 200) throw Error(ErrorCode::NetworkError, "case search returned HTTP " + std::to_string(res->status));
      json page;
      try {
        page = json::parse(res->body);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::NetworkError, std::string("malformed search page: ") + e.what());
      }
      for (const auto& r : page.value("results", json::array())) {
        std::string id = r.at("id").is_string() ? r.at("id").get<std::string>() : r.at("id").dump();
        std::string court;
        if (r.contains("court") && r["court"].is_object()) court = r["court"].value("name", "");
        std::string body;
        if (auto p = json::json_pointer("/casebody/data/opinions"); r.contains(p)) {
          for (const auto& op : r.at(p)) {
            if (!body.empty()) body += "\n\n";
            body += op.value("text", "");
          }
        }
        out.push_back(RealCaseRecord::make(std::move(id), std::move(court), std::move(body), keyword));
      }
      if (!page.contains("next") || !page["next"].is_string()) break;
      std::string next = page["next"].get<std::string>();
      if (next.starts_with(origin_)) next = next.substr(origin_.size());
      if (next.empty() || next.front() != '/') break;
      path = next;
    }
    return out;
  }

 private:
  std::string token_;
  std::string origin_;
  std::string prefix_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

std::unique_ptr<CaseSource> snapshot_source(std::filesystem::path path) {
  return std::make_unique<SnapshotSource>(std::move(path));
}

std::unique_ptr<CaseSource> http_source(std::string base_url, std::string api_token, std::chrono::seconds timeout) {
  return std::make_unique<HttpSource>(std::move(base_url), std::move(api_token), timeout);
}

std::vector<RealCaseRecord> fetch_cases(const std::string& keyword, CaseSource& source, const FetchLimits& limits) {
  std::vector<RealCaseRecord> out;
  std::unordered_set<std::string> seen;
  for (auto& r : source.query(keyword, limits)) {
    if (out.size() >= limits.max_results) break;
    if (!seen.insert(r.source_id).second) continue;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RealCaseRecord> length_filter(const std::vector<RealCaseRecord>& records, std::size_t min_words,
                                          std::size_t max_words) {
  std::vector<RealCaseRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [&](const RealCaseRecord& r) {
    return r.word_count >= min_words && r.word_count <= max_words;
  });
  return out;
}

void save_records(const std::filesystem::path& path, const std::vector<RealCaseRecord>& records) {
  std::string out;
  for (const auto& r : records) out += r.to_json().dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  text::write_file(path, out);
}

std::string build_extraction_prompt(const RealCaseRecord& record, std::string_view law) {
  const std::string l(law);
  std::string p;
  p += "Now you are a legal expert on " + l + " that answers questions as simply as possible.\n";
  p += "Read the case: " + record.decision_text + ".\n\n";
  p += "Q1. If the case involves the flow of private information.\n";
  p += "Please annotate the eleven message characteristics [Sender, Sender Role, Recipient, Recipient Role, Subject, "
       "Subject Role, Type, Purpose, In Reply To, Consented By, Belief] about the flow of private information in the "
       "case as a list. If the characteristic does not exist, just fill in None.\n\n";
  p += "The \"Sender\" and \"Recipient\" fields indicate the sender and recipient of the message.\n";
  p += "The \"Sender Role\" and \"Recipient Role\" fields indicate the role of the sender and recipient (e.g., doctor, "
       "patient).\n";
  p += "The \"Subject\" and \"Subject Role\" field identifies the subject whose personal health information is "
       "contained in the message and the role of the subject.\n";
  p += "The \"Type\" field defines what kind of information would be passed, such as name or location.\n";
  p += "The \"Purpose\" field indicates a reason the message is being sent, such as for medical treatment.\n";
  p += "The \"In Reply To\" field was added to describe a disclosure where the message is sent as a response to some "
       "earlier message.\n";
  p += "The \"Consented By\" field indicates which people have consented to the message disclosure.\n";
  p += "The \"Belief\" field contains a collection of assertions about the current situation, such as whether this "
       "is a medical emergency, or whether the disclosure is (in the opinion of the sender) in the best interest of "
       "the health of the patient.\n\n";
  p += "Q2: Please retrieve all the specific HIPAA regulation IDs that are the permission or prohibition description "
       "of the case. Please be as specific as possible to the sub-section id (e.g., 164.xxx). If the regulations do "
       "not exist, just fill in None.\n\n";
  p += "Q3: Please classify the type of regulation(s). The regulation type is one of the following: \"Definition\", "
       "\"Permit\", \"Forbid\", \"Exception\", \"Requirement\", \"Permit and Exception\", \"Forbid and Exception\", "
       "\"Permit and Requirement\", \"Forbid and Requirement\", \"Permit and Exception and Requirement\", \"Forbid "
       "and Exception and Requirement\", \"Other\".\n\n";
  p += "Q4: Please classify the relation between the case and each regulation in Q3 as one of the following: "
       "\"Permit\", \"Forbid\", and \"Not Applicable\".\n\n";
  p += "Q5: A case may be associated with multiple regulations. If it is permitted by some regulations and not "
       "forbidden by any of the regulations, the case complies with HIPAA, answer \"Permit\". If it is not permitted "
       "by any of the regulations or forbidden by some regulations, the case violates HIPAA, answer \"Forbid\". "
       "Otherwise, if the case is not applicable to HIPAA, answer \"Not Applicable\". Please classify the relation "
       "between the flow of private information in the case and HIPAA as one of the following: \"Permit\", "
       "\"Forbid\", and \"Not Applicable\".\n\n";
  p += "Q6: With the eleven characteristics in Q2, restore the BACKGROUND story of the case, especially about the "
       "flow of private information.\n\n";
  p += "The case should not include any information about the regulation(s) in Q2 and the court decision.\n";
  p += "Make sure that the eleven characteristics are obviously included in the BACKGROUND story. The background "
       "must be a detailed story in plain text, spanning between 200 to 500 words.\n";
  return p;
}

std::vector<std::string> ExtractionFlags::names() const {
  std::vector<std::string> out;
  if (missing_flow) out.emplace_back("missing_flow");
  if (court_analysis) out.emplace_back("court_analysis");
  if (conclusion_uncertain) out.emplace_back("conclusion_uncertain");
  return out;
}

json RealCaseExtraction::queue_entry() const {
  json verdicts = json::array();
  for (auto v : per_norm_verdicts) verdicts.push_back(ci::to_string(v));
  return {{"source_id", source_id}, {"court", court},  {"flags", flags.names()},
          {"per_norm_verdicts", verdicts}, {"case", c.to_json()}};
}

namespace {

bool mentions_court_analysis(const std::string& background) {
  static const std::vector<std::string_view> phrases = {
      "the court held", "court holds", "we hold", "we affirm", "we reverse", "we conclude", "the court found",
      "the court ruled", "the court concluded", "trial court erred", "motion is granted", "motion is denied",
      "affirmed the", "reversed the", "the court grants", "the court denies"};
  return answers::first_phrase(background, phrases).has_value();
}

std::vector<ci::FlowVerdict> per_norm_verdicts(const std::string& answer) {
  std::vector<std::string> items;
  for (const auto& line : text::split_lines(answer)) {
    if (!text::trim(line).empty()) items.push_back(line);
  }
  if (items.size() == 1) {
    std::string only = items.front();
    items.clear();
    std::size_t start = 0;
    for (std::size_t i = 0; i <= only.size(); ++i) {
      if (i == only.size() || only[i] == ';' || only[i] == ',') {
        items.push_back(only.substr(start, i - start));
        start = i + 1;
      }
    }
  }
  std::vector<ci::FlowVerdict> out;
  for (const auto& item : items) {
    auto rel = answers::relation_answer(item);
    if (!rel) continue;
    out.push_back(*rel == Compliance::Permit   ? ci::FlowVerdict::Permit
                  : *rel == Compliance::Forbid ? ci::FlowVerdict::Forbid
                                               : ci::FlowVerdict::NotApplicable);
  }
  return out;
}

}  // namespace

RealCaseExtraction parse_extraction(std::string_view response, const RealCaseRecord& record) {
  auto qs = answers::split_questions(response);
  auto q = [&](int n) -> std::string {
    auto it = qs.find(n);
    return it == qs.end() ? std::string() : it->second;
  };
  RealCaseExtraction ex;
  ex.source_id = record.source_id;
  ex.court = record.court;
  Case& c = ex.c;
  c.provenance = Provenance::Real;
  c.raw_response = std::string(response);
  c.background = text::trim(q(6));
  for (std::string_view label : {"background:", "background story:"}) {
    if (text::istarts_with(c.background, label)) {
      c.background = text::trim(c.background.substr(label.size()));
      break;
    }
  }
  if (text::word_count(c.background) == 0) throw Error(ErrorCode::UnparseableResponse, "no background (Q6) in response");
  c.features = answers::parse_features(q(1));
  for (const auto& m : find_norm_ids(q(2))) {
    if (std::find(c.cited_norm_ids.begin(), c.cited_norm_ids.end(), m.id) == c.cited_norm_ids.end())
      c.cited_norm_ids.push_back(m.id);
  }
  if (!c.cited_norm_ids.empty()) c.seed_norm_id = c.cited_norm_ids.front();
  ex.per_norm_verdicts = per_norm_verdicts(q(4));
  c.compliance = answers::relation_answer(q(5));
  if (c.compliance) {
    c.applicability =
        *c.compliance == Compliance::NotApplicable ? Applicability::NotApplicable : Applicability::Applicable;
  }

  ex.flags.missing_flow = !forge::feature_filter(c);
  ex.flags.court_analysis = mentions_court_analysis(c.background);
  if (!c.compliance) {
    ex.flags.conclusion_uncertain = true;
  } else if (!ex.per_norm_verdicts.empty()) {
    auto agg = ci::aggregate_verdicts(ex.per_norm_verdicts);
    auto expect = *c.compliance == Compliance::Permit   ? ci::FlowVerdict::Permit
                  : *c.compliance == Compliance::Forbid ? ci::FlowVerdict::Forbid
                                                        : ci::FlowVerdict::NotApplicable;
    ex.flags.conclusion_uncertain = agg != expect;
  }
  return ex;
}

gateway::ChatRequest extraction_request(const RealCaseRecord& record, std::string_view law) {
  gateway::ChatRequest req;
  req.user_prompt = build_extraction_prompt(record, law);
  req.temperature = gateway::kParsingTemperature;
  req.max_tokens = 2048;
  req.tag = "ingest-cap:" + record.source_id;
  return req;
}

std::vector<RealCaseExtraction> extract_real_cases(const std::vector<RealCaseRecord>& records,
                                                   gateway::ModelGateway& gw, std::string_view law) {
  return parallel_map(records.size(), gw.max_inflight(), [&](std::size_t i) {
    gateway::ChatRequest req = extraction_request(records[i], law);
    auto resp = gw.complete(req);
    if (resp.texts.empty()) throw Error(ErrorCode::UnparseableResponse, "empty response for " + records[i].source_id);
    return parse_extraction(resp.texts.front(), records[i]);
  });
}

Case negative_case(const RealCaseRecord& record) {
  Case c;
  c.background = text::trim(record.decision_text);
  c.applicability = Applicability::NotApplicable;
  c.compliance = Compliance::NotApplicable;
  c.provenance = Provenance::Real;
  return c;
}

std::vector<RealCaseExtraction> apply_overrides(std::vector<RealCaseExtraction> extractions,
                                                const std::filesystem::path& overrides) {
  std::map<std::string, json> by_id;
  std::size_t line_no = 0;
  for (const auto& line : text::read_lines(overrides)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      by_id[j.at("source_id").get<std::string>()] = j;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, overrides.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<RealCaseExtraction> out;
  for (auto& ex : extractions) {
    auto it = by_id.find(ex.source_id);
    if (it == by_id.end()) {
      out.push_back(std::move(ex));
      continue;
    }
    std::string action = it->second.value("action", "keep");
    if (action == "drop") continue;
    if (action == "replace") {
      Case replacement = Case::from_json(it->second.at("case"));
      replacement.provenance = Provenance::Real;
      ex.c = std::move(replacement);
      ex.flags = {};
    } else if (action == "keep") {
      ex.flags = {};
    } else {
      throw Error(ErrorCode::InvalidInput, "unknown override action '" + action + "'");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_annotation_queue(const std::filesystem::path& path, const std::vector<RealCaseExtraction>& extractions) {
  std::string out;
  for (const auto& ex : extractions) {
    if (!ex.flags.any()) continue;
    out += ex.queue_entry().dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
  }
  text::write_file(path, out);
}

json DatasetBundle::manifest_json() const {
  json rows = json::array();
  for (const auto& r : split_manifest)
    rows.push_back({{"split", r.split}, {"label", r.label}, {"provenance", r.provenance}, {"count", r.count}});
  return {{"splits", rows}, {"dropped_for_overlap", dropped_for_overlap}};
}

void DatasetBundle::save(const std::filesystem::path& dir) const {
  save_cases(dir / "applicability_train.jsonl", applicability_train);
  save_cases(dir / "applicability_test.jsonl", applicability_test);
  save_cases(dir / "compliance_train.jsonl", compliance_train);
  save_cases(dir / "compliance_test.jsonl", compliance_test);
  text::write_file(dir / "split_manifest.json", manifest_json().dump(2) + "\n");
}

namespace {

std::string applicability_label(const Case& c) { return c.applicability ? std::string(to_string(*c.applicability)) : ""; }
std::string compliance_label(const Case& c) { return c.compliance ? std::string(to_string(*c.compliance)) : ""; }

void count_rows(std::vector<SplitCount>& rows, const std::string& split, const std::vector<Case>& cases,
                std::string (*label)(const Case&)) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto& c : cases) ++counts[{label(c), std::string(to_string(c.provenance))}];
  for (const auto& [key, n] : counts) rows.push_back({split, key.first, key.second, n});
}

// Spreads `target` forbid cases evenly over the norms of `selected`, cycling
// through each norm's pool (the selected case first).
std::vector<Case> oversample(const std::vector<Case>& selected, std::size_t target,
                             const std::map<std::string, std::vector<Case>>& pools, std::uint64_t seed) {
  std::map<std::string, std::vector<Case>, decltype(&canonical_less)> per_norm(&canonical_less);
  std::vector<Case> unanchored;
  for (const auto& c : selected) {
    if (c.seed_norm_id) {
      per_norm[c.seed_norm_id->canonical()].push_back(c);
    } else {
      unanchored.push_back(c);
    }
  }
  if (per_norm.empty()) return selected;
  for (auto& [id, list] : per_norm) {
    auto it = pools.find(id);
    if (it == pools.end()) continue;
    std::set<std::string> have;
    for (const auto& c : list) have.insert(background_hash(c));
    for (const auto& c : it->second) {
      if (c.compliance == Compliance::Forbid && have.insert(background_hash(c)).second) list.push_back(c);
    }
  }
  std::vector<std::string> ids;
  for (const auto& [id, _] : per_norm) ids.push_back(id);
  const std::size_t k = ids.size();
  std::vector<std::size_t> quota(k, target / k);
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = k; i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  for (std::size_t i = 0; i < target % k; ++i) ++quota[order[i]];

  std::vector<Case> out;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& list = per_norm.at(ids[i]);
    for (std::size_t j = 0; j < quota[i]; ++j) out.push_back(list[j % list.size()]);
  }
  return out;
}

}  // namespace

DatasetBundle assemble(const std::vector<Case>& synthetic, const std::vector<Case>& real_applicable,
                       const std::vector<Case>& real_irrelevant, const AssembleConfig& cfg,
                       const std::map<std::string, std::vector<Case>>& forbid_pools) {
  DatasetBundle b;

  std::vector<Case> appl_test_pos;
  std::vector<Case> comp_test;
  for (const auto& c : real_applicable) {
    if (c.compliance != Compliance::Permit && c.compliance != Compliance::Forbid) continue;
    Case t = c;
    t.applicability = Applicability::Applicable;
    appl_test_pos.push_back(t);
    comp_test.push_back(std::move(t));
  }

  std::set<std::string> test_hashes;
  for (const auto& c : appl_test_pos) test_hashes.insert(background_hash(c));

  std::vector<Case> appl_train_pos;
  std::vector<Case> comp_train_permit;
  std::vector<Case> comp_train_forbid;
  for (const auto& c : synthetic) {
    if (test_hashes.count(background_hash(c))) {
      ++b.dropped_for_overlap;
      continue;
    }
    if (c.applicability == Applicability::Applicable) appl_train_pos.push_back(c);
    if (c.compliance == Compliance::Permit) comp_train_permit.push_back(c);
    if (c.compliance == Compliance::Forbid) comp_train_forbid.push_back(c);
  }

  const std::size_t want_train = cfg.train_negatives.value_or(appl_train_pos.size());
  const std::size_t want_test = cfg.test_negatives.value_or(appl_test_pos.size());

  std::vector<std::size_t> order(real_irrelevant.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (cfg.random_negatives) {
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng() % i)]);
  }
  std::set<std::string> used;
  std::set<std::string> train_hashes;
  for (const auto& c : appl_train_pos) train_hashes.insert(background_hash(c));
  std::vector<Case> neg_train;
  std::vector<Case> neg_test;
  for (std::size_t idx : order) {
    if (neg_train.size() >= want_train && neg_test.size() >= want_test) break;
    Case c = real_irrelevant[idx];
    c.applicability = Applicability::NotApplicable;
    c.compliance = Compliance::NotApplicable;
    std::string h = background_hash(c);
    if (used.count(h) || test_hashes.count(h) || train_hashes.count(h)) continue;
    used.insert(h);
    if (neg_train.size() < want_train) {
      neg_train.push_back(std::move(c));
    } else {
      neg_test.push_back(std::move(c));
    }
  }
  if (neg_train.size() < want_train || neg_test.size() < want_test) {
    throw Error(ErrorCode::InsufficientNegatives,
                "need " + std::to_string(want_train + want_test) + " distinct irrelevant cases, have " +
                    std::to_string(neg_train.size() + neg_test.size()));
  }

  b.applicability_train = std::move(appl_train_pos);
  b.applicability_train.insert(b.applicability_train.end(), neg_train.begin(), neg_train.end());
  b.applicability_test = std::move(appl_test_pos);
  b.applicability_test.insert(b.applicability_test.end(), neg_test.begin(), neg_test.end());

  if (cfg.oversample_forbid && !comp_train_forbid.empty() && comp_train_forbid.size() < comp_train_permit.size()) {
    comp_train_forbid = oversample(comp_train_forbid, comp_train_permit.size(), forbid_pools, cfg.seed);
  }
  b.compliance_train = std::move(comp_train_permit);
  b.compliance_train.insert(b.compliance_train.end(), comp_train_forbid.begin(), comp_train_forbid.end());
  b.compliance_test = std::move(comp_test);

  count_rows(b.split_manifest, "applicability_train", b.applicability_train, &applicability_label);
  count_rows(b.split_manifest, "applicability_test", b.applicability_test, &applicability_label);
  count_rows(b.split_manifest, "compliance_train", b.compliance_train, &compliance_label);
  count_rows(b.split_manifest, "compliance_test", b.compliance_test, &compliance_label);
  return b;
}

}  // namespace ciforge::corpus
