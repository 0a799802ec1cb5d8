#include "ciforge/case_forge.hpp"

#include "ciforge/error.hpp"
#include "ciforge/gateway.hpp"
#include "ciforge/parallel.hpp"
#include "ciforge/rouge.hpp"
#include "ciforge/text.hpp"

#include <algorithm>
#include <random>

namespace ciforge::forge {

using answers::Feature;
using nlohmann::json;
using statute::Norm;
using statute::NormType;

std::string type_phrase(const Norm& seed) {
  std::vector<std::string_view> parts;
  if (seed.polarity) {
    parts.push_back(to_string(*seed.polarity));
  } else {
    for (auto t : {NormType::Permit, NormType::Forbid})
      if (seed.has(t)) parts.push_back(statute::to_string(t));
  }
  for (auto t : {NormType::Exception, NormType::Requirement})
    if (seed.has(t)) parts.push_back(statute::to_string(t));
  std::string out;
  for (auto p : parts) {
    if (!out.empty()) out += " and ";
    out += p;
  }
  return out;
}

std::string build_generation_prompt(const Norm& seed, std::string_view law) {
  const std::string l(law);
  const std::string& id = seed.leaf_id;
  const std::string type = type_phrase(seed);
  std::string p;
  p += "Now you are a legal expert on " + l + " that answers questions as simply as possible.\n";
  p += "Read the regulation: " + seed.full_text + ".\n";
  p += "The regulation type is: " + type + ".\n\n";
  p += "Q1. Create a legal case only related to regulation " + id + " and the type " + type + ".\n";
  p += "The case must be a detailed story in plain text, spanning between 200 to 500 words, closely related to the "
       "regulation " + id + ".\n";
  p += "The story must include the following seven characteristics about the flow of private information: [Sender, "
       "Sender Role, Recipient, Recipient Role, Subject, Subject Role, Type].\n\n";
  p += "The \"Sender\" and \"Recipient\" fields indicate the sender and recipient of the message.\n";
  p += "The \"Sender Role\" and \"Recipient Role\" fields indicate the role of the sender and recipient (e.g., doctor, "
       "patient).\n";
  p += "The \"Subject\" and \"Subject Role\" field identifies the subject whose personal health information is "
       "contained in the message and the role of the subject.\n";
  p += "The \"Type\" field defines what kind of information would be passed, such as name or location.\n";
  p += "Integrate these seven characteristics seamlessly into the story without explicitly listing them.\n\n";
  p += "Except for the seven characteristics, you can add the four optional characteristics [Purpose, In Reply To, "
       "Consented By, Belief] if mentioned in the regulation " + id + " or necessary.\n";
  p += "The \"Purpose\" field indicates a reason the message is being sent, such as for medical treatment.\n";
  p += "The \"In Reply To\" field was added to describe a disclosure where the message is sent as a response to some "
       "earlier message.\n";
  p += "The \"Consented By\" field indicates which people have consented to the message disclosure.\n";
  p += "The \"Belief\" field contains a collection of assertions about the current situation, such as whether this "
       "is a medical emergency, or whether the disclosure is (in the opinion of the sender) in the best interest of "
       "the health of the patient.\n";
  p += "Integrate these four characteristics seamlessly into the story without explicitly listing them.\n\n";
  p += "Q2: Based on the background created in Q3, list the eleven characteristics regarding the flow of private "
       "information (Mark as \"None\" if not exist)\n\n";
  p += "Q3: Please retrieve all the specific HIPAA regulation IDs that are the permission or prohibition description "
       "of the case. Please be as specific as possible to the sub-section id (e.g., 164.xxx).\n\n";
  p += "Q4: Please classify the relation between the case and the regulation " + id +
       " as one of the following: \"Permit\", \"Forbid\", \"Not Applicable\".\n\n";
  p += "Q5: Please classify the relation between the case and the " + l +
       " as one of the following: \"Permit\", \"Forbid\", \"Not Applicable\".\n";
  return p;
}

namespace {

std::vector<NormId> unique_ids(std::string_view text) {
  std::vector<NormId> out;
  for (const auto& m : find_norm_ids(text)) {
    if (std::find(out.begin(), out.end(), m.id) == out.end()) out.push_back(m.id);
  }
  return out;
}

}  // namespace

Case parse_case_response(std::string_view raw, const Norm& seed) {
  auto qs = answers::split_questions(raw);
  auto q = [&](int n) -> std::string {
    auto it = qs.find(n);
    return it == qs.end() ? std::string() : it->second;
  };
  Case c;
  c.raw_response = std::string(raw);
  c.background = text::trim(q(1));
  // Some answers label the story; drop a leading "Background:" or "Case:".
  for (std::string_view label : {"background:", "case background:", "case:"}) {
    if (text::istarts_with(c.background, label)) {
      c.background = text::trim(c.background.substr(label.size()));
      break;
    }
  }
  if (text::word_count(c.background) == 0) throw Error(ErrorCode::UnparseableResponse, "no case background in response");
  c.features = answers::parse_features(q(2));
  c.cited_norm_ids = unique_ids(q(3));
  c.compliance = answers::relation_answer(q(4));
  if (auto rel = answers::relation_answer(q(5))) {
    c.applicability = *rel == Compliance::NotApplicable ? Applicability::NotApplicable : Applicability::Applicable;
  }
  c.seed_norm_id = NormId::try_parse(seed.leaf_id);
  c.provenance = Provenance::Synthetic;
  return c;
}

bool feature_filter(const Case& c) {
  for (std::size_t i = 0; i < answers::kVitalFeatureCount; ++i) {
    const auto& v = c.features[i];
    if (!v || text::trim(*v).empty() || text::is_none_sentinel(*v)) return false;
  }
  return true;
}

bool norm_match(const Case& c, const Norm& seed) {
  auto want = NormId::try_parse(seed.leaf_id);
  if (!want) return false;
  return std::find(c.cited_norm_ids.begin(), c.cited_norm_ids.end(), *want) != c.cited_norm_ids.end();
}

bool conclusion_match(const Case& c, const Norm& seed) {
  if (!seed.polarity) return false;
  return c.applicability == Applicability::Applicable && c.compliance == to_compliance(*seed.polarity);
}

bool consistency_filter(const Case& c, const Norm& seed) { return norm_match(c, seed) && conclusion_match(c, seed); }

Selection parse_selection(std::string_view s) {
  if (s == "min-max" || s == "minmax") return Selection::MinMax;
  if (s == "highest-rouge") return Selection::HighestRouge;
  throw Error(ErrorCode::Config, "unknown selection strategy '" + std::string(s) + "'");
}

std::string_view to_string(Selection s) { return s == Selection::MinMax ? "min-max" : "highest-rouge"; }

SelectionResult diversity_select(const std::map<std::string, std::vector<Case>>& candidates_per_norm,
                                 const SelectionOptions& opts) {
  std::vector<std::string> order;
  for (const auto& [id, _] : candidates_per_norm) order.push_back(id);
  std::sort(order.begin(), order.end(), canonical_less);

  SelectionResult out;
  rouge::Vocabulary vocab;
  std::vector<rouge::TokenSeq> chosen;
  std::mt19937_64 rng(opts.seed);

  for (const auto& id : order) {
    const auto& pool = candidates_per_norm.at(id);
    if (pool.empty()) {
      out.unfilled.push_back(id);
      continue;
    }
    std::size_t pick = 0;
    std::vector<rouge::TokenSeq> toks;
    toks.reserve(pool.size());
    for (const auto& c : pool) toks.push_back(vocab.encode(c.background));
    if (!opts.diversity) {
      pick = static_cast<std::size_t>(rng() % pool.size());
    } else if (pool.size() > 1) {
      auto scores = rouge::omp::max_similarity(toks, chosen);
      for (std::size_t i = 1; i < scores.size(); ++i) {
        bool better = opts.strategy == Selection::MinMax ? scores[i] < scores[pick] : scores[i] > scores[pick];
        if (better) pick = i;
      }
    }
    Case c = pool[pick];
    if (!c.seed_norm_id) c.seed_norm_id = NormId::try_parse(id);
    out.selected.cases.push_back(std::move(c));
    out.selected.per_norm_index[id].push_back(out.selected.cases.size() - 1);
    chosen.push_back(std::move(toks[pick]));
  }
  return out;
}

namespace {

struct NormOutcome {
  std::size_t generated = 0;
  std::size_t parsed = 0;
  std::size_t after_feature = 0;
  std::size_t after_norm = 0;
  std::size_t after_conclusion = 0;
  std::vector<Case> pool;
  std::optional<std::string> failure;
  std::vector<std::string> rejections;  // per sample: "kept" or the first failing stage
};

bool fatal(ErrorCode code) { return code == ErrorCode::AuthMissing || code == ErrorCode::Config; }

}  // namespace

gateway::ChatRequest generation_request(const Norm& seed, const SynthesisConfig& cfg) {
  gateway::ChatRequest req;
  req.user_prompt = build_generation_prompt(seed, cfg.law);
  req.temperature = cfg.temperature;
  req.n_samples = cfg.samples_per_norm;
  req.max_tokens = cfg.max_tokens;
  req.tag = "synthesize:" + seed.leaf_id;
  return req;
}

SynthesisResult run_synthesis(const std::vector<Norm>& seeds, gateway::ModelGateway& gw, const SynthesisConfig& cfg) {
  if (cfg.samples_per_norm < 1) throw Error(ErrorCode::Config, "samples_per_norm must be positive");

  auto outcomes = parallel_map(seeds.size(), gw.max_inflight(), [&](std::size_t i) {
    const Norm& seed = seeds[i];
    NormOutcome out;
    gateway::ChatRequest req = generation_request(seed, cfg);
    gateway::ChatResponse resp;
    try {
      resp = gw.complete(req);
    } catch (const Error& e) {
      if (fatal(e.code())) throw;
      out.failure = e.what();
      return out;
    }
    out.generated = resp.texts.size();
    for (const auto& text : resp.texts) {
      Case c;
      try {
        c = parse_case_response(text, seed);
      } catch (const Error&) {
        out.rejections.emplace_back("unparseable");
        continue;
      }
      ++out.parsed;
      if (cfg.feature_filter && !feature_filter(c)) {
        out.rejections.emplace_back("feature");
        continue;
      }
      ++out.after_feature;
      if (cfg.norm_filter && !norm_match(c, seed)) {
        out.rejections.emplace_back("norm");
        continue;
      }
      ++out.after_norm;
      if (cfg.conclusion_filter && !conclusion_match(c, seed)) {
        out.rejections.emplace_back("conclusion");
        continue;
      }
      ++out.after_conclusion;
      out.rejections.emplace_back("kept");
      out.pool.push_back(std::move(c));
    }
    return out;
  });

  SynthesisResult result;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    std::string key = canonicalize_norm_id(seeds[i].leaf_id);
    auto& pool = result.pools[key];
    for (auto& c : outcomes[i].pool) pool.push_back(std::move(c));
  }
  auto sel = diversity_select(result.pools, cfg.selection);
  result.cases = std::move(sel.selected);

  json stages = {{"seeds", seeds.size()}, {"generated", 0}, {"parsed", 0}, {"after_feature", 0},
                 {"after_norm", 0},       {"after_conclusion", 0}, {"selected", result.cases.cases.size()}};
  json norms = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& o = outcomes[i];
    stages["generated"] = stages["generated"].get<std::size_t>() + o.generated;
    stages["parsed"] = stages["parsed"].get<std::size_t>() + o.parsed;
    stages["after_feature"] = stages["after_feature"].get<std::size_t>() + o.after_feature;
    stages["after_norm"] = stages["after_norm"].get<std::size_t>() + o.after_norm;
    stages["after_conclusion"] = stages["after_conclusion"].get<std::size_t>() + o.after_conclusion;
    std::string key = canonicalize_norm_id(seeds[i].leaf_id);
    std::string disposition = o.failure ? "failed" : (result.cases.per_norm_index.count(key) ? "selected" : "unfilled");
    json entry = {{"norm_id", key},
                  {"polarity", seeds[i].polarity ? json(to_string(*seeds[i].polarity)) : json(nullptr)},
                  {"generated", o.generated},
                  {"parsed", o.parsed},
                  {"after_feature", o.after_feature},
                  {"after_norm", o.after_norm},
                  {"after_conclusion", o.after_conclusion},
                  {"samples", o.rejections},
                  {"disposition", disposition}};
    if (o.failure) entry["error"] = *o.failure;
    norms.push_back(std::move(entry));
  }
  result.manifest = {{"stage_counts", stages},
                     {"filters",
                      {{"feature", cfg.feature_filter},
                       {"norm", cfg.norm_filter},
                       {"conclusion", cfg.conclusion_filter},
                       {"diversity", cfg.selection.diversity}}},
                     {"selection", to_string(cfg.selection.strategy)},
                     {"samples_per_norm", cfg.samples_per_norm},
                     {"unfilled", sel.unfilled},
                     {"norms", norms}};
  return result;
}

}  // namespace ciforge::forge
