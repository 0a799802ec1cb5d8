#include "ciforge/norms.hpp"

#include "ciforge/answer_parsing.hpp"
#include "ciforge/error.hpp"
#include "ciforge/gateway.hpp"
#include "ciforge/parallel.hpp"
#include "ciforge/text.hpp"

#include <algorithm>

namespace ciforge::statute {

using nlohmann::json;

std::string_view to_string(NormType t) {
  switch (t) {
    case NormType::Definition: return "Definition";
    case NormType::Permit: return "Permit";
    case NormType::Forbid: return "Forbid";
    case NormType::Exception: return "Exception";
    case NormType::Requirement: return "Requirement";
    case NormType::Other: return "Other";
  }
  return "Other";
}

std::optional<NormType> parse_norm_type(std::string_view s) {
  for (auto t : {NormType::Definition, NormType::Permit, NormType::Forbid, NormType::Exception,
                 NormType::Requirement, NormType::Other}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

json Norm::to_json() const {
  json types_json = json::array();
  for (auto t : types) types_json.push_back(to_string(t));
  json payloads = json::object();
  for (const auto& [t, p] : type_payloads) payloads[std::string(to_string(t))] = p;
  json j = {{"leaf_id", leaf_id},
            {"path_ids", path_ids},
            {"full_text", full_text},
            {"types", std::move(types_json)},
            {"type_payloads", std::move(payloads)}};
  if (polarity) j["polarity"] = ciforge::to_string(*polarity);
  if (flagged) j["flagged"] = true;
  return j;
}

Norm Norm::from_json(const json& j) {
  Norm n;
  n.leaf_id = j.at("leaf_id").get<std::string>();
  n.path_ids = j.at("path_ids").get<std::vector<std::string>>();
  n.full_text = j.at("full_text").get<std::string>();
  for (const auto& t : j.value("types", json::array())) {
    auto parsed = parse_norm_type(t.get<std::string>());
    if (!parsed) throw Error(ErrorCode::InvalidInput, "unknown norm type '" + t.get<std::string>() + "'");
    n.types.insert(*parsed);
  }
  const json payloads = j.value("type_payloads", json::object());
  for (const auto& [k, v] : payloads.items()) {
    if (auto t = parse_norm_type(k)) n.type_payloads[*t] = v.get<std::string>();
  }
  if (j.contains("polarity") && !j["polarity"].is_null()) {
    n.polarity = parse_polarity(j["polarity"].get<std::string>());
    if (!n.polarity) throw Error(ErrorCode::InvalidInput, "norm polarity must be Permit or Forbid");
  }
  n.flagged = j.value("flagged", false);
  return n;
}

std::string path_text(const StatuteGraph& graph, std::size_t i) {
  std::string out;
  for (std::size_t idx : graph.path_from_root(i)) {
    if (!out.empty()) out += '\n';
    out += graph.node(idx).rendered_line();
  }
  return out;
}

std::vector<Norm> extract_norms(const StatuteGraph& graph) {
  std::vector<Norm> norms;
  for (std::size_t i = 0; i < graph.nodes().size(); ++i) {
    if (!graph.node(i).is_leaf()) continue;
    Norm n;
    n.leaf_id = graph.node(i).key;
    for (std::size_t idx : graph.path_from_root(i)) n.path_ids.push_back(graph.node(idx).key);
    n.full_text = path_text(graph, i);
    norms.push_back(std::move(n));
  }
  return norms;
}

std::string build_classification_prompt(const Norm& norm, std::string_view law) {
  const std::string l(law);
  std::string p;
  p += "Now you are a legal expert on " + l + " that answers questions as simply as possible.\n";
  p += "Please read the following regulation " + norm.full_text + ", and finish the following task.\n\n";
  p += "Q1: (Classification) Classify the regulation type of the following regulation. The regulation type is one "
       "of the following: \"Definition\", \"Permit\", \"Forbid\", \"Exception\", \"Requirement\", \"Permit and "
       "Exception\", \"Forbid and Exception\", \"Permit and Requirement\", \"Forbid and Requirement\", \"Permit and "
       "Exception and Requirement\", \"Forbid and Exception and Requirement\", \"Other\".\n";
  p += "Definition: The regulation defines a term or characteristic.\n";
  p += "Permit: The regulation permits certain actions regarding the flow of private information.\n";
  p += "Forbid: The regulation forbids certain actions regarding the flow of private information.\n";
  p += "Exception: The regulation defines an exception to a certain action about privacy information flow.\n";
  p += "Requirement: The regulation defines a requirement for privacy information flow.\n";
  p += "Other: The regulation is not in the above types.\n\n";
  p += "Q2: If the regulation type is \"Definition\", please annotate the name of the term or characteristic "
       "defined in the regulation.\n\n";
  p += "Q3: If the regulation type is \"Definition\", please annotate the definition of the term or characteristic "
       "defined in the regulation.\n\n";
  p += "Q4: If the regulation type contains \"Permit\", please annotate the action permitted in the regulation.\n\n";
  p += "Q5: If the regulation type contains \"Forbid\", please annotate the action forbidden in the regulation.\n\n";
  p += "Q6: If the regulation type contains \"Exception\", please annotate the exception defined in the "
       "regulation.\n\n";
  p += "Q7: If the regulation type contains \"Requirement\", please annotate the requirement defined in the "
       "regulation.\n\n";
  p += "Q8: If the regulation type is \"Other\", please give your own classification of the regulation type.\n";
  return p;
}

namespace {

bool contains_word(const std::string& lower, std::string_view word) {
  std::size_t from = 0;
  while (true) {
    std::size_t at = lower.find(word, from);
    if (at == std::string::npos) return false;
    from = at + 1;
    bool left = at == 0 || !std::isalnum(static_cast<unsigned char>(lower[at - 1]));
    std::size_t e = at + word.size();
    bool right = e >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[e]));
    if (left && right) return true;
  }
}

bool meaningful(const std::string& answer) {
  std::string a = answers::clean_answer(answer);
  if (a.empty() || text::is_none_sentinel(a)) return false;
  std::string l = text::to_lower(a);
  return l != "n/a" && l != "na" && l != "not applicable" && l != "-";
}

}  // namespace

std::optional<Classification> parse_classification(std::string_view response) {
  auto qs = answers::split_questions(response);
  std::string type_answer;
  if (auto it = qs.find(1); it != qs.end()) {
    type_answer = it->second;
  } else if (qs.empty()) {
    // Bare answers ("Permit and Requirement") without question markers.
    std::string t = text::trim(response);
    type_answer = t.substr(0, t.find('\n'));
  } else {
    return std::nullopt;
  }
  // Only the first line carries the label; later lines may quote definitions.
  std::string first = text::trim(type_answer.substr(0, type_answer.find('\n')));
  std::string lower = text::to_lower(first);

  Classification c;
  for (auto t : {NormType::Definition, NormType::Permit, NormType::Forbid, NormType::Exception,
                 NormType::Requirement}) {
    if (contains_word(lower, text::to_lower(to_string(t)))) c.types.insert(t);
  }
  if (c.types.empty() && contains_word(lower, "other")) c.types.insert(NormType::Other);
  if (c.types.empty()) return std::nullopt;

  auto answer = [&](int q) -> std::optional<std::string> {
    auto it = qs.find(q);
    if (it == qs.end() || !meaningful(it->second)) return std::nullopt;
    return text::collapse_ws(answers::clean_answer(it->second));
  };
  if (c.types.count(NormType::Definition)) {
    auto term = answer(2);
    auto def = answer(3);
    if (term && def) {
      c.payloads[NormType::Definition] = *term + ": " + *def;
    } else if (term || def) {
      c.payloads[NormType::Definition] = term ? *term : *def;
    }
  }
  const std::pair<NormType, int> per_type[] = {{NormType::Permit, 4},
                                                {NormType::Forbid, 5},
                                                {NormType::Exception, 6},
                                                {NormType::Requirement, 7},
                                                {NormType::Other, 8}};
  for (auto [t, q] : per_type) {
    if (!c.types.count(t)) continue;
    if (auto a = answer(q)) c.payloads[t] = *a;
  }
  return c;
}

gateway::ChatRequest classification_request(const Norm& norm, const ClassifyOptions& opts) {
  gateway::ChatRequest req;
  req.user_prompt = build_classification_prompt(norm, opts.law);
  req.temperature = gateway::kParsingTemperature;
  req.n_samples = 1;
  req.max_tokens = opts.max_tokens;
  req.tag = "classify:" + norm.leaf_id;
  return req;
}

gateway::ChatRequest resample_request(const Norm& norm, const ClassifyOptions& opts) {
  gateway::ChatRequest req = classification_request(norm, opts);
  req.temperature = gateway::kGenerationTemperature;
  req.n_samples = std::max(opts.retry_budget, 1);
  req.tag = "classify-resample:" + norm.leaf_id;
  return req;
}

std::vector<Norm> classify_norms(std::vector<Norm> norms, gateway::ModelGateway& gw, const ClassifyOptions& opts,
                                 ClassifyStats* stats) {
  struct Outcome {
    std::optional<Classification> result;
    bool resampled = false;
  };
  auto outcomes = parallel_map(norms.size(), gw.max_inflight(), [&](std::size_t i) {
    gateway::ChatRequest req = classification_request(norms[i], opts);
    Outcome out;
    auto first = gw.complete(req);
    if (!first.texts.empty()) out.result = parse_classification(first.texts.front());
    if (!out.result && opts.retry_budget > 0) {
      out.resampled = true;
      req = resample_request(norms[i], opts);
      for (const auto& t : gw.complete(req).texts) {
        if ((out.result = parse_classification(t))) break;
      }
    }
    return out;
  });

  ClassifyStats local;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    auto& n = norms[i];
    n.types.clear();
    n.type_payloads.clear();
    n.flagged = false;
    if (outcomes[i].resampled) ++local.resampled;
    if (outcomes[i].result) {
      n.types = outcomes[i].result->types;
      n.type_payloads = outcomes[i].result->payloads;
    } else {
      n.types = {NormType::Other};
      n.flagged = true;
      ++local.flagged;
    }
  }
  if (stats) *stats = local;
  return norms;
}

SeedSelection seed_norms(const std::vector<Norm>& norms) {
  SeedSelection sel;
  sel.total = norms.size();
  for (const auto& n : norms) {
    for (auto t : n.types) ++sel.type_counts[t];
    bool permit = n.has(NormType::Permit);
    bool forbid = n.has(NormType::Forbid);
    if (permit && forbid) {
      sel.ambiguous.push_back(n.leaf_id);
      continue;
    }
    if (!permit && !forbid) continue;
    Norm seed = n;
    seed.polarity = permit ? Polarity::Permit : Polarity::Forbid;
    sel.seeds.push_back(std::move(seed));
  }
  return sel;
}

void save_norms(const std::filesystem::path& path, const std::vector<Norm>& norms) {
  std::string out;
  for (const auto& n : norms) {
    out += n.to_json().dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  text::write_file(path, out);
}

std::vector<Norm> load_norms(const std::filesystem::path& path) {
  std::vector<Norm> norms;
  std::size_t line_no = 0;
  for (const auto& line : text::read_lines(path)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      norms.push_back(Norm::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return norms;
}

NormIndex NormIndex::from_graph(const StatuteGraph& graph) {
  NormIndex idx;
  for (std::size_t i = 0; i < graph.nodes().size(); ++i) idx.texts_[graph.node(i).key] = path_text(graph, i);
  return idx;
}

NormIndex NormIndex::from_norms(const std::vector<Norm>& norms) {
  NormIndex idx;
  for (const auto& n : norms) idx.texts_[n.leaf_id] = n.full_text;
  return idx;
}

std::optional<std::string> NormIndex::lookup(const std::string& id) const {
  std::string key = id;
  if (auto parsed = NormId::try_parse(id)) key = parsed->canonical();
  auto it = texts_.find(key);
  if (it == texts_.end()) return std::nullopt;
  return it->second;
}

}  // namespace ciforge::statute
