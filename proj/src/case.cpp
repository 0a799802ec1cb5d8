#include "ciforge/case.hpp"

#include "ciforge/error.hpp"
#include "ciforge/text.hpp"

namespace ciforge {

using answers::Feature;
using nlohmann::json;

std::string_view to_string(Provenance p) { return p == Provenance::Synthetic ? "Synthetic" : "Real"; }

ci::InformationFlow Case::to_flow() const {
  auto get = [&](Feature f) { return feature(f).value_or(""); };
  ci::InformationFlow flow{get(Feature::Sender),  get(Feature::SenderRole), get(Feature::Recipient),
                           get(Feature::RecipientRole), get(Feature::Subject), get(Feature::SubjectRole),
                           get(Feature::Type),    {}};
  flow.principles.purpose = feature(Feature::Purpose);
  flow.principles.in_reply_to = feature(Feature::InReplyTo);
  flow.principles.belief = feature(Feature::Belief);
  if (const auto& c = feature(Feature::ConsentedBy)) flow.principles.consented_by = ci::split_parties(*c);
  flow.validate();
  return flow;
}

json Case::to_json() const {
  json j;
  j["background"] = background;
  for (auto f : answers::kAllFeatures) {
    const auto& v = feature(f);
    j[std::string(answers::json_key(f))] = v ? json(*v) : json(nullptr);
  }
  json ids = json::array();
  for (const auto& id : cited_norm_ids) ids.push_back(id.canonical());
  j["cited_norm_ids"] = std::move(ids);
  j["applicability"] = applicability ? json(to_string(*applicability)) : json(nullptr);
  j["compliance"] = compliance ? json(to_string(*compliance)) : json(nullptr);
  j["seed_norm_id"] = seed_norm_id ? json(seed_norm_id->canonical()) : json(nullptr);
  j["provenance"] = to_string(provenance);
  return j;
}

namespace {

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

}  // namespace

Case Case::from_json(const json& j) {
  Case c;
  c.background = j.at("background").get<std::string>();
  for (auto f : answers::kAllFeatures) {
    auto v = opt_string(j, std::string(answers::json_key(f)).c_str());
    if (v && text::is_none_sentinel(*v)) v.reset();
    c.set_feature(f, std::move(v));
  }
  for (const auto& id : j.value("cited_norm_ids", json::array())) c.cited_norm_ids.push_back(NormId::parse(id.get<std::string>()));
  if (auto a = opt_string(j, "applicability")) {
    c.applicability = parse_applicability(*a);
    if (!c.applicability) throw Error(ErrorCode::InvalidInput, "bad applicability '" + *a + "'");
  }
  if (auto v = opt_string(j, "compliance")) {
    c.compliance = parse_compliance(*v);
    if (!c.compliance) throw Error(ErrorCode::InvalidInput, "bad compliance '" + *v + "'");
  }
  if (auto s = opt_string(j, "seed_norm_id")) c.seed_norm_id = NormId::parse(*s);
  auto prov = j.value("provenance", "Synthetic");
  if (prov == "Synthetic") {
    c.provenance = Provenance::Synthetic;
  } else if (prov == "Real") {
    c.provenance = Provenance::Real;
  } else {
    throw Error(ErrorCode::InvalidInput, "bad provenance '" + prov + "'");
  }
  return c;
}

std::string background_hash(const Case& c) { return text::sha256_hex(text::collapse_ws(c.background)); }

std::string cases_to_jsonl(const std::vector<Case>& cases) {
  std::string out;
  for (const auto& c : cases) {
    out += c.to_json().dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

void save_cases(const std::filesystem::path& path, const std::vector<Case>& cases) {
  text::write_file(path, cases_to_jsonl(cases));
}

std::vector<Case> load_cases(const std::filesystem::path& path) {
  std::vector<Case> out;
  std::size_t line_no = 0;
  for (const auto& line : text::read_lines(path)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(Case::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void CaseSet::add(Case c) {
  if (c.seed_norm_id) per_norm_index[c.seed_norm_id->canonical()].push_back(cases.size());
  cases.push_back(std::move(c));
}

}  // namespace ciforge
