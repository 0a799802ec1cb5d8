#include "ciforge/ci_core.hpp"

#include "ciforge/error.hpp"
#include "ciforge/text.hpp"

#include <algorithm>
#include <regex>

namespace ciforge::ci {

using nlohmann::json;

namespace {

bool blank_or_none(const std::string& v) {
  std::string t = text::trim(v);
  return t.empty() || text::is_none_sentinel(t);
}

std::string norm_text(std::string_view s) { return text::to_lower(text::collapse_ws(s)); }

bool token_subset(const std::vector<std::string>& small, const std::vector<std::string>& big) {
  if (small.empty()) return false;
  std::set<std::string> pool(big.begin(), big.end());
  return std::all_of(small.begin(), small.end(), [&](const std::string& t) { return pool.count(t) != 0; });
}

}  // namespace

void InformationFlow::validate() const {
  const std::pair<const char*, const std::string*> fields[] = {
      {"sender", &sender},   {"sender_role", &sender_role},   {"recipient", &recipient},
      {"recipient_role", &recipient_role}, {"subject", &subject}, {"subject_role", &subject_role},
      {"type", &info_type}};
  for (const auto& [name, value] : fields) {
    if (blank_or_none(*value)) throw Error(ErrorCode::InvalidInput, std::string("flow field '") + name + "' is missing");
  }
}

bool InformationFlow::valid() const noexcept {
  try {
    validate();
    return true;
  } catch (...) {
    return false;
  }
}

std::vector<std::string> split_parties(std::string_view raw) {
  std::string s = text::trim(raw);
  if (s.empty() || text::is_none_sentinel(s)) return {};
  static const std::regex sep(R"(\s*(?:,|;|\band\b|&)\s*)", std::regex::icase);
  std::vector<std::string> out;
  for (std::sregex_token_iterator it(s.begin(), s.end(), sep, -1), end; it != end; ++it) {
    std::string part = text::trim(it->str());
    if (!part.empty() && !text::is_none_sentinel(part)) out.push_back(part);
  }
  return out;
}

std::string_view to_string(FlowVerdict v) {
  switch (v) {
    case FlowVerdict::Permit: return "Permit";
    case FlowVerdict::Forbid: return "Forbid";
    case FlowVerdict::NotApplicable: return "NotApplicable";
  }
  return "NotApplicable";
}

FlowVerdict to_verdict(Polarity p) { return p == Polarity::Permit ? FlowVerdict::Permit : FlowVerdict::Forbid; }

namespace {

ConstraintKind parse_kind(const std::string& s) {
  if (s == "exact") return ConstraintKind::Exact;
  if (s == "contains") return ConstraintKind::Contains;
  if (s == "present") return ConstraintKind::Present;
  throw Error(ErrorCode::Config, "unknown constraint kind '" + s + "'");
}

std::string_view kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::Exact: return "exact";
    case ConstraintKind::Contains: return "contains";
    case ConstraintKind::Present: return "present";
  }
  return "present";
}

std::set<std::string> string_set(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::Config, std::string("predicate is missing '") + key + "'");
  auto v = j.at(key).get<std::vector<std::string>>();
  if (v.empty()) throw Error(ErrorCode::Config, std::string("predicate field '") + key + "' is empty; use \"*\"");
  return {v.begin(), v.end()};
}

}  // namespace

NormPredicate NormPredicate::from_json(const json& j) {
  NormPredicate p;
  p.norm_id = NormId::parse(j.at("norm_id").get<std::string>());
  auto effect = parse_polarity(j.at("effect").get<std::string>());
  if (!effect) throw Error(ErrorCode::Config, "predicate effect must be Permit or Forbid");
  p.effect = *effect;
  p.sender_roles = string_set(j, "sender_roles");
  p.recipient_roles = string_set(j, "recipient_roles");
  p.subject_roles = string_set(j, "subject_roles");
  p.info_types = string_set(j, "info_types");
  for (const auto& c : j.value("principle_constraints", json::array())) {
    PrincipleConstraint pc;
    pc.principle = c.at("principle").get<std::string>();
    if (pc.principle != "purpose" && pc.principle != "in_reply_to" && pc.principle != "consented_by" &&
        pc.principle != "belief")
      throw Error(ErrorCode::Config, "unknown transmission principle '" + pc.principle + "'");
    pc.kind = parse_kind(c.at("kind").get<std::string>());
    pc.value = c.value("value", "");
    p.principle_constraints.push_back(std::move(pc));
  }
  return p;
}

json NormPredicate::to_json() const {
  json constraints = json::array();
  for (const auto& c : principle_constraints)
    constraints.push_back({{"principle", c.principle}, {"kind", kind_name(c.kind)}, {"value", c.value}});
  return {{"norm_id", norm_id.canonical()},
          {"effect", ciforge::to_string(effect)},
          {"sender_roles", sender_roles},
          {"recipient_roles", recipient_roles},
          {"subject_roles", subject_roles},
          {"info_types", info_types},
          {"principle_constraints", constraints}};
}

std::vector<NormPredicate> load_predicates(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
  std::vector<NormPredicate> out;
  for (const auto& p : j.at("predicates")) out.push_back(NormPredicate::from_json(p));
  return out;
}

std::string basic_role_form(std::string_view raw) {
  std::string s = norm_text(raw);
  for (std::string_view article : {"the ", "a ", "an "}) {
    if (s.size() > article.size() && s.starts_with(article)) {
      s = s.substr(article.size());
      break;
    }
  }
  return s;
}

RoleLexicon RoleLexicon::from_json(const json& j) {
  RoleLexicon lex;
  const json aliases = j.value("aliases", json::object());
  const json memberships = j.value("memberships", json::object());
  for (const auto& [from, to] : aliases.items()) lex.add_alias(from, to.get<std::string>());
  for (const auto& [role, groups] : memberships.items()) {
    for (const auto& g : groups) lex.add_membership(role, g.get<std::string>());
  }
  lex.check_acyclic();
  return lex;
}

RoleLexicon RoleLexicon::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

void RoleLexicon::add_alias(std::string_view from, std::string_view to) {
  std::string f = basic_role_form(from);
  std::string t = basic_role_form(to);
  if (f.empty() || t.empty() || f == t) return;
  aliases_[f] = t;
}

void RoleLexicon::add_membership(std::string_view role, std::string_view group) {
  std::string r = basic_role_form(role);
  std::string g = basic_role_form(group);
  if (r.empty() || g.empty() || r == g) return;
  memberships_[r].insert(g);
}

void RoleLexicon::check_acyclic() const {
  for (const auto& [start, _] : aliases_) {
    std::set<std::string> seen{start};
    auto it = aliases_.find(start);
    while (it != aliases_.end()) {
      if (!seen.insert(it->second).second) throw Error(ErrorCode::Config, "role alias cycle through '" + start + "'");
      it = aliases_.find(it->second);
    }
  }
}

std::string RoleLexicon::normalize(std::string_view raw) const {
  std::string s = basic_role_form(raw);
  std::set<std::string> seen;
  for (auto it = aliases_.find(s); it != aliases_.end() && seen.insert(s).second; it = aliases_.find(s)) s = it->second;
  return s;
}

bool RoleLexicon::is_a(const std::string& role, const std::string& target) const {
  std::vector<std::string> stack{role};
  std::set<std::string> seen;
  while (!stack.empty()) {
    std::string cur = std::move(stack.back());
    stack.pop_back();
    if (cur == target) return true;
    if (!seen.insert(cur).second) continue;
    auto it = memberships_.find(cur);
    if (it == memberships_.end()) continue;
    for (const auto& g : it->second) stack.push_back(normalize(g));
  }
  return false;
}

std::string normalize_role(std::string_view raw, const RoleLexicon& roles) { return roles.normalize(raw); }

bool inrole(std::string_view role, const std::set<std::string>& accepted, const RoleLexicon& roles) {
  if (accepted.count(std::string(kWildcard))) return true;
  std::string r = roles.normalize(role);
  if (r.empty() || text::is_none_sentinel(r)) return false;
  return std::any_of(accepted.begin(), accepted.end(),
                     [&](const std::string& a) { return roles.is_a(r, roles.normalize(a)); });
}

bool info_type_matches(std::string_view flow_type, const std::set<std::string>& accepted, InfoTypeMatch mode) {
  if (accepted.count(std::string(kWildcard))) return true;
  if (mode == InfoTypeMatch::Exact) {
    std::string f = norm_text(flow_type);
    return std::any_of(accepted.begin(), accepted.end(), [&](const std::string& a) { return norm_text(a) == f; });
  }
  auto ft = text::alnum_tokens(flow_type);
  return std::any_of(accepted.begin(), accepted.end(), [&](const std::string& a) {
    auto at = text::alnum_tokens(a);
    return token_subset(at, ft) || token_subset(ft, at);
  });
}

namespace {

bool value_satisfies(ConstraintKind kind, const std::string& want, const std::string& have) {
  switch (kind) {
    case ConstraintKind::Present: return true;
    case ConstraintKind::Exact: return norm_text(want) == norm_text(have);
    case ConstraintKind::Contains:
      return norm_text(have).find(norm_text(want)) != std::string::npos ||
             token_subset(text::alnum_tokens(want), text::alnum_tokens(have));
  }
  return false;
}

}  // namespace

bool constraint_holds(const PrincipleConstraint& c, const TransmissionPrinciples& p) {
  auto single = [&](const std::optional<std::string>& v) {
    if (!v || blank_or_none(*v)) return false;
    return value_satisfies(c.kind, c.value, *v);
  };
  if (c.principle == "purpose") return single(p.purpose);
  if (c.principle == "in_reply_to") return single(p.in_reply_to);
  if (c.principle == "belief") return single(p.belief);
  if (c.principle == "consented_by") {
    if (!p.consented_by || p.consented_by->empty()) return false;
    return std::any_of(p.consented_by->begin(), p.consented_by->end(),
                       [&](const std::string& party) { return value_satisfies(c.kind, c.value, party); });
  }
  return false;
}

FlowVerdict check_flow(const InformationFlow& flow, const NormPredicate& pred, const RoleLexicon& roles,
                       InfoTypeMatch mode) {
  bool applies = inrole(flow.sender_role, pred.sender_roles, roles) &&
                 inrole(flow.recipient_role, pred.recipient_roles, roles) &&
                 inrole(flow.subject_role, pred.subject_roles, roles) &&
                 info_type_matches(flow.info_type, pred.info_types, mode) &&
                 std::all_of(pred.principle_constraints.begin(), pred.principle_constraints.end(),
                             [&](const PrincipleConstraint& c) { return constraint_holds(c, flow.principles); });
  return applies ? to_verdict(pred.effect) : FlowVerdict::NotApplicable;
}

FlowVerdict aggregate_verdicts(const std::vector<FlowVerdict>& verdicts) {
  bool permit = false;
  for (auto v : verdicts) {
    if (v == FlowVerdict::Forbid) return FlowVerdict::Forbid;
    permit = permit || v == FlowVerdict::Permit;
  }
  return permit ? FlowVerdict::Permit : FlowVerdict::NotApplicable;
}

}  // namespace ciforge::ci
