#pragma once

#include "ciforge/labels.hpp"
#include "ciforge/norm_id.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ciforge::ci {

struct TransmissionPrinciples {
  std::optional<std::string> purpose;
  std::optional<std::string> in_reply_to;
  std::optional<std::vector<std::string>> consented_by;
  std::optional<std::string> belief;
};

struct InformationFlow {
  std::string sender;
  std::string sender_role;
  std::string recipient;
  std::string recipient_role;
  std::string subject;
  std::string subject_role;
  std::string info_type;
  TransmissionPrinciples principles;

  // Throws Error{InvalidInput} naming the first empty or "None" field.
  void validate() const;
  bool valid() const noexcept;
};

// "A, B and C" -> {"A", "B", "C"}; None sentinels yield an empty list.
std::vector<std::string> split_parties(std::string_view text);

enum class FlowVerdict { Permit, Forbid, NotApplicable };
std::string_view to_string(FlowVerdict v);
FlowVerdict to_verdict(Polarity p);

enum class ConstraintKind { Exact, Contains, Present };

struct PrincipleConstraint {
  std::string principle;  // purpose | in_reply_to | consented_by | belief
  ConstraintKind kind = ConstraintKind::Present;
  std::string value;
};

inline constexpr std::string_view kWildcard = "*";

struct NormPredicate {
  NormId norm_id;
  Polarity effect = Polarity::Permit;
  std::set<std::string> sender_roles;
  std::set<std::string> recipient_roles;
  std::set<std::string> subject_roles;
  std::set<std::string> info_types;
  std::vector<PrincipleConstraint> principle_constraints;

  static NormPredicate from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

std::vector<NormPredicate> load_predicates(const std::filesystem::path& path);

// Alias table plus an optional "is a" relation between canonical roles, e.g.
// nurse -> workforce member.
class RoleLexicon {
 public:
  RoleLexicon() = default;

  // {"aliases": {"physician": "doctor"}, "memberships": {"nurse": ["workforce member"]}}
  // Keys and values are normalized on load; alias cycles raise Error{Config}.
  static RoleLexicon from_json(const nlohmann::json& j);
  static RoleLexicon load(const std::filesystem::path& path);

  void add_alias(std::string_view from, std::string_view to);
  void add_membership(std::string_view role, std::string_view group);

  std::string normalize(std::string_view raw) const;
  // True when canonical `role` equals `target` or belongs to it transitively.
  bool is_a(const std::string& role, const std::string& target) const;

  std::size_t alias_count() const { return aliases_.size(); }

 private:
  void check_acyclic() const;

  std::map<std::string, std::string> aliases_;
  std::map<std::string, std::set<std::string>> memberships_;
};

// Lowercase, trim, collapse whitespace, drop leading articles.
std::string basic_role_form(std::string_view raw);

std::string normalize_role(std::string_view raw, const RoleLexicon& roles);

// A role set entry matches when it is the wildcard or the normalized role is
// (or belongs to) the normalized entry.
bool inrole(std::string_view role, const std::set<std::string>& accepted, const RoleLexicon& roles);

enum class InfoTypeMatch { TokenSubset, Exact };

bool info_type_matches(std::string_view flow_type, const std::set<std::string>& accepted,
                       InfoTypeMatch mode = InfoTypeMatch::TokenSubset);

bool constraint_holds(const PrincipleConstraint& c, const TransmissionPrinciples& p);

FlowVerdict check_flow(const InformationFlow& flow, const NormPredicate& pred, const RoleLexicon& roles,
                       InfoTypeMatch mode = InfoTypeMatch::TokenSubset);

FlowVerdict aggregate_verdicts(const std::vector<FlowVerdict>& verdicts);

}  // namespace ciforge::ci
