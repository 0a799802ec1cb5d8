#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ciforge {

// Statute section identifier of the form `part.section(label)*`, e.g.
// 164.502(a)(1)(ii). Labels are stored lowercase.
struct NormId {
  int part = 0;
  int section = 0;
  std::vector<std::string> labels;

  // Whitespace-insensitive; an optional leading "§" is accepted. Throws
  // Error{MalformedId} when the text is not a well-formed identifier.
  static NormId parse(std::string_view text);
  static std::optional<NormId> try_parse(std::string_view text);

  std::string canonical() const;

  // True when this id is `other` or one of its ancestors (label prefix).
  bool is_prefix_of(const NormId& other) const;

  NormId parent() const;
  NormId section_only() const { return NormId{part, section, {}}; }

  bool operator==(const NormId&) const = default;
  std::strong_ordering operator<=>(const NormId& other) const;
};

std::string canonicalize_norm_id(std::string_view text);

// Total order over canonical id strings: ids that parse as NormId sort by
// part, section, then labels (numeric labels numerically); anything else
// sorts after them, lexicographically.
bool canonical_less(const std::string& a, const std::string& b);

// A reference found while scanning prose.
struct IdMention {
  NormId id;
  std::size_t offset = 0;
};

// Every section identifier mentioned in `text`: "§ 164.504(b)", "§§ 164.502
// and 164.504", and bare ids whose part and section both have two or more
// digits (so "1.5 percent" is not a reference).
std::vector<IdMention> find_norm_ids(std::string_view text);

// Relative references "paragraph (a)(5)(ii)(B)(2)" and lists such as
// "paragraphs (b)(1) and (c)" resolved against `section`.
std::vector<IdMention> find_paragraph_refs(std::string_view text, const NormId& section);

}  // namespace ciforge
