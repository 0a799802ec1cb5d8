#include "ciforge/norm_id.hpp"

#include "ciforge/error.hpp"
#include "ciforge/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace ciforge {

namespace {

constexpr std::string_view kSection = "\xC2\xA7";  // "§" in UTF-8

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

std::optional<int> to_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v <= 0) return std::nullopt;
  return v;
}

// Parses `(label)` runs starting at `pos`; stops at the first character that
// does not continue the chain. Returns the labels and advances `pos`.
std::vector<std::string> scan_labels(std::string_view s, std::size_t& pos) {
  std::vector<std::string> labels;
  while (pos < s.size() && s[pos] == '(') {
    std::size_t j = pos + 1;
    while (j < s.size() && is_alnum(s[j]) && j - pos <= 8) ++j;
    if (j == pos + 1 || j >= s.size() || s[j] != ')') break;
    labels.push_back(text::to_lower(s.substr(pos + 1, j - pos - 1)));
    pos = j + 1;
  }
  return labels;
}

int compare_label(const std::string& a, const std::string& b) {
  if (all_digits(a) && all_digits(b)) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  }
  return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
}

// Skips spaces backwards from `pos` (exclusive) and reports whether a "§"
// sign or a "§§ x and"-style list continuation precedes it.
bool preceded_by_section_sign(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  while (i > 0 && (s[i - 1] == ' ' || s[i - 1] == '\t' || s[i - 1] == '\n')) --i;
  return i >= kSection.size() && s.substr(i - kSection.size(), kSection.size()) == kSection;
}

}  // namespace

std::optional<NormId> NormId::try_parse(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw) {
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  }
  std::string_view v = s;
  while (v.substr(0, kSection.size()) == kSection) v.remove_prefix(kSection.size());

  std::size_t dot = v.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  std::size_t end = dot + 1;
  while (end < v.size() && is_digit(v[end])) ++end;
  std::string_view part = v.substr(0, dot);
  std::string_view section = v.substr(dot + 1, end - dot - 1);
  if (!all_digits(part) || !all_digits(section)) return std::nullopt;

  NormId id;
  auto p = to_int(part);
  auto q = to_int(section);
  if (!p || !q) return std::nullopt;
  id.part = *p;
  id.section = *q;
  std::size_t pos = end;
  id.labels = scan_labels(v, pos);
  if (pos != v.size()) return std::nullopt;
  return id;
}

NormId NormId::parse(std::string_view text) {
  auto id = try_parse(text);
  if (!id) throw Error(ErrorCode::MalformedId, "not a section identifier: '" + std::string(text) + "'");
  return *id;
}

std::string NormId::canonical() const {
  std::string out = std::to_string(part) + "." + std::to_string(section);
  for (const auto& l : labels) out += "(" + l + ")";
  return out;
}

bool NormId::is_prefix_of(const NormId& other) const {
  return part == other.part && section == other.section && labels.size() <= other.labels.size() &&
         std::equal(labels.begin(), labels.end(), other.labels.begin());
}

NormId NormId::parent() const {
  NormId p = *this;
  if (!p.labels.empty()) p.labels.pop_back();
  return p;
}

std::strong_ordering NormId::operator<=>(const NormId& other) const {
  if (auto c = part <=> other.part; c != 0) return c;
  if (auto c = section <=> other.section; c != 0) return c;
  std::size_t n = std::min(labels.size(), other.labels.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = compare_label(labels[i], other.labels[i]);
    if (c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
  }
  return labels.size() <=> other.labels.size();
}

std::string canonicalize_norm_id(std::string_view text) { return NormId::parse(text).canonical(); }

bool canonical_less(const std::string& a, const std::string& b) {
  auto ia = NormId::try_parse(a);
  auto ib = NormId::try_parse(b);
  if (ia && ib) {
    auto c = *ia <=> *ib;
    if (c != 0) return c < 0;
    return a < b;
  }
  if (ia.has_value() != ib.has_value()) return ia.has_value();
  return a < b;
}

std::vector<IdMention> find_norm_ids(std::string_view s) {
  std::vector<IdMention> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i]) || (i > 0 && (is_alnum(s[i - 1]) || s[i - 1] == '.'))) {
      ++i;
      continue;
    }
    std::size_t start = i;
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) ++j;
    std::size_t part_len = j - start;
    if (j + 1 >= s.size() || s[j] != '.' || !is_digit(s[j + 1])) {
      i = j;
      continue;
    }
    std::size_t sec_begin = j + 1;
    std::size_t k = sec_begin;
    while (k < s.size() && is_digit(s[k])) ++k;
    std::size_t sec_len = k - sec_begin;
    // "164.502.3" or "1.5.2" style numbers are not section ids.
    if (k + 1 < s.size() && s[k] == '.' && is_digit(s[k + 1])) {
      i = k;
      continue;
    }
    bool signed_ref = preceded_by_section_sign(s, start);
    if (!signed_ref && (part_len < 2 || sec_len < 2)) {
      i = k;
      continue;
    }
    std::size_t pos = k;
    auto labels = scan_labels(s, pos);
    auto part = to_int(s.substr(start, part_len));
    auto sec = to_int(s.substr(sec_begin, sec_len));
    if (part && sec) out.push_back({NormId{*part, *sec, std::move(labels)}, start});
    i = pos;
  }
  return out;
}

std::vector<IdMention> find_paragraph_refs(std::string_view s, const NormId& section) {
  std::vector<IdMention> out;
  const std::string lower = text::to_lower(s);
  std::size_t from = 0;
  while (true) {
    std::size_t at = lower.find("paragraph", from);
    if (at == std::string::npos) break;
    std::size_t pos = at + 9;
    if (at > 0 && is_alnum(lower[at - 1])) {
      from = pos;
      continue;
    }
    if (pos < lower.size() && lower[pos] == 's') ++pos;
    std::vector<IdMention> chains;
    while (true) {
      while (pos < s.size() && s[pos] == ' ') ++pos;
      std::size_t chain_at = pos;
      auto labels = scan_labels(s, pos);
      if (labels.empty()) break;
      NormId id = section.section_only();
      id.labels = std::move(labels);
      chains.push_back({std::move(id), chain_at});
      // list continuation: ", (c)", " and (d)", " or (e)", " through (f)"
      std::size_t save = pos;
      while (pos < s.size() && (s[pos] == ' ' || s[pos] == ',')) ++pos;
      bool more = false;
      for (std::string_view conj : {"and ", "or ", "through "}) {
        if (lower.compare(pos, conj.size(), conj) == 0) {
          pos += conj.size();
          more = true;
          break;
        }
      }
      if (!more && (pos >= s.size() || s[pos] != '(' || pos == save)) {
        pos = save;
        break;
      }
    }
    // "paragraph (b) of § 164.504" points into another section.
    std::size_t look = pos;
    while (look < s.size() && s[look] == ' ') ++look;
    if (lower.compare(look, 3, "of ") == 0) {
      std::size_t after = look + 3;
      while (after < s.size() && s[after] == ' ') ++after;
      if (s.substr(after, kSection.size()) == kSection) {
        auto ids = find_norm_ids(s.substr(after, 32));
        if (!ids.empty() && ids.front().offset <= kSection.size() + 2) {
          for (auto& c : chains) {
            c.id.part = ids.front().id.part;
            c.id.section = ids.front().id.section;
          }
        }
      }
    }
    for (auto& c : chains) out.push_back(std::move(c));
    from = std::max(pos, at + 9);
  }
  return out;
}

}  // namespace ciforge
