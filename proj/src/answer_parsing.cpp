#include "ciforge/answer_parsing.hpp"

#include "ciforge/labels.hpp"
#include "ciforge/text.hpp"

#include <algorithm>
#include <cctype>

namespace ciforge {

std::string_view to_string(Polarity p) { return p == Polarity::Permit ? "Permit" : "Forbid"; }

std::string_view to_string(Applicability a) {
  return a == Applicability::Applicable ? "Applicable" : "NotApplicable";
}

std::string_view to_string(Compliance c) {
  switch (c) {
    case Compliance::Permit: return "Permit";
    case Compliance::Forbid: return "Forbid";
    case Compliance::NotApplicable: return "NotApplicable";
  }
  return "?";
}

namespace {

std::string squash(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::optional<Polarity> parse_polarity(std::string_view s) {
  std::string v = squash(s);
  if (v == "permit") return Polarity::Permit;
  if (v == "forbid") return Polarity::Forbid;
  return std::nullopt;
}

std::optional<Applicability> parse_applicability(std::string_view s) {
  std::string v = squash(s);
  if (v == "applicable") return Applicability::Applicable;
  if (v == "notapplicable") return Applicability::NotApplicable;
  return std::nullopt;
}

std::optional<Compliance> parse_compliance(std::string_view s) {
  std::string v = squash(s);
  if (v == "permit") return Compliance::Permit;
  if (v == "forbid") return Compliance::Forbid;
  if (v == "notapplicable") return Compliance::NotApplicable;
  return std::nullopt;
}

}  // namespace ciforge

namespace ciforge::answers {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct Marker {
  std::size_t begin;    // start of the marker
  std::size_t content;  // first byte of the answer text
  int number;
};

// Parses a question marker at the start of a line beginning at `pos`.
std::optional<Marker> question_marker(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '*' || s[i] == '#' || s[i] == '-' || s[i] == '>')) ++i;
  std::size_t word_end = i;
  if (text::istarts_with(s.substr(i), "question")) {
    word_end = i + 8;
    while (word_end < s.size() && s[word_end] == ' ') ++word_end;
  } else if (i < s.size() && (s[i] == 'Q' || s[i] == 'q')) {
    word_end = i + 1;
  } else {
    return std::nullopt;
  }
  std::size_t d = word_end;
  while (d < s.size() && is_digit(s[d]) && d - word_end < 3) ++d;
  if (d == word_end) return std::nullopt;
  int number = std::stoi(std::string(s.substr(word_end, d - word_end)));
  std::size_t j = d;
  while (j < s.size() && s[j] == '*') ++j;
  if (j < s.size() && (s[j] == ':' || s[j] == '.' || s[j] == ')')) {
    ++j;
  } else if (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\n' && s[j] != '\r') {
    return std::nullopt;
  }
  while (j < s.size() && s[j] == '*') ++j;
  return Marker{pos, j, number};
}

}  // namespace

std::map<int, std::string> split_questions(std::string_view s) {
  std::vector<Marker> markers;
  std::size_t line = 0;
  while (line <= s.size()) {
    if (auto m = question_marker(s, line)) markers.push_back(*m);
    std::size_t nl = s.find('\n', line);
    if (nl == std::string_view::npos) break;
    line = nl + 1;
  }
  std::map<int, std::string> out;
  for (std::size_t k = 0; k < markers.size(); ++k) {
    std::size_t end = k + 1 < markers.size() ? markers[k + 1].begin : s.size();
    std::string body = text::trim(s.substr(markers[k].content, end - markers[k].content));
    auto it = out.find(markers[k].number);
    if (it == out.end() || it->second.empty()) out[markers[k].number] = std::move(body);
  }
  return out;
}

std::vector<std::pair<int, std::string>> split_steps(std::string_view s) {
  const std::string lower = text::to_lower(s);
  std::vector<Marker> markers;
  std::size_t from = 0;
  while (true) {
    std::size_t at = lower.find("step", from);
    if (at == std::string::npos) break;
    from = at + 4;
    if (at > 0 && is_alnum(lower[at - 1])) continue;
    std::size_t i = at + 4;
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t d = i;
    while (d < s.size() && is_digit(s[d]) && d - i < 3) ++d;
    if (d == i) continue;
    std::size_t j = d;
    while (j < s.size() && (s[j] == ' ' || s[j] == '*')) ++j;
    if (j >= s.size() || s[j] != ':') continue;
    ++j;
    while (j < s.size() && s[j] == '*') ++j;
    markers.push_back({at, j, std::stoi(std::string(s.substr(i, d - i)))});
    from = j;
  }
  std::vector<std::pair<int, std::string>> out;
  for (std::size_t k = 0; k < markers.size(); ++k) {
    std::size_t end = k + 1 < markers.size() ? markers[k + 1].begin : s.size();
    out.emplace_back(markers[k].number, text::trim(s.substr(markers[k].content, end - markers[k].content)));
  }
  return out;
}

std::string_view display_name(Feature f) {
  switch (f) {
    case Feature::Sender: return "Sender";
    case Feature::SenderRole: return "Sender Role";
    case Feature::Recipient: return "Recipient";
    case Feature::RecipientRole: return "Recipient Role";
    case Feature::Subject: return "Subject";
    case Feature::SubjectRole: return "Subject Role";
    case Feature::Type: return "Type";
    case Feature::Purpose: return "Purpose";
    case Feature::InReplyTo: return "In Reply To";
    case Feature::ConsentedBy: return "Consented By";
    case Feature::Belief: return "Belief";
  }
  return "?";
}

std::string_view json_key(Feature f) {
  switch (f) {
    case Feature::Sender: return "sender";
    case Feature::SenderRole: return "sender_role";
    case Feature::Recipient: return "recipient";
    case Feature::RecipientRole: return "recipient_role";
    case Feature::Subject: return "subject";
    case Feature::SubjectRole: return "subject_role";
    case Feature::Type: return "type";
    case Feature::Purpose: return "purpose";
    case Feature::InReplyTo: return "in_reply_to";
    case Feature::ConsentedBy: return "consented_by";
    case Feature::Belief: return "belief";
  }
  return "?";
}

std::string clean_answer(std::string_view raw) {
  std::string v = text::trim(raw);
  auto strip_edges = [&] {
    bool changed = true;
    while (changed && !v.empty()) {
      changed = false;
      while (!v.empty() && (v.front() == '*' || v.front() == '"' || v.front() == '`' || v.front() == '\'')) {
        v.erase(v.begin());
        changed = true;
      }
      while (!v.empty() && (v.back() == '*' || v.back() == '"' || v.back() == '`' || v.back() == ',' ||
                            v.back() == ';' || v.back() == '.' || v.back() == '\'')) {
        v.pop_back();
        changed = true;
      }
      std::string t = text::trim(v);
      if (t != v) {
        v = std::move(t);
        changed = true;
      }
    }
  };
  strip_edges();
  return v;
}

namespace {

struct LabelSpec {
  std::string_view phrase;  // lowercase
  Feature feature;
};

constexpr LabelSpec kLabels[] = {
    {"sender role", Feature::SenderRole},     {"sender", Feature::Sender},
    {"recipient role", Feature::RecipientRole}, {"recipient", Feature::Recipient},
    {"subject role", Feature::SubjectRole},   {"subject", Feature::Subject},
    {"information type", Feature::Type},      {"info type", Feature::Type},
    {"type", Feature::Type},                  {"purpose", Feature::Purpose},
    {"in reply to", Feature::InReplyTo},      {"consented by", Feature::ConsentedBy},
    {"beliefs", Feature::Belief},             {"belief", Feature::Belief},
};

bool label_boundary_before(std::string_view s, std::size_t pos) {
  std::size_t j = pos;
  while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '\t' || s[j - 1] == '*' || s[j - 1] == '-' || s[j - 1] == '_' ||
                   s[j - 1] == '>'))
    --j;
  // numbered list items: "1. Sender:" / "2) Sender:"
  if (j > 0 && (s[j - 1] == '.' || s[j - 1] == ')')) {
    std::size_t d = j - 1;
    while (d > 0 && is_digit(s[d - 1])) --d;
    if (d < j - 1) {
      j = d;
      while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '\t')) --j;
    }
  }
  if (j == 0) return true;
  char c = s[j - 1];
  return c == '\n' || c == '\r' || c == ',' || c == ';' || c == '(' || c == '[' || c == '{' || c == '|' || c == ':';
}

}  // namespace

FeatureValues parse_features(std::string_view s) {
  const std::string lower = text::to_lower(s);
  struct Hit {
    std::size_t begin;
    std::size_t value;
    Feature feature;
  };
  std::vector<Hit> hits;
  for (const auto& spec : kLabels) {
    std::size_t from = 0;
    while (true) {
      std::size_t at = lower.find(spec.phrase, from);
      if (at == std::string::npos) break;
      from = at + 1;
      std::size_t after = at + spec.phrase.size();
      if (after < lower.size() && is_alnum(lower[after])) continue;
      if (!label_boundary_before(lower, at)) continue;
      std::size_t j = after;
      while (j < lower.size() && (lower[j] == ' ' || lower[j] == '*')) ++j;
      if (j >= lower.size() || lower[j] != ':') continue;
      ++j;
      while (j < lower.size() && lower[j] == '*') ++j;
      hits.push_back({at, j, spec.feature});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.begin < b.begin; });
  // Overlapping hits ("type" inside "information type") keep the earliest.
  std::vector<Hit> kept;
  for (const auto& h : hits) {
    if (!kept.empty() && h.begin < kept.back().value) continue;
    kept.push_back(h);
  }
  FeatureValues out;
  std::array<bool, kFeatureCount> seen{};
  for (std::size_t k = 0; k < kept.size(); ++k) {
    std::size_t end = k + 1 < kept.size() ? kept[k + 1].begin : s.size();
    auto idx = static_cast<std::size_t>(kept[k].feature);
    if (seen[idx]) continue;
    seen[idx] = true;
    std::string v = clean_answer(text::collapse_ws(s.substr(kept[k].value, end - kept[k].value)));
    if (v.empty() || text::is_none_sentinel(v)) continue;
    out[idx] = std::move(v);
  }
  return out;
}

std::optional<std::size_t> first_phrase(std::string_view s, const std::vector<std::string_view>& phrases) {
  const std::string lower = text::to_lower(s);
  std::optional<std::size_t> best;
  std::size_t best_at = std::string::npos;
  for (std::size_t p = 0; p < phrases.size(); ++p) {
    const std::string needle = text::to_lower(phrases[p]);
    std::size_t from = 0;
    while (true) {
      std::size_t at = lower.find(needle, from);
      if (at == std::string::npos || at > best_at) break;
      from = at + 1;
      bool left = at == 0 || !is_alnum(lower[at - 1]);
      bool right = at + needle.size() >= lower.size() || !is_alnum(lower[at + needle.size()]);
      if (!left || !right) continue;
      if (at < best_at || (at == best_at && needle.size() > phrases[*best].size())) {
        best = p;
        best_at = at;
      }
      break;
    }
  }
  return best;
}

std::optional<Compliance> relation_answer(std::string_view answer) {
  static const std::vector<std::string_view> phrases = {
      "not applicable", "n/a", "permit", "permits", "permitted", "forbid", "forbids", "forbidden"};
  auto hit = first_phrase(answer, phrases);
  if (!hit) return std::nullopt;
  if (*hit <= 1) return Compliance::NotApplicable;
  return *hit <= 4 ? Compliance::Permit : Compliance::Forbid;
}

}  // namespace ciforge::answers
