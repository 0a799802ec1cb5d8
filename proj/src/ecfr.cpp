#include "ciforge/ecfr.hpp"

#include "ciforge/error.hpp"
#include "ciforge/gateway.hpp"
#include "ciforge/text.hpp"

#include <httplib.h>

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace ciforge::ecfr {

namespace {

struct XmlNode {
  std::string name;  // empty for text nodes
  std::map<std::string, std::string> attrs;
  std::string text;
  std::vector<std::unique_ptr<XmlNode>> children;
  XmlNode* parent = nullptr;
};

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string decode_entities(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += '&';
      continue;
    }
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else if (!ent.empty() && ent[0] == '#') {
      bool hex = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X');
      append_utf8(out, std::stoul(std::string(ent.substr(hex ? 2 : 1)), nullptr, hex ? 16 : 10));
    } else {
      out.append(s.substr(i, semi - i + 1));
    }
    i = semi;
  }
  return out;
}

std::unique_ptr<XmlNode> parse_xml(std::string_view s) {
  auto root = std::make_unique<XmlNode>();
  root->name = "#document";
  XmlNode* cur = root.get();
  std::size_t i = 0;
  auto fail = [](const std::string& why) { throw Error(ErrorCode::MalformedDocument, "XML: " + why); };
  while (i < s.size()) {
    if (s[i] != '<') {
      std::size_t next = s.find('<', i);
      if (next == std::string_view::npos) next = s.size();
      auto t = std::make_unique<XmlNode>();
      t->text = decode_entities(s.substr(i, next - i));
      t->parent = cur;
      cur->children.push_back(std::move(t));
      i = next;
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      std::size_t end = s.find("-->", i);
      if (end == std::string_view::npos) fail("unterminated comment");
      i = end + 3;
      continue;
    }
    if (s.compare(i, 2, "<?") == 0 || s.compare(i, 2, "<!") == 0) {
      std::size_t end = s.find('>', i);
      if (end == std::string_view::npos) fail("unterminated declaration");
      i = end + 1;
      continue;
    }
    std::size_t end = s.find('>', i);
    if (end == std::string_view::npos) fail("unterminated tag");
    std::string_view tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    if (!tag.empty() && tag[0] == '/') {
      std::string name = text::trim(tag.substr(1));
      if (cur->name != name) fail("mismatched </" + name + ">");
      cur = cur->parent;
      continue;
    }
    bool self_closing = !tag.empty() && tag.back() == '/';
    if (self_closing) tag.remove_suffix(1);
    std::size_t n = 0;
    while (n < tag.size() && !std::isspace(static_cast<unsigned char>(tag[n]))) ++n;
    auto el = std::make_unique<XmlNode>();
    el->name = std::string(tag.substr(0, n));
    std::size_t a = n;
    while (a < tag.size()) {
      while (a < tag.size() && std::isspace(static_cast<unsigned char>(tag[a]))) ++a;
      std::size_t eq = tag.find('=', a);
      if (eq == std::string_view::npos) break;
      std::string key = text::trim(tag.substr(a, eq - a));
      std::size_t q = eq + 1;
      while (q < tag.size() && std::isspace(static_cast<unsigned char>(tag[q]))) ++q;
      if (q >= tag.size() || (tag[q] != '"' && tag[q] != '\'')) fail("unquoted attribute");
      std::size_t close = tag.find(tag[q], q + 1);
      if (close == std::string_view::npos) fail("unterminated attribute");
      el->attrs[key] = decode_entities(tag.substr(q + 1, close - q - 1));
      a = close + 1;
    }
    el->parent = cur;
    XmlNode* raw = el.get();
    cur->children.push_back(std::move(el));
    if (!self_closing) cur = raw;
  }
  if (cur != root.get()) fail("unclosed <" + cur->name + ">");
  return root;
}

void gather_text(const XmlNode& n, std::string& out) {
  if (n.name.empty()) {
    out += n.text;
    return;
  }
  for (const auto& c : n.children) gather_text(*c, out);
}

std::string text_of(const XmlNode& n) {
  std::string out;
  gather_text(n, out);
  return text::collapse_ws(out);
}

const XmlNode* child(const XmlNode& n, std::string_view name) {
  for (const auto& c : n.children) {
    if (c->name == name) return c.get();
  }
  return nullptr;
}

std::string attr(const XmlNode& n, const std::string& key) {
  auto it = n.attrs.find(key);
  return it == n.attrs.end() ? std::string() : it->second;
}

enum class Kind { Alpha, Digit, Roman, Upper };
constexpr Kind kCycle[] = {Kind::Alpha, Kind::Digit, Kind::Roman, Kind::Upper, Kind::Digit, Kind::Roman};
constexpr int kLevels = 6;

std::optional<int> roman_value(const std::string& s) {
  if (s.empty() || s.size() > 8) return std::nullopt;
  static const std::map<char, int> v = {{'i', 1}, {'v', 5}, {'x', 10}, {'l', 50}};
  int total = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto it = v.find(s[i]);
    if (it == v.end()) return std::nullopt;
    int cur = it->second;
    int next = i + 1 < s.size() && v.count(s[i + 1]) ? v.at(s[i + 1]) : 0;
    total += cur < next ? -cur : cur;
  }
  // Reject non-canonical spellings such as "iiii" or "vx".
  static const char* canon[] = {"", "i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix"};
  static const char* tens[] = {"", "x", "xx", "xxx", "xl", "l"};
  if (total <= 0 || total >= 60) return std::nullopt;
  if (std::string(tens[total / 10]) + canon[total % 10] != s) return std::nullopt;
  return total;
}

bool repeated_letter(const std::string& s, bool upper) {
  if (s.empty() || s.size() > 3) return false;
  for (char c : s) {
    if (c != s[0]) return false;
  }
  return upper ? std::isupper(static_cast<unsigned char>(s[0])) : std::islower(static_cast<unsigned char>(s[0]));
}

bool fits(Kind k, const std::string& label) {
  switch (k) {
    case Kind::Alpha: return repeated_letter(label, false);
    case Kind::Upper: return repeated_letter(label, true);
    case Kind::Roman: return roman_value(label).has_value();
    case Kind::Digit:
      return !label.empty() && label.size() <= 3 &&
             std::all_of(label.begin(), label.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }
  return false;
}

std::string first_of(Kind k) {
  switch (k) {
    case Kind::Alpha: return "a";
    case Kind::Upper: return "A";
    case Kind::Roman: return "i";
    case Kind::Digit: return "1";
  }
  return "";
}

std::optional<std::string> successor(Kind k, const std::string& prev) {
  if (!fits(k, prev)) return std::nullopt;
  switch (k) {
    case Kind::Digit: return std::to_string(std::stoi(prev) + 1);
    case Kind::Roman: {
      int v = *roman_value(prev) + 1;
      static const char* canon[] = {"", "i", "ii", "iii", "iv", "v", "vi", "vii", "viii", "ix"};
      static const char* tens[] = {"", "x", "xx", "xxx", "xl", "l"};
      return std::string(tens[v / 10]) + canon[v % 10];
    }
    case Kind::Alpha:
    case Kind::Upper: {
      char last = k == Kind::Alpha ? 'z' : 'Z';
      char first = k == Kind::Alpha ? 'a' : 'A';
      if (prev[0] == last) return std::string(prev.size() + 1, first);
      return std::string(prev.size(), static_cast<char>(prev[0] + 1));
    }
  }
  return std::nullopt;
}

}  // namespace

int paragraph_level(const std::vector<std::string>& open, const std::string& label) {
  const int depth = static_cast<int>(open.size());
  // Opening a child ("(i)" right after "(1)") wins over a sibling reading.
  if (depth < kLevels && fits(kCycle[depth], label) && label == first_of(kCycle[depth])) return depth;
  for (int k = std::min(depth, kLevels) - 1; k >= 0; --k) {
    auto next = successor(kCycle[k], open[static_cast<std::size_t>(k)]);
    if (next && *next == label) return k;
  }
  for (int k = std::min(depth, kLevels - 1); k >= 0; --k) {
    if (fits(kCycle[k], label)) return k;
  }
  return -1;
}

namespace {

struct Converter {
  const ConvertOptions& opts;
  statute::StatuteSourceDocument doc;
  std::size_t sections = 0;

  void add(std::string id, std::string heading, std::string content, int depth) {
    doc.nodes.push_back({std::move(id), std::move(heading), std::move(content), depth});
  }

  // Leading "(b)(1)" labels and the offset where the prose starts.
  static std::vector<std::string> leading_labels(const std::string& t) {
    std::vector<std::string> labels;
    std::size_t i = 0;
    while (i < t.size() && t[i] == '(') {
      std::size_t close = t.find(')', i);
      if (close == std::string::npos || close - i - 1 == 0 || close - i - 1 > 5) break;
      std::string l = t.substr(i + 1, close - i - 1);
      if (!std::all_of(l.begin(), l.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)); })) break;
      labels.push_back(l);
      i = close + 1;
      while (i < t.size() && t[i] == ' ' && i + 1 < t.size() && t[i + 1] == '(') ++i;
    }
    return labels;
  }

  void section(const XmlNode& div, int depth) {
    std::string n = attr(div, "N");
    std::string id;
    for (char c : n) {
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') id += c;
    }
    if (id.empty()) return;
    const XmlNode* head = child(div, "HEAD");
    std::string heading = head ? text_of(*head) : n;
    std::size_t section_index = doc.nodes.size();
    add(id, heading, heading, depth);
    ++sections;

    std::vector<std::string> open;
    std::size_t last_node = section_index;
    for (const auto& c : div.children) {
      if (c->name != "P" && c->name != "FP") continue;
      std::string body = text_of(*c);
      if (body.empty()) continue;
      auto labels = c->name == "P" ? leading_labels(body) : std::vector<std::string>{};
      int level = labels.empty() ? -1 : paragraph_level(open, labels.front());
      if (level < 0) {
        auto& target = doc.nodes[last_node].content;
        target += (target.empty() ? "" : " ") + body;
        continue;
      }
      open.resize(static_cast<std::size_t>(level));
      for (std::size_t k = 0; k < labels.size(); ++k) {
        if (k > 0) {
          int lv = static_cast<int>(open.size());
          if (lv >= kLevels || !fits(kCycle[lv], labels[k])) break;
        }
        open.push_back(labels[k]);
        std::string pid = id;
        for (const auto& l : open) pid += "(" + l + ")";
        bool deepest = k + 1 == labels.size() ||
                       static_cast<int>(open.size()) >= kLevels || !fits(kCycle[open.size()], labels[k + 1]);
        add(pid, "", deepest ? body : "(" + labels[k] + ")", depth + static_cast<int>(open.size()));
        last_node = doc.nodes.size() - 1;
        if (deepest) break;
      }
    }
  }

  void walk(const XmlNode& n, int depth, const std::string& part_id) {
    for (const auto& c : n.children) {
      if (c->name.empty()) continue;
      std::string type = attr(*c, "TYPE");
      if (c->name == "DIV5" && type == "PART") {
        std::string id = "Part" + attr(*c, "N");
        const XmlNode* head = child(*c, "HEAD");
        std::string heading = head ? text_of(*head) : id;
        add(id, heading, heading, depth);
        walk(*c, depth + 1, id);
      } else if (c->name == "DIV6" && type == "SUBPART") {
        std::string letter = attr(*c, "N");
        if (!opts.subpart.empty() && letter != opts.subpart) continue;
        std::string id = part_id + "Subpart" + letter;
        const XmlNode* head = child(*c, "HEAD");
        std::string heading = head ? text_of(*head) : id;
        add(id, heading, heading, depth);
        walk(*c, depth + 1, part_id);
      } else if (c->name == "DIV8" && type == "SECTION") {
        section(*c, depth);
      } else {
        walk(*c, depth, part_id);
      }
    }
  }
};

}  // namespace

statute::StatuteSourceDocument convert_xml(std::string_view xml, const ConvertOptions& opts) {
  auto dom = parse_xml(xml);
  Converter conv{opts, {}, 0};
  conv.doc.law_name = opts.law_name;
  conv.add(opts.root_id, opts.law_name, opts.law_name, 0);
  conv.walk(*dom, 1, "");
  if (conv.sections == 0) throw Error(ErrorCode::MalformedDocument, "no sections found in regulation XML");
  return conv.doc;
}

std::string fetch_part_xml(const std::string& base_url, const std::string& date, int title, int part,
                           std::chrono::seconds timeout) {
  auto [origin, prefix] = gateway::split_base_url(base_url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_follow_location(true);
  std::string path = prefix + "/api/versioner/v1/full/" + date + "/title-" + std::to_string(title) +
                     ".xml?part=" + std::to_string(part);
  auto res = client.Get(path);
  if (!res) throw Error(ErrorCode::NetworkError, "regulation fetch failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::NetworkError, "regulation fetch returned HTTP " + std::to_string(res->status));
  return res->body;
}

}  // namespace ciforge::ecfr
