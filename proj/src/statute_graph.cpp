#include "ciforge/statute_graph.hpp"

#include "ciforge/error.hpp"
#include "ciforge/text.hpp"

#include <algorithm>
#include <set>

namespace ciforge::statute {

using nlohmann::json;

StatuteSourceDocument StatuteSourceDocument::from_json(const json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array())
    throw Error(ErrorCode::MalformedDocument, "statute document needs a 'nodes' array");
  StatuteSourceDocument doc;
  doc.law_name = j.value("law_name", "");
  for (const auto& n : j["nodes"]) {
    SourceNode node;
    node.id = n.value("id", "");
    node.heading = n.value("heading", "");
    node.content = n.value("content", "");
    if (!n.contains("depth") || !n["depth"].is_number_integer())
      throw Error(ErrorCode::MalformedDocument, "node '" + node.id + "' lacks an integer depth");
    node.depth = n["depth"].get<int>();
    doc.nodes.push_back(std::move(node));
  }
  return doc;
}

StatuteSourceDocument StatuteSourceDocument::load(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, path.string() + ": " + e.what());
  }
  return from_json(j);
}

json StatuteSourceDocument::to_json() const {
  json nodes_json = json::array();
  for (const auto& n : nodes) {
    nodes_json.push_back({{"id", n.id}, {"heading", n.heading}, {"content", n.content}, {"depth", n.depth}});
  }
  return {{"law_name", law_name}, {"nodes", std::move(nodes_json)}};
}

std::string StatuteNode::rendered_line() const {
  std::string body = text::collapse_ws(content);
  if (body.empty()) body = text::collapse_ws(heading);
  return key + ": " + body;
}

std::optional<std::size_t> StatuteGraph::find(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<std::string, std::string>> StatuteGraph::subsume_edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& n : nodes_) {
    if (n.parent) out.emplace_back(n.key, nodes_[*n.parent].key);
  }
  return out;
}

std::vector<ReferEdge> StatuteGraph::dangling_refers() const {
  std::vector<ReferEdge> out;
  std::copy_if(refers_.begin(), refers_.end(), std::back_inserter(out),
               [](const ReferEdge& e) { return e.dangling; });
  return out;
}

std::vector<std::size_t> StatuteGraph::path_from_root(std::size_t i) const {
  std::vector<std::size_t> path;
  std::optional<std::size_t> cur = i;
  while (cur) {
    path.push_back(*cur);
    if (path.size() > nodes_.size()) throw Error(ErrorCode::MalformedDocument, "cycle in subsume edges");
    cur = nodes_[*cur].parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t StatuteGraph::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const StatuteNode& n) { return n.is_leaf(); }));
}

void StatuteGraph::validate() const {
  if (nodes_.empty()) throw Error(ErrorCode::EmptyDocument, "graph has no nodes");
  std::size_t roots = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (!n.parent) {
      ++roots;
      if (i != root_) throw Error(ErrorCode::MalformedDocument, "node '" + n.key + "' has no parent");
    } else {
      const auto& siblings = nodes_[*n.parent].children;
      if (std::count(siblings.begin(), siblings.end(), i) != 1)
        throw Error(ErrorCode::MalformedDocument, "parent of '" + n.key + "' does not list it once");
    }
    if (n.is_leaf() && text::trim(n.content).empty() && text::trim(n.heading).empty())
      throw Error(ErrorCode::MalformedDocument, "leaf '" + n.key + "' has no content");
    if (path_from_root(i).front() != root_)
      throw Error(ErrorCode::MalformedDocument, "'" + n.key + "' does not reach the root");
  }
  if (roots != 1) throw Error(ErrorCode::MalformedDocument, "expected exactly one root");
  for (const auto& e : refers_) {
    if (!find(e.source)) throw Error(ErrorCode::MalformedDocument, "refer edge from unknown '" + e.source + "'");
    if (e.dangling == find(e.target).has_value())
      throw Error(ErrorCode::MalformedDocument, "refer edge dangling flag wrong for '" + e.target + "'");
  }
}

json StatuteGraph::to_json() const {
  json subsume = json::array();
  for (const auto& [child, parent] : subsume_edges()) subsume.push_back({child, parent});
  json refer = json::array();
  for (const auto& e : refers_) {
    refer.push_back({{"source", e.source}, {"target", e.target}, {"dangling", e.dangling}});
  }
  return {{"law_name", law_name_},
          {"root", root().key},
          {"node_count", nodes_.size()},
          {"leaf_count", leaf_count()},
          {"subsume_edges", std::move(subsume)},
          {"refer_edges", std::move(refer)},
          {"source", source_.to_json()}};
}

std::vector<NormId> extract_references(std::string_view content, const std::optional<NormId>& self) {
  std::vector<NormId> found;
  for (auto& m : find_norm_ids(content)) found.push_back(std::move(m.id));
  if (self) {
    for (auto& m : find_paragraph_refs(content, *self)) found.push_back(std::move(m.id));
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  if (self) std::erase(found, *self);
  return found;
}

namespace {

bool looks_like_section_id(std::string_view id) {
  std::string t = text::trim(id);
  return !t.empty() && ((t[0] >= '0' && t[0] <= '9') || t.rfind("\xC2\xA7", 0) == 0);
}

}  // namespace

StatuteGraph parse_statute(const StatuteSourceDocument& doc) {
  if (doc.nodes.empty()) throw Error(ErrorCode::EmptyDocument, "statute document has no nodes");

  StatuteGraph g;
  g.source_ = doc;
  g.law_name_ = doc.law_name;

  auto add_node = [&](const std::string& raw_id, const std::string& heading,
                      const std::string& content) -> std::size_t {
    StatuteNode node;
    if (looks_like_section_id(raw_id)) {
      node.norm_id = NormId::parse(raw_id);
      node.key = node.norm_id->canonical();
    } else {
      node.key = text::trim(raw_id);
      if (node.key.empty()) throw Error(ErrorCode::MalformedId, "node with empty id");
    }
    node.heading = heading;
    node.content = content;
    if (g.index_.count(node.key)) throw Error(ErrorCode::DuplicateId, "duplicate node id '" + node.key + "'");
    g.index_.emplace(node.key, g.nodes_.size());
    g.nodes_.push_back(std::move(node));
    return g.nodes_.size() - 1;
  };

  // stack[d] holds the most recent node at depth d.
  std::vector<std::size_t> stack;
  std::size_t first = 0;
  if (doc.nodes.front().depth == 0) {
    const auto& r = doc.nodes.front();
    stack.push_back(add_node(r.id, r.heading, r.content));
    first = 1;
  } else {
    std::string name = text::trim(doc.law_name);
    if (name.empty()) throw Error(ErrorCode::MalformedDocument, "no depth-0 root and no law_name");
    stack.push_back(add_node(name, name, ""));
  }
  g.root_ = stack.front();
  if (!g.nodes_[g.root_].norm_id && g.law_name_.empty()) g.law_name_ = g.nodes_[g.root_].key;

  for (std::size_t i = first; i < doc.nodes.size(); ++i) {
    const auto& src = doc.nodes[i];
    if (src.depth <= 0)
      throw Error(ErrorCode::MalformedDocument, "node '" + src.id + "' has depth " +
                                                    std::to_string(src.depth) + " but the root is already set");
    if (static_cast<std::size_t>(src.depth) > stack.size())
      throw Error(ErrorCode::MalformedDocument, "node '" + src.id + "' skips a nesting level");
    stack.resize(static_cast<std::size_t>(src.depth));
    std::size_t parent = stack.back();
    std::size_t idx = add_node(src.id, src.heading, src.content);
    g.nodes_[idx].parent = parent;
    g.nodes_[parent].children.push_back(idx);
    stack.push_back(idx);
  }

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& n : g.nodes_) {
    for (const auto& target : extract_references(n.content, n.norm_id)) {
      std::string t = target.canonical();
      if (seen.emplace(n.key, t).second) {
        g.refers_.push_back({n.key, t, !g.index_.count(t)});
      }
    }
  }
  std::sort(g.refers_.begin(), g.refers_.end(), [](const ReferEdge& a, const ReferEdge& b) {
    if (a.source != b.source) return canonical_less(a.source, b.source);
    return canonical_less(a.target, b.target);
  });

  g.validate();
  return g;
}

}  // namespace ciforge::statute
