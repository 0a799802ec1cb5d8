#pragma once

#include "ciforge/norm_id.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ciforge::statute {

// Hierarchical interchange format: a pre-order node list where `depth`
// encodes nesting. A depth-0 first node is the root; otherwise a root named
// after `law_name` is synthesized and the listed nodes start at depth 1.
struct SourceNode {
  std::string id;
  std::string heading;
  std::string content;
  int depth = 0;
};

struct StatuteSourceDocument {
  std::string law_name;
  std::vector<SourceNode> nodes;

  static StatuteSourceDocument from_json(const nlohmann::json& j);
  static StatuteSourceDocument load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct StatuteNode {
  std::string key;                // canonical id or synthetic label ("HIPAA", "Part164")
  std::optional<NormId> norm_id;  // set when the key is a section identifier
  std::string heading;
  std::string content;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;  // document order

  bool is_leaf() const { return children.empty(); }
  // "key: content", falling back to the heading when content is empty.
  std::string rendered_line() const;
};

struct ReferEdge {
  std::string source;
  std::string target;
  bool dangling = false;  // target not present in the graph

  bool operator==(const ReferEdge&) const = default;
};

class StatuteGraph {
 public:
  const std::string& law_name() const { return law_name_; }
  const std::vector<StatuteNode>& nodes() const { return nodes_; }
  const StatuteNode& node(std::size_t i) const { return nodes_.at(i); }
  const StatuteNode& root() const { return nodes_.at(root_); }
  std::size_t root_index() const { return root_; }

  std::optional<std::size_t> find(const std::string& key) const;

  // (child, parent) pairs in document order.
  std::vector<std::pair<std::string, std::string>> subsume_edges() const;
  // Sorted by (source, target) in canonical order; unique.
  const std::vector<ReferEdge>& refer_edges() const { return refers_; }
  std::vector<ReferEdge> dangling_refers() const;

  // Node indices from the root down to `i`, inclusive.
  std::vector<std::size_t> path_from_root(std::size_t i) const;
  std::size_t leaf_count() const;

  // Throws Error{MalformedDocument} if the subsume relation is not a tree
  // rooted at root() or a refer edge starts outside the graph.
  void validate() const;

  nlohmann::json to_json() const;
  const StatuteSourceDocument& source() const { return source_; }

 private:
  friend StatuteGraph parse_statute(const StatuteSourceDocument& doc);

  std::string law_name_;
  std::vector<StatuteNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<ReferEdge> refers_;
  std::size_t root_ = 0;
  StatuteSourceDocument source_;
};

// Errors: EmptyDocument, DuplicateId, MalformedId, MalformedDocument (depth
// jumps, multiple roots).
StatuteGraph parse_statute(const StatuteSourceDocument& doc);

// Section references mentioned in `content` of a node whose own id is
// `self` (self references dropped, duplicates collapsed).
std::vector<NormId> extract_references(std::string_view content, const std::optional<NormId>& self);

}  // namespace ciforge::statute
