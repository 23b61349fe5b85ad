#include "selectshare/framing.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <unordered_map>

#include "selectshare/error.hpp"

namespace selectshare::framing {

namespace {

using Leaves = std::vector<std::pair<JsonPath, Json>>;

struct Selection {
  bool satisfied = true;
  Leaves leaves;
};

bool is_reveal_marker(const Json& v) { return v.is_string() && v.get_ref<const std::string&>().empty(); }

bool is_wildcard_frame(const Json& frame) {
  return frame.is_object() && frame.contains(std::string(kWildcard));
}

// A frame value "requires" something when an absent node cannot satisfy it.
bool requires_match(const Json& fv) {
  if (is_reveal_marker(fv)) return false;
  if (fv.is_primitive()) return true;
  if (is_wildcard_frame(fv)) return false;
  for (const auto& [k, child] : fv.items())
    if (requires_match(child)) return true;
  return false;
}

void all_leaves(const Json& node, const JsonPath& path, Leaves& out) {
  if (node.is_object() && !node.empty()) {
    for (const auto& [k, child] : node.items()) all_leaves(child, path.child(k), out);
  } else if (node.is_array() && !node.empty()) {
    for (std::size_t i = 0; i < node.size(); ++i) all_leaves(node[i], path.child(i), out);
  } else if (!path.empty()) {
    out.emplace_back(path, node);
  }
}

Selection select_value(const Json& node, const Json& fv, const JsonPath& path);

Selection select_object(const Json& node, const Json& frame, const JsonPath& path) {
  if (is_wildcard_frame(frame)) {
    if (frame.size() != 1)
      throw Error(Errc::FrameShapeMismatch, "\"*\" must be the only key at " + path.to_display());
    if (!node.is_array())
      throw Error(Errc::FrameShapeMismatch, "\"*\" applied to a non-array at " + path.to_display());
    const Json& inner = frame.at(std::string(kWildcard));
    Selection out;
    for (std::size_t i = 0; i < node.size(); ++i) {
      Selection s = select_value(node[i], inner, path.child(i));
      if (s.satisfied) std::move(s.leaves.begin(), s.leaves.end(), std::back_inserter(out.leaves));
    }
    return out;
  }
  if (!node.is_object()) return {!requires_match(frame), {}};

  Selection out;
  for (const auto& [key, fv] : frame.items()) {
    auto it = node.find(key);
    if (it == node.end()) {
      if (requires_match(fv)) out.satisfied = false;
      continue;
    }
    Selection s = select_value(*it, fv, path.child(key));
    if (!s.satisfied) out.satisfied = false;
    std::move(s.leaves.begin(), s.leaves.end(), std::back_inserter(out.leaves));
  }
  if (!out.satisfied) out.leaves.clear();
  return out;
}

Selection select_value(const Json& node, const Json& fv, const JsonPath& path) {
  if (is_reveal_marker(fv)) {
    Selection s;
    all_leaves(node, path, s.leaves);
    return s;
  }
  if (fv.is_object()) return select_object(node, fv, path);
  if (fv.is_array()) throw Error(Errc::FrameShapeMismatch, "frame arrays are not allowed at " + path.to_display());
  // Constraint on a primitive.
  if (node.is_structured()) return {false, {}};
  if (canonical::render_value(node) != canonical::render_value(fv)) return {false, {}};
  return {true, {{path, node}}};
}

struct Node {
  std::unique_ptr<Json> leaf;
  std::map<std::string, Node> keys;
  std::map<std::size_t, Node> indices;

  bool empty() const { return !leaf && keys.empty() && indices.empty(); }
};

[[noreturn]] void inconsistent(const JsonPath& p) {
  throw Error(Errc::InconsistentPaths, "inconsistent sub-item paths at " + p.to_display());
}

void insert(Node& root, const JsonPath& path, const Json& value) {
  Node* cur = &root;
  const auto& segs = path.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (cur->leaf) inconsistent(path);
    if (const auto* key = std::get_if<std::string>(&segs[i])) {
      if (!cur->indices.empty()) inconsistent(path);
      cur = &cur->keys[*key];
    } else {
      if (!cur->keys.empty()) inconsistent(path);
      cur = &cur->indices[std::get<std::size_t>(segs[i])];
    }
  }
  if (!cur->empty()) inconsistent(path);
  cur->leaf = std::make_unique<Json>(value);
}

Json build(const Node& node, const JsonPath& display, const JsonPath& original,
           std::vector<std::pair<JsonPath, JsonPath>>& positions) {
  if (node.leaf) {
    positions.emplace_back(display, original);
    return *node.leaf;
  }
  if (!node.indices.empty()) {
    Json arr = Json::array();
    std::size_t j = 0;
    for (const auto& [idx, child] : node.indices)
      arr.push_back(build(child, display.child(j++), original.child(idx), positions));
    return arr;
  }
  Json obj = Json::object();
  for (const auto& [key, child] : node.keys)
    obj[key] = build(child, display.child(key), original.child(key), positions);
  return obj;
}

Leaves sorted_unique(Leaves leaves) {
  std::sort(leaves.begin(), leaves.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  leaves.erase(std::unique(leaves.begin(), leaves.end(),
                           [](const auto& a, const auto& b) { return a.first == b.first; }),
               leaves.end());
  return leaves;
}

}  // namespace

Frame Frame::from_json(const Json& j) {
  Frame f;
  if (j.is_object()) {
    f.alternatives_.push_back(j);
  } else if (j.is_array()) {
    for (const auto& alt : j) {
      if (!alt.is_object()) throw Error(Errc::FrameShapeMismatch, "frame alternatives must be objects");
      f.alternatives_.push_back(alt);
    }
  } else {
    throw Error(Errc::FrameShapeMismatch, "a frame must be an object");
  }
  return f;
}

Json Frame::to_json() const {
  if (alternatives_.size() == 1) return alternatives_.front();
  return Json(alternatives_);
}

bool Frame::empty() const noexcept {
  return std::all_of(alternatives_.begin(), alternatives_.end(), [](const Json& a) { return a.empty(); });
}

SparseSubItem apply_frame(const Json& doc, const Frame& frame) {
  Leaves all;
  for (const auto& alt : frame.alternatives()) {
    Selection s = select_object(doc, alt, JsonPath{});
    if (s.satisfied) std::move(s.leaves.begin(), s.leaves.end(), std::back_inserter(all));
  }
  return SparseSubItem{sorted_unique(std::move(all))};
}

std::vector<std::size_t> reveal_indices(const canonical::CanonicalForm& canon, const SparseSubItem& sub) {
  std::unordered_map<std::string_view, std::size_t> position;
  position.reserve(canon.messages.size());
  for (std::size_t i = 0; i < canon.messages.size(); ++i) position.emplace(canon.messages[i].encoding, i);
  std::vector<std::size_t> out;
  out.reserve(sub.revealed.size());
  for (const auto& [path, value] : sub.revealed) {
    std::string enc = canonical::encode_message(path, value);
    auto it = position.find(enc);
    if (it == position.end())
      throw Error(Errc::MessageNotFound, "no signed message for " + path.to_display());
    out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Frame frame_from_fields(const std::vector<std::string>& fields) {
  if (fields.empty()) throw Error(Errc::EmptyFieldList, "no fields requested");
  std::vector<std::string> unique_fields;
  for (const auto& f : fields) {
    if (f.empty()) throw Error(Errc::MalformedInput, "empty field name");
    if (std::find(unique_fields.begin(), unique_fields.end(), f) == unique_fields.end())
      unique_fields.push_back(f);
  }
  Json alternatives = Json::array();
  for (const auto& f : unique_fields) {
    alternatives.push_back({{"measurements",
                             {{"*", {{"field", f}, {"values", {{"*", {{"value", ""}}}}}}}}}});
  }
  return Frame::from_json(alternatives.size() == 1 ? alternatives[0] : alternatives);
}

Reconstruction reconstruct(const SparseSubItem& sub) {
  Node root;
  for (const auto& [path, value] : sub.revealed) {
    if (path.empty()) inconsistent(path);
    insert(root, path, value);
  }
  Reconstruction r;
  if (root.empty()) {
    r.display = Json::object();
    return r;
  }
  r.display = build(root, JsonPath{}, JsonPath{}, r.positions);
  return r;
}

SparseSubItem sub_item_from_messages(std::vector<std::pair<JsonPath, Json>> leaves) {
  std::sort(leaves.begin(), leaves.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  auto dup = std::adjacent_find(leaves.begin(), leaves.end(),
                                [](const auto& a, const auto& b) { return a.first == b.first; });
  if (dup != leaves.end()) inconsistent(dup->first);
  return SparseSubItem{std::move(leaves)};
}

}  // namespace selectshare::framing
