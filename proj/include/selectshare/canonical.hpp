#pragma once

// Path/value canonicalization of JSON documents into signable messages.
//
// Every leaf primitive of a document becomes one message `<path>=<value>`:
//   key segment    "key"      (only `"` and `\` are backslash-escaped)
//   index segment  [12]
//   value          canonical JSON literal; `{}` / `[]` tag an empty container
// Messages are ordered by path (keys by byte value, indices numerically), so
// the messages of any subset of leaves are a subset of the document's.

#include <compare>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace selectshare::canonical {

using Json = nlohmann::json;

/// An object key or an array index.
using PathSegment = std::variant<std::string, std::size_t>;

class JsonPath {
 public:
  JsonPath() = default;
  explicit JsonPath(std::vector<PathSegment> segments);

  const std::vector<PathSegment>& segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }

  JsonPath child(std::string key) const;
  JsonPath child(std::size_t index) const;
  bool is_prefix_of(const JsonPath& other) const;

  /// Debug rendering, e.g. `measurements[0].field`.
  std::string to_display() const;

  friend bool operator==(const JsonPath&, const JsonPath&) = default;
  friend std::strong_ordering operator<=>(const JsonPath& a, const JsonPath& b);

 private:
  std::vector<PathSegment> segments_;
};

struct CanonicalMessage {
  JsonPath path;
  Json value;  ///< primitive, or an empty object/array tag
  std::string encoding;
};

struct CanonicalForm {
  std::vector<CanonicalMessage> messages;

  std::size_t count() const noexcept { return messages.size(); }
  std::vector<std::string> encodings() const;
};

struct Options {
  std::size_t max_depth = 64;
};

/// Canonicalize an in-memory document. The root must be an object or array.
CanonicalForm canonicalize(const Json& doc, const Options& options = {});

/// Parse `text` (rejecting duplicate object keys) and canonicalize it.
CanonicalForm canonicalize_text(std::string_view text, const Options& options = {});

/// Parse JSON text, throwing Error(DuplicateKey) if any object repeats a key.
Json parse_strict(std::string_view text, std::size_t max_depth = 64);

/// Canonical form of an explicit set of (path, leaf) pairs; used for sparse
/// sub-items that keep their original array indices.
CanonicalForm canonicalize_leaves(std::vector<std::pair<JsonPath, Json>> leaves);

std::string encode_message(const JsonPath& path, const Json& value);
std::pair<JsonPath, Json> decode_message(std::string_view bytes);

/// Canonical JSON literal for a leaf value (shortest round-trip numbers, -0 -> 0).
std::string render_value(const Json& value);

/// Key-sorted, whitespace-free rendering of any document.
std::string render_document(const Json& doc);

}  // namespace selectshare::canonical
