#pragma once

// Frame-driven derivation of sub-items.
//
// A frame is a JSON object mirroring the document:
//   "key": ""          reveal the leaf (or every leaf under the node)
//   "key": <primitive> constraint; the node must equal it, and it is revealed
//   "key": { ... }     recurse into an object
//   "*": { ... }       the node is an array; apply the inner frame to each
//                      element and keep only elements meeting its constraints
// A Frame holds one or more such objects; its selection is their union.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "selectshare/canonical.hpp"

namespace selectshare::framing {

using canonical::Json;
using canonical::JsonPath;

inline constexpr std::string_view kWildcard = "*";
inline constexpr std::string_view kRevealMarker = "";

class Frame {
 public:
  Frame() = default;
  /// Accepts a single frame object or an array of frame objects (disjunction).
  static Frame from_json(const Json& j);

  const std::vector<Json>& alternatives() const noexcept { return alternatives_; }
  Json to_json() const;
  bool empty() const noexcept;

 private:
  std::vector<Json> alternatives_;
};

/// Revealed (original path, leaf) pairs, sorted by path, unique.
struct SparseSubItem {
  std::vector<std::pair<JsonPath, Json>> revealed;

  bool empty() const noexcept { return revealed.empty(); }
  std::size_t size() const noexcept { return revealed.size(); }
};

SparseSubItem apply_frame(const Json& doc, const Frame& frame);

/// Ascending positions in `canon` of the sub-item's leaves.
std::vector<std::size_t> reveal_indices(const canonical::CanonicalForm& canon,
                                        const SparseSubItem& sub);

/// The measurement frame for a set of field names: for each field, constrain
/// `measurements[*].field` to it and reveal every `values[*].value`.
Frame frame_from_fields(const std::vector<std::string>& fields);

struct Reconstruction {
  Json display;  ///< arrays compacted, original indices dropped
  /// (display path, original path) per revealed leaf.
  std::vector<std::pair<JsonPath, JsonPath>> positions;
};

Reconstruction reconstruct(const SparseSubItem& sub);

/// Rebuild a sub-item from decoded (path, value) messages.
SparseSubItem sub_item_from_messages(std::vector<std::pair<JsonPath, Json>> leaves);

}  // namespace selectshare::framing
