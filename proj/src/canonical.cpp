#include "selectshare/canonical.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "selectshare/error.hpp"

namespace selectshare::canonical {

namespace {

std::strong_ordering compare_segments(const PathSegment& a, const PathSegment& b) {
  if (a.index() != b.index()) return a.index() <=> b.index();  // key < index
  if (const auto* ka = std::get_if<std::string>(&a)) {
    int c = ka->compare(std::get<std::string>(b));
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }
  return std::get<std::size_t>(a) <=> std::get<std::size_t>(b);
}

void append_json_string(std::string& out, std::string_view s) {
  static constexpr char kHex[] = "0123456789abcdef";
  out += '"';
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out += kHex[c >> 4];
          out += kHex[c & 15];
        } else {
          out += ch;
        }
    }
  }
  out += '"';
}

void append_key_segment(std::string& out, std::string_view key) {
  out += '"';
  for (char ch : key) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  out += '"';
}

std::string render_number(const Json& v) {
  if (v.is_number_integer() && !v.is_number_unsigned()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(Errc::NonFiniteNumber, "non-finite number");
  // Integral values within the exactly-representable range print as integers,
  // which also folds -0 into 0.
  if (std::trunc(d) == d && std::fabs(d) < 9007199254740992.0)
    return std::to_string(static_cast<std::int64_t>(d));
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  if (ec != std::errc{}) throw Error(Errc::NonFiniteNumber, "number not representable");
  return std::string(buf, end);
}

void append_path(std::string& out, const JsonPath& path) {
  for (const auto& seg : path.segments()) {
    if (const auto* key = std::get_if<std::string>(&seg)) {
      append_key_segment(out, *key);
    } else {
      out += '[';
      out += std::to_string(std::get<std::size_t>(seg));
      out += ']';
    }
  }
}

void collect(const Json& node, const JsonPath& path, std::size_t depth, const Options& options,
             std::vector<CanonicalMessage>& out) {
  if (node.is_object() || node.is_array()) {
    if (depth + 1 > options.max_depth)
      throw Error(Errc::DepthExceeded, "nesting deeper than " + std::to_string(options.max_depth));
    if (node.empty()) {
      if (!path.empty()) {
        Json tag = node.is_object() ? Json::object() : Json::array();
        out.push_back({path, tag, encode_message(path, tag)});
      }
      return;
    }
    if (node.is_object()) {
      for (const auto& [key, child] : node.items()) {
        if (key.empty()) throw Error(Errc::MalformedInput, "empty object key at " + path.to_display());
        collect(child, path.child(key), depth + 1, options, out);
      }
    } else {
      for (std::size_t i = 0; i < node.size(); ++i)
        collect(node[i], path.child(i), depth + 1, options, out);
    }
    return;
  }
  if (node.is_binary() || node.is_discarded())
    throw Error(Errc::MalformedInput, "unsupported JSON value at " + path.to_display());
  out.push_back({path, node, encode_message(path, node)});
}

[[noreturn]] void malformed(std::string_view why) {
  throw Error(Errc::MalformedMessage, std::string("malformed message: ") + std::string(why));
}

void render_into(std::string& out, const Json& node) {
  if (node.is_object()) {
    out += '{';
    bool first = true;
    for (const auto& [key, child] : node.items()) {
      if (!first) out += ',';
      first = false;
      append_json_string(out, key);
      out += ':';
      render_into(out, child);
    }
    out += '}';
  } else if (node.is_array()) {
    out += '[';
    for (std::size_t i = 0; i < node.size(); ++i) {
      if (i) out += ',';
      render_into(out, node[i]);
    }
    out += ']';
  } else {
    out += render_value(node);
  }
}

}  // namespace

JsonPath::JsonPath(std::vector<PathSegment> segments) : segments_(std::move(segments)) {}

JsonPath JsonPath::child(std::string key) const {
  JsonPath p = *this;
  p.segments_.emplace_back(std::move(key));
  return p;
}

JsonPath JsonPath::child(std::size_t index) const {
  JsonPath p = *this;
  p.segments_.emplace_back(index);
  return p;
}

bool JsonPath::is_prefix_of(const JsonPath& other) const {
  return segments_.size() <= other.segments_.size() &&
         std::equal(segments_.begin(), segments_.end(), other.segments_.begin());
}

std::string JsonPath::to_display() const {
  std::string out;
  for (const auto& seg : segments_) {
    if (const auto* key = std::get_if<std::string>(&seg)) {
      if (!out.empty()) out += '.';
      out += *key;
    } else {
      out += '[' + std::to_string(std::get<std::size_t>(seg)) + ']';
    }
  }
  return out.empty() ? "$" : out;
}

std::strong_ordering operator<=>(const JsonPath& a, const JsonPath& b) {
  std::size_t n = std::min(a.segments_.size(), b.segments_.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (auto c = compare_segments(a.segments_[i], b.segments_[i]); c != 0) return c;
  }
  return a.segments_.size() <=> b.segments_.size();
}

std::vector<std::string> CanonicalForm::encodings() const {
  std::vector<std::string> out;
  out.reserve(messages.size());
  for (const auto& m : messages) out.push_back(m.encoding);
  return out;
}

std::string render_value(const Json& value) {
  switch (value.type()) {
    case Json::value_t::null: return "null";
    case Json::value_t::boolean: return value.get<bool>() ? "true" : "false";
    case Json::value_t::string: {
      std::string out;
      append_json_string(out, value.get_ref<const std::string&>());
      return out;
    }
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned:
    case Json::value_t::number_float: return render_number(value);
    case Json::value_t::object:
      if (value.empty()) return "{}";
      break;
    case Json::value_t::array:
      if (value.empty()) return "[]";
      break;
    default: break;
  }
  throw Error(Errc::MalformedInput, "not a leaf value");
}

std::string render_document(const Json& doc) {
  std::string out;
  render_into(out, doc);
  return out;
}

std::string encode_message(const JsonPath& path, const Json& value) {
  if (path.empty()) throw Error(Errc::MalformedInput, "message path must be non-empty");
  std::string out;
  append_path(out, path);
  out += '=';
  out += render_value(value);
  return out;
}

std::pair<JsonPath, Json> decode_message(std::string_view bytes) {
  std::vector<PathSegment> segments;
  std::size_t pos = 0;
  while (pos < bytes.size() && bytes[pos] != '=') {
    if (bytes[pos] == '"') {
      std::string key;
      ++pos;
      bool closed = false;
      while (pos < bytes.size()) {
        char c = bytes[pos++];
        if (c == '\\') {
          if (pos >= bytes.size()) malformed("dangling escape");
          char e = bytes[pos++];
          if (e != '"' && e != '\\') malformed("bad escape in key");
          key += e;
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          key += c;
        }
      }
      if (!closed) malformed("unterminated key");
      if (key.empty()) malformed("empty key");
      segments.emplace_back(std::move(key));
    } else if (bytes[pos] == '[') {
      std::size_t close = bytes.find(']', pos);
      if (close == std::string_view::npos) malformed("unterminated index");
      std::string_view digits = bytes.substr(pos + 1, close - pos - 1);
      if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) malformed("bad index");
      std::size_t index = 0;
      auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
      if (ec != std::errc{} || end != digits.data() + digits.size()) malformed("bad index");
      segments.emplace_back(index);
      pos = close + 1;
    } else {
      malformed("unexpected character in path");
    }
  }
  if (pos >= bytes.size()) malformed("missing '='");
  if (segments.empty()) malformed("empty path");
  std::string_view literal = bytes.substr(pos + 1);
  Json value;
  if (literal == "{}") {
    value = Json::object();
  } else if (literal == "[]") {
    value = Json::array();
  } else {
    value = Json::parse(literal.begin(), literal.end(), nullptr, false);
    if (value.is_discarded() || value.is_structured()) malformed("bad value literal");
  }
  JsonPath path(std::move(segments));
  std::string again;
  try {
    again = encode_message(path, value);
  } catch (const Error&) {
    malformed("value does not re-encode");
  }
  if (again != bytes) malformed("non-canonical encoding");
  return {std::move(path), std::move(value)};
}

Json parse_strict(std::string_view text, std::size_t max_depth) {
  std::vector<std::set<std::string>> open_objects;
  std::vector<bool> is_object;
  bool duplicate = false;
  bool too_deep = false;
  std::string duplicate_key;
  Json::parser_callback_t cb = [&](int depth, Json::parse_event_t event, Json& parsed) {
    switch (event) {
      case Json::parse_event_t::object_start:
        is_object.push_back(true);
        open_objects.emplace_back();
        if (static_cast<std::size_t>(depth) + 1 > max_depth) too_deep = true;
        break;
      case Json::parse_event_t::array_start:
        is_object.push_back(false);
        if (static_cast<std::size_t>(depth) + 1 > max_depth) too_deep = true;
        break;
      case Json::parse_event_t::object_end:
        open_objects.pop_back();
        is_object.pop_back();
        break;
      case Json::parse_event_t::array_end: is_object.pop_back(); break;
      case Json::parse_event_t::key:
        if (!open_objects.empty() && !open_objects.back().insert(parsed.get<std::string>()).second) {
          if (!duplicate) duplicate_key = parsed.get<std::string>();
          duplicate = true;
        }
        break;
      case Json::parse_event_t::value: break;
    }
    return true;
  };
  Json doc = Json::parse(text.begin(), text.end(), cb, false);
  if (doc.is_discarded()) throw Error(Errc::MalformedInput, "invalid JSON");
  if (duplicate) throw Error(Errc::DuplicateKey, "duplicate object key \"" + duplicate_key + "\"");
  if (too_deep) throw Error(Errc::DepthExceeded, "nesting deeper than " + std::to_string(max_depth));
  return doc;
}

CanonicalForm canonicalize(const Json& doc, const Options& options) {
  if (!doc.is_object() && !doc.is_array())
    throw Error(Errc::NotAContainer, "document root must be an object or array");
  CanonicalForm form;
  collect(doc, JsonPath{}, 0, options, form.messages);
  std::sort(form.messages.begin(), form.messages.end(),
            [](const auto& a, const auto& b) { return a.path < b.path; });
  return form;
}

CanonicalForm canonicalize_text(std::string_view text, const Options& options) {
  return canonicalize(parse_strict(text, options.max_depth), options);
}

CanonicalForm canonicalize_leaves(std::vector<std::pair<JsonPath, Json>> leaves) {
  CanonicalForm form;
  form.messages.reserve(leaves.size());
  for (auto& [path, value] : leaves) {
    if (value.is_structured() && !value.empty())
      throw Error(Errc::MalformedInput, "non-leaf value at " + path.to_display());
    std::string enc = encode_message(path, value);
    form.messages.push_back({std::move(path), std::move(value), std::move(enc)});
  }
  std::sort(form.messages.begin(), form.messages.end(),
            [](const auto& a, const auto& b) { return a.path < b.path; });
  auto dup = std::adjacent_find(form.messages.begin(), form.messages.end(),
                                [](const auto& a, const auto& b) { return a.path == b.path; });
  if (dup != form.messages.end())
    throw Error(Errc::MalformedInput, "duplicate leaf path " + dup->path.to_display());
  return form;
}

}  // namespace selectshare::canonical
