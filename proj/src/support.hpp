#pragma once

// Helpers shared by the HTTP services; not part of the public headers.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <httplib.h>
#include <json.hpp>

namespace selectshare::support {

/// Writes `content` to a sibling temp file, fsyncs it and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Constant-time comparison of the X-Admin-Key header against `expected`.
/// An empty `expected` rejects everything.
bool header_key_matches(const httplib::Request& req, std::string_view header, std::string_view expected);

/// RFC 7807-style problem body.
void send_problem(httplib::Response& res, int status, std::string_view reason, std::string_view detail);

void send_json(httplib::Response& res, int status, const nlohmann::json& body);

struct UrlParts {
  std::string origin;  ///< scheme://host[:port]
  std::string path;    ///< path prefix without trailing slash; may be empty
};
/// Throws Error(Config) when `url` has no scheme.
UrlParts split_url(std::string_view url);

inline std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace selectshare::support
