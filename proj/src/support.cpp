#include "support.hpp"

#include <fcntl.h>
#include <openssl/crypto.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "selectshare/error.hpp"

namespace selectshare::support {

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) throw Error(Errc::Io, "cannot open " + tmp.string());
  std::size_t off = 0;
  while (off < content.size()) {
    ssize_t n = ::write(fd, content.data() + off, content.size() - off);
    if (n <= 0) {
      ::close(fd);
      throw Error(Errc::Io, "write failed for " + tmp.string());
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    throw Error(Errc::Io, "fsync failed for " + tmp.string());
  }
  ::close(fd);
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool header_key_matches(const httplib::Request& req, std::string_view header, std::string_view expected) {
  if (expected.empty() || !req.has_header(std::string(header))) return false;
  std::string got = req.get_header_value(std::string(header));
  return got.size() == expected.size() && CRYPTO_memcmp(got.data(), expected.data(), got.size()) == 0;
}

void send_problem(httplib::Response& res, int status, std::string_view reason, std::string_view detail) {
  nlohmann::json body{{"type", "about:blank"},
                      {"title", std::string(httplib::status_message(status))},
                      {"status", status},
                      {"reason", reason},
                      {"detail", detail}};
  res.status = status;
  res.set_content(body.dump(), "application/problem+json");
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

UrlParts split_url(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error(Errc::Config, "URL needs a scheme: " + std::string(url));
  auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  parts.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) parts.path = std::string(url.substr(path_start));
  while (!parts.path.empty() && parts.path.back() == '/') parts.path.pop_back();
  return parts;
}

}  // namespace selectshare::support
