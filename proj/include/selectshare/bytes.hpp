#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace selectshare {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }
inline std::string to_string(ByteView b) { return std::string(b.begin(), b.end()); }

std::string base64url_encode(ByteView data);
/// Accepts unpadded or padded input; throws Error(MalformedInput) on bad alphabet.
Bytes base64url_decode(std::string_view text);

std::string hex_encode(ByteView data);
Bytes hex_decode(std::string_view text);

Bytes random_bytes(std::size_t n);
Bytes sha256(ByteView data);

Bytes gzip_compress(ByteView data);
/// Refuses to inflate beyond `max_output` bytes.
Bytes gzip_decompress(ByteView data, std::size_t max_output = 64u << 20);

}  // namespace selectshare
