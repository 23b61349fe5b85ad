#pragma once

// ES256 keys as JWKs and compact JWS, on top of OpenSSL.

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "selectshare/bytes.hpp"

typedef struct evp_pkey_st EVP_PKEY;

namespace selectshare::jose {

using Json = nlohmann::json;

/// A P-256 key; may or may not hold the private half.
class EcKey {
 public:
  static EcKey generate();
  /// Accepts a public JWK, or a private one carrying "d".
  static EcKey from_jwk(const Json& jwk);

  bool has_private() const noexcept { return has_private_; }
  Json public_jwk() const;
  Json private_jwk() const;
  /// RFC 7638 thumbprint, base64url.
  std::string thumbprint() const;

  /// Raw r||s (64 bytes).
  Bytes sign(ByteView message) const;
  bool verify(ByteView message, ByteView signature) const;

 private:
  std::shared_ptr<EVP_PKEY> key_;
  bool has_private_ = false;
};

struct CompactJws {
  Json header;
  Json payload;
  std::string signing_input;  ///< "<b64 header>.<b64 payload>"
  Bytes signature;
};

std::string jws_sign(const Json& header, const Json& payload, const EcKey& key);
/// Structural decode; throws Error(MalformedToken). Does not verify.
CompactJws jws_decode(std::string_view token);
bool jws_verify(const CompactJws& jws, const EcKey& key);

}  // namespace selectshare::jose
