#pragma once

// OAuth 2.0 client-credentials token endpoint that mints CapabilitiesCredential
// VCs bound to a client-supplied holder key, plus the revocation status list.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "selectshare/credential.hpp"
#include "selectshare/jose.hpp"

namespace httplib {
class Server;
}

namespace selectshare::issuer {

using Json = nlohmann::json;
using credential::Capabilities;

inline constexpr std::string_view kStatusListPath = "/credentials/status/1";
inline constexpr std::string_view kHolderKeyDetailType = "vc_holder_key";

struct IssuerConfig {
  std::string issuer_uri = "https://issuer.com";
  std::string status_list_url;  ///< defaults to issuer_uri + kStatusListPath
  std::int64_t vc_lifetime_seconds = 24 * 3600;
  std::int64_t key_proof_window_seconds = 60;
  std::int64_t status_max_age_seconds = 60;
  std::string admin_key;
  std::filesystem::path signing_key_path;  ///< private JWK; generated when absent
  std::filesystem::path store_path;        ///< journal file; empty keeps state in memory
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;

  static IssuerConfig from_json(const Json& j);
  std::string effective_status_url() const;
};

struct TokenRequest {
  std::string grant_type;
  std::string client_id;
  std::string client_secret;
  std::optional<Json> authorization_details;
};

struct IssuedToken {
  std::string access_token;
  credential::CapabilityVC vc;
  std::int64_t expires_in = 0;
};

/// Parses {"device": ["field", ...], ...}; throws Error(MalformedPolicy).
Capabilities parse_policy(const Json& j);

/// Client side of the key binding: a JWS over {client_id, iat, nonce} made
/// with the holder key, packaged as a rich authorization request entry.
Json make_authorization_details(const jose::EcKey& holder_key, std::string_view client_id, std::int64_t now);

class IssuerService {
 public:
  IssuerService(IssuerConfig config, jose::EcKey signing_key);

  const IssuerConfig& config() const noexcept { return config_; }
  Json public_jwk() const { return signing_key_.public_jwk(); }

  void put_client(const std::string& client_id, const std::string& secret, const std::string& owner_id);
  /// Affects later issuance only; already issued VCs keep their snapshot.
  void put_policy(const std::string& client_id, const Capabilities& policy);

  /// Throws InvalidClient, MissingAuthorizationDetails, InvalidKeyProof, PolicyEmpty, MalformedInput.
  IssuedToken issue_token(const TokenRequest& request, std::int64_t now);

  /// Idempotent; throws NotFound for an unknown jti.
  void revoke(const std::string& jti);

  Json status_list_json() const;
  credential::StatusList status_list() const;
  std::size_t issued_count() const;

 private:
  struct ClientRecord {
    std::string salt;  // base64url
    std::string secret_hash;
    std::string owner_id;
    Capabilities policy;
  };
  struct IssuedRecord {
    std::size_t index = 0;
    std::int64_t exp = 0;
    std::string client_id;
  };

  void apply(const Json& event);
  void persist(const Json& event);
  void load();

  IssuerConfig config_;
  jose::EcKey signing_key_;
  mutable std::shared_mutex mu_;
  std::map<std::string, ClientRecord> clients_;
  std::map<std::string, IssuedRecord> issued_;
  credential::StatusList status_;
  std::uint64_t next_serial_ = 1;
  std::string journal_;
  credential::ReplayCache key_proof_nonces_;
};

/// Loads the private JWK at `path`, creating one if the file does not exist.
jose::EcKey load_or_create_key(const std::filesystem::path& path);

/// Registers /token, /credentials/status/1, /revoke, /admin/clients,
/// /admin/policies and /jwks on `server`.
void mount_routes(httplib::Server& server, IssuerService& service, std::function<std::int64_t()> clock);

}  // namespace selectshare::issuer
