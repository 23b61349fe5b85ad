#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "selectshare/jose.hpp"

namespace selectshare::credential {

using Json = nlohmann::json;
using Capabilities = std::map<std::string, std::vector<std::string>>;  // device -> fields

inline constexpr std::string_view kVcContext = "https://www.w3.org/2018/credentials/v1";
inline constexpr std::string_view kCapabilitiesContext = "https://mm.aueb.gr/contexts/capabilities/v1";
inline constexpr std::string_view kStatusEntryType = "RevocationList2020Status";

struct CapabilityVC {
  std::string jti;
  std::string iss;
  std::string aud;  ///< device owner
  std::int64_t iat = 0;
  std::int64_t exp = 0;
  Json cnf_jwk;  ///< holder public key
  Capabilities capabilities;
  std::size_t revocation_list_index = 0;
  std::string status_list_url;

  Json to_claims() const;
  static CapabilityVC from_claims(const Json& claims);

  friend bool operator==(const CapabilityVC&, const CapabilityVC&) = default;
};

/// A decoded (not yet verified) VC and its JWS.
struct VcToken {
  CapabilityVC vc;
  jose::CompactJws jws;
};

/// Throws Error(InvalidClaims) when the VC invariants do not hold.
void validate_claims(const CapabilityVC& vc);

std::string encode_vc(const CapabilityVC& vc, const jose::EcKey& issuer_key, std::string_view kid = {});
/// Throws Error(MalformedToken) / Error(InvalidClaims).
VcToken decode_vc(std::string_view jwt);

struct TrustedIssuer {
  std::string uri;
  Json public_jwk;
  std::string status_url;  ///< may be empty; then the VC's status URL is used
};

/// owner id -> issuers that owner trusts
using TrustAnchors = std::map<std::string, std::vector<TrustedIssuer>>;

enum class Validity { Ok, Expired, BadSignature, UntrustedIssuer };
std::string_view to_string(Validity v) noexcept;

/// Expiry, then issuer trust for vc.aud, then the issuer's signature.
Validity verify_validity(const VcToken& token, const TrustAnchors& anchors, std::int64_t now);

bool check_appropriateness(const CapabilityVC& vc, std::string_view owner_id, std::string_view device_id,
                           const std::vector<std::string>& fields);

/// Revocation bitstring. Bit i is the most significant bit of byte i/8 shifted by i%8.
class StatusList {
 public:
  static constexpr std::size_t kMinimumBits = 16 * 1024 * 8;

  StatusList() : bits_(kMinimumBits / 8, 0) {}

  std::size_t capacity() const noexcept { return bits_.size() * 8; }
  std::size_t issued_count() const noexcept { return issued_count_; }

  /// Reserves the next index (zero bit), doubling capacity when full.
  std::size_t allocate();
  void set_issued_count(std::size_t n);

  bool is_revoked(std::size_t index) const;
  void revoke(std::size_t index);
  std::size_t revoked_count() const;

  const Bytes& bits() const noexcept { return bits_; }

  /// {"id", "encodedList": base64url(gzip(bits)), "issuedCount"}
  Json to_json(std::string_view id) const;
  static StatusList from_json(const Json& j);

 private:
  Bytes bits_;
  std::size_t issued_count_ = 0;
};

// --- DPoP ---------------------------------------------------------------------

inline constexpr std::int64_t kDpopWindowSeconds = 60;
inline constexpr std::int64_t kReplayHorizonSeconds = 120;

enum class DpopCheck { Ok, Malformed, BadSignature, MethodMismatch, UriMismatch, Stale, Replayed };
std::string_view to_string(DpopCheck c) noexcept;

/// Thread-safe record of seen nonces; entries expire after the horizon.
class ReplayCache {
 public:
  explicit ReplayCache(std::int64_t horizon_seconds = kReplayHorizonSeconds) : horizon_(horizon_seconds) {}

  /// Atomically records `jti` unless already present. False means replay.
  bool check_and_insert(const std::string& jti, std::int64_t now);
  std::size_t size() const;

 private:
  std::int64_t horizon_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::int64_t> seen_;
  std::int64_t last_prune_ = 0;
};

std::string create_dpop(const jose::EcKey& holder_key, std::string_view method, std::string_view uri,
                        std::int64_t now);

/// Signature, htm, htu, freshness, then replay. On Ok the jti is recorded.
DpopCheck verify_dpop(std::string_view proof, const Json& cnf_jwk, std::string_view method,
                      std::string_view uri, std::int64_t now, ReplayCache& replay_cache,
                      std::int64_t window_seconds = kDpopWindowSeconds);

/// Lowercases scheme and host, drops default ports, query and fragment.
std::string normalize_htu(std::string_view uri);

}  // namespace selectshare::credential
