#pragma once

// Policy enforcement point: checks the capability VC and its DPoP proof, then
// answers with a selectively disclosed view of the latest signed document.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "selectshare/bbs.hpp"
#include "selectshare/credential.hpp"
#include "selectshare/storage.hpp"

namespace httplib {
class Server;
}

namespace selectshare::proxy {

using Json = nlohmann::json;

struct ProxyConfig {
  std::string owner_id;
  credential::TrustAnchors trust;
  std::string gateway_url;
  std::string gateway_key;  ///< sent as X-Api-Key to the gateway
  std::string public_base_url = "http://127.0.0.1:8080";  ///< what clients put in DPoP htu
  std::int64_t status_ttl_seconds = 60;
  std::int64_t status_grace_seconds = 300;
  std::int64_t dpop_window_seconds = credential::kDpopWindowSeconds;
  std::map<std::string, bbs::PublicKey> signers;  ///< pinned signer keys by key id
  std::string admin_key;
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;

  static ProxyConfig from_json(const Json& j);
};

/// Where the proxy gets signed documents from.
class DocumentSource {
 public:
  virtual ~DocumentSource() = default;
  /// Throws NotFound for an unknown device and Error(Io) when unreachable.
  virtual storage::SignedDocument fetch_latest(const std::string& device_id) = 0;
  /// Signer key published by the storage side, if any.
  virtual std::optional<bbs::PublicKey> signer_key(const std::string& key_id) = 0;
};

/// Talks to the gateway over HTTP (POST /data?deviceID=, GET /keys/{id}).
class HttpDocumentSource : public DocumentSource {
 public:
  HttpDocumentSource(std::string gateway_url, std::string api_key);
  storage::SignedDocument fetch_latest(const std::string& device_id) override;
  std::optional<bbs::PublicKey> signer_key(const std::string& key_id) override;

 private:
  std::string url_;
  std::string key_;
};

/// Reads a DocumentStore in the same process.
class StoreDocumentSource : public DocumentSource {
 public:
  explicit StoreDocumentSource(const storage::DocumentStore& store) : store_(store) {}
  storage::SignedDocument fetch_latest(const std::string& device_id) override { return store_.get_latest(device_id); }
  std::optional<bbs::PublicKey> signer_key(const std::string& key_id) override;

 private:
  const storage::DocumentStore& store_;
};

/// Fetches a status list JSON; throws on any failure.
using StatusFetcher = std::function<Json(const std::string& url)>;
StatusFetcher http_status_fetcher();

/// Per-URL cache of revocation lists with a freshness TTL and a grace period
/// during which a stale list is used if the issuer cannot be reached.
class StatusListCache {
 public:
  StatusListCache(StatusFetcher fetcher, std::int64_t ttl_seconds, std::int64_t grace_seconds);

  /// Throws Error(IssuerUnreachable) when no usable list exists.
  std::shared_ptr<const credential::StatusList> get(const std::string& url, std::int64_t now);
  std::size_t fetch_count() const;

 private:
  struct Entry {
    std::shared_ptr<const credential::StatusList> list;
    std::int64_t fetched_at = 0;
  };
  StatusFetcher fetcher_;
  std::int64_t ttl_, grace_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::size_t fetches_ = 0;
};

struct RevealedMessage {
  std::size_t index = 0;
  std::string message;  ///< canonical message bytes
};

struct DisclosureEnvelope {
  std::vector<RevealedMessage> revealed;
  Bytes proof;
  std::size_t total_count = 0;
  std::string signer_key_id;
  Bytes presentation_nonce;
  Json display;

  Json to_json() const;
  /// Throws Error(MalformedEnvelope).
  static DisclosureEnvelope from_json(const Json& j);
};

/// Client-side check: proof validity under `signer` and display consistency.
bool verify_envelope(const DisclosureEnvelope& envelope, const bbs::PublicKey& signer);

struct DataRequest {
  std::string device_id;
  std::vector<std::string> fields;
  std::string authorization;  ///< full Authorization header value
  std::string dpop;
  std::string method = "POST";
};

struct Outcome {
  int status = 200;
  std::string reason;  ///< typed failure reason; empty on success
  std::string detail;
  std::optional<DisclosureEnvelope> envelope;

  bool ok() const noexcept { return status == 200; }
};

class Proxy {
 public:
  Proxy(ProxyConfig config, std::shared_ptr<DocumentSource> source, StatusFetcher status_fetcher);

  const ProxyConfig& config() const noexcept { return config_; }

  /// Runs the full pipeline; never throws for request-level failures.
  Outcome handle(const DataRequest& request, std::int64_t now);

  void add_trusted_issuer(const std::string& owner_id, credential::TrustedIssuer issuer);
  std::optional<bbs::PublicKey> signer_key(const std::string& key_id);

  /// Test hook: runs on every derived proof before the self-check.
  void set_proof_tamper_hook(std::function<void(bbs::SelectiveProof&)> hook);

  StatusListCache& status_cache() noexcept { return status_cache_; }
  const credential::ReplayCache& replay_cache() const noexcept { return replay_; }

  /// The URI DPoP proofs must name for a data request on `device_id`.
  std::string data_uri(const std::string& device_id) const;

 private:
  Outcome disclose(const storage::SignedDocument& sd, const bbs::PublicKey& pk,
                   const std::vector<std::string>& fields);

  ProxyConfig config_;
  mutable std::shared_mutex trust_mu_;
  std::shared_ptr<DocumentSource> source_;
  StatusListCache status_cache_;
  credential::ReplayCache replay_;
  std::function<void(bbs::SelectiveProof&)> tamper_hook_;
};

/// POST /data?deviceID=, GET /keys/{key_id}, POST /admin/trust.
void mount_routes(httplib::Server& server, Proxy& proxy, std::function<std::int64_t()> clock);

}  // namespace selectshare::proxy
