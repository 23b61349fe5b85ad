#pragma once

// Storage node for signed measurement documents and the Web of Things
// gateway in front of it.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "selectshare/bbs.hpp"
#include "selectshare/canonical.hpp"

namespace httplib {
class Server;
}

namespace selectshare::storage {

using Json = nlohmann::json;

/// Canonical messages of `doc` as the byte strings that get signed.
std::vector<Bytes> signing_messages(const Json& doc);

struct SignedDocument {
  Json doc;
  bbs::Signature signature;
  std::string signer_key_id;
  std::size_t canonical_count = 0;
  std::int64_t stored_at = 0;  ///< unix milliseconds, assigned by the store

  std::string device_id() const;

  /// {"doc", "signature", "signerKeyId", "canonicalCount", "storedAt"}
  Json to_json() const;
  /// Accepts the upload shape too (canonicalCount/storedAt optional).
  static SignedDocument from_json(const Json& j);
};

/// Signs `doc` (which must carry a non-empty deviceID).
SignedDocument sign_document(const Json& doc, const bbs::KeyPair& key);

struct SignerInfo {
  bbs::PublicKey public_key;
  std::string owner_id;
};

class DocumentStore {
 public:
  /// An empty `root` keeps everything in memory.
  explicit DocumentStore(std::filesystem::path root = {});

  void register_signer(const std::string& key_id, const bbs::PublicKey& pk, const std::string& owner_id);
  std::optional<SignerInfo> signer(const std::string& key_id) const;

  /// Declares a device ahead of its first upload. Idempotent for the same owner.
  void register_device(const std::string& device_id, const std::string& owner_id, const std::string& title = {});

  /// Verifies and appends; returns the stored record (with stored_at and
  /// canonical_count filled). Throws MalformedInput, UnknownSigner, BadSignature.
  SignedDocument put(SignedDocument sd);

  /// Re-verifies before returning. Throws NotFound, BadSignature.
  SignedDocument get_latest(const std::string& device_id) const;
  /// Documents with from <= stored_at <= to, oldest first.
  std::vector<SignedDocument> query(const std::string& device_id, std::int64_t from, std::int64_t to) const;

  std::vector<std::string> list_things() const;
  bool has_device(const std::string& device_id) const;

  /// WoT Thing Description whose read action targets `data_base_url`/data.
  Json thing_description(const std::string& device_id, const std::string& data_base_url) const;

 private:
  struct Device {
    std::string owner_id;
    std::string title;
    std::vector<std::int64_t> entries;  // stored_at, ascending
    std::map<std::int64_t, Json> memory;  // used when root_ is empty
  };

  std::filesystem::path entry_path(const std::string& device_id, std::int64_t stored_at) const;
  SignedDocument load_entry(const std::string& device_id, std::int64_t stored_at, const Device& dev) const;
  void verify_or_throw(const SignedDocument& sd, const std::string& expected_owner) const;
  void write_index() const;
  void read_index();
  std::mutex& device_lock(const std::string& device_id);

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  std::map<std::string, SignerInfo> signers_;
  std::map<std::string, Device> devices_;
  std::mutex locks_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> device_locks_;
};

struct GatewayConfig {
  std::string listen_host = "127.0.0.1";
  int listen_port = 8081;
  std::filesystem::path store_dir;
  std::string upload_key;  ///< X-Api-Key required for POST /store
  std::string read_key;    ///< X-Api-Key required for document reads; empty = open
  std::string admin_key;   ///< X-Admin-Key for signer/device registration
  std::string public_base_url = "http://127.0.0.1:8080";  ///< proxy address advertised in TDs

  static GatewayConfig from_json(const Json& j);
};

/// GET /things, GET /things/{id}, POST /store/{id}, GET /store/{id}/latest,
/// GET /store/{id}?from=&to=, POST /data?deviceID=, POST /admin/signers,
/// POST /admin/devices, GET /keys/{key_id}.
void mount_routes(httplib::Server& server, DocumentStore& store, const GatewayConfig& config);

}  // namespace selectshare::storage
