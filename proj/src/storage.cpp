#include "selectshare/storage.hpp"

#include <algorithm>
#include <chrono>

#include <httplib.h>

#include "selectshare/error.hpp"
#include "support.hpp"

namespace selectshare::storage {

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::vector<Bytes> signing_messages(const Json& doc) {
  auto canon = canonical::canonicalize(doc);
  std::vector<Bytes> out;
  out.reserve(canon.count());
  for (const auto& m : canon.messages) out.push_back(to_bytes(m.encoding));
  return out;
}

std::string SignedDocument::device_id() const {
  if (!doc.is_object() || !doc.contains("deviceID") || !doc["deviceID"].is_string() ||
      doc["deviceID"].get<std::string>().empty())
    throw Error(Errc::MalformedInput, "document lacks a non-empty deviceID");
  return doc["deviceID"].get<std::string>();
}

Json SignedDocument::to_json() const {
  return Json{{"doc", doc},
              {"signature", base64url_encode(bbs::signature_to_bytes(signature))},
              {"signerKeyId", signer_key_id},
              {"canonicalCount", canonical_count},
              {"storedAt", stored_at}};
}

SignedDocument SignedDocument::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("doc") || !j.contains("signature") || !j["signature"].is_string() ||
      !j.contains("signerKeyId") || !j["signerKeyId"].is_string())
    throw Error(Errc::MalformedInput, "signed document needs doc, signature and signerKeyId");
  SignedDocument sd;
  sd.doc = j["doc"];
  sd.signer_key_id = j["signerKeyId"].get<std::string>();
  try {
    sd.canonical_count = j.value("canonicalCount", std::size_t{0});
    sd.stored_at = j.value("storedAt", std::int64_t{0});
  } catch (const Json::exception& e) {
    throw Error(Errc::MalformedInput, e.what());
  }
  sd.signature = bbs::signature_from_bytes(base64url_decode(j["signature"].get<std::string>()), sd.canonical_count);
  return sd;
}

SignedDocument sign_document(const Json& doc, const bbs::KeyPair& key) {
  SignedDocument sd;
  sd.doc = doc;
  sd.device_id();
  auto messages = signing_messages(doc);
  sd.signature = bbs::sign(key.secret_key, key.public_key, messages);
  sd.signer_key_id = key.key_id;
  sd.canonical_count = messages.size();
  return sd;
}

// --- DocumentStore --------------------------------------------------------------

DocumentStore::DocumentStore(std::filesystem::path root) : root_(std::move(root)) {
  if (!root_.empty()) {
    std::filesystem::create_directories(root_ / "docs");
    read_index();
  }
}

std::filesystem::path DocumentStore::entry_path(const std::string& device_id, std::int64_t stored_at) const {
  // Device ids are arbitrary strings; hex keeps them filesystem-safe.
  return root_ / "docs" / hex_encode(to_bytes(device_id)) / (std::to_string(stored_at) + ".json");
}

void DocumentStore::write_index() const {
  if (root_.empty()) return;
  Json signers = Json::object(), devices = Json::object();
  for (const auto& [kid, info] : signers_)
    signers[kid] = {{"publicKey", base64url_encode(bbs::public_key_to_bytes(info.public_key))}, {"ownerId", info.owner_id}};
  for (const auto& [id, dev] : devices_)
    devices[id] = {{"ownerId", dev.owner_id}, {"title", dev.title}, {"entries", dev.entries}};
  support::atomic_write(root_ / "index.json", Json{{"signers", signers}, {"devices", devices}}.dump());
}

void DocumentStore::read_index() {
  auto path = root_ / "index.json";
  if (!std::filesystem::exists(path)) return;
  try {
    Json idx = Json::parse(support::read_file(path));
    for (const auto& [kid, info] : idx.at("signers").items())
      signers_[kid] = {bbs::public_key_from_bytes(base64url_decode(info.at("publicKey").get<std::string>())),
                       info.at("ownerId").get<std::string>()};
    for (const auto& [id, d] : idx.at("devices").items()) {
      Device dev;
      dev.owner_id = d.at("ownerId").get<std::string>();
      dev.title = d.value("title", "");
      dev.entries = d.at("entries").get<std::vector<std::int64_t>>();
      devices_[id] = std::move(dev);
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::Io, std::string("corrupt store index: ") + e.what());
  }
}

std::mutex& DocumentStore::device_lock(const std::string& device_id) {
  std::lock_guard lock(locks_mu_);
  auto& slot = device_locks_[device_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

void DocumentStore::register_signer(const std::string& key_id, const bbs::PublicKey& pk, const std::string& owner_id) {
  if (key_id.empty() || owner_id.empty()) throw Error(Errc::MalformedInput, "key id and owner must be non-empty");
  std::unique_lock lock(mu_);
  signers_[key_id] = {pk, owner_id};
  write_index();
}

std::optional<SignerInfo> DocumentStore::signer(const std::string& key_id) const {
  std::shared_lock lock(mu_);
  auto it = signers_.find(key_id);
  if (it == signers_.end()) return std::nullopt;
  return it->second;
}

void DocumentStore::register_device(const std::string& device_id, const std::string& owner_id,
                                    const std::string& title) {
  if (device_id.empty() || owner_id.empty()) throw Error(Errc::MalformedInput, "device id and owner must be non-empty");
  std::unique_lock lock(mu_);
  auto [it, inserted] = devices_.try_emplace(device_id);
  if (!inserted && it->second.owner_id != owner_id)
    throw Error(Errc::Unauthorized, "device " + device_id + " belongs to another owner");
  it->second.owner_id = owner_id;
  if (!title.empty() || inserted) it->second.title = title.empty() ? device_id : title;
  write_index();
}

void DocumentStore::verify_or_throw(const SignedDocument& sd, const std::string& expected_owner) const {
  auto info = signer(sd.signer_key_id);
  if (!info) throw Error(Errc::UnknownSigner, "signer " + sd.signer_key_id + " is not registered");
  if (!expected_owner.empty() && info->owner_id != expected_owner)
    throw Error(Errc::UnknownSigner, "signer " + sd.signer_key_id + " is not registered for this device's owner");
  std::vector<Bytes> messages;
  try {
    messages = signing_messages(sd.doc);
  } catch (const Error& e) {
    throw Error(Errc::BadSignature, std::string("document cannot be canonicalized: ") + e.what());
  }
  bbs::Signature sig = sd.signature;
  sig.message_count = messages.size();
  if (!bbs::verify(info->public_key, messages, sig)) throw Error(Errc::BadSignature, "signature does not verify");
}

SignedDocument DocumentStore::put(SignedDocument sd) {
  const std::string id = sd.device_id();
  std::lock_guard device_guard(device_lock(id));

  std::string owner;
  std::int64_t last = 0;
  {
    std::shared_lock lock(mu_);
    if (auto it = devices_.find(id); it != devices_.end()) {
      owner = it->second.owner_id;
      if (!it->second.entries.empty()) last = it->second.entries.back();
    }
  }
  verify_or_throw(sd, owner);
  if (owner.empty()) owner = signer(sd.signer_key_id)->owner_id;

  sd.canonical_count = canonical::canonicalize(sd.doc).count();
  sd.signature.message_count = sd.canonical_count;
  sd.stored_at = std::max(now_ms(), last + 1);
  Json record = sd.to_json();

  std::unique_lock lock(mu_);
  auto [it, inserted] = devices_.try_emplace(id);
  Device& dev = it->second;
  if (inserted) {
    dev.owner_id = owner;
    dev.title = id;
  }
  if (root_.empty())
    dev.memory[sd.stored_at] = record;
  else
    support::atomic_write(entry_path(id, sd.stored_at), record.dump());
  dev.entries.push_back(sd.stored_at);
  write_index();
  return sd;
}

SignedDocument DocumentStore::load_entry(const std::string& device_id, std::int64_t stored_at,
                                         const Device& dev) const {
  Json record;
  if (root_.empty()) {
    record = dev.memory.at(stored_at);
  } else {
    record = Json::parse(support::read_file(entry_path(device_id, stored_at)), nullptr, false);
    if (record.is_discarded()) throw Error(Errc::BadSignature, "stored document is corrupt");
  }
  SignedDocument sd;
  try {
    sd = SignedDocument::from_json(record);
  } catch (const Error& e) {
    throw Error(Errc::BadSignature, std::string("stored document is corrupt: ") + e.what());
  }
  verify_or_throw(sd, dev.owner_id);
  return sd;
}

SignedDocument DocumentStore::get_latest(const std::string& device_id) const {
  Device snapshot;
  {
    std::shared_lock lock(mu_);
    auto it = devices_.find(device_id);
    if (it == devices_.end() || it->second.entries.empty())
      throw Error(Errc::NotFound, "no document for device " + device_id);
    snapshot.owner_id = it->second.owner_id;
    std::int64_t at = it->second.entries.back();
    snapshot.entries = {at};
    if (root_.empty()) snapshot.memory[at] = it->second.memory.at(at);
  }
  return load_entry(device_id, snapshot.entries.back(), snapshot);
}

std::vector<SignedDocument> DocumentStore::query(const std::string& device_id, std::int64_t from,
                                                 std::int64_t to) const {
  Device snapshot;
  {
    std::shared_lock lock(mu_);
    auto it = devices_.find(device_id);
    if (it == devices_.end()) throw Error(Errc::NotFound, "unknown device " + device_id);
    snapshot.owner_id = it->second.owner_id;
    for (auto at : it->second.entries) {
      if (at < from || at > to) continue;
      snapshot.entries.push_back(at);
      if (root_.empty()) snapshot.memory[at] = it->second.memory.at(at);
    }
  }
  std::vector<SignedDocument> out;
  for (auto at : snapshot.entries) out.push_back(load_entry(device_id, at, snapshot));
  return out;
}

std::vector<std::string> DocumentStore::list_things() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, dev] : devices_) ids.push_back(id);
  return ids;  // std::map keeps them sorted
}

bool DocumentStore::has_device(const std::string& device_id) const {
  std::shared_lock lock(mu_);
  return devices_.contains(device_id);
}

Json DocumentStore::thing_description(const std::string& device_id, const std::string& data_base_url) const {
  std::string title;
  {
    std::shared_lock lock(mu_);
    auto it = devices_.find(device_id);
    if (it == devices_.end()) throw Error(Errc::NotFound, "unknown device " + device_id);
    title = it->second.title;
  }
  std::string href = data_base_url + "/data?deviceID=" + httplib::detail::encode_query_param(device_id);
  return Json{
      {"@context", "https://www.w3.org/2019/wot/td/v1"},
      {"id", device_id},
      {"title", title},
      {"securityDefinitions",
       {{"vc_dpop", {{"scheme", "bearer"}, {"format", "vc+jwt"}, {"in", "header"}, {"name", "Authorization"}}}}},
      {"security", {"vc_dpop"}},
      {"actions",
       {{"readMeasurements",
         {{"title", "Read selected measurement fields"},
          {"input",
           {{"type", "object"},
            {"properties", {{"fields", {{"type", "array"}, {"items", {{"type", "string"}}}}}}},
            {"required", {"fields"}}}},
          {"forms",
           {{{"href", href}, {"htv:methodName", "POST"}, {"contentType", "application/json"}, {"op", "invokeaction"}}}}}}}}};
}

// --- gateway ----------------------------------------------------------------------

GatewayConfig GatewayConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::Config, "gateway config must be an object");
  GatewayConfig c;
  try {
    c.listen_host = j.value("listen_host", c.listen_host);
    c.listen_port = j.value("listen_port", c.listen_port);
    c.store_dir = j.value("store_dir", std::string());
    c.upload_key = j.value("upload_key", c.upload_key);
    c.read_key = j.value("read_key", c.read_key);
    c.admin_key = j.value("admin_key", c.admin_key);
    c.public_base_url = j.value("public_base_url", c.public_base_url);
  } catch (const Json::exception& e) {
    throw Error(Errc::Config, e.what());
  }
  return c;
}

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::UnknownSigner: return 403;
    case Errc::Unauthorized: return 403;
    case Errc::BadSignature: return 422;
    default: return 400;
  }
}

}  // namespace

void mount_routes(httplib::Server& server, DocumentStore& store, const GatewayConfig& config) {
  using httplib::Request;
  using httplib::Response;

  // Wraps a handler with API-key checking and typed error mapping.
  auto guarded = [&config](std::string header, std::string GatewayConfig::*key, auto handler) {
    return [&config, header, key, handler](const Request& req, Response& res) {
      if (key != nullptr) {
        const std::string& expected = config.*key;
        bool open = key == &GatewayConfig::read_key && expected.empty();
        if (!open && !support::header_key_matches(req, header, expected))
          return support::send_problem(res, 401, "Unauthorized", "missing or wrong " + header);
      }
      try {
        handler(req, res);
      } catch (const Error& e) {
        support::send_problem(res, status_for(e.code()), to_string(e.code()), e.what());
      } catch (const Json::exception& e) {
        support::send_problem(res, 400, "MalformedInput", e.what());
      } catch (const std::logic_error& e) {  // stoll on a bad from/to
        support::send_problem(res, 400, "MalformedInput", e.what());
      }
    };
  };

  server.Get("/things", [&store](const Request&, Response& res) { support::send_json(res, 200, store.list_things()); });

  server.Get(R"(/things/([^/]+))", guarded("", nullptr, [&store, &config](const Request& req, Response& res) {
               support::send_json(res, 200, store.thing_description(req.matches[1], config.public_base_url));
             }));

  server.Post(R"(/store/([^/]+))", guarded("X-Api-Key", &GatewayConfig::upload_key, [&store](const Request& req, Response& res) {
                Json body = canonical::parse_strict(req.body);
                SignedDocument sd = SignedDocument::from_json(body);
                if (sd.device_id() != req.matches[1].str())
                  throw Error(Errc::MalformedInput, "path device does not match doc.deviceID");
                SignedDocument stored = store.put(std::move(sd));
                support::send_json(res, 201,
                                   Json{{"deviceID", stored.device_id()},
                                        {"storedAt", stored.stored_at},
                                        {"canonicalCount", stored.canonical_count}});
              }));

  server.Get(R"(/store/([^/]+)/latest)", guarded("X-Api-Key", &GatewayConfig::read_key, [&store](const Request& req, Response& res) {
               support::send_json(res, 200, store.get_latest(req.matches[1]).to_json());
             }));

  server.Get(R"(/store/([^/]+))", guarded("X-Api-Key", &GatewayConfig::read_key, [&store](const Request& req, Response& res) {
               auto from = req.has_param("from") ? std::stoll(req.get_param_value("from")) : INT64_MIN;
               auto to = req.has_param("to") ? std::stoll(req.get_param_value("to")) : INT64_MAX;
               Json out = Json::array();
               for (const auto& sd : store.query(req.matches[1], from, to)) out.push_back(sd.to_json());
               support::send_json(res, 200, out);
             }));

  // The WoT readMeasurements action; the PEP proxy forwards authorized calls here.
  server.Post("/data", guarded("X-Api-Key", &GatewayConfig::read_key, [&store](const Request& req, Response& res) {
                std::string id = req.get_param_value("deviceID");
                if (id.empty()) throw Error(Errc::MalformedInput, "deviceID query parameter is required");
                support::send_json(res, 200, store.get_latest(id).to_json());
              }));

  server.Post("/admin/signers", guarded("X-Admin-Key", &GatewayConfig::admin_key, [&store](const Request& req, Response& res) {
                Json body = Json::parse(req.body);
                auto pk = bbs::public_key_from_bytes(base64url_decode(body.at("publicKey").get<std::string>()));
                std::string kid = body.value("keyId", bbs::key_id_for(pk));
                store.register_signer(kid, pk, body.at("ownerId").get<std::string>());
                support::send_json(res, 200, Json{{"keyId", kid}});
              }));

  server.Post("/admin/devices", guarded("X-Admin-Key", &GatewayConfig::admin_key, [&store](const Request& req, Response& res) {
                Json body = Json::parse(req.body);
                store.register_device(body.at("deviceID").get<std::string>(), body.at("ownerId").get<std::string>(),
                                      body.value("title", ""));
                support::send_json(res, 200, Json{{"deviceID", body["deviceID"]}});
              }));

  server.Get(R"(/keys/([^/]+))", [&store](const Request& req, Response& res) {
    auto info = store.signer(req.matches[1]);
    if (!info) return support::send_problem(res, 404, "NotFound", "unknown key id");
    support::send_json(res, 200,
                       Json{{"keyId", req.matches[1].str()},
                            {"publicKey", base64url_encode(bbs::public_key_to_bytes(info->public_key))}});
  });
}

}  // namespace selectshare::storage
