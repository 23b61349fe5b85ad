#include "selectshare/issuer.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <fstream>
#include <mutex>
#include <sstream>

#include <httplib.h>

#include "selectshare/error.hpp"
#include "support.hpp"

namespace selectshare::issuer {

namespace {

constexpr int kPbkdf2Iterations = 20000;

std::string hash_secret(std::string_view secret, const Bytes& salt) {
  Bytes out(32);
  if (PKCS5_PBKDF2_HMAC(secret.data(), static_cast<int>(secret.size()), salt.data(), static_cast<int>(salt.size()),
                        kPbkdf2Iterations, EVP_sha256(), static_cast<int>(out.size()), out.data()) != 1)
    throw Error(Errc::Io, "PBKDF2 failed");
  return base64url_encode(out);
}

bool equal_ct(std::string_view a, std::string_view b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

Json policy_to_json(const Capabilities& caps) {
  Json j = Json::object();
  for (const auto& [device, fields] : caps) j[device] = fields;
  return j;
}

// Verifies the holder-key entry of authorization_details and returns its JWK.
Json check_key_binding(const std::optional<Json>& details, std::string_view client_id, std::int64_t now,
                       std::int64_t window, credential::ReplayCache& nonces) {
  if (!details) throw Error(Errc::MissingAuthorizationDetails, "authorization_details is required");
  const Json* entry = nullptr;
  auto consider = [&](const Json& e) {
    if (e.is_object() && e.value("type", "") == kHolderKeyDetailType) {
      if (entry) throw Error(Errc::MissingAuthorizationDetails, "more than one holder key supplied");
      entry = &e;
    }
  };
  if (details->is_array())
    for (const auto& e : *details) consider(e);
  else
    consider(*details);
  if (!entry) throw Error(Errc::MissingAuthorizationDetails, "no vc_holder_key entry in authorization_details");
  if (!entry->contains("jwk") || !(*entry)["jwk"].is_object())
    throw Error(Errc::MissingAuthorizationDetails, "vc_holder_key entry lacks a JWK");
  if (!entry->contains("proof") || !(*entry)["proof"].is_string())
    throw Error(Errc::InvalidKeyProof, "vc_holder_key entry lacks a proof");

  const Json& jwk = (*entry)["jwk"];
  if (jwk.contains("d")) throw Error(Errc::InvalidKeyProof, "holder JWK must be public");
  jose::EcKey key;
  jose::CompactJws jws;
  try {
    key = jose::EcKey::from_jwk(jwk);
    jws = jose::jws_decode((*entry)["proof"].get<std::string>());
  } catch (const Error& e) {
    throw Error(Errc::InvalidKeyProof, e.what());
  }
  if (!jose::jws_verify(jws, key)) throw Error(Errc::InvalidKeyProof, "key proof does not verify under the supplied JWK");
  const Json& p = jws.payload;
  if (p.value("client_id", "") != client_id) throw Error(Errc::InvalidKeyProof, "key proof names another client");
  if (!p.contains("iat") || !p["iat"].is_number_integer()) throw Error(Errc::InvalidKeyProof, "key proof lacks iat");
  std::int64_t iat = p["iat"].get<std::int64_t>();
  if (iat > now + window || now - iat > window) throw Error(Errc::InvalidKeyProof, "key proof is stale");
  std::string nonce = p.value("nonce", "");
  if (nonce.empty()) throw Error(Errc::InvalidKeyProof, "key proof lacks a nonce");
  if (!nonces.check_and_insert(std::string(client_id) + "|" + nonce, now))
    throw Error(Errc::InvalidKeyProof, "key proof nonce already used");
  return key.public_jwk();
}

}  // namespace

IssuerConfig IssuerConfig::from_json(const Json& j) {
  IssuerConfig c;
  if (!j.is_object()) throw Error(Errc::Config, "issuer config must be an object");
  try {
    c.issuer_uri = j.value("issuer_uri", c.issuer_uri);
    c.status_list_url = j.value("status_list_url", c.status_list_url);
    c.vc_lifetime_seconds = j.value("vc_lifetime_seconds", c.vc_lifetime_seconds);
    c.key_proof_window_seconds = j.value("key_proof_window_seconds", c.key_proof_window_seconds);
    c.status_max_age_seconds = j.value("status_max_age_seconds", c.status_max_age_seconds);
    c.admin_key = j.value("admin_key", c.admin_key);
    c.signing_key_path = j.value("signing_key_path", std::string());
    c.store_path = j.value("store_path", std::string());
    c.listen_host = j.value("listen_host", c.listen_host);
    c.listen_port = j.value("listen_port", c.listen_port);
  } catch (const Json::exception& e) {
    throw Error(Errc::Config, e.what());
  }
  if (c.vc_lifetime_seconds <= 0) throw Error(Errc::Config, "vc_lifetime_seconds must be positive");
  return c;
}

std::string IssuerConfig::effective_status_url() const {
  return status_list_url.empty() ? issuer_uri + std::string(kStatusListPath) : status_list_url;
}

Capabilities parse_policy(const Json& j) {
  if (!j.is_object() || j.empty()) throw Error(Errc::MalformedPolicy, "policy must be a non-empty object");
  Capabilities caps;
  for (const auto& [device, fields] : j.items()) {
    if (device.empty()) throw Error(Errc::MalformedPolicy, "empty device identifier");
    if (!fields.is_array() || fields.empty())
      throw Error(Errc::MalformedPolicy, "policy for " + device + " must be a non-empty array");
    auto& list = caps[device];
    for (const auto& f : fields) {
      if (!f.is_string() || f.get<std::string>().empty())
        throw Error(Errc::MalformedPolicy, "field names must be non-empty strings");
      list.push_back(f.get<std::string>());
    }
  }
  return caps;
}

Json make_authorization_details(const jose::EcKey& holder_key, std::string_view client_id, std::int64_t now) {
  Json payload{{"client_id", client_id}, {"iat", now}, {"nonce", base64url_encode(random_bytes(16))}};
  std::string proof = jose::jws_sign(Json{{"alg", "ES256"}, {"typ", "JWT"}}, payload, holder_key);
  return Json::array({Json{{"type", kHolderKeyDetailType}, {"jwk", holder_key.public_jwk()}, {"proof", proof}}});
}

IssuerService::IssuerService(IssuerConfig config, jose::EcKey signing_key)
    : config_(std::move(config)),
      signing_key_(std::move(signing_key)),
      key_proof_nonces_(2 * config_.key_proof_window_seconds) {
  if (!signing_key_.has_private()) throw Error(Errc::Config, "issuer signing key must be private");
  load();
}

void IssuerService::apply(const Json& e) {
  const std::string op = e.at("op").get<std::string>();
  if (op == "client") {
    auto& rec = clients_[e.at("client_id").get<std::string>()];
    rec.salt = e.at("salt").get<std::string>();
    rec.secret_hash = e.at("secret_hash").get<std::string>();
    rec.owner_id = e.at("owner_id").get<std::string>();
  } else if (op == "policy") {
    auto it = clients_.find(e.at("client_id").get<std::string>());
    if (it == clients_.end()) throw Error(Errc::NotFound, "policy for unknown client");
    it->second.policy = parse_policy(e.at("policy"));
  } else if (op == "issue") {
    IssuedRecord rec{e.at("index").get<std::size_t>(), e.at("exp").get<std::int64_t>(),
                     e.at("client_id").get<std::string>()};
    if (rec.index != status_.issued_count()) throw Error(Errc::Io, "journal index out of sequence");
    status_.allocate();
    issued_[e.at("jti").get<std::string>()] = rec;
    next_serial_ = std::max(next_serial_, e.at("serial").get<std::uint64_t>() + 1);
  } else if (op == "revoke") {
    status_.revoke(e.at("index").get<std::size_t>());
  } else {
    throw Error(Errc::Io, "unknown journal op " + op);
  }
}

void IssuerService::persist(const Json& event) {
  if (config_.store_path.empty()) return;
  std::string next = journal_ + event.dump() + "\n";
  support::atomic_write(config_.store_path, next);
  journal_ = std::move(next);
}

void IssuerService::load() {
  if (config_.store_path.empty() || !std::filesystem::exists(config_.store_path)) return;
  journal_ = support::read_file(config_.store_path);
  std::istringstream in(journal_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      apply(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(Errc::Io, std::string("corrupt issuer journal: ") + e.what());
    }
  }
}

void IssuerService::put_client(const std::string& client_id, const std::string& secret, const std::string& owner_id) {
  if (client_id.empty() || secret.empty() || owner_id.empty())
    throw Error(Errc::MalformedInput, "client_id, secret and owner_id must be non-empty");
  Bytes salt = random_bytes(16);
  Json event{{"op", "client"},
             {"client_id", client_id},
             {"salt", base64url_encode(salt)},
             {"secret_hash", hash_secret(secret, salt)},
             {"owner_id", owner_id}};
  std::unique_lock lock(mu_);
  persist(event);
  apply(event);
}

void IssuerService::put_policy(const std::string& client_id, const Capabilities& policy) {
  parse_policy(policy_to_json(policy));
  Json event{{"op", "policy"}, {"client_id", client_id}, {"policy", policy_to_json(policy)}};
  std::unique_lock lock(mu_);
  if (!clients_.contains(client_id)) throw Error(Errc::NotFound, "unknown client " + client_id);
  persist(event);
  apply(event);
}

IssuedToken IssuerService::issue_token(const TokenRequest& req, std::int64_t now) {
  if (req.grant_type != "client_credentials") throw Error(Errc::MalformedInput, "unsupported grant_type");

  // Authenticate outside the write lock; PBKDF2 is deliberately slow.
  ClientRecord client;
  {
    std::shared_lock lock(mu_);
    auto it = clients_.find(req.client_id);
    if (it == clients_.end()) throw Error(Errc::InvalidClient, "client authentication failed");
    client = it->second;
  }
  if (!equal_ct(hash_secret(req.client_secret, base64url_decode(client.salt)), client.secret_hash))
    throw Error(Errc::InvalidClient, "client authentication failed");

  Json holder_jwk = check_key_binding(req.authorization_details, req.client_id, now,
                                      config_.key_proof_window_seconds, key_proof_nonces_);

  std::unique_lock lock(mu_);
  const auto& current = clients_.at(req.client_id);
  if (current.policy.empty()) throw Error(Errc::PolicyEmpty, "no policy configured for " + req.client_id);

  credential::CapabilityVC vc;
  std::uint64_t serial = next_serial_;
  vc.jti = config_.issuer_uri + "/credentials/" + std::to_string(serial);
  vc.iss = config_.issuer_uri;
  vc.aud = current.owner_id;
  vc.iat = now;
  vc.exp = now + config_.vc_lifetime_seconds;
  vc.cnf_jwk = holder_jwk;
  vc.capabilities = current.policy;
  vc.revocation_list_index = status_.issued_count();
  vc.status_list_url = config_.effective_status_url();

  IssuedToken out;
  out.access_token = credential::encode_vc(vc, signing_key_, signing_key_.thumbprint());
  out.vc = vc;
  out.expires_in = config_.vc_lifetime_seconds;

  Json event{{"op", "issue"},      {"jti", vc.jti},       {"serial", serial},
             {"index", vc.revocation_list_index}, {"exp", vc.exp}, {"client_id", req.client_id}};
  persist(event);
  apply(event);
  return out;
}

void IssuerService::revoke(const std::string& jti) {
  std::unique_lock lock(mu_);
  auto it = issued_.find(jti);
  if (it == issued_.end()) throw Error(Errc::NotFound, "unknown credential " + jti);
  if (status_.is_revoked(it->second.index)) return;
  Json event{{"op", "revoke"}, {"jti", jti}, {"index", it->second.index}};
  persist(event);
  apply(event);
}

Json IssuerService::status_list_json() const {
  std::shared_lock lock(mu_);
  return status_.to_json(config_.effective_status_url());
}

credential::StatusList IssuerService::status_list() const {
  std::shared_lock lock(mu_);
  return status_;
}

std::size_t IssuerService::issued_count() const {
  std::shared_lock lock(mu_);
  return status_.issued_count();
}

jose::EcKey load_or_create_key(const std::filesystem::path& path) {
  if (!path.empty() && std::filesystem::exists(path)) {
    Json jwk = Json::parse(support::read_file(path), nullptr, false);
    if (jwk.is_discarded()) throw Error(Errc::MalformedKey, "signing key file is not JSON");
    auto key = jose::EcKey::from_jwk(jwk);
    if (!key.has_private()) throw Error(Errc::MalformedKey, "signing key file lacks the private part");
    return key;
  }
  auto key = jose::EcKey::generate();
  if (!path.empty()) support::atomic_write(path, key.private_jwk().dump(2));
  return key;
}

void mount_routes(httplib::Server& server, IssuerService& service, std::function<std::int64_t()> clock) {
  using httplib::Request;
  using httplib::Response;

  auto oauth_error = [](Response& res, int status, std::string_view code, std::string_view detail) {
    support::send_json(res, status, Json{{"error", code}, {"error_description", detail}});
  };

  server.Post("/token", [&service, clock, oauth_error](const Request& req, Response& res) {
    TokenRequest tr;
    tr.grant_type = req.get_param_value("grant_type");
    tr.client_id = req.get_param_value("client_id");
    tr.client_secret = req.get_param_value("client_secret");
    if (req.has_param("authorization_details")) {
      Json details = Json::parse(req.get_param_value("authorization_details"), nullptr, false);
      if (details.is_discarded()) return oauth_error(res, 400, "invalid_request", "authorization_details is not JSON");
      tr.authorization_details = std::move(details);
    }
    try {
      auto token = service.issue_token(tr, clock());
      res.set_header("Cache-Control", "no-store");
      support::send_json(res, 200,
                         Json{{"access_token", token.access_token}, {"token_type", "vc+jwt"}, {"expires_in", token.expires_in}});
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::InvalidClient: return oauth_error(res, 401, "invalid_client", e.what());
        case Errc::MissingAuthorizationDetails: return oauth_error(res, 400, "invalid_authorization_details", e.what());
        case Errc::InvalidKeyProof: return oauth_error(res, 400, "invalid_grant", e.what());
        case Errc::PolicyEmpty: return oauth_error(res, 403, "access_denied", e.what());
        default: return oauth_error(res, 400, "invalid_request", e.what());
      }
    }
  });

  server.Get(std::string(kStatusListPath), [&service](const Request&, Response& res) {
    res.set_header("Cache-Control", "max-age=" + std::to_string(service.config().status_max_age_seconds));
    support::send_json(res, 200, service.status_list_json());
  });

  server.Get("/jwks", [&service](const Request&, Response& res) {
    Json jwk = service.public_jwk();
    jwk["kid"] = jose::EcKey::from_jwk(jwk).thumbprint();
    jwk["alg"] = "ES256";
    jwk["use"] = "sig";
    support::send_json(res, 200, Json{{"keys", Json::array({jwk})}});
  });

  // Admin endpoints share authentication and JSON body parsing.
  auto admin = [&service](auto handler) {
    return [&service, handler](const Request& req, Response& res) {
      if (!support::header_key_matches(req, "X-Admin-Key", service.config().admin_key))
        return support::send_problem(res, 401, "Unauthorized", "missing or wrong X-Admin-Key");
      Json body = Json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object())
        return support::send_problem(res, 400, "MalformedInput", "body must be a JSON object");
      try {
        handler(body, res);
      } catch (const Error& e) {
        int status = e.code() == Errc::NotFound ? 404 : 400;
        support::send_problem(res, status, to_string(e.code()), e.what());
      } catch (const Json::exception& e) {
        support::send_problem(res, 400, "MalformedInput", e.what());
      }
    };
  };

  server.Post("/revoke", admin([&service](const Json& body, Response& res) {
                service.revoke(body.at("jti").get<std::string>());
                support::send_json(res, 200, Json{{"revoked", body["jti"]}});
              }));

  server.Post("/admin/clients", admin([&service](const Json& body, Response& res) {
                service.put_client(body.at("client_id").get<std::string>(), body.at("client_secret").get<std::string>(),
                                   body.at("owner_id").get<std::string>());
                support::send_json(res, 200, Json{{"client_id", body["client_id"]}});
              }));

  server.Post("/admin/policies", admin([&service](const Json& body, Response& res) {
                if (!body.contains("policy")) throw Error(Errc::MalformedPolicy, "policy missing");
                service.put_policy(body.at("client_id").get<std::string>(), parse_policy(body["policy"]));
                support::send_json(res, 200, Json{{"client_id", body["client_id"]}});
              }));
}

}  // namespace selectshare::issuer
