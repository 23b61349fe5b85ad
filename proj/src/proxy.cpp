#include "selectshare/proxy.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>

#include "selectshare/error.hpp"
#include "selectshare/framing.hpp"
#include "support.hpp"

namespace selectshare::proxy {

namespace {

Outcome fail(int status, std::string reason, std::string detail) {
  return Outcome{status, std::move(reason), std::move(detail), std::nullopt};
}

// Accepts "DPoP <token>" (scheme case-insensitive); returns empty otherwise.
std::string credential_from_header(std::string_view header) {
  constexpr std::string_view scheme = "dpop ";
  if (header.size() <= scheme.size()) return {};
  for (std::size_t i = 0; i < scheme.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(header[i])) != scheme[i]) return {};
  std::string_view token = header.substr(scheme.size());
  while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
  return std::string(token);
}

credential::TrustedIssuer issuer_from_json(const Json& j) {
  credential::TrustedIssuer t;
  t.uri = j.at("uri").get<std::string>();
  t.public_jwk = j.at("jwk");
  jose::EcKey::from_jwk(t.public_jwk);
  t.status_url = j.value("status_url", "");
  return t;
}

}  // namespace

ProxyConfig ProxyConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::Config, "proxy config must be an object");
  ProxyConfig c;
  try {
    c.owner_id = j.at("owner_id").get<std::string>();
    if (j.contains("trusted_issuers"))
      for (const auto& [owner, list] : j["trusted_issuers"].items())
        for (const auto& entry : list) c.trust[owner].push_back(issuer_from_json(entry));
    c.gateway_url = j.value("gateway_url", c.gateway_url);
    c.gateway_key = j.value("gateway_key", c.gateway_key);
    c.public_base_url = j.value("public_base_url", c.public_base_url);
    c.status_ttl_seconds = j.value("status_ttl_seconds", c.status_ttl_seconds);
    c.status_grace_seconds = j.value("status_grace_seconds", c.status_grace_seconds);
    c.dpop_window_seconds = j.value("dpop_window_seconds", c.dpop_window_seconds);
    if (j.contains("signers"))
      for (const auto& [kid, pk] : j["signers"].items())
        c.signers[kid] = bbs::public_key_from_bytes(base64url_decode(pk.get<std::string>()));
    c.admin_key = j.value("admin_key", c.admin_key);
    c.listen_host = j.value("listen_host", c.listen_host);
    c.listen_port = j.value("listen_port", c.listen_port);
  } catch (const Json::exception& e) {
    throw Error(Errc::Config, e.what());
  }
  if (c.owner_id.empty()) throw Error(Errc::Config, "owner_id must be set");
  while (!c.public_base_url.empty() && c.public_base_url.back() == '/') c.public_base_url.pop_back();
  return c;
}

// --- document sources -------------------------------------------------------------

HttpDocumentSource::HttpDocumentSource(std::string gateway_url, std::string api_key)
    : url_(std::move(gateway_url)), key_(std::move(api_key)) {}

storage::SignedDocument HttpDocumentSource::fetch_latest(const std::string& device_id) {
  auto url = support::split_url(url_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(10);
  httplib::Headers headers;
  if (!key_.empty()) headers.emplace("X-Api-Key", key_);
  auto res = client.Post(url.path + "/data?deviceID=" + httplib::detail::encode_query_param(device_id), headers, "{}",
                         "application/json");
  if (!res) throw Error(Errc::Io, "gateway unreachable: " + httplib::to_string(res.error()));
  if (res->status == 404) throw Error(Errc::NotFound, "gateway has no document for " + device_id);
  if (res->status != 200) throw Error(Errc::Io, "gateway answered " + std::to_string(res->status));
  Json body = Json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw Error(Errc::Io, "gateway response is not JSON");
  return storage::SignedDocument::from_json(body);
}

std::optional<bbs::PublicKey> HttpDocumentSource::signer_key(const std::string& key_id) {
  auto url = support::split_url(url_);
  httplib::Client client(url.origin);
  client.set_connection_timeout(5);
  auto res = client.Get(url.path + "/keys/" + httplib::detail::encode_url(key_id));
  if (!res || res->status != 200) return std::nullopt;
  Json body = Json::parse(res->body, nullptr, false);
  if (!body.is_object() || !body.contains("publicKey")) return std::nullopt;
  try {
    return bbs::public_key_from_bytes(base64url_decode(body["publicKey"].get<std::string>()));
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<bbs::PublicKey> StoreDocumentSource::signer_key(const std::string& key_id) {
  auto info = store_.signer(key_id);
  if (!info) return std::nullopt;
  return info->public_key;
}

StatusFetcher http_status_fetcher() {
  return [](const std::string& target) -> Json {
    auto url = support::split_url(target);
    httplib::Client client(url.origin);
    client.set_connection_timeout(3);
    client.set_read_timeout(5);
    auto res = client.Get(url.path.empty() ? "/" : url.path);
    if (!res) throw Error(Errc::IssuerUnreachable, "status list fetch failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(Errc::IssuerUnreachable, "status list answered " + std::to_string(res->status));
    return Json::parse(res->body);
  };
}

// --- status cache --------------------------------------------------------------------

StatusListCache::StatusListCache(StatusFetcher fetcher, std::int64_t ttl_seconds, std::int64_t grace_seconds)
    : fetcher_(std::move(fetcher)), ttl_(ttl_seconds), grace_(grace_seconds) {}

std::shared_ptr<const credential::StatusList> StatusListCache::get(const std::string& url, std::int64_t now) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(url);
  if (it != entries_.end() && now - it->second.fetched_at < ttl_) return it->second.list;
  try {
    ++fetches_;
    auto list = std::make_shared<const credential::StatusList>(credential::StatusList::from_json(fetcher_(url)));
    entries_[url] = Entry{list, now};
    return list;
  } catch (const std::exception& e) {
    if (it != entries_.end() && now - it->second.fetched_at <= grace_) return it->second.list;
    throw Error(Errc::IssuerUnreachable, std::string("no usable status list: ") + e.what());
  }
}

std::size_t StatusListCache::fetch_count() const {
  std::lock_guard lock(mu_);
  return fetches_;
}

// --- envelope ----------------------------------------------------------------------

Json DisclosureEnvelope::to_json() const {
  Json rev = Json::array();
  for (const auto& r : revealed) rev.push_back(Json{{"index", r.index}, {"message", base64url_encode(to_bytes(r.message))}});
  return Json{{"revealed", rev},
              {"proof", base64url_encode(proof)},
              {"totalCount", total_count},
              {"signerKeyId", signer_key_id},
              {"presentationNonce", base64url_encode(presentation_nonce)},
              {"display", display}};
}

DisclosureEnvelope DisclosureEnvelope::from_json(const Json& j) {
  try {
    DisclosureEnvelope e;
    for (const auto& r : j.at("revealed"))
      e.revealed.push_back({r.at("index").get<std::size_t>(), to_string(base64url_decode(r.at("message").get<std::string>()))});
    e.proof = base64url_decode(j.at("proof").get<std::string>());
    e.total_count = j.at("totalCount").get<std::size_t>();
    e.signer_key_id = j.at("signerKeyId").get<std::string>();
    e.presentation_nonce = base64url_decode(j.at("presentationNonce").get<std::string>());
    e.display = j.at("display");
    return e;
  } catch (const Json::exception& ex) {
    throw Error(Errc::MalformedEnvelope, ex.what());
  } catch (const Error& ex) {
    throw Error(Errc::MalformedEnvelope, ex.what());
  }
}

bool verify_envelope(const DisclosureEnvelope& envelope, const bbs::PublicKey& signer) {
  std::map<std::size_t, Bytes> revealed;
  std::vector<std::pair<canonical::JsonPath, canonical::Json>> leaves;
  for (const auto& r : envelope.revealed) {
    if (!revealed.emplace(r.index, to_bytes(r.message)).second) return false;
    try {
      leaves.push_back(canonical::decode_message(r.message));
    } catch (const Error&) {
      return false;
    }
  }
  bbs::SelectiveProof proof;
  proof.bytes = envelope.proof;
  proof.total_count = envelope.total_count;
  proof.presentation_nonce = envelope.presentation_nonce;
  for (const auto& [i, m] : revealed) proof.revealed_indices.push_back(i);
  try {
    if (!bbs::verify_proof(signer, proof, revealed, envelope.presentation_nonce)) return false;
    auto rebuilt = framing::reconstruct(framing::sub_item_from_messages(std::move(leaves)));
    return rebuilt.display == envelope.display;
  } catch (const Error&) {
    return false;
  }
}

// --- pipeline ----------------------------------------------------------------------

Proxy::Proxy(ProxyConfig config, std::shared_ptr<DocumentSource> source, StatusFetcher status_fetcher)
    : config_(std::move(config)),
      source_(std::move(source)),
      status_cache_(std::move(status_fetcher), config_.status_ttl_seconds, config_.status_grace_seconds),
      replay_(2 * config_.dpop_window_seconds) {}

void Proxy::add_trusted_issuer(const std::string& owner_id, credential::TrustedIssuer issuer) {
  jose::EcKey::from_jwk(issuer.public_jwk);
  std::unique_lock lock(trust_mu_);
  auto& list = config_.trust[owner_id];
  std::erase_if(list, [&](const auto& t) { return t.uri == issuer.uri; });
  list.push_back(std::move(issuer));
}

std::optional<bbs::PublicKey> Proxy::signer_key(const std::string& key_id) {
  if (auto it = config_.signers.find(key_id); it != config_.signers.end()) return it->second;
  return source_->signer_key(key_id);
}

void Proxy::set_proof_tamper_hook(std::function<void(bbs::SelectiveProof&)> hook) { tamper_hook_ = std::move(hook); }

std::string Proxy::data_uri(const std::string& device_id) const {
  return config_.public_base_url + "/data?deviceID=" + httplib::detail::encode_query_param(device_id);
}

Outcome Proxy::handle(const DataRequest& req, std::int64_t now) {
  if (req.device_id.empty()) return fail(400, "MalformedRequest", "deviceID query parameter is required");
  if (req.fields.empty()) return fail(400, "MalformedRequest", "fields must be a non-empty list");

  // 1. decode the VC
  std::string jwt = credential_from_header(req.authorization);
  if (jwt.empty()) return fail(401, "MissingCredential", "Authorization: DPoP <vc> header is required");
  credential::VcToken token;
  try {
    token = credential::decode_vc(jwt);
  } catch (const Error& e) {
    return fail(401, "MalformedCredential", e.what());
  }

  // 2. appropriateness
  if (!credential::check_appropriateness(token.vc, config_.owner_id, req.device_id, req.fields))
    return fail(403, "NotAppropriate", "credential does not cover the requested device fields");

  // 3. validity
  credential::TrustAnchors anchors;
  {
    std::shared_lock lock(trust_mu_);
    anchors = config_.trust;
  }
  if (auto v = credential::verify_validity(token, anchors, now); v != credential::Validity::Ok)
    return fail(401, std::string(credential::to_string(v)), "credential is not valid");

  // 4. status
  std::string status_url = token.vc.status_list_url;
  for (const auto& t : anchors[token.vc.aud])
    if (t.uri == token.vc.iss && !t.status_url.empty()) status_url = t.status_url;
  try {
    auto list = status_cache_.get(status_url, now);
    if (token.vc.revocation_list_index >= list->capacity())
      return fail(401, "Revoked", "credential index is outside the issuer's status list");
    if (list->is_revoked(token.vc.revocation_list_index)) return fail(401, "Revoked", "credential has been revoked");
  } catch (const Error& e) {
    return fail(503, "IssuerUnreachable", e.what());
  }

  // 5. proof of possession
  if (req.dpop.empty()) return fail(401, "DpopMalformed", "DPoP header is required");
  auto dpop = credential::verify_dpop(req.dpop, token.vc.cnf_jwk, req.method, data_uri(req.device_id), now, replay_,
                                      config_.dpop_window_seconds);
  if (dpop != credential::DpopCheck::Ok) return fail(401, std::string(credential::to_string(dpop)), "DPoP proof rejected");

  // 6. fetch from the gateway
  storage::SignedDocument sd;
  try {
    sd = source_->fetch_latest(req.device_id);
  } catch (const Error& e) {
    if (e.code() == Errc::NotFound) return fail(404, "DeviceNotFound", e.what());
    return fail(502, "GatewayUnreachable", e.what());
  }
  if (sd.doc.value("deviceID", "") != req.device_id)
    return fail(502, "GatewayMismatch", "gateway returned a document for another device");
  auto pk = signer_key(sd.signer_key_id);
  if (!pk) return fail(502, "UnknownSigner", "document signer " + sd.signer_key_id + " is not known");

  // 7-8. disclose
  return disclose(sd, *pk, req.fields);
}

Outcome Proxy::disclose(const storage::SignedDocument& sd, const bbs::PublicKey& pk,
                        const std::vector<std::string>& fields) {
  try {
    auto canon = canonical::canonicalize(sd.doc);
    std::vector<Bytes> messages;
    messages.reserve(canon.count());
    for (const auto& m : canon.messages) messages.push_back(to_bytes(m.encoding));
    bbs::Signature sig = sd.signature;
    sig.message_count = messages.size();
    if (!bbs::verify(pk, messages, sig)) return fail(502, "BadDocumentSignature", "stored document fails verification");

    auto sub = framing::apply_frame(sd.doc, framing::frame_from_fields(fields));
    auto indices = framing::reveal_indices(canon, sub);
    Bytes nonce = random_bytes(32);
    auto proof = bbs::derive_proof(pk, sig, messages, indices, nonce);
    if (tamper_hook_) tamper_hook_(proof);

    DisclosureEnvelope env;
    for (auto i : indices) env.revealed.push_back({i, canon.messages[i].encoding});
    env.proof = proof.bytes;
    env.total_count = proof.total_count;
    env.signer_key_id = sd.signer_key_id;
    env.presentation_nonce = nonce;
    env.display = framing::reconstruct(sub).display;

    // Never emit an envelope the client would reject.
    if (!verify_envelope(env, pk)) return fail(500, "ProofSelfCheckFailed", "derived proof failed verification");
    return Outcome{200, "", "", std::move(env)};
  } catch (const Error& e) {
    return fail(500, "DisclosureFailed", e.what());
  }
}

// --- HTTP --------------------------------------------------------------------------

void mount_routes(httplib::Server& server, Proxy& proxy, std::function<std::int64_t()> clock) {
  using httplib::Request;
  using httplib::Response;

  server.Post("/data", [&proxy, clock](const Request& req, Response& res) {
    DataRequest dr;
    dr.method = req.method;
    dr.device_id = req.get_param_value("deviceID");
    dr.authorization = req.get_header_value("Authorization");
    dr.dpop = req.get_header_value("DPoP");
    Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("fields") || !body["fields"].is_array())
      return support::send_problem(res, 400, "MalformedRequest", "body must be {\"fields\": [...]}");
    for (const auto& f : body["fields"]) {
      if (!f.is_string() || f.get<std::string>().empty())
        return support::send_problem(res, 400, "MalformedRequest", "fields must be non-empty strings");
      dr.fields.push_back(f.get<std::string>());
    }
    Outcome out = proxy.handle(dr, clock());
    if (!out.ok()) {
      if (out.status == 401) res.set_header("WWW-Authenticate", "DPoP error=\"" + out.reason + "\"");
      return support::send_problem(res, out.status, out.reason, out.detail);
    }
    res.set_header("Cache-Control", "no-store");
    support::send_json(res, 200, out.envelope->to_json());
  });

  server.Get(R"(/keys/([^/]+))", [&proxy](const Request& req, Response& res) {
    auto pk = proxy.signer_key(req.matches[1]);
    if (!pk) return support::send_problem(res, 404, "NotFound", "unknown key id");
    support::send_json(res, 200,
                       Json{{"keyId", req.matches[1].str()}, {"publicKey", base64url_encode(bbs::public_key_to_bytes(*pk))}});
  });

  server.Post("/admin/trust", [&proxy](const Request& req, Response& res) {
    if (!support::header_key_matches(req, "X-Admin-Key", proxy.config().admin_key))
      return support::send_problem(res, 401, "Unauthorized", "missing or wrong X-Admin-Key");
    Json body = Json::parse(req.body, nullptr, false);
    try {
      if (body.is_discarded()) throw Error(Errc::MalformedInput, "body is not JSON");
      proxy.add_trusted_issuer(body.at("owner_id").get<std::string>(), issuer_from_json(body.at("issuer")));
      support::send_json(res, 200, Json{{"trusted", body["issuer"]["uri"]}});
    } catch (const std::exception& e) {
      support::send_problem(res, 400, "MalformedInput", e.what());
    }
  });
}

}  // namespace selectshare::proxy
