#include "selectshare/credential.hpp"

#include <algorithm>
#include <bit>
#include <cctype>

#include "selectshare/error.hpp"

namespace selectshare::credential {

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(Errc::InvalidClaims, why); }

bool contains_string(const Json& arr, std::string_view s) {
  if (!arr.is_array()) return false;
  return std::any_of(arr.begin(), arr.end(), [&](const Json& v) { return v.is_string() && v.get<std::string>() == s; });
}

std::string require_string(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) invalid(std::string("claim \"") + key + "\" missing or not a string");
  return j[key].get<std::string>();
}

std::int64_t require_int(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer()) invalid(std::string("claim \"") + key + "\" missing or not an integer");
  return j[key].get<std::int64_t>();
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

Json CapabilityVC::to_claims() const {
  Json caps = Json::object();
  for (const auto& [device, fields] : capabilities) caps[device] = fields;
  return Json{
      {"jti", jti},
      {"iss", iss},
      {"aud", aud},
      {"iat", iat},
      {"exp", exp},
      {"cnf", {{"jwk", cnf_jwk}}},
      {"vc",
       {{"@context", {kVcContext, kCapabilitiesContext}},
        {"type", {"VerifiableCredential"}},
        {"credentialSubject", {{"type", {"CapabilitiesCredential"}}, {"capabilities", caps}}},
        {"credentialStatus",
         {{"id", status_list_url + "#" + std::to_string(revocation_list_index)},
          {"type", kStatusEntryType},
          {"revocationListIndex", revocation_list_index},
          {"revocationListCredential", status_list_url}}}}}};
}

CapabilityVC CapabilityVC::from_claims(const Json& claims) {
  if (!claims.is_object()) invalid("claims must be an object");
  CapabilityVC vc;
  vc.jti = require_string(claims, "jti");
  vc.iss = require_string(claims, "iss");
  vc.aud = require_string(claims, "aud");
  vc.iat = require_int(claims, "iat");
  vc.exp = require_int(claims, "exp");
  if (!claims.contains("cnf") || !claims["cnf"].is_object() || !claims["cnf"].contains("jwk"))
    invalid("claim \"cnf.jwk\" missing");
  vc.cnf_jwk = claims["cnf"]["jwk"];

  if (!claims.contains("vc") || !claims["vc"].is_object()) invalid("claim \"vc\" missing");
  const Json& body = claims["vc"];
  if (!contains_string(body.value("type", Json()), "VerifiableCredential"))
    invalid("vc.type lacks VerifiableCredential");
  if (!body.contains("credentialSubject") || !body["credentialSubject"].is_object())
    invalid("vc.credentialSubject missing");
  const Json& subject = body["credentialSubject"];
  if (!contains_string(subject.value("type", Json()), "CapabilitiesCredential"))
    invalid("credentialSubject.type lacks CapabilitiesCredential");
  if (!subject.contains("capabilities") || !subject["capabilities"].is_object())
    invalid("credentialSubject.capabilities must be an object");
  for (const auto& [device, fields] : subject["capabilities"].items()) {
    if (!fields.is_array()) invalid("capabilities[" + device + "] must be an array");
    auto& list = vc.capabilities[device];
    for (const auto& f : fields) {
      if (!f.is_string()) invalid("capability fields must be strings");
      list.push_back(f.get<std::string>());
    }
  }
  if (!body.contains("credentialStatus") || !body["credentialStatus"].is_object())
    invalid("vc.credentialStatus missing");
  const Json& status = body["credentialStatus"];
  if (!status.contains("revocationListIndex") || !status["revocationListIndex"].is_number_unsigned())
    invalid("credentialStatus.revocationListIndex must be a non-negative integer");
  vc.revocation_list_index = status["revocationListIndex"].get<std::size_t>();
  vc.status_list_url = require_string(status, "revocationListCredential");
  validate_claims(vc);
  return vc;
}

void validate_claims(const CapabilityVC& vc) {
  if (vc.jti.empty() || vc.iss.empty() || vc.aud.empty()) invalid("jti, iss and aud must be non-empty");
  if (!(vc.iat < vc.exp)) invalid("iat must precede exp");
  if (!vc.cnf_jwk.is_object()) invalid("cnf.jwk must be a JWK object");
  if (vc.capabilities.empty()) invalid("capabilities must be non-empty");
  for (const auto& [device, fields] : vc.capabilities) {
    if (device.empty()) invalid("empty device identifier");
    if (fields.empty()) invalid("capabilities[" + device + "] must list at least one field");
  }
}

std::string encode_vc(const CapabilityVC& vc, const jose::EcKey& issuer_key, std::string_view kid) {
  validate_claims(vc);
  Json header{{"alg", "ES256"}, {"typ", "JWT"}};
  if (!kid.empty()) header["kid"] = kid;
  return jose::jws_sign(header, vc.to_claims(), issuer_key);
}

VcToken decode_vc(std::string_view jwt) {
  VcToken t;
  t.jws = jose::jws_decode(jwt);
  if (t.jws.header.value("alg", "") != "ES256") throw Error(Errc::MalformedToken, "VC must be signed with ES256");
  t.vc = CapabilityVC::from_claims(t.jws.payload);
  return t;
}

std::string_view to_string(Validity v) noexcept {
  switch (v) {
    case Validity::Ok: return "Ok";
    case Validity::Expired: return "Expired";
    case Validity::BadSignature: return "BadSignature";
    case Validity::UntrustedIssuer: return "UntrustedIssuer";
  }
  return "Unknown";
}

Validity verify_validity(const VcToken& token, const TrustAnchors& anchors, std::int64_t now) {
  if (now >= token.vc.exp) return Validity::Expired;
  auto owner = anchors.find(token.vc.aud);
  if (owner == anchors.end()) return Validity::UntrustedIssuer;
  auto issuer = std::find_if(owner->second.begin(), owner->second.end(),
                             [&](const TrustedIssuer& t) { return t.uri == token.vc.iss; });
  if (issuer == owner->second.end()) return Validity::UntrustedIssuer;
  try {
    auto key = jose::EcKey::from_jwk(issuer->public_jwk);
    return jose::jws_verify(token.jws, key) ? Validity::Ok : Validity::BadSignature;
  } catch (const Error&) {
    return Validity::BadSignature;
  }
}

bool check_appropriateness(const CapabilityVC& vc, std::string_view owner_id, std::string_view device_id,
                           const std::vector<std::string>& fields) {
  if (vc.aud != owner_id) return false;
  auto it = vc.capabilities.find(std::string(device_id));
  if (it == vc.capabilities.end()) return false;
  const auto& allowed = it->second;
  return std::all_of(fields.begin(), fields.end(), [&](const std::string& f) {
    return std::find(allowed.begin(), allowed.end(), f) != allowed.end();
  });
}

// --- StatusList ---------------------------------------------------------------

std::size_t StatusList::allocate() {
  if (issued_count_ == capacity()) bits_.resize(bits_.size() * 2, 0);
  return issued_count_++;
}

void StatusList::set_issued_count(std::size_t n) {
  while (capacity() < n) bits_.resize(bits_.size() * 2, 0);
  issued_count_ = n;
}

bool StatusList::is_revoked(std::size_t index) const {
  if (index >= capacity()) throw Error(Errc::IndexOutOfRange, "status index " + std::to_string(index) + " out of range");
  return (bits_[index / 8] >> (7 - index % 8)) & 1u;
}

void StatusList::revoke(std::size_t index) {
  if (index >= capacity()) throw Error(Errc::IndexOutOfRange, "status index " + std::to_string(index) + " out of range");
  bits_[index / 8] |= static_cast<std::uint8_t>(1u << (7 - index % 8));
}

std::size_t StatusList::revoked_count() const {
  std::size_t n = 0;
  for (auto b : bits_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

Json StatusList::to_json(std::string_view id) const {
  return Json{{"id", id}, {"encodedList", base64url_encode(gzip_compress(bits_))}, {"issuedCount", issued_count_}};
}

StatusList StatusList::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("encodedList") || !j["encodedList"].is_string())
    throw Error(Errc::MalformedInput, "status list lacks encodedList");
  StatusList list;
  list.bits_ = gzip_decompress(base64url_decode(j["encodedList"].get<std::string>()));
  if (list.bits_.empty()) throw Error(Errc::MalformedInput, "empty status list");
  std::size_t issued = j.value("issuedCount", std::size_t{0});
  if (issued > list.capacity()) throw Error(Errc::MalformedInput, "issuedCount exceeds list length");
  list.issued_count_ = issued;
  return list;
}

// --- DPoP ---------------------------------------------------------------------

std::string_view to_string(DpopCheck c) noexcept {
  switch (c) {
    case DpopCheck::Ok: return "Ok";
    case DpopCheck::Malformed: return "DpopMalformed";
    case DpopCheck::BadSignature: return "DpopBadSignature";
    case DpopCheck::MethodMismatch: return "MethodMismatch";
    case DpopCheck::UriMismatch: return "UriMismatch";
    case DpopCheck::Stale: return "Stale";
    case DpopCheck::Replayed: return "Replayed";
  }
  return "Unknown";
}

bool ReplayCache::check_and_insert(const std::string& jti, std::int64_t now) {
  std::lock_guard lock(mu_);
  if (now - last_prune_ >= horizon_ / 4 || seen_.size() > 100000) {
    std::erase_if(seen_, [&](const auto& kv) { return now - kv.second > horizon_; });
    last_prune_ = now;
  }
  auto [it, inserted] = seen_.try_emplace(jti, now);
  if (!inserted && now - it->second > horizon_) {
    it->second = now;
    return true;
  }
  return inserted;
}

std::size_t ReplayCache::size() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

std::string create_dpop(const jose::EcKey& holder_key, std::string_view method, std::string_view uri,
                        std::int64_t now) {
  Json header{{"typ", "dpop+jwt"}, {"alg", "ES256"}, {"jwk", holder_key.public_jwk()}};
  Json payload{{"jti", base64url_encode(random_bytes(16))}, {"htm", method}, {"htu", uri}, {"iat", now}};
  return jose::jws_sign(header, payload, holder_key);
}

DpopCheck verify_dpop(std::string_view proof, const Json& cnf_jwk, std::string_view method, std::string_view uri,
                      std::int64_t now, ReplayCache& replay_cache, std::int64_t window_seconds) {
  jose::CompactJws jws;
  try {
    jws = jose::jws_decode(proof);
  } catch (const Error&) {
    return DpopCheck::Malformed;
  }
  const Json& p = jws.payload;
  if (jws.header.value("typ", "") != "dpop+jwt" || !p.contains("jti") || !p["jti"].is_string() ||
      p["jti"].get<std::string>().empty() || !p.contains("htm") || !p["htm"].is_string() || !p.contains("htu") ||
      !p["htu"].is_string() || !p.contains("iat") || !p["iat"].is_number_integer())
    return DpopCheck::Malformed;

  try {
    auto key = jose::EcKey::from_jwk(cnf_jwk);
    if (jws.header.contains("jwk") && jose::EcKey::from_jwk(jws.header["jwk"]).thumbprint() != key.thumbprint())
      return DpopCheck::BadSignature;
    if (!jose::jws_verify(jws, key)) return DpopCheck::BadSignature;
  } catch (const Error&) {
    return DpopCheck::BadSignature;
  }
  if (p["htm"].get<std::string>() != method) return DpopCheck::MethodMismatch;
  if (normalize_htu(p["htu"].get<std::string>()) != normalize_htu(uri)) return DpopCheck::UriMismatch;
  std::int64_t iat = p["iat"].get<std::int64_t>();
  if (iat > now + window_seconds || now - iat > window_seconds) return DpopCheck::Stale;
  if (!replay_cache.check_and_insert(p["jti"].get<std::string>(), now)) return DpopCheck::Replayed;
  return DpopCheck::Ok;
}

std::string normalize_htu(std::string_view uri) {
  uri = uri.substr(0, uri.find_first_of("?#"));
  auto scheme_end = uri.find("://");
  if (scheme_end == std::string_view::npos) return std::string(uri);
  std::string scheme = lower(uri.substr(0, scheme_end));
  std::string_view rest = uri.substr(scheme_end + 3);
  auto path_start = rest.find('/');
  std::string authority = lower(rest.substr(0, path_start));
  std::string path = path_start == std::string_view::npos ? "/" : std::string(rest.substr(path_start));
  auto strip = [&](std::string_view port) {
    if (authority.size() > port.size() && authority.ends_with(port)) authority.resize(authority.size() - port.size());
  };
  if (scheme == "http") strip(":80");
  if (scheme == "https") strip(":443");
  return scheme + "://" + authority + path;
}

}  // namespace selectshare::credential
