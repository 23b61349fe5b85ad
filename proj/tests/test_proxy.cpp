#include <atomic>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "loopback.hpp"
#include "selectshare/bytes.hpp"
#include "selectshare/canonical.hpp"
#include "selectshare/error.hpp"
#include "selectshare/framing.hpp"
#include "selectshare/harness.hpp"
#include "selectshare/proxy.hpp"
#include "selectshare/transcoder.hpp"
#include "test_support.hpp"

using namespace selectshare;
using proxy::DisclosureEnvelope;
using proxy::Json;
using proxy::Outcome;
using testsupport::Rng;
using testsupport::Stack;

namespace {

Json demo_doc() { return transcoder::transcode(harness::demo_readings()); }

const credential::Capabilities kTemperatureOnly{{"monitor-1", {"temperature"}}};

std::string reason(const Outcome& o) { return std::to_string(o.status) + " " + o.reason; }

proxy::DataRequest request_for(Stack& s, const Stack::Client& c, const std::string& device,
                               std::vector<std::string> fields) {
  proxy::DataRequest r;
  r.device_id = device;
  r.fields = std::move(fields);
  r.authorization = "DPoP " + c.vc;
  r.dpop = credential::create_dpop(c.key, "POST", s.proxy->data_uri(device), s.now);
  return r;
}

// Returns whatever document it is given, for exercising the gateway-facing checks.
class FixedSource : public proxy::DocumentSource {
 public:
  std::optional<storage::SignedDocument> doc;
  std::map<std::string, bbs::PublicKey> keys;
  bool down = false;

  storage::SignedDocument fetch_latest(const std::string&) override {
    if (down) throw Error(Errc::Io, "down");
    if (!doc) throw Error(Errc::NotFound, "none");
    return *doc;
  }
  std::optional<bbs::PublicKey> signer_key(const std::string& kid) override {
    auto it = keys.find(kid);
    if (it == keys.end()) return std::nullopt;
    return it->second;
  }
};

}  // namespace

TEST(Proxy, GoldenPath) {
  Stack s;
  s.upload(demo_doc());
  auto client = s.enroll("client-1", kTemperatureOnly);
  auto out = s.request(client, "monitor-1", {"temperature"});
  ASSERT_TRUE(out.ok()) << reason(out) << " " << out.detail;
  const auto& env = *out.envelope;
  EXPECT_EQ(canonical::render_document(env.display),
            R"({"measurements":[{"field":"temperature","values":[{"value":"30C"}]}]})");
  EXPECT_EQ(env.total_count, 7u);
  EXPECT_EQ(env.signer_key_id, s.signer.key_id);
  EXPECT_EQ(env.presentation_nonce.size(), 32u);
  ASSERT_EQ(env.revealed.size(), 2u);
  EXPECT_EQ(env.revealed[0].message, R"("measurements"[0]"field"="temperature")");
  EXPECT_EQ(env.revealed[1].message, R"("measurements"[0]"values"[0]"value"="30C")");
  EXPECT_TRUE(proxy::verify_envelope(env, s.signer.public_key));

  auto back = DisclosureEnvelope::from_json(Json::parse(env.to_json().dump()));
  EXPECT_TRUE(proxy::verify_envelope(back, s.signer.public_key));
}

TEST(Proxy, AccessMatrix) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);

  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "200 ");
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"humidity"})), "403 NotAppropriate");
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature", "humidity"})), "403 NotAppropriate");
  EXPECT_EQ(reason(s.request(c, "monitor-2", {"temperature"})), "403 NotAppropriate");

  auto r = request_for(s, c, "monitor-1", {"temperature"});
  r.authorization.clear();
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 MissingCredential");
  r.authorization = "Bearer " + c.vc;
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 MissingCredential");
  r.authorization = "DPoP not-a-jwt";
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 MalformedCredential");

  r = request_for(s, c, "monitor-1", {"temperature"});
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "200 ");
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 Replayed");

  r = request_for(s, c, "monitor-1", {"temperature"});
  r.method = "GET";
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 MethodMismatch");
  r = request_for(s, c, "monitor-1", {"temperature"});
  r.dpop = credential::create_dpop(c.key, "POST", "https://elsewhere.example/data", s.now);
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 UriMismatch");
  r.dpop.clear();
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 DpopMalformed");
  r.dpop = credential::create_dpop(jose::EcKey::generate(), "POST", s.proxy->data_uri("monitor-1"), s.now);
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 DpopBadSignature");
  r.dpop = credential::create_dpop(c.key, "POST", s.proxy->data_uri("monitor-1"), s.now - 61);
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 Stale");

  r = request_for(s, c, "monitor-1", {});
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "400 MalformedRequest");
  r = request_for(s, c, "", {"temperature"});
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "400 MalformedRequest");
}

TEST(Proxy, ExpiredCredential) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);
  EXPECT_EQ(c.claims.exp, 1618423370);
  s.now = 1618423370 + 1;
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "401 Expired");
  s.now = 1618423370 - 1;
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "200 ");
}

TEST(Proxy, TrustAndSignature) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);

  // a look-alike issuer with its own key
  issuer::IssuerConfig ic;
  issuer::IssuerService rogue(ic, jose::EcKey::generate());
  rogue.put_client("x", "x-secret", "owner-1");
  rogue.put_policy("x", kTemperatureOnly);
  auto key = jose::EcKey::generate();
  auto tok = rogue.issue_token({"client_credentials", "x", "x-secret", issuer::make_authorization_details(key, "x", s.now)}, s.now);
  Stack::Client forged{tok.access_token, key, tok.vc};
  EXPECT_EQ(reason(s.request(forged, "monitor-1", {"temperature"})), "401 BadSignature");

  ic.issuer_uri = "https://other-issuer.com";
  issuer::IssuerService other(ic, jose::EcKey::generate());
  other.put_client("x", "x-secret", "owner-1");
  other.put_policy("x", kTemperatureOnly);
  tok = other.issue_token({"client_credentials", "x", "x-secret", issuer::make_authorization_details(key, "x", s.now)}, s.now);
  Stack::Client untrusted{tok.access_token, key, tok.vc};
  EXPECT_EQ(reason(s.request(untrusted, "monitor-1", {"temperature"})), "401 UntrustedIssuer");

  s.proxy->add_trusted_issuer("owner-1", {"https://other-issuer.com", other.public_jwk(), ""});
  // status list of the other issuer is fetched through the same fetcher here, which serves index 0 as unrevoked
  EXPECT_EQ(reason(s.request(untrusted, "monitor-1", {"temperature"})), "200 ");
}

TEST(Proxy, ChecksRunInPipelineOrder) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);
  s.issuer->revoke(c.claims.jti);

  // inappropriate and expired and revoked: appropriateness is checked first
  s.now = c.claims.exp + 10;
  auto r = request_for(s, c, "monitor-1", {"humidity"});
  r.dpop = "junk";
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "403 NotAppropriate");
  // expired and revoked and bad DPoP: validity before status
  r.fields = {"temperature"};
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 Expired");
  // revoked and bad DPoP: status before possession
  s.now = c.claims.iat + 5;
  EXPECT_EQ(reason(s.proxy->handle(r, s.now)), "401 Revoked");
}

TEST(Proxy, StatusListCaching) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);

  for (int i = 0; i < 5; ++i) ASSERT_TRUE(s.request(c, "monitor-1", {"temperature"}).ok());
  EXPECT_EQ(s.status_fetches, 1u);

  // revocation becomes visible only once the cached list is older than the TTL
  s.issuer->revoke(c.claims.jti);
  s.now += 30;
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "200 ");
  s.now += 31;
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "401 Revoked");
  EXPECT_EQ(s.status_fetches, 2u);
}

TEST(Proxy, IssuerOutageGraceThenFailClosed) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);
  ASSERT_TRUE(s.request(c, "monitor-1", {"temperature"}).ok());
  std::int64_t fetched = s.now;
  s.issuer_down = true;
  s.now = fetched + 200;  // past TTL, within the 300 s grace
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "200 ");
  s.now = fetched + 301;
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "503 IssuerUnreachable");
  s.issuer_down = false;
  EXPECT_EQ(reason(s.request(c, "monitor-1", {"temperature"})), "200 ");

  Stack cold;
  cold.upload(demo_doc());
  auto c2 = cold.enroll("client-1", kTemperatureOnly);
  cold.issuer_down = true;
  EXPECT_EQ(reason(cold.request(c2, "monitor-1", {"temperature"})), "503 IssuerUnreachable");
}

TEST(Proxy, StatusCacheFetchesPerUrlAndTtl) {
  credential::StatusList small;
  Json served = small.to_json("u");
  proxy::StatusListCache cache([&](const std::string&) { return served; }, 60, 300);
  auto list = cache.get("u", 0);
  EXPECT_EQ(list->capacity(), 131072u);
  EXPECT_EQ(cache.fetch_count(), 1u);
  cache.get("u", 59);
  EXPECT_EQ(cache.fetch_count(), 1u);
  cache.get("u", 60);
  EXPECT_EQ(cache.fetch_count(), 2u);
  cache.get("v", 60);
  EXPECT_EQ(cache.fetch_count(), 3u);
}

TEST(Proxy, GatewayFailures) {
  auto issuer_key = jose::EcKey::generate();
  issuer::IssuerService iss({}, issuer_key);
  iss.put_client("c", "c-secret", "owner-1");
  iss.put_policy("c", {{"monitor-1", {"temperature"}}});
  auto holder = jose::EcKey::generate();
  const std::int64_t now = 1617559370;
  auto tok = iss.issue_token({"client_credentials", "c", "c-secret", issuer::make_authorization_details(holder, "c", now)}, now);

  auto src = std::make_shared<FixedSource>();
  proxy::ProxyConfig pc;
  pc.owner_id = "owner-1";
  pc.trust["owner-1"].push_back({"https://issuer.com", iss.public_jwk(), ""});
  proxy::Proxy p(pc, src, [&](const std::string&) { return iss.status_list_json(); });
  auto ask = [&] {
    proxy::DataRequest r;
    r.device_id = "monitor-1";
    r.fields = {"temperature"};
    r.authorization = "DPoP " + tok.access_token;
    r.dpop = credential::create_dpop(holder, "POST", p.data_uri("monitor-1"), now);
    return reason(p.handle(r, now));
  };

  EXPECT_EQ(ask(), "404 DeviceNotFound");
  src->down = true;
  EXPECT_EQ(ask(), "502 GatewayUnreachable");
  src->down = false;

  auto key = bbs::keygen();
  src->doc = storage::sign_document(demo_doc(), key);
  EXPECT_EQ(ask(), "502 UnknownSigner");
  src->keys[key.key_id] = key.public_key;
  EXPECT_EQ(ask(), "200 ");

  src->doc->doc["measurements"][0]["values"][0]["value"] = "0C";
  EXPECT_EQ(ask(), "502 BadDocumentSignature");

  src->doc = storage::sign_document(Json{{"deviceID", "monitor-2"}, {"measurements", Json::array()}}, key);
  EXPECT_EQ(ask(), "502 GatewayMismatch");

  // a key pinned in config wins over what the source says
  src->doc = storage::sign_document(demo_doc(), key);
  src->keys[key.key_id] = bbs::keygen().public_key;
  EXPECT_EQ(ask(), "502 BadDocumentSignature");
  pc.signers[key.key_id] = key.public_key;
  proxy::Proxy pinned(pc, src, [&](const std::string&) { return iss.status_list_json(); });
  proxy::DataRequest r;
  r.device_id = "monitor-1";
  r.fields = {"temperature"};
  r.authorization = "DPoP " + tok.access_token;
  r.dpop = credential::create_dpop(holder, "POST", pinned.data_uri("monitor-1"), now);
  EXPECT_TRUE(pinned.handle(r, now).ok());

  // nothing listening at the gateway address
  proxy::Proxy remote(pc, std::make_shared<proxy::HttpDocumentSource>("http://127.0.0.1:1", ""),
                      [&](const std::string&) { return iss.status_list_json(); });
  r.dpop = credential::create_dpop(holder, "POST", remote.data_uri("monitor-1"), now);
  EXPECT_EQ(reason(remote.handle(r, now)), "502 GatewayUnreachable");
}

TEST(Proxy, NeverEmitsAnEnvelopeThatFailsVerification) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);
  int calls = 0;
  s.proxy->set_proof_tamper_hook([&](bbs::SelectiveProof& p) {
    ++calls;
    p.bytes[p.bytes.size() / 2] ^= 0x40;
  });
  for (int i = 0; i < 5; ++i) {
    auto out = s.request(c, "monitor-1", {"temperature"});
    EXPECT_EQ(reason(out), "500 ProofSelfCheckFailed");
    EXPECT_FALSE(out.envelope.has_value());
  }
  EXPECT_EQ(calls, 5);
  s.proxy->set_proof_tamper_hook({});
  EXPECT_TRUE(s.request(c, "monitor-1", {"temperature"}).ok());
}

TEST(Proxy, EnvelopeVerificationNegatives) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", {{"monitor-1", {"temperature", "humidity"}}});
  auto env = *s.request(c, "monitor-1", {"temperature"}).envelope;
  const auto& pk = s.signer.public_key;
  ASSERT_TRUE(proxy::verify_envelope(env, pk));

  auto e = env;
  e.display["measurements"][0]["values"][0]["value"] = "10C";
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  e = env;
  e.display["measurements"].push_back({{"field", "humidity"}});
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  e = env;
  e.revealed[1].message = R"("measurements"[0]"values"[0]"value"="10C")";
  e.display["measurements"][0]["values"][0]["value"] = "10C";
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  e = env;
  e.presentation_nonce[0] ^= 1;
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  e = env;
  e.revealed.push_back(e.revealed[0]);
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  e = env;
  e.revealed.pop_back();
  e.display = framing::reconstruct(framing::sub_item_from_messages({canonical::decode_message(e.revealed[0].message)})).display;
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  e = env;
  e.total_count += 1;
  EXPECT_FALSE(proxy::verify_envelope(e, pk));
  EXPECT_FALSE(proxy::verify_envelope(env, bbs::keygen().public_key));

  Json j = env.to_json();
  j.erase("proof");
  EXPECT_THROW(DisclosureEnvelope::from_json(j), Error);
  j = env.to_json();
  j["revealed"][0]["message"] = "***";
  try {
    DisclosureEnvelope::from_json(j);
    ADD_FAILURE();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::MalformedEnvelope);
  }
}

TEST(Proxy, SplicingFromAnotherDocumentFails) {
  Rng rng(71);
  Stack s;
  auto c = s.enroll("client-1", {{"dev", testsupport::field_pool()}});
  for (int t = 0; t < 40; ++t) {
    Json a = testsupport::random_measurement_doc(rng, "dev");
    Json b = testsupport::random_measurement_doc(rng, "dev");
    auto other = canonical::canonicalize(b);
    s.upload(a);
    std::vector<std::string> fields;
    for (const auto& m : a["measurements"]) fields.push_back(m["field"]);
    auto out = s.request(c, "dev", fields);
    ASSERT_TRUE(out.ok()) << reason(out);
    auto env = *out.envelope;
    std::size_t slot = testsupport::uniform(rng, 0, env.revealed.size() - 1);
    std::string replacement = other.messages[testsupport::uniform(rng, 0, other.count() - 1)].encoding;
    if (replacement == env.revealed[slot].message) continue;
    env.revealed[slot].message = replacement;
    std::map<std::size_t, Bytes> revealed;
    for (const auto& r : env.revealed) revealed[r.index] = to_bytes(r.message);
    bbs::SelectiveProof proof{env.proof, {}, env.total_count, env.presentation_nonce};
    for (const auto& [i, m] : revealed) proof.revealed_indices.push_back(i);
    EXPECT_FALSE(bbs::verify_proof(s.signer.public_key, proof, revealed, env.presentation_nonce));
    EXPECT_FALSE(proxy::verify_envelope(env, s.signer.public_key));
    s.now += 1;
  }
}

TEST(Proxy, LeastDisclosure) {
  Rng rng(72);
  Stack s;
  auto pool = testsupport::field_pool();
  for (int t = 0; t < 150; ++t) {
    Json doc = testsupport::random_measurement_doc(rng, "dev");
    s.upload(doc);
    credential::Capabilities policy;
    for (const auto& f : pool)
      if (testsupport::coin(rng, 0.5)) policy["dev"].push_back(f);
    if (policy.empty()) policy["dev"] = {pool[0]};
    auto c = s.enroll("client-" + std::to_string(t), policy);
    std::vector<std::string> req;
    for (const auto& f : policy["dev"])
      if (testsupport::coin(rng, 0.5)) req.push_back(f);
    if (req.empty()) req.push_back(policy["dev"][0]);
    auto out = s.request(c, "dev", req);
    ASSERT_TRUE(out.ok()) << reason(out);

    auto sub = framing::apply_frame(doc, framing::frame_from_fields(req));
    std::set<std::string> allowed;
    for (const auto& [p, v] : sub.revealed) allowed.insert(testsupport::oracle_path(p));
    for (const auto& r : out.envelope->revealed) {
      auto [path, value] = canonical::decode_message(r.message);
      EXPECT_TRUE(allowed.count(testsupport::oracle_path(path))) << r.message;
      // field names and values only: no deviceID, no times
      auto last = std::get<std::string>(path.segments().back());
      EXPECT_TRUE(last == "field" || last == "value") << r.message;
    }
    EXPECT_EQ(out.envelope->revealed.size(), allowed.size());
    EXPECT_TRUE(proxy::verify_envelope(*out.envelope, s.signer.public_key));
    s.now += 1;
  }
}

TEST(Proxy, DecisionsComeOnlyFromTheCredential) {
  // same proxy, no reconfiguration: two clients with different policies get different answers
  Stack s;
  s.upload(demo_doc());
  auto temp = s.enroll("client-t", kTemperatureOnly);
  auto hum = s.enroll("client-h", {{"monitor-1", {"humidity"}}});
  EXPECT_EQ(reason(s.request(temp, "monitor-1", {"humidity"})), "403 NotAppropriate");
  auto out = s.request(hum, "monitor-1", {"humidity"});
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(canonical::render_document(out.envelope->display),
            R"({"measurements":[{"field":"humidity","values":[{"value":"50"}]}]})");
}

TEST(Proxy, ConcurrentReplayAdmitsOnce) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);
  auto r = request_for(s, c, "monitor-1", {"temperature"});
  ASSERT_TRUE(s.proxy->status_cache().get(c.claims.status_list_url, s.now));
  std::atomic<int> ok{0}, replayed{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i)
    threads.emplace_back([&] {
      auto out = s.proxy->handle(r, s.now);
      if (out.ok()) ++ok;
      if (out.reason == "Replayed") ++replayed;
    });
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(replayed.load(), 7);
}

TEST(Proxy, ConfigFromJson) {
  auto issuer_key = jose::EcKey::generate();
  auto signer = bbs::keygen();
  Json j{{"owner_id", "owner-1"},
         {"trusted_issuers", {{"owner-1", {{{"uri", "https://issuer.com"}, {"jwk", issuer_key.public_jwk()}}}}}},
         {"gateway_url", "http://127.0.0.1:8081"},
         {"public_base_url", "https://proxy.example/"},
         {"signers", {{signer.key_id, base64url_encode(bbs::public_key_to_bytes(signer.public_key))}}}};
  auto cfg = proxy::ProxyConfig::from_json(j);
  EXPECT_EQ(cfg.trust["owner-1"].size(), 1u);
  EXPECT_EQ(cfg.public_base_url, "https://proxy.example");
  EXPECT_EQ(cfg.signers.at(signer.key_id), signer.public_key);
  EXPECT_THROW(proxy::ProxyConfig::from_json(Json::object()), Error);
  j["trusted_issuers"]["owner-1"][0]["jwk"] = {{"kty", "EC"}};
  EXPECT_THROW(proxy::ProxyConfig::from_json(j), Error);
}

// --- HTTP ---------------------------------------------------------------------------

TEST(ProxyHttp, Routes) {
  Stack s;
  s.upload(demo_doc());
  auto c = s.enroll("client-1", kTemperatureOnly);
  std::atomic<std::int64_t> now{s.now};
  testsupport::Loopback host;
  proxy::mount_routes(host.server(), *s.proxy, [&] { return now.load(); });
  host.start();
  auto cli = host.client();

  auto post = [&](const std::string& dpop_method, const std::string& body) {
    httplib::Headers h{{"Authorization", "DPoP " + c.vc},
                       {"DPoP", credential::create_dpop(c.key, dpop_method, s.proxy->data_uri("monitor-1"), now)}};
    return cli.Post("/data?deviceID=monitor-1", h, body, "application/json");
  };

  auto res = post("POST", R"({"fields":["temperature"]})");
  ASSERT_EQ(res->status, 200);
  auto env = DisclosureEnvelope::from_json(Json::parse(res->body));
  auto key_res = cli.Get("/keys/" + env.signer_key_id);
  auto pk = bbs::public_key_from_bytes(base64url_decode(Json::parse(key_res->body)["publicKey"].get<std::string>()));
  EXPECT_TRUE(proxy::verify_envelope(env, pk));
  EXPECT_EQ(cli.Get("/keys/unknown")->status, 404);

  res = post("POST", R"({"fields":["humidity"]})");
  EXPECT_EQ(res->status, 403);
  EXPECT_EQ(Json::parse(res->body)["reason"], "NotAppropriate");
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/problem+json");

  res = post("GET", R"({"fields":["temperature"]})");
  EXPECT_EQ(res->status, 401);
  EXPECT_EQ(res->get_header_value("WWW-Authenticate"), R"(DPoP error="MethodMismatch")");

  EXPECT_EQ(post("POST", "not json")->status, 400);
  EXPECT_EQ(post("POST", R"({"fields":[1]})")->status, 400);

  Json trust{{"owner_id", "owner-1"}, {"issuer", {{"uri", "https://x.example"}, {"jwk", jose::EcKey::generate().public_jwk()}}}};
  EXPECT_EQ(cli.Post("/admin/trust", trust.dump(), "application/json")->status, 401);
}
