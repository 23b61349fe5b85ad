#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "loopback.hpp"
#include "selectshare/bytes.hpp"
#include "selectshare/credential.hpp"
#include "selectshare/error.hpp"
#include "selectshare/issuer.hpp"
#include "test_support.hpp"

using namespace selectshare;
using issuer::IssuerConfig;
using issuer::Json;
using issuer::IssuerService;
using issuer::TokenRequest;
using testsupport::Rng;

namespace fs = std::filesystem;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::Io;
}

constexpr std::int64_t kNow = 1617559370;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ss-issuer-" + hex_encode(random_bytes(6)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Fixture {
  jose::EcKey signing = jose::EcKey::generate();
  IssuerService service;
  jose::EcKey holder = jose::EcKey::generate();

  explicit Fixture(IssuerConfig cfg = {}) : service(cfg, signing) {
    service.put_client("client-1", "s3cret", "owner-1");
    service.put_policy("client-1", {{"monitor-1", {"temperature"}}});
  }

  TokenRequest request(std::int64_t now = kNow) {
    return {"client_credentials", "client-1", "s3cret", issuer::make_authorization_details(holder, "client-1", now)};
  }
};

}  // namespace

TEST(Issuer, IssuesExampleShapedVc) {
  Fixture f;
  auto tok = f.service.issue_token(f.request(), kNow);
  const auto& vc = tok.vc;
  EXPECT_EQ(vc.jti, "https://issuer.com/credentials/1");
  EXPECT_EQ(vc.iss, "https://issuer.com");
  EXPECT_EQ(vc.aud, "owner-1");
  EXPECT_EQ(vc.iat, kNow);
  EXPECT_EQ(vc.exp, kNow + 86400);
  EXPECT_EQ(tok.expires_in, 86400);
  EXPECT_EQ(vc.cnf_jwk, f.holder.public_jwk());
  EXPECT_EQ(vc.capabilities, (credential::Capabilities{{"monitor-1", {"temperature"}}}));
  EXPECT_EQ(vc.revocation_list_index, 0u);
  EXPECT_EQ(vc.status_list_url, "https://issuer.com/credentials/status/1");

  auto decoded = credential::decode_vc(tok.access_token);
  EXPECT_EQ(decoded.vc, vc);
  EXPECT_EQ(decoded.jws.header["kid"], f.signing.thumbprint());
  credential::TrustAnchors anchors{{"owner-1", {{"https://issuer.com", f.service.public_jwk(), ""}}}};
  EXPECT_EQ(credential::verify_validity(decoded, anchors, kNow + 1), credential::Validity::Ok);
  EXPECT_FALSE(f.service.status_list().is_revoked(0));
  EXPECT_EQ(f.service.issued_count(), 1u);
}

TEST(Issuer, ClientAuthentication) {
  Fixture f;
  auto r = f.request();
  r.client_secret = "wrong";
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::InvalidClient);
  r = f.request();
  r.client_id = "nobody";
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::InvalidClient);
  r = f.request();
  r.grant_type = "password";
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::MalformedInput);
}

TEST(Issuer, KeyBinding) {
  Fixture f;
  auto r = f.request();
  r.authorization_details.reset();
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::MissingAuthorizationDetails);

  r.authorization_details = Json::array({Json{{"type", "something_else"}}});
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::MissingAuthorizationDetails);

  // proof made with a key other than the one presented
  auto other = jose::EcKey::generate();
  std::string foreign_proof =
      jose::jws_sign({{"alg", "ES256"}}, {{"client_id", "client-1"}, {"iat", kNow}, {"nonce", "n1"}}, other);
  EXPECT_FALSE(jose::jws_verify(jose::jws_decode(foreign_proof), f.holder));
  r.authorization_details =
      Json::array({Json{{"type", "vc_holder_key"}, {"jwk", f.holder.public_jwk()}, {"proof", foreign_proof}}});
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::InvalidKeyProof);

  // proof naming another client
  std::string wrong_client =
      jose::jws_sign({{"alg", "ES256"}}, {{"client_id", "client-2"}, {"iat", kNow}, {"nonce", "n2"}}, f.holder);
  r.authorization_details =
      Json::array({Json{{"type", "vc_holder_key"}, {"jwk", f.holder.public_jwk()}, {"proof", wrong_client}}});
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::InvalidKeyProof);

  // stale proof
  r = f.request(kNow - 61);
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::InvalidKeyProof);

  // private JWK offered as holder key
  Json priv = f.request().authorization_details.value();
  priv[0]["jwk"] = f.holder.private_jwk();
  r.authorization_details = priv;
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::InvalidKeyProof);

  // replayed proof
  r = f.request();
  f.service.issue_token(r, kNow);
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow + 1); }), Errc::InvalidKeyProof);
}

TEST(Issuer, PolicyEmpty) {
  Fixture f;
  f.service.put_client("client-2", "pw", "owner-1");
  auto holder = jose::EcKey::generate();
  TokenRequest r{"client_credentials", "client-2", "pw", issuer::make_authorization_details(holder, "client-2", kNow)};
  EXPECT_EQ(code_of([&] { f.service.issue_token(r, kNow); }), Errc::PolicyEmpty);
  EXPECT_EQ(code_of([&] { f.service.put_policy("ghost", {{"d", {"x"}}}); }), Errc::NotFound);
}

TEST(Issuer, ParsePolicy) {
  EXPECT_EQ(issuer::parse_policy(Json::parse(R"({"monitor-1":["temperature","humidity"]})")),
            (credential::Capabilities{{"monitor-1", {"temperature", "humidity"}}}));
  for (const char* bad : {"[]", "{}", R"({"d":[]})", R"({"d":"x"})", R"({"d":[1]})", R"({"d":[""]})", R"({"":["x"]})"})
    EXPECT_EQ(code_of([&] { issuer::parse_policy(Json::parse(bad)); }), Errc::MalformedPolicy) << bad;
}

TEST(Issuer, IndicesAndJtisAreUnique) {
  Fixture f;
  std::set<std::size_t> indices;
  std::set<std::string> jtis;
  for (int i = 0; i < 50; ++i) {
    auto tok = f.service.issue_token(f.request(kNow + i), kNow + i);
    indices.insert(tok.vc.revocation_list_index);
    jtis.insert(tok.vc.jti);
  }
  EXPECT_EQ(indices.size(), 50u);
  EXPECT_EQ(*indices.rbegin(), 49u);
  EXPECT_EQ(jtis.size(), 50u);
  EXPECT_EQ(f.service.issued_count(), 50u);
}

TEST(Issuer, RevokeSetsExactlyThatBit) {
  Fixture f;
  std::vector<issuer::IssuedToken> toks;
  for (int i = 0; i < 5; ++i) toks.push_back(f.service.issue_token(f.request(kNow + i), kNow + i));
  Bytes before = f.service.status_list().bits();
  f.service.revoke(toks[2].vc.jti);
  auto list = f.service.status_list();
  for (int i = 0; i < 5; ++i) EXPECT_EQ(list.is_revoked(toks[i].vc.revocation_list_index), i == 2);
  EXPECT_EQ(list.revoked_count(), 1u);
  f.service.revoke(toks[2].vc.jti);
  EXPECT_EQ(f.service.status_list().bits(), list.bits());
  EXPECT_NE(before, list.bits());
  EXPECT_EQ(code_of([&] { f.service.revoke("https://issuer.com/credentials/999"); }), Errc::NotFound);

  auto published = credential::StatusList::from_json(f.service.status_list_json());
  EXPECT_TRUE(published.is_revoked(2));
  EXPECT_EQ(published.issued_count(), 5u);
}

TEST(Issuer, PolicyChangesOnlyAffectLaterCredentials) {
  Fixture f;
  auto first = f.service.issue_token(f.request(kNow), kNow);
  f.service.put_policy("client-1", {{"monitor-1", {"temperature", "humidity"}}});
  auto second = f.service.issue_token(f.request(kNow + 1), kNow + 1);
  EXPECT_FALSE(credential::check_appropriateness(first.vc, "owner-1", "monitor-1", {"humidity"}));
  EXPECT_TRUE(credential::check_appropriateness(second.vc, "owner-1", "monitor-1", {"humidity"}));
  EXPECT_EQ(credential::decode_vc(first.access_token).vc.capabilities.at("monitor-1").size(), 1u);
}

TEST(Issuer, IssuedVcCoversExactlyItsPolicy) {
  Rng rng(51);
  Fixture f;
  auto pool = testsupport::field_pool();
  std::vector<std::string> devices{"monitor-1", "monitor-2", "monitor-3"};
  for (int i = 0; i < 100; ++i) {
    credential::Capabilities policy;
    for (const auto& d : devices)
      for (const auto& fld : pool)
        if (testsupport::coin(rng, 0.3)) policy[d].push_back(fld);
    if (policy.empty()) policy["monitor-1"] = {"temperature"};
    f.service.put_policy("client-1", policy);
    std::int64_t now = kNow + i;
    auto tok = f.service.issue_token(f.request(now), now);
    auto vc = credential::decode_vc(tok.access_token).vc;
    for (int t = 0; t < 10; ++t) {
      const auto& d = devices[testsupport::uniform(rng, 0, devices.size() - 1)];
      std::vector<std::string> req;
      for (const auto& fld : pool)
        if (testsupport::coin(rng, 0.2)) req.push_back(fld);
      if (req.empty()) req.push_back(pool[0]);
      bool oracle = policy.count(d) && std::all_of(req.begin(), req.end(), [&](const std::string& x) {
                      return std::count(policy[d].begin(), policy[d].end(), x) > 0;
                    });
      EXPECT_EQ(credential::check_appropriateness(vc, "owner-1", d, req), oracle);
    }
  }
}

TEST(Issuer, JournalSurvivesRestart) {
  TempDir dir;
  IssuerConfig cfg;
  cfg.store_path = dir.path / "issuer.journal";
  auto key = jose::EcKey::generate();
  std::string revoked_jti;
  Bytes bits;
  {
    IssuerService svc(cfg, key);
    svc.put_client("client-1", "s3cret", "owner-1");
    svc.put_policy("client-1", {{"monitor-1", {"temperature"}}});
    auto holder = jose::EcKey::generate();
    for (int i = 0; i < 3; ++i) {
      auto tok = svc.issue_token(
          {"client_credentials", "client-1", "s3cret", issuer::make_authorization_details(holder, "client-1", kNow + i)},
          kNow + i);
      if (i == 1) revoked_jti = tok.vc.jti;
    }
    svc.revoke(revoked_jti);
    bits = svc.status_list().bits();
  }
  IssuerService again(cfg, key);
  EXPECT_EQ(again.issued_count(), 3u);
  EXPECT_EQ(again.status_list().bits(), bits);
  EXPECT_NO_THROW(again.revoke(revoked_jti));
  auto holder = jose::EcKey::generate();
  auto tok = again.issue_token(
      {"client_credentials", "client-1", "s3cret", issuer::make_authorization_details(holder, "client-1", kNow)}, kNow);
  EXPECT_EQ(tok.vc.revocation_list_index, 3u);
  EXPECT_EQ(tok.vc.jti, "https://issuer.com/credentials/4");

  // the journal never holds a plaintext secret
  std::ifstream in(cfg.store_path);
  std::string journal((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(journal.find("s3cret"), std::string::npos);
}

TEST(Issuer, SigningKeyFileIsCreatedOnceAndReused) {
  TempDir dir;
  auto path = dir.path / "key.jwk";
  auto a = issuer::load_or_create_key(path);
  ASSERT_TRUE(fs::exists(path));
  auto b = issuer::load_or_create_key(path);
  EXPECT_EQ(a.thumbprint(), b.thumbprint());
  EXPECT_TRUE(b.has_private());
}

TEST(Issuer, ConfigFromJson) {
  auto c = IssuerConfig::from_json(Json::parse(R"({"issuer_uri":"https://i.example","vc_lifetime_seconds":60})"));
  EXPECT_EQ(c.effective_status_url(), "https://i.example/credentials/status/1");
  EXPECT_EQ(c.vc_lifetime_seconds, 60);
  EXPECT_EQ(code_of([] { IssuerConfig::from_json(Json::parse(R"({"vc_lifetime_seconds":0})")); }), Errc::Config);
  EXPECT_EQ(code_of([] { IssuerConfig::from_json(Json::parse(R"({"vc_lifetime_seconds":"x"})")); }), Errc::Config);
}

// --- HTTP ---------------------------------------------------------------------------

class IssuerHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    IssuerConfig cfg;
    cfg.admin_key = "admin-key";
    service = std::make_unique<IssuerService>(cfg, jose::EcKey::generate());
    issuer::mount_routes(host.server(), *service, [this] { return now.load(); });
    host.start();
  }
  void TearDown() override { host.stop(); }

  httplib::Result admin(const std::string& path, const Json& body, const std::string& key = "admin-key") {
    auto c = host.client();
    return c.Post(path, {{"X-Admin-Key", key}}, body.dump(), "application/json");
  }
  httplib::Result token(const std::string& client_id, const std::string& secret, const jose::EcKey& holder) {
    auto c = host.client();
    httplib::Params p{{"grant_type", "client_credentials"},
                      {"client_id", client_id},
                      {"client_secret", secret},
                      {"authorization_details", issuer::make_authorization_details(holder, client_id, now).dump()}};
    return c.Post("/token", p);
  }

  std::atomic<std::int64_t> now{kNow};
  std::unique_ptr<IssuerService> service;
  testsupport::Loopback host;
};

TEST_F(IssuerHttp, FullFlow) {
  ASSERT_EQ(admin("/admin/clients", {{"client_id", "c1"}, {"client_secret", "pw"}, {"owner_id", "owner-1"}})->status, 200);
  auto holder = jose::EcKey::generate();
  auto r = token("c1", "pw", holder);
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(Json::parse(r->body)["error"], "access_denied");

  ASSERT_EQ(admin("/admin/policies", {{"client_id", "c1"}, {"policy", {{"monitor-1", {"temperature"}}}}})->status, 200);
  r = token("c1", "pw", holder);
  ASSERT_EQ(r->status, 200);
  Json body = Json::parse(r->body);
  EXPECT_EQ(body["token_type"], "vc+jwt");
  EXPECT_EQ(r->get_header_value("Cache-Control"), "no-store");
  auto vc = credential::decode_vc(body["access_token"].get<std::string>()).vc;
  EXPECT_EQ(vc.cnf_jwk, holder.public_jwk());

  auto c = host.client();
  auto status = c.Get("/credentials/status/1");
  ASSERT_EQ(status->status, 200);
  EXPECT_EQ(status->get_header_value("Cache-Control"), "max-age=60");
  EXPECT_FALSE(credential::StatusList::from_json(Json::parse(status->body)).is_revoked(vc.revocation_list_index));

  EXPECT_EQ(admin("/revoke", {{"jti", vc.jti}})->status, 200);
  status = c.Get("/credentials/status/1");
  EXPECT_TRUE(credential::StatusList::from_json(Json::parse(status->body)).is_revoked(vc.revocation_list_index));

  auto jwks = Json::parse(c.Get("/jwks")->body);
  EXPECT_EQ(jose::EcKey::from_jwk(jwks["keys"][0]).thumbprint(), jwks["keys"][0]["kid"]);
}

TEST_F(IssuerHttp, Errors) {
  admin("/admin/clients", {{"client_id", "c1"}, {"client_secret", "pw"}, {"owner_id", "owner-1"}});
  auto holder = jose::EcKey::generate();
  auto r = token("c1", "bad", holder);
  EXPECT_EQ(r->status, 401);
  EXPECT_EQ(Json::parse(r->body)["error"], "invalid_client");

  auto c = host.client();
  r = c.Post("/token", httplib::Params{{"grant_type", "client_credentials"}, {"client_id", "c1"}, {"client_secret", "pw"}});
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(Json::parse(r->body)["error"], "invalid_authorization_details");

  EXPECT_EQ(admin("/admin/clients", {{"client_id", "c2"}}, "wrong")->status, 401);
  EXPECT_EQ(c.Post("/revoke", Json{{"jti", "x"}}.dump(), "application/json")->status, 401);
  auto bad_policy = admin("/admin/policies", {{"client_id", "c1"}, {"policy", {{"monitor-1", Json::array()}}}});
  EXPECT_EQ(bad_policy->status, 400);
  EXPECT_EQ(Json::parse(bad_policy->body)["reason"], "MalformedPolicy");
  EXPECT_EQ(admin("/revoke", {{"jti", "https://issuer.com/credentials/42"}})->status, 404);
  EXPECT_EQ(admin("/revoke", {{"nope", 1}})->status, 400);
}
