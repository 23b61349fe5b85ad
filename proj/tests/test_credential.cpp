#include <openssl/ecdsa.h>
#include <openssl/evp.h>
#include <openssl/bn.h>

#include <bit>

#include <gtest/gtest.h>

#include "selectshare/bytes.hpp"
#include "selectshare/credential.hpp"
#include "selectshare/error.hpp"
#include "selectshare/jose.hpp"
#include "test_support.hpp"

using namespace selectshare;
using namespace selectshare::credential;
using testsupport::Rng;

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

CapabilityVC example_vc(const jose::EcKey& holder) {
  CapabilityVC vc;
  vc.jti = "https://issuer.com/credentials/1";
  vc.iss = "https://issuer.com";
  vc.aud = "owner-1";
  vc.iat = 1617559370;
  vc.exp = 1618423370;
  vc.cnf_jwk = holder.public_jwk();
  vc.capabilities = {{"monitor-1", {"temperature"}}};
  vc.revocation_list_index = 0;
  vc.status_list_url = "https://issuer.com/credentials/status/1";
  return vc;
}

std::string b64(const std::string& s) { return base64url_encode(to_bytes(s)); }

// ES256 check done directly with OpenSSL: raw r||s -> DER, EVP_DigestVerify.
bool oracle_es256_verify(const std::string& jwt, const Json& jwk) {
  auto dot1 = jwt.find('.'), dot2 = jwt.rfind('.');
  std::string input = jwt.substr(0, dot2);
  Bytes sig = base64url_decode(jwt.substr(dot2 + 1));
  if (sig.size() != 64 || dot1 == dot2) return false;
  Bytes x = base64url_decode(jwk["x"].get<std::string>()), y = base64url_decode(jwk["y"].get<std::string>());
  Bytes point{0x04};
  point.insert(point.end(), x.begin(), x.end());
  point.insert(point.end(), y.begin(), y.end());

  EVP_PKEY_CTX* kctx = EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr);
  EVP_PKEY_fromdata_init(kctx);
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string("group", const_cast<char*>("P-256"), 0),
      OSSL_PARAM_construct_octet_string("pub", point.data(), point.size()),
      OSSL_PARAM_construct_end(),
  };
  EVP_PKEY* pkey = nullptr;
  EVP_PKEY_fromdata(kctx, &pkey, EVP_PKEY_PUBLIC_KEY, params);
  EVP_PKEY_CTX_free(kctx);
  if (!pkey) return false;

  ECDSA_SIG* es = ECDSA_SIG_new();
  ECDSA_SIG_set0(es, BN_bin2bn(sig.data(), 32, nullptr), BN_bin2bn(sig.data() + 32, 32, nullptr));
  unsigned char* der = nullptr;
  int der_len = i2d_ECDSA_SIG(es, &der);
  ECDSA_SIG_free(es);

  EVP_MD_CTX* md = EVP_MD_CTX_new();
  EVP_DigestVerifyInit(md, nullptr, EVP_sha256(), nullptr, pkey);
  int rc = EVP_DigestVerify(md, der, der_len, reinterpret_cast<const unsigned char*>(input.data()), input.size());
  EVP_MD_CTX_free(md);
  OPENSSL_free(der);
  EVP_PKEY_free(pkey);
  return rc == 1;
}

}  // namespace

// --- jose --------------------------------------------------------------------

TEST(Jose, SignaturesCheckOutWithPlainOpenSsl) {
  for (int i = 0; i < 20; ++i) {
    auto key = jose::EcKey::generate();
    std::string jwt = jose::jws_sign({{"alg", "ES256"}}, {{"i", i}}, key);
    EXPECT_TRUE(oracle_es256_verify(jwt, key.public_jwk()));
    EXPECT_TRUE(jose::jws_verify(jose::jws_decode(jwt), jose::EcKey::from_jwk(key.public_jwk())));
  }
}

TEST(Jose, ThumbprintFollowsRequiredMemberOrder) {
  auto key = jose::EcKey::generate();
  Json jwk = key.public_jwk();
  std::string canonical_jwk = R"({"crv":"P-256","kty":"EC","x":")" + jwk["x"].get<std::string>() + R"(","y":")" +
                              jwk["y"].get<std::string>() + R"("})";
  EXPECT_EQ(key.thumbprint(), base64url_encode(sha256(to_bytes(canonical_jwk))));
}

TEST(Jose, PrivateJwkRoundTrip) {
  auto key = jose::EcKey::generate();
  auto back = jose::EcKey::from_jwk(key.private_jwk());
  EXPECT_TRUE(back.has_private());
  EXPECT_FALSE(jose::EcKey::from_jwk(key.public_jwk()).has_private());
  Bytes sig = back.sign(to_bytes("m"));
  EXPECT_EQ(sig.size(), 64u);
  EXPECT_TRUE(key.verify(to_bytes("m"), sig));
  EXPECT_FALSE(key.verify(to_bytes("n"), sig));
}

TEST(Jose, MalformedInputs) {
  EXPECT_EQ(code_of([] { jose::jws_decode("a.b"); }), Errc::MalformedToken);
  EXPECT_EQ(code_of([] { jose::jws_decode("!!.e30.AA"); }), Errc::MalformedToken);
  EXPECT_EQ(code_of([] { jose::jws_decode(b64("not json") + "." + b64("{}") + ".AA"); }), Errc::MalformedToken);
  EXPECT_EQ(code_of([] { jose::EcKey::from_jwk({{"kty", "RSA"}}); }), Errc::MalformedKey);
  EXPECT_EQ(code_of([] { jose::EcKey::from_jwk({{"kty", "EC"}, {"crv", "P-256"}, {"x", "AA"}, {"y", "AA"}}); }),
            Errc::MalformedKey);
}

// --- VC ----------------------------------------------------------------------

TEST(Vc, ExampleClaimsEncodeAndVerify) {
  auto issuer = jose::EcKey::generate(), holder = jose::EcKey::generate();
  auto vc = example_vc(holder);
  std::string jwt = encode_vc(vc, issuer);
  EXPECT_TRUE(oracle_es256_verify(jwt, issuer.public_jwk()));

  auto token = decode_vc(jwt);
  EXPECT_EQ(token.vc, vc);
  const Json& p = token.jws.payload;
  EXPECT_EQ(p["jti"], "https://issuer.com/credentials/1");
  EXPECT_EQ(p["iss"], "https://issuer.com");
  EXPECT_EQ(p["aud"], "owner-1");
  EXPECT_EQ(p["iat"], 1617559370);
  EXPECT_EQ(p["exp"], 1618423370);
  EXPECT_EQ(p["cnf"]["jwk"], holder.public_jwk());
  EXPECT_EQ(p["vc"]["@context"],
            Json::array({"https://www.w3.org/2018/credentials/v1", "https://mm.aueb.gr/contexts/capabilities/v1"}));
  EXPECT_EQ(p["vc"]["type"], Json::array({"VerifiableCredential"}));
  EXPECT_EQ(p["vc"]["credentialSubject"]["type"], Json::array({"CapabilitiesCredential"}));
  EXPECT_EQ(p["vc"]["credentialSubject"]["capabilities"], Json::parse(R"({"monitor-1":["temperature"]})"));

  TrustAnchors anchors{{"owner-1", {{"https://issuer.com", issuer.public_jwk(), ""}}}};
  EXPECT_EQ(verify_validity(token, anchors, 1617559371), Validity::Ok);
}

TEST(Vc, ValidityReasons) {
  auto issuer = jose::EcKey::generate(), other = jose::EcKey::generate(), holder = jose::EcKey::generate();
  auto token = decode_vc(encode_vc(example_vc(holder), issuer));
  TrustAnchors anchors{{"owner-1", {{"https://issuer.com", issuer.public_jwk(), ""}}}};

  EXPECT_EQ(verify_validity(token, anchors, 1618423370), Validity::Expired);
  EXPECT_EQ(verify_validity(token, anchors, 1618423369), Validity::Ok);
  EXPECT_EQ(verify_validity(token, {{"owner-2", anchors["owner-1"]}}, 1617559371), Validity::UntrustedIssuer);
  EXPECT_EQ(verify_validity(token, {{"owner-1", {{"https://evil.com", issuer.public_jwk(), ""}}}}, 1617559371),
            Validity::UntrustedIssuer);
  EXPECT_EQ(verify_validity(token, {{"owner-1", {{"https://issuer.com", other.public_jwk(), ""}}}}, 1617559371),
            Validity::BadSignature);
  // expiry is reported first even when the signature is also wrong
  EXPECT_EQ(verify_validity(token, {{"owner-1", {{"https://issuer.com", other.public_jwk(), ""}}}}, 1618423371),
            Validity::Expired);

  // payload swapped under the original signature
  auto forged = token;
  forged.vc.capabilities["monitor-1"].push_back("humidity");
  std::string jwt = encode_vc(forged.vc, other);
  auto head = jwt.substr(0, jwt.rfind('.'));
  std::string spliced = head + "." + base64url_encode(token.jws.signature);
  EXPECT_EQ(verify_validity(decode_vc(spliced), anchors, 1617559371), Validity::BadSignature);
}

TEST(Vc, InvariantViolations) {
  auto issuer = jose::EcKey::generate();
  auto vc = example_vc(issuer);
  auto bad = vc;
  bad.exp = bad.iat - 1;
  EXPECT_EQ(code_of([&] { encode_vc(bad, issuer); }), Errc::InvalidClaims);
  bad = vc;
  bad.exp = bad.iat;
  EXPECT_EQ(code_of([&] { encode_vc(bad, issuer); }), Errc::InvalidClaims);
  bad = vc;
  bad.capabilities.clear();
  EXPECT_EQ(code_of([&] { encode_vc(bad, issuer); }), Errc::InvalidClaims);
  bad = vc;
  bad.capabilities["monitor-2"] = {};
  EXPECT_EQ(code_of([&] { encode_vc(bad, issuer); }), Errc::InvalidClaims);

  Json claims = vc.to_claims();
  claims["vc"]["type"] = Json::array({"Other"});
  EXPECT_EQ(code_of([&] { CapabilityVC::from_claims(claims); }), Errc::InvalidClaims);
  claims = vc.to_claims();
  claims["vc"]["credentialSubject"]["type"] = Json::array({"Other"});
  EXPECT_EQ(code_of([&] { CapabilityVC::from_claims(claims); }), Errc::InvalidClaims);
  claims = vc.to_claims();
  claims["vc"].erase("credentialStatus");
  EXPECT_EQ(code_of([&] { CapabilityVC::from_claims(claims); }), Errc::InvalidClaims);
  claims = vc.to_claims();
  claims["iat"] = "yesterday";
  EXPECT_EQ(code_of([&] { CapabilityVC::from_claims(claims); }), Errc::InvalidClaims);

  std::string es384 = b64(R"({"alg":"ES384"})") + "." + base64url_encode(to_bytes(vc.to_claims().dump())) + ".AA";
  EXPECT_EQ(code_of([&] { decode_vc(es384); }), Errc::MalformedToken);
}

TEST(Vc, Appropriateness) {
  auto vc = example_vc(jose::EcKey::generate());
  EXPECT_TRUE(check_appropriateness(vc, "owner-1", "monitor-1", {"temperature"}));
  EXPECT_FALSE(check_appropriateness(vc, "owner-1", "monitor-1", {"humidity"}));
  EXPECT_FALSE(check_appropriateness(vc, "owner-1", "monitor-1", {"temperature", "humidity"}));
  EXPECT_FALSE(check_appropriateness(vc, "owner-1", "monitor-2", {"temperature"}));
  EXPECT_FALSE(check_appropriateness(vc, "owner-2", "monitor-1", {"temperature"}));
}

TEST(Vc, AppropriatenessIsMonotone) {
  Rng rng(41);
  auto pool = testsupport::field_pool();
  for (int i = 0; i < 1000; ++i) {
    auto vc = example_vc(jose::EcKey::generate());
    vc.capabilities.clear();
    for (const auto& f : pool)
      if (testsupport::coin(rng)) vc.capabilities["d"].push_back(f);
    std::vector<std::string> req;
    for (const auto& f : pool)
      if (testsupport::coin(rng, 0.3)) req.push_back(f);
    bool full = check_appropriateness(vc, "owner-1", "d", req);
    auto& allowed = vc.capabilities["d"];
    bool oracle = std::all_of(req.begin(), req.end(),
                              [&](auto& f) { return std::count(allowed.begin(), allowed.end(), f) > 0; });
    EXPECT_EQ(full, oracle);
    if (full && !req.empty()) {
      req.erase(req.begin() + static_cast<long>(testsupport::uniform(rng, 0, req.size() - 1)));
      EXPECT_TRUE(check_appropriateness(vc, "owner-1", "d", req));
    }
  }
}

// --- status list ----------------------------------------------------------------

TEST(StatusListTest, DensityAndMinimumSize) {
  StatusList list;
  EXPECT_EQ(list.capacity(), 131072u);
  EXPECT_EQ(list.bits().size(), 16u * 1024u);
  EXPECT_FALSE(list.is_revoked(0));
  EXPECT_FALSE(list.is_revoked(131071));
  EXPECT_EQ(code_of([&] { list.is_revoked(131072); }), Errc::IndexOutOfRange);
  EXPECT_EQ(code_of([&] { list.revoke(131072); }), Errc::IndexOutOfRange);
}

TEST(StatusListTest, RevokeTouchesExactlyOneBit) {
  Rng rng(42);
  StatusList list;
  for (int t = 0; t < 300; ++t) {
    Bytes before = list.bits();
    std::size_t i = testsupport::uniform(rng, 0, list.capacity() - 1);
    bool was = list.is_revoked(i);
    list.revoke(i);
    EXPECT_TRUE(list.is_revoked(i));
    // oracle: the only byte allowed to change is i/8, and only by the MSB-first bit i%8
    Bytes after = list.bits();
    for (std::size_t b = 0; b < after.size(); ++b) {
      if (b == i / 8)
        EXPECT_EQ(after[b], before[b] | (0x80 >> (i % 8)));
      else
        ASSERT_EQ(after[b], before[b]);
    }
    if (was) EXPECT_EQ(after, before);
  }
  std::size_t pop = 0;
  for (auto b : list.bits()) pop += static_cast<std::size_t>(std::popcount(b));
  EXPECT_EQ(list.revoked_count(), pop);
}

TEST(StatusListTest, AllocateDoublesWhenFull) {
  StatusList list;
  list.set_issued_count(131071);
  EXPECT_EQ(list.allocate(), 131071u);
  EXPECT_EQ(list.capacity(), 131072u);
  EXPECT_EQ(list.allocate(), 131072u);
  EXPECT_EQ(list.capacity(), 262144u);
  list.set_issued_count(600000);
  EXPECT_EQ(list.capacity(), 1048576u);
}

TEST(StatusListTest, JsonRoundTrip) {
  StatusList list;
  for (int i = 0; i < 100; ++i) list.allocate();
  list.revoke(3);
  list.revoke(99);
  Json j = list.to_json("https://issuer.com/credentials/status/1");
  EXPECT_EQ(j["id"], "https://issuer.com/credentials/status/1");
  EXPECT_EQ(j["issuedCount"], 100);
  Bytes raw = gzip_decompress(base64url_decode(j["encodedList"].get<std::string>()));
  EXPECT_EQ(raw.size(), 16u * 1024u);
  EXPECT_EQ(raw[0], 0x10);  // index 3
  auto back = StatusList::from_json(j);
  EXPECT_EQ(back.bits(), list.bits());
  EXPECT_EQ(back.issued_count(), 100u);

  EXPECT_EQ(code_of([] { StatusList::from_json(Json::object()); }), Errc::MalformedInput);
  Json too_many = j;
  too_many["issuedCount"] = 200000;
  EXPECT_EQ(code_of([&] { StatusList::from_json(too_many); }), Errc::MalformedInput);
}

// --- DPoP ------------------------------------------------------------------------

TEST(Dpop, RoundTrip) {
  auto holder = jose::EcKey::generate();
  ReplayCache cache;
  std::string proof = create_dpop(holder, "POST", "https://proxy.example/data?deviceID=monitor-1", 1000);
  auto jws = jose::jws_decode(proof);
  EXPECT_EQ(jws.header["typ"], "dpop+jwt");
  EXPECT_EQ(jws.payload["htm"], "POST");
  EXPECT_EQ(jws.payload["iat"], 1000);
  EXPECT_TRUE(oracle_es256_verify(proof, holder.public_jwk()));
  EXPECT_EQ(verify_dpop(proof, holder.public_jwk(), "POST", "https://proxy.example/data", 1030, cache), DpopCheck::Ok);
  EXPECT_EQ(cache.size(), 1u);
}

TEST(Dpop, Rejections) {
  auto holder = jose::EcKey::generate(), other = jose::EcKey::generate();
  const std::string uri = "https://proxy.example/data";
  ReplayCache cache;
  auto fresh = [&] { return create_dpop(holder, "POST", uri, 1000); };

  EXPECT_EQ(verify_dpop("garbage", holder.public_jwk(), "POST", uri, 1000, cache), DpopCheck::Malformed);
  EXPECT_EQ(verify_dpop(fresh(), other.public_jwk(), "POST", uri, 1000, cache), DpopCheck::BadSignature);
  EXPECT_EQ(verify_dpop(create_dpop(other, "POST", uri, 1000), holder.public_jwk(), "POST", uri, 1000, cache),
            DpopCheck::BadSignature);
  EXPECT_EQ(verify_dpop(fresh(), holder.public_jwk(), "GET", uri, 1000, cache), DpopCheck::MethodMismatch);
  EXPECT_EQ(verify_dpop(fresh(), holder.public_jwk(), "POST", "https://other.example/data", 1000, cache),
            DpopCheck::UriMismatch);
  EXPECT_EQ(verify_dpop(fresh(), holder.public_jwk(), "POST", uri, 1061, cache), DpopCheck::Stale);
  EXPECT_EQ(verify_dpop(fresh(), holder.public_jwk(), "POST", uri, 939, cache), DpopCheck::Stale);
  EXPECT_EQ(verify_dpop(fresh(), holder.public_jwk(), "POST", uri, 1060, cache), DpopCheck::Ok);

  std::string once = fresh();
  EXPECT_EQ(verify_dpop(once, holder.public_jwk(), "POST", uri, 1000, cache), DpopCheck::Ok);
  EXPECT_EQ(verify_dpop(once, holder.public_jwk(), "POST", uri, 1001, cache), DpopCheck::Replayed);

  // missing typ
  Json payload{{"jti", "x"}, {"htm", "POST"}, {"htu", uri}, {"iat", 1000}};
  std::string untyped = jose::jws_sign({{"alg", "ES256"}}, payload, holder);
  EXPECT_EQ(verify_dpop(untyped, holder.public_jwk(), "POST", uri, 1000, cache), DpopCheck::Malformed);
}

TEST(Dpop, ChecksRunInOrder) {
  // a proof that is wrong in every way reports the signature first, then htm, htu, freshness
  auto holder = jose::EcKey::generate(), other = jose::EcKey::generate();
  ReplayCache cache;
  std::string all_wrong = create_dpop(other, "GET", "https://x.example/y", 0);
  EXPECT_EQ(verify_dpop(all_wrong, holder.public_jwk(), "POST", "https://proxy.example/data", 1000, cache),
            DpopCheck::BadSignature);
  std::string right_key = create_dpop(holder, "GET", "https://x.example/y", 0);
  EXPECT_EQ(verify_dpop(right_key, holder.public_jwk(), "POST", "https://proxy.example/data", 1000, cache),
            DpopCheck::MethodMismatch);
  std::string right_method = create_dpop(holder, "POST", "https://x.example/y", 0);
  EXPECT_EQ(verify_dpop(right_method, holder.public_jwk(), "POST", "https://proxy.example/data", 1000, cache),
            DpopCheck::UriMismatch);
  // a stale proof is not recorded, so it does not poison the cache
  EXPECT_EQ(cache.size(), 0u);
}

TEST(Dpop, ReplayCacheForgetsAfterHorizon) {
  ReplayCache cache(120);
  EXPECT_TRUE(cache.check_and_insert("a", 0));
  EXPECT_FALSE(cache.check_and_insert("a", 120));
  EXPECT_TRUE(cache.check_and_insert("a", 241));
}

TEST(Dpop, NormalizeHtu) {
  EXPECT_EQ(normalize_htu("HTTPS://Proxy.Example:443/data?deviceID=x#f"), "https://proxy.example/data");
  EXPECT_EQ(normalize_htu("http://h:80"), "http://h/");
  EXPECT_EQ(normalize_htu("http://h:8080/a"), "http://h:8080/a");
  EXPECT_EQ(normalize_htu("https://h/A/b"), "https://h/A/b");
}
