#include "selectshare/jose.hpp"

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>

#include "selectshare/error.hpp"

namespace selectshare::jose {

namespace {

constexpr std::size_t kCoord = 32;

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using BnPtr = std::unique_ptr<BIGNUM, Deleter<BIGNUM, BN_free>>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, Deleter<EVP_MD_CTX, EVP_MD_CTX_free>>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, Deleter<EVP_PKEY_CTX, EVP_PKEY_CTX_free>>;
using BldPtr = std::unique_ptr<OSSL_PARAM_BLD, Deleter<OSSL_PARAM_BLD, OSSL_PARAM_BLD_free>>;
using ParamPtr = std::unique_ptr<OSSL_PARAM, Deleter<OSSL_PARAM, OSSL_PARAM_free>>;
using SigPtr = std::unique_ptr<ECDSA_SIG, Deleter<ECDSA_SIG, ECDSA_SIG_free>>;

Bytes bn_to_fixed(const BIGNUM* bn) {
  Bytes out(kCoord);
  if (BN_bn2binpad(bn, out.data(), static_cast<int>(kCoord)) != static_cast<int>(kCoord))
    throw Error(Errc::MalformedKey, "coordinate does not fit 32 bytes");
  return out;
}

BnPtr get_bn(EVP_PKEY* key, const char* name) {
  BIGNUM* bn = nullptr;
  if (EVP_PKEY_get_bn_param(key, name, &bn) != 1) throw Error(Errc::MalformedKey, std::string("missing ") + name);
  return BnPtr(bn);
}

Bytes decode_coord(const Json& jwk, const char* name) {
  if (!jwk.contains(name) || !jwk[name].is_string()) throw Error(Errc::MalformedKey, std::string("JWK lacks ") + name);
  Bytes b = base64url_decode(jwk[name].get<std::string>());
  if (b.size() != kCoord) throw Error(Errc::MalformedKey, std::string("JWK ") + name + " must be 32 bytes");
  return b;
}

Json parse_segment(std::string_view seg) {
  Bytes raw = base64url_decode(seg);
  Json j = Json::parse(raw.begin(), raw.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::MalformedToken, "JWS segment is not a JSON object");
  return j;
}

}  // namespace

EcKey EcKey::generate() {
  EVP_PKEY* raw = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", "P-256");
  if (!raw) throw Error(Errc::MalformedKey, "P-256 key generation failed");
  EcKey k;
  k.key_.reset(raw, EVP_PKEY_free);
  k.has_private_ = true;
  return k;
}

EcKey EcKey::from_jwk(const Json& jwk) {
  if (!jwk.is_object() || jwk.value("kty", "") != "EC" || jwk.value("crv", "") != "P-256")
    throw Error(Errc::MalformedKey, "expected an EC P-256 JWK");
  Bytes x = decode_coord(jwk, "x"), y = decode_coord(jwk, "y");
  Bytes point{0x04};
  point.insert(point.end(), x.begin(), x.end());
  point.insert(point.end(), y.begin(), y.end());

  BldPtr bld(OSSL_PARAM_BLD_new());
  OSSL_PARAM_BLD_push_utf8_string(bld.get(), OSSL_PKEY_PARAM_GROUP_NAME, "prime256v1", 0);
  OSSL_PARAM_BLD_push_octet_string(bld.get(), OSSL_PKEY_PARAM_PUB_KEY, point.data(), point.size());
  BnPtr d;
  bool priv = jwk.contains("d");
  if (priv) {
    Bytes dbytes = decode_coord(jwk, "d");
    d.reset(BN_bin2bn(dbytes.data(), static_cast<int>(dbytes.size()), nullptr));
    OSSL_PARAM_BLD_push_BN(bld.get(), OSSL_PKEY_PARAM_PRIV_KEY, d.get());
  }
  ParamPtr params(OSSL_PARAM_BLD_to_param(bld.get()));
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
  EVP_PKEY* raw = nullptr;
  if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) != 1 ||
      EVP_PKEY_fromdata(ctx.get(), &raw, priv ? EVP_PKEY_KEYPAIR : EVP_PKEY_PUBLIC_KEY, params.get()) != 1)
    throw Error(Errc::MalformedKey, "JWK is not a valid P-256 key");
  EcKey k;
  k.key_.reset(raw, EVP_PKEY_free);
  k.has_private_ = priv;
  // Reject points that are not on the curve.
  PkeyCtxPtr check(EVP_PKEY_CTX_new_from_pkey(nullptr, raw, nullptr));
  if (!check || EVP_PKEY_public_check(check.get()) != 1) throw Error(Errc::MalformedKey, "JWK point is not on P-256");
  return k;
}

Json EcKey::public_jwk() const {
  auto x = get_bn(key_.get(), OSSL_PKEY_PARAM_EC_PUB_X);
  auto y = get_bn(key_.get(), OSSL_PKEY_PARAM_EC_PUB_Y);
  return Json{{"kty", "EC"},
              {"crv", "P-256"},
              {"x", base64url_encode(bn_to_fixed(x.get()))},
              {"y", base64url_encode(bn_to_fixed(y.get()))}};
}

Json EcKey::private_jwk() const {
  if (!has_private_) throw Error(Errc::MalformedKey, "no private key");
  Json j = public_jwk();
  auto d = get_bn(key_.get(), OSSL_PKEY_PARAM_PRIV_KEY);
  j["d"] = base64url_encode(bn_to_fixed(d.get()));
  return j;
}

std::string EcKey::thumbprint() const {
  Json pub = public_jwk();
  // Required members in lexicographic order, no whitespace.
  std::string canonical = R"({"crv":"P-256","kty":"EC","x":")" + pub["x"].get<std::string>() + R"(","y":")" +
                          pub["y"].get<std::string>() + R"("})";
  return base64url_encode(sha256(to_bytes(canonical)));
}

Bytes EcKey::sign(ByteView message) const {
  if (!has_private_) throw Error(Errc::MalformedKey, "signing requires a private key");
  MdCtxPtr ctx(EVP_MD_CTX_new());
  std::size_t der_len = 0;
  if (EVP_DigestSignInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_.get()) != 1 ||
      EVP_DigestSign(ctx.get(), nullptr, &der_len, message.data(), message.size()) != 1)
    throw Error(Errc::MalformedKey, "ES256 signing failed");
  Bytes der(der_len);
  if (EVP_DigestSign(ctx.get(), der.data(), &der_len, message.data(), message.size()) != 1)
    throw Error(Errc::MalformedKey, "ES256 signing failed");
  const unsigned char* p = der.data();
  SigPtr sig(d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der_len)));
  if (!sig) throw Error(Errc::MalformedKey, "bad DER signature");
  Bytes out = bn_to_fixed(ECDSA_SIG_get0_r(sig.get()));
  Bytes s = bn_to_fixed(ECDSA_SIG_get0_s(sig.get()));
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

bool EcKey::verify(ByteView message, ByteView signature) const {
  if (signature.size() != 2 * kCoord) return false;
  SigPtr sig(ECDSA_SIG_new());
  BIGNUM* r = BN_bin2bn(signature.data(), kCoord, nullptr);
  BIGNUM* s = BN_bin2bn(signature.data() + kCoord, kCoord, nullptr);
  if (ECDSA_SIG_set0(sig.get(), r, s) != 1) {
    BN_free(r);
    BN_free(s);
    return false;
  }
  unsigned char* der = nullptr;
  int der_len = i2d_ECDSA_SIG(sig.get(), &der);
  if (der_len <= 0) return false;
  std::unique_ptr<unsigned char, void (*)(unsigned char*)> der_guard(der, [](unsigned char* p) { OPENSSL_free(p); });
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (EVP_DigestVerifyInit(ctx.get(), nullptr, EVP_sha256(), nullptr, key_.get()) != 1) return false;
  return EVP_DigestVerify(ctx.get(), der, static_cast<std::size_t>(der_len), message.data(), message.size()) == 1;
}

std::string jws_sign(const Json& header, const Json& payload, const EcKey& key) {
  std::string input = base64url_encode(to_bytes(header.dump())) + "." + base64url_encode(to_bytes(payload.dump()));
  Bytes sig = key.sign(to_bytes(input));
  return input + "." + base64url_encode(sig);
}

CompactJws jws_decode(std::string_view token) {
  auto first = token.find('.');
  auto second = first == std::string_view::npos ? first : token.find('.', first + 1);
  if (second == std::string_view::npos || token.find('.', second + 1) != std::string_view::npos)
    throw Error(Errc::MalformedToken, "compact JWS must have three segments");
  CompactJws out;
  try {
    out.header = parse_segment(token.substr(0, first));
    out.payload = parse_segment(token.substr(first + 1, second - first - 1));
    out.signature = base64url_decode(token.substr(second + 1));
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedToken) throw;
    throw Error(Errc::MalformedToken, e.what());
  }
  out.signing_input = std::string(token.substr(0, second));
  return out;
}

bool jws_verify(const CompactJws& jws, const EcKey& key) {
  if (jws.header.value("alg", "") != "ES256") return false;
  return key.verify(to_bytes(jws.signing_input), jws.signature);
}

}  // namespace selectshare::jose
