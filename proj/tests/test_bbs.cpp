#include <openssl/bn.h>
#include <openssl/sha.h>

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "selectshare/bbs.hpp"
#include "selectshare/bytes.hpp"
#include "selectshare/error.hpp"
#include "test_support.hpp"

using namespace selectshare;
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

std::vector<Bytes> make_messages(std::size_t n, const std::string& tag = "m") {
  std::vector<Bytes> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(to_bytes(tag + std::to_string(i)));
  return out;
}

std::map<std::size_t, Bytes> pick(const std::vector<Bytes>& msgs, const std::vector<std::size_t>& idx) {
  std::map<std::size_t, Bytes> out;
  for (auto i : idx) out[i] = msgs[i];
  return out;
}

const Bytes kNonce = to_bytes("nonce-0123456789abcdef0123456789");

// Straight transcription of RFC 9380 section 5.3.1 using OpenSSL directly.
Bytes oracle_xmd(const std::string& msg, const std::string& dst, std::size_t len) {
  std::string dst_prime = dst + static_cast<char>(dst.size());
  std::string z_pad(64, '\0');
  std::string l_i_b{static_cast<char>(len >> 8), static_cast<char>(len & 0xff)};
  std::string msg_prime = z_pad + msg + l_i_b + std::string(1, '\0') + dst_prime;
  unsigned char b0[32], b[32];
  SHA256(reinterpret_cast<const unsigned char*>(msg_prime.data()), msg_prime.size(), b0);
  std::string in1 = std::string(reinterpret_cast<char*>(b0), 32) + '\x01' + dst_prime;
  SHA256(reinterpret_cast<const unsigned char*>(in1.data()), in1.size(), b);
  Bytes out(b, b + 32);
  for (std::size_t i = 2; out.size() < len; ++i) {
    std::string in;
    for (int k = 0; k < 32; ++k) in += static_cast<char>(b0[k] ^ b[k]);
    in += static_cast<char>(i);
    in += dst_prime;
    SHA256(reinterpret_cast<const unsigned char*>(in.data()), in.size(), b);
    out.insert(out.end(), b, b + 32);
  }
  out.resize(len);
  return out;
}

// OS2IP(48 bytes) mod r with BIGNUM.
std::string oracle_hash_to_scalar(const std::string& msg, const std::string& dst) {
  Bytes u = oracle_xmd(msg, dst, 48);
  BN_CTX* ctx = BN_CTX_new();
  BIGNUM* x = BN_bin2bn(u.data(), static_cast<int>(u.size()), nullptr);
  BIGNUM* r = nullptr;
  BN_hex2bn(&r, "73eda753299d7d483339d80809a1d80553bda402fffe5bfeffffffff00000001");
  BIGNUM* out = BN_new();
  BN_mod(out, x, r, ctx);
  Bytes be(32);
  BN_bn2binpad(out, be.data(), 32);
  BN_free(out);
  BN_free(r);
  BN_free(x);
  BN_CTX_free(ctx);
  return hex_encode(be);
}

}  // namespace

TEST(Bbs, ExpandMessageXmdKnownAnswers) {
  const std::string dst = "QUUX-V01-CS02-with-expander-SHA256-128";
  auto xmd = [&](const std::string& m, std::size_t n) { return hex_encode(bbs::expand_message_xmd(to_bytes(m), to_bytes(dst), n)); };
  EXPECT_EQ(xmd("", 0x20), "68a985b87eb6b46952128911f2a4412bbc302a9d759667f87f7a21d803f07235");
  EXPECT_EQ(xmd("abc", 0x20), "d8ccab23b5985ccea865c6c97b6e5b8350e794e603b4b97902f53a8a0d605615");
}

TEST(Bbs, ExpandMessageXmdMatchesOracle) {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    std::string msg, dst;
    for (std::size_t k = testsupport::uniform(rng, 0, 300); k > 0; --k) msg += static_cast<char>(rng());
    for (std::size_t k = testsupport::uniform(rng, 1, 80); k > 0; --k) dst += static_cast<char>(rng());
    std::size_t len = testsupport::uniform(rng, 1, 300);
    EXPECT_EQ(bbs::expand_message_xmd(to_bytes(msg), to_bytes(dst), len), oracle_xmd(msg, dst, len));
  }
  EXPECT_EQ(code_of([] { bbs::expand_message_xmd({}, to_bytes("d"), 255 * 32 + 1); }), Errc::MalformedInput);
}

TEST(Bbs, HashToScalarMatchesOracle) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    std::string msg;
    for (std::size_t k = testsupport::uniform(rng, 0, 100); k > 0; --k) msg += static_cast<char>(rng());
    std::string dst = "TEST_DST_" + std::to_string(i);
    EXPECT_EQ(hex_encode(bbs::hash_to_scalar(to_bytes(msg), to_bytes(dst))), oracle_hash_to_scalar(msg, dst));
  }
}

TEST(Bbs, CiphersuiteConstants) {
  EXPECT_EQ(hex_encode(bbs::base_point_p1()),
            "a8ce256102840821a3e94ea9025e4662b205762f9776b3a766c872b948f1fd225e7c59698588e70d11406d161b4e28c9");
  auto gens = bbs::generators_compressed(3);
  ASSERT_EQ(gens.size(), 3u);
  EXPECT_EQ(hex_encode(gens[0]),
            "a9ec65b70a7fbe40c874c9eb041c2cb0a7af36ccec1bea48fa2ba4c2eb67ef7f9ecb17ed27d38d27cdeddff44c8137be");
  EXPECT_NE(gens[1], gens[2]);
  // prefix-stable: asking for more generators does not change the first ones
  auto more = bbs::generators_compressed(10);
  EXPECT_TRUE(std::equal(gens.begin(), gens.end(), more.begin()));
}

TEST(Bbs, KeyGen) {
  Bytes seed(32, 7);
  auto a = bbs::keygen(ByteView(seed)), b = bbs::keygen(ByteView(seed));
  EXPECT_EQ(a.public_key, b.public_key);
  EXPECT_EQ(a.key_id, b.key_id);
  EXPECT_NE(bbs::keygen().public_key, bbs::keygen().public_key);
  EXPECT_EQ(code_of([] { bbs::keygen(ByteView(Bytes(31, 1))); }), Errc::WeakSeed);
  EXPECT_EQ(bbs::public_key_from_bytes(bbs::public_key_to_bytes(a.public_key)), a.public_key);
  EXPECT_EQ(code_of([] { bbs::public_key_from_bytes(Bytes(96, 0)); }), Errc::MalformedInput);
}

TEST(Bbs, SignVerifyRoundTrip) {
  auto kp = bbs::keygen();
  for (std::size_t n : {1, 2, 7, 50}) {
    auto msgs = make_messages(n);
    auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
    EXPECT_EQ(bbs::signature_to_bytes(sig).size(), 80u);
    EXPECT_TRUE(bbs::verify(kp.public_key, msgs, sig));
    auto back = bbs::signature_from_bytes(bbs::signature_to_bytes(sig), n);
    EXPECT_TRUE(bbs::verify(kp.public_key, msgs, back));
  }
}

TEST(Bbs, SignatureRejectsTamperingReorderingAndWrongKey) {
  auto kp = bbs::keygen(), other = bbs::keygen();
  auto msgs = make_messages(5);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);

  auto changed = msgs;
  changed[2].push_back('x');
  EXPECT_FALSE(bbs::verify(kp.public_key, changed, sig));
  auto swapped = msgs;
  std::swap(swapped[0], swapped[1]);
  EXPECT_FALSE(bbs::verify(kp.public_key, swapped, sig));
  auto fewer = msgs;
  fewer.pop_back();
  EXPECT_FALSE(bbs::verify(kp.public_key, fewer, sig));
  EXPECT_FALSE(bbs::verify(other.public_key, msgs, sig));
  EXPECT_FALSE(bbs::verify(kp.public_key, msgs, sig, to_bytes("header")));

  Bytes raw = bbs::signature_to_bytes(sig);
  for (std::size_t i = 0; i < raw.size(); i += 7) {
    Bytes flipped = raw;
    flipped[i] ^= 0x01;
    bool ok = false;
    try {
      ok = bbs::verify(kp.public_key, msgs, bbs::signature_from_bytes(flipped, msgs.size()));
    } catch (const Error&) {
    }
    EXPECT_FALSE(ok) << "byte " << i;
  }
}

TEST(Bbs, SignErrors) {
  auto kp = bbs::keygen();
  EXPECT_EQ(code_of([&] { bbs::sign(kp.secret_key, kp.public_key, {}); }), Errc::EmptyMessageList);
  EXPECT_EQ(code_of([&] { bbs::sign(kp.secret_key, kp.public_key, make_messages(5), {}, 4); }),
            Errc::TooManyMessages);
}

TEST(Bbs, ProofRoundTripAndSize) {
  auto kp = bbs::keygen();
  auto msgs = make_messages(12);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
  Rng rng(33);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < msgs.size(); ++i)
      if (testsupport::coin(rng)) idx.push_back(i);
    auto proof = bbs::derive_proof(kp.public_key, sig, msgs, idx, kNonce);
    EXPECT_EQ(proof.bytes.size(), 272 + 32 * (msgs.size() - idx.size()));
    EXPECT_EQ(proof.revealed_indices, idx);
    EXPECT_EQ(proof.total_count, msgs.size());
    EXPECT_TRUE(bbs::verify_proof(kp.public_key, proof, pick(msgs, idx), kNonce));
  }
}

TEST(Bbs, ProofsAreUnlinkable) {
  auto kp = bbs::keygen();
  auto msgs = make_messages(4);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
  auto a = bbs::derive_proof(kp.public_key, sig, msgs, {1}, kNonce);
  auto b = bbs::derive_proof(kp.public_key, sig, msgs, {1}, kNonce);
  EXPECT_NE(a.bytes, b.bytes);
}

TEST(Bbs, ProofRejectsWrongInputs) {
  auto kp = bbs::keygen(), other = bbs::keygen();
  auto msgs = make_messages(6);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
  std::vector<std::size_t> idx{0, 3};
  auto proof = bbs::derive_proof(kp.public_key, sig, msgs, idx, kNonce);
  auto revealed = pick(msgs, idx);

  EXPECT_FALSE(bbs::verify_proof(kp.public_key, proof, revealed, to_bytes("other nonce")));
  EXPECT_FALSE(bbs::verify_proof(other.public_key, proof, revealed, kNonce));

  auto edited = revealed;
  edited[3] = to_bytes("forged");
  EXPECT_FALSE(bbs::verify_proof(kp.public_key, proof, edited, kNonce));

  // same values claimed at different positions
  std::map<std::size_t, Bytes> moved{{1, msgs[0]}, {3, msgs[3]}};
  auto moved_proof = proof;
  moved_proof.revealed_indices = {1, 3};
  EXPECT_FALSE(bbs::verify_proof(kp.public_key, moved_proof, moved, kNonce));

  // claiming an extra disclosed message
  auto extra = revealed;
  extra[4] = msgs[4];
  bool ok = true;
  try {
    ok = bbs::verify_proof(kp.public_key, proof, extra, kNonce);
  } catch (const Error&) {
    ok = false;
  }
  EXPECT_FALSE(ok);
}

TEST(Bbs, ProofBitFlipsNeverVerify) {
  auto kp = bbs::keygen();
  auto msgs = make_messages(5);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
  auto proof = bbs::derive_proof(kp.public_key, sig, msgs, {0, 2}, kNonce);
  auto revealed = pick(msgs, {0, 2});
  Rng rng(34);
  for (int t = 0; t < 200; ++t) {
    auto bad = proof;
    std::size_t pos = testsupport::uniform(rng, 0, bad.bytes.size() - 1);
    bad.bytes[pos] ^= static_cast<std::uint8_t>(1u << testsupport::uniform(rng, 0, 7));
    bool ok = true;
    try {
      ok = bbs::verify_proof(kp.public_key, bad, revealed, kNonce);
    } catch (const Error& e) {
      ok = false;
    }
    EXPECT_FALSE(ok) << "flip at " << pos;
  }
  auto truncated = proof;
  truncated.bytes.pop_back();
  EXPECT_EQ(code_of([&] { bbs::verify_proof(kp.public_key, truncated, revealed, kNonce); }), Errc::MalformedProof);
}

TEST(Bbs, DeriveProofErrors) {
  auto kp = bbs::keygen();
  auto msgs = make_messages(3);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
  EXPECT_EQ(code_of([&] { bbs::derive_proof(kp.public_key, sig, msgs, {3}, kNonce); }), Errc::IndexOutOfRange);
  EXPECT_EQ(code_of([&] { bbs::derive_proof(kp.public_key, sig, msgs, {0}, {}); }), Errc::MalformedInput);
  auto other = make_messages(3, "x");
  EXPECT_EQ(code_of([&] { bbs::derive_proof(kp.public_key, sig, other, {0}, kNonce); }), Errc::InvalidSignature);
}

TEST(Bbs, ProofSizeShrinksAsMoreIsRevealed) {
  auto kp = bbs::keygen();
  auto msgs = make_messages(30);
  auto sig = bbs::sign(kp.secret_key, kp.public_key, msgs);
  std::size_t previous = SIZE_MAX;
  for (std::size_t k = 0; k <= msgs.size(); k += 5) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    auto proof = bbs::derive_proof(kp.public_key, sig, msgs, idx, kNonce);
    EXPECT_LT(proof.bytes.size(), previous);
    previous = proof.bytes.size();
    EXPECT_TRUE(bbs::verify_proof(kp.public_key, proof, pick(msgs, idx), kNonce));
  }
}
