#include "selectshare/bbs.hpp"

#include <blst.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>

#include "selectshare/error.hpp"

namespace selectshare::bbs {

namespace {

constexpr std::size_t kExpandLen = 48;

Bytes concat_dst(std::string_view a, std::string_view b) {
  Bytes out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

const Bytes& dst_h2s() {
  static const Bytes d = concat_dst(kApiId, "H2S_");
  return d;
}
const Bytes& dst_map_msg() {
  static const Bytes d = concat_dst(kApiId, "MAP_MSG_TO_SCALAR_AS_HASH_");
  return d;
}
const Bytes& dst_keygen() {
  static const Bytes d = concat_dst(kApiId, "KEYGEN_DST_");
  return d;
}

void i2osp(Bytes& out, std::uint64_t v, std::size_t len) {
  for (std::size_t i = len; i-- > 0;) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// --- scalar field -----------------------------------------------------------

struct Fr {
  blst_fr v{};

  static Fr from_scalar(const blst_scalar& s) {
    Fr f;
    blst_fr_from_scalar(&f.v, &s);
    return f;
  }
  static Fr from_be(std::span<const std::uint8_t, kScalarSize> be) {
    blst_scalar s;
    blst_scalar_from_bendian(&s, be.data());
    return from_scalar(s);
  }
  static Fr reduce_be(ByteView bytes) {
    blst_scalar s;
    blst_scalar_from_be_bytes(&s, bytes.data(), bytes.size());
    return from_scalar(s);
  }
  static Fr random() {
    Bytes r = random_bytes(kExpandLen);
    return reduce_be(r);
  }

  blst_scalar scalar() const {
    blst_scalar s;
    blst_scalar_from_fr(&s, &v);
    return s;
  }
  std::array<std::uint8_t, kScalarSize> be() const {
    std::array<std::uint8_t, kScalarSize> out{};
    blst_scalar s = scalar();
    blst_bendian_from_scalar(out.data(), &s);
    return out;
  }
  bool is_zero() const {
    static const blst_fr zero{};
    return std::memcmp(&v, &zero, sizeof v) == 0;
  }

  friend Fr operator+(const Fr& a, const Fr& b) {
    Fr r;
    blst_fr_add(&r.v, &a.v, &b.v);
    return r;
  }
  friend Fr operator-(const Fr& a, const Fr& b) {
    Fr r;
    blst_fr_sub(&r.v, &a.v, &b.v);
    return r;
  }
  friend Fr operator*(const Fr& a, const Fr& b) {
    Fr r;
    blst_fr_mul(&r.v, &a.v, &b.v);
    return r;
  }
  Fr inverse() const {
    Fr r;
    blst_fr_eucl_inverse(&r.v, &v);
    return r;
  }
  friend bool operator==(const Fr& a, const Fr& b) { return std::memcmp(&a.v, &b.v, sizeof a.v) == 0; }
};

void append(Bytes& out, const Fr& f) {
  auto be = f.be();
  out.insert(out.end(), be.begin(), be.end());
}

// Parses a 32-byte big-endian scalar, rejecting values >= r.
std::optional<Fr> parse_scalar(ByteView bytes) {
  blst_scalar s;
  blst_scalar_from_bendian(&s, bytes.data());
  if (!blst_scalar_fr_check(&s)) return std::nullopt;
  return Fr::from_scalar(s);
}

Fr hash_to_fr(ByteView msg, ByteView dst) {
  Bytes uniform = expand_message_xmd(msg, dst, kExpandLen);
  return Fr::reduce_be(uniform);
}

// --- G1 / G2 ---------------------------------------------------------------

struct G1 {
  blst_p1 p{};  // all-zero is the identity

  static G1 from_affine(const blst_p1_affine& a) {
    G1 g;
    blst_p1_from_affine(&g.p, &a);
    return g;
  }
  bool is_identity() const { return blst_p1_is_inf(&p); }
  G1 operator*(const Fr& f) const {
    G1 out;
    blst_scalar s = f.scalar();
    blst_p1_mult(&out.p, &p, s.b, 255);
    return out;
  }
  friend G1 operator+(const G1& a, const G1& b) {
    G1 out;
    blst_p1_add_or_double(&out.p, &a.p, &b.p);
    return out;
  }
  G1 negated() const {
    G1 out = *this;
    blst_p1_cneg(&out.p, true);
    return out;
  }
  std::array<std::uint8_t, kG1Size> compress() const {
    std::array<std::uint8_t, kG1Size> out{};
    blst_p1_compress(out.data(), &p);
    return out;
  }
  blst_p1_affine affine() const {
    blst_p1_affine a;
    blst_p1_to_affine(&a, &p);
    return a;
  }
};

void append(Bytes& out, const G1& g) {
  auto c = g.compress();
  out.insert(out.end(), c.begin(), c.end());
}

// Valid, in-subgroup, non-identity G1 point.
std::optional<G1> parse_g1(ByteView bytes) {
  blst_p1_affine a;
  if (bytes.size() != kG1Size || blst_p1_uncompress(&a, bytes.data()) != BLST_SUCCESS) return std::nullopt;
  if (blst_p1_affine_is_inf(&a) || !blst_p1_affine_in_g1(&a)) return std::nullopt;
  return G1::from_affine(a);
}

std::optional<blst_p2_affine> parse_g2(ByteView bytes) {
  blst_p2_affine a;
  if (bytes.size() != kG2Size || blst_p2_uncompress(&a, bytes.data()) != BLST_SUCCESS) return std::nullopt;
  if (blst_p2_affine_is_inf(&a) || !blst_p2_affine_in_g2(&a)) return std::nullopt;
  return a;
}

G1 hash_to_g1(ByteView msg, ByteView dst) {
  G1 g;
  blst_hash_to_g1(&g.p, msg.data(), msg.size(), dst.data(), dst.size(), nullptr, 0);
  return g;
}

// sum_i points[i] * scalars[i]
G1 msm(const std::vector<const blst_p1_affine*>& points, const std::vector<Fr>& scalars) {
  std::size_t n = points.size();
  if (n == 0) return G1{};
  if (n == 1) return G1::from_affine(*points[0]) * scalars[0];
  std::vector<blst_scalar> raw(n);
  std::vector<const std::uint8_t*> raw_ptrs(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = scalars[i].scalar();
    raw_ptrs[i] = raw[i].b;
  }
  std::vector<limb_t> scratch(blst_p1s_mult_pippenger_scratch_sizeof(n) / sizeof(limb_t) + 1);
  G1 out;
  blst_p1s_mult_pippenger(&out.p, points.data(), n, raw_ptrs.data(), 255, scratch.data());
  return out;
}

bool pairing_product_is_one(const G1& a1, const blst_p2& b1, const G1& a2, const blst_p2& b2) {
  blst_p1_affine pa1 = a1.affine(), pa2 = a2.affine();
  blst_p2_affine qb1, qb2;
  blst_p2_to_affine(&qb1, &b1);
  blst_p2_to_affine(&qb2, &b2);
  blst_fp12 ml1, ml2, prod, fe;
  blst_miller_loop(&ml1, &qb1, &pa1);
  blst_miller_loop(&ml2, &qb2, &pa2);
  blst_fp12_mul(&prod, &ml1, &ml2);
  blst_final_exp(&fe, &prod);
  return blst_fp12_is_one(&fe);
}

// --- generators --------------------------------------------------------------

class GeneratorCache {
 public:
  // Affine generators; index 0 is Q_1, index i >= 1 is H_i.
  std::vector<const blst_p1_affine*> get(std::size_t count) {
    std::lock_guard lock(mu_);
    while (points_.size() < count) extend();
    std::vector<const blst_p1_affine*> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = points_[i].get();
    return out;
  }

  const blst_p1_affine& p1() {
    static const blst_p1_affine p = [] {
      Bytes seed = concat_dst(kApiId, "BP_MESSAGE_GENERATOR_SEED");
      std::vector<blst_p1_affine> one = create(1, seed);
      return one[0];
    }();
    return p;
  }

  // create_generators(count, generator_seed, api_id) from the draft.
  static std::vector<blst_p1_affine> create(std::size_t count, ByteView generator_seed) {
    Bytes seed_dst = concat_dst(kApiId, "SIG_GENERATOR_SEED_");
    Bytes gen_dst = concat_dst(kApiId, "SIG_GENERATOR_DST_");
    Bytes v = expand_message_xmd(generator_seed, seed_dst, kExpandLen);
    std::vector<blst_p1_affine> out;
    for (std::size_t i = 1; i <= count; ++i) {
      Bytes in = v;
      i2osp(in, i, 8);
      v = expand_message_xmd(in, seed_dst, kExpandLen);
      out.push_back(hash_to_g1(v, gen_dst).affine());
    }
    return out;
  }

 private:
  void extend() {
    Bytes seed_dst = concat_dst(kApiId, "SIG_GENERATOR_SEED_");
    Bytes gen_dst = concat_dst(kApiId, "SIG_GENERATOR_DST_");
    if (v_.empty()) v_ = expand_message_xmd(concat_dst(kApiId, "MESSAGE_GENERATOR_SEED"), seed_dst, kExpandLen);
    std::size_t chunk = std::max<std::size_t>(points_.size(), 16);
    for (std::size_t k = 0; k < chunk; ++k) {
      Bytes in = v_;
      i2osp(in, points_.size() + 1, 8);
      v_ = expand_message_xmd(in, seed_dst, kExpandLen);
      points_.push_back(std::make_unique<blst_p1_affine>(hash_to_g1(v_, gen_dst).affine()));
    }
  }

  std::mutex mu_;
  Bytes v_;
  std::vector<std::unique_ptr<blst_p1_affine>> points_;
};

GeneratorCache& generators() {
  static GeneratorCache cache;
  return cache;
}

std::vector<Fr> messages_to_scalars(const std::vector<Bytes>& messages) {
  std::vector<Fr> out;
  out.reserve(messages.size());
  for (const auto& m : messages) out.push_back(hash_to_fr(m, dst_map_msg()));
  return out;
}

Fr calculate_domain(const PublicKey& pk, const std::vector<const blst_p1_affine*>& gens,
                    std::size_t message_count, ByteView header) {
  Bytes input(pk.bytes.begin(), pk.bytes.end());
  i2osp(input, message_count, 8);
  for (std::size_t i = 0; i <= message_count; ++i) append(input, G1::from_affine(*gens[i]));
  input.insert(input.end(), kApiId.begin(), kApiId.end());
  i2osp(input, header.size(), 8);
  input.insert(input.end(), header.begin(), header.end());
  return hash_to_fr(input, dst_h2s());
}

// B = P1 + Q_1 * domain + sum H_i * msg_i over the given indices.
G1 compute_b(const std::vector<const blst_p1_affine*>& gens, const Fr& domain,
             const std::vector<std::size_t>& indices, const std::vector<Fr>& scalars) {
  std::vector<const blst_p1_affine*> pts;
  std::vector<Fr> sc;
  pts.reserve(indices.size() + 1);
  sc.reserve(indices.size() + 1);
  pts.push_back(gens[0]);
  sc.push_back(domain);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    pts.push_back(gens[indices[k] + 1]);
    sc.push_back(scalars[k]);
  }
  return G1::from_affine(generators().p1()) + msm(pts, sc);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

struct ParsedSignature {
  G1 a;
  Fr e;
};

std::optional<ParsedSignature> parse_signature(const Signature& sig) {
  ByteView bytes(sig.bytes);
  auto a = parse_g1(bytes.subspan(0, kG1Size));
  if (!a) return std::nullopt;
  auto e = parse_scalar(bytes.subspan(kG1Size, kScalarSize));
  if (!e || e->is_zero()) return std::nullopt;
  return ParsedSignature{*a, *e};
}

bool core_verify(const PublicKey& pk, const std::vector<Fr>& scalars, const Signature& sig, ByteView header) {
  auto parsed = parse_signature(sig);
  if (!parsed) return false;
  auto w = parse_g2(pk.bytes);
  if (!w) return false;
  std::size_t count = scalars.size();
  auto gens = generators().get(count + 1);
  Fr domain = calculate_domain(pk, gens, count, header);
  G1 b = compute_b(gens, domain, iota(count), scalars);

  // e(A, W + BP2 * e) * e(B, -BP2) == 1
  blst_p2 w_plus, bp2_e, neg_bp2 = *blst_p2_generator(), w_proj;
  blst_scalar e_s = parsed->e.scalar();
  blst_p2_mult(&bp2_e, blst_p2_generator(), e_s.b, 255);
  blst_p2_from_affine(&w_proj, &*w);
  blst_p2_add_or_double(&w_plus, &w_proj, &bp2_e);
  blst_p2_cneg(&neg_bp2, true);
  return pairing_product_is_one(parsed->a, w_plus, b, neg_bp2);
}

Fr challenge(std::size_t revealed_count, const std::vector<std::size_t>& revealed_indices,
             const std::vector<Fr>& revealed_scalars, const G1& abar, const G1& bbar, const G1& d,
             const G1& t1, const G1& t2, const Fr& domain, ByteView ph) {
  Bytes input;
  i2osp(input, revealed_count, 8);
  for (std::size_t k = 0; k < revealed_indices.size(); ++k) {
    i2osp(input, revealed_indices[k], 8);
    append(input, revealed_scalars[k]);
  }
  append(input, abar);
  append(input, bbar);
  append(input, d);
  append(input, t1);
  append(input, t2);
  append(input, domain);
  i2osp(input, ph.size(), 8);
  input.insert(input.end(), ph.begin(), ph.end());
  return hash_to_fr(input, dst_h2s());
}

}  // namespace

// ---------------------------------------------------------------------------

Bytes expand_message_xmd(ByteView msg, ByteView dst, std::size_t len_in_bytes) {
  constexpr std::size_t b_in_bytes = SHA256_DIGEST_LENGTH;
  constexpr std::size_t s_in_bytes = 64;
  std::size_t ell = (len_in_bytes + b_in_bytes - 1) / b_in_bytes;
  if (ell > 255 || len_in_bytes > 65535 || dst.size() > 255)
    throw Error(Errc::MalformedInput, "expand_message_xmd: parameters out of range");

  Bytes dst_prime(dst.begin(), dst.end());
  dst_prime.push_back(static_cast<std::uint8_t>(dst.size()));

  Bytes msg_prime(s_in_bytes, 0);
  msg_prime.insert(msg_prime.end(), msg.begin(), msg.end());
  i2osp(msg_prime, len_in_bytes, 2);
  msg_prime.push_back(0);
  msg_prime.insert(msg_prime.end(), dst_prime.begin(), dst_prime.end());

  std::array<std::uint8_t, b_in_bytes> b0{}, bi{};
  SHA256(msg_prime.data(), msg_prime.size(), b0.data());

  Bytes out;
  out.reserve(ell * b_in_bytes);
  Bytes block;
  for (std::size_t i = 1; i <= ell; ++i) {
    block.clear();
    if (i == 1) {
      block.insert(block.end(), b0.begin(), b0.end());
    } else {
      for (std::size_t k = 0; k < b_in_bytes; ++k) block.push_back(b0[k] ^ bi[k]);
    }
    block.push_back(static_cast<std::uint8_t>(i));
    block.insert(block.end(), dst_prime.begin(), dst_prime.end());
    SHA256(block.data(), block.size(), bi.data());
    out.insert(out.end(), bi.begin(), bi.end());
  }
  out.resize(len_in_bytes);
  return out;
}

std::array<std::uint8_t, kScalarSize> hash_to_scalar(ByteView msg, ByteView dst) {
  return hash_to_fr(msg, dst).be();
}

std::array<std::uint8_t, kG1Size> base_point_p1() {
  return G1::from_affine(generators().p1()).compress();
}

std::vector<std::array<std::uint8_t, kG1Size>> generators_compressed(std::size_t count) {
  auto gens = generators().get(count);
  std::vector<std::array<std::uint8_t, kG1Size>> out;
  for (const auto* g : gens) out.push_back(G1::from_affine(*g).compress());
  return out;
}

SecretKey derive_secret_key(ByteView key_material, ByteView key_info) {
  if (key_material.size() < 32) throw Error(Errc::WeakSeed, "key material must be at least 32 bytes");
  if (key_info.size() > 65535) throw Error(Errc::MalformedInput, "key_info too long");
  Bytes input(key_material.begin(), key_material.end());
  i2osp(input, key_info.size(), 2);
  input.insert(input.end(), key_info.begin(), key_info.end());
  Fr sk = hash_to_fr(input, dst_keygen());
  if (sk.is_zero()) throw Error(Errc::WeakSeed, "derived a zero secret key");
  return SecretKey{sk.be()};
}

PublicKey public_key_from_secret(const SecretKey& sk) {
  blst_scalar s;
  blst_scalar_from_bendian(&s, sk.bytes.data());
  blst_p2 w;
  blst_sk_to_pk_in_g2(&w, &s);
  PublicKey pk;
  blst_p2_compress(pk.bytes.data(), &w);
  return pk;
}

std::string key_id_for(const PublicKey& pk) {
  Bytes digest = sha256(pk.bytes);
  return "bbs-" + hex_encode(ByteView(digest).first(8));
}

KeyPair keygen(std::optional<ByteView> seed) {
  Bytes material = seed ? Bytes(seed->begin(), seed->end()) : random_bytes(32);
  KeyPair kp;
  kp.secret_key = derive_secret_key(material);
  kp.public_key = public_key_from_secret(kp.secret_key);
  kp.key_id = key_id_for(kp.public_key);
  return kp;
}

Signature sign(const SecretKey& sk, const PublicKey& pk, const std::vector<Bytes>& messages, ByteView header,
               std::size_t max_messages) {
  if (messages.empty()) throw Error(Errc::EmptyMessageList, "nothing to sign");
  if (messages.size() > max_messages)
    throw Error(Errc::TooManyMessages, std::to_string(messages.size()) + " messages exceed the limit of " +
                                           std::to_string(max_messages));
  std::size_t count = messages.size();
  std::vector<Fr> scalars = messages_to_scalars(messages);
  auto gens = generators().get(count + 1);
  Fr domain = calculate_domain(pk, gens, count, header);

  Fr x = Fr::from_be(sk.bytes);
  Bytes e_input(sk.bytes.begin(), sk.bytes.end());
  for (const auto& m : scalars) append(e_input, m);
  append(e_input, domain);
  Fr e = hash_to_fr(e_input, dst_h2s());

  G1 b = compute_b(gens, domain, iota(count), scalars);
  Fr denom = x + e;
  if (denom.is_zero()) throw Error(Errc::SigningFailed, "degenerate signing scalar");
  G1 a = b * denom.inverse();

  Signature sig;
  sig.message_count = count;
  auto ac = a.compress();
  auto eb = e.be();
  std::copy(ac.begin(), ac.end(), sig.bytes.begin());
  std::copy(eb.begin(), eb.end(), sig.bytes.begin() + kG1Size);
  return sig;
}

bool verify(const PublicKey& pk, const std::vector<Bytes>& messages, const Signature& signature, ByteView header) {
  if (messages.empty() || messages.size() > kDefaultMaxMessages) return false;
  if (signature.message_count != 0 && signature.message_count != messages.size()) return false;
  return core_verify(pk, messages_to_scalars(messages), signature, header);
}

SelectiveProof derive_proof(const PublicKey& pk, const Signature& signature, const std::vector<Bytes>& messages,
                            const std::vector<std::size_t>& revealed_indices, ByteView presentation_nonce,
                            ByteView header) {
  if (presentation_nonce.empty()) throw Error(Errc::MalformedInput, "presentation nonce must be non-empty");
  std::size_t count = messages.size();
  if (count == 0) throw Error(Errc::EmptyMessageList, "nothing to prove");
  std::vector<std::size_t> disclosed = revealed_indices;
  std::sort(disclosed.begin(), disclosed.end());
  disclosed.erase(std::unique(disclosed.begin(), disclosed.end()), disclosed.end());
  if (!disclosed.empty() && disclosed.back() >= count)
    throw Error(Errc::IndexOutOfRange, "revealed index " + std::to_string(disclosed.back()) + " >= " +
                                           std::to_string(count));

  std::vector<Fr> scalars = messages_to_scalars(messages);
  if (!core_verify(pk, scalars, signature, header))
    throw Error(Errc::InvalidSignature, "signature does not verify over the messages");
  auto parsed = *parse_signature(signature);

  std::vector<std::size_t> undisclosed;
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < count; ++i) {
      if (k < disclosed.size() && disclosed[k] == i) {
        ++k;
      } else {
        undisclosed.push_back(i);
      }
    }
  }
  std::size_t u = undisclosed.size();

  auto gens = generators().get(count + 1);
  Fr domain = calculate_domain(pk, gens, count, header);
  G1 b = compute_b(gens, domain, iota(count), scalars);

  Fr r1 = Fr::random(), r2 = Fr::random(), e_tilde = Fr::random(), r1_tilde = Fr::random(),
     r3_tilde = Fr::random();
  std::vector<Fr> m_tilde(u);
  for (auto& m : m_tilde) m = Fr::random();

  G1 d = b * r2;
  G1 abar = parsed.a * (r1 * r2);
  G1 bbar = (d * r1) + (abar * parsed.e).negated();
  G1 t1 = (abar * e_tilde) + (d * r1_tilde);

  std::vector<const blst_p1_affine*> t2_points;
  std::vector<Fr> t2_scalars;
  for (std::size_t k = 0; k < u; ++k) {
    t2_points.push_back(gens[undisclosed[k] + 1]);
    t2_scalars.push_back(m_tilde[k]);
  }
  G1 t2 = (d * r3_tilde) + msm(t2_points, t2_scalars);

  std::vector<Fr> disclosed_scalars;
  for (auto i : disclosed) disclosed_scalars.push_back(scalars[i]);
  Fr c = challenge(disclosed.size(), disclosed, disclosed_scalars, abar, bbar, d, t1, t2, domain,
                   presentation_nonce);

  Fr r3 = r2.inverse();
  Fr e_hat = e_tilde + parsed.e * c;
  Fr r1_hat = r1_tilde - r1 * c;
  Fr r3_hat = r3_tilde - r3 * c;

  SelectiveProof proof;
  proof.bytes.reserve(kProofBaseSize + u * kScalarSize);
  append(proof.bytes, abar);
  append(proof.bytes, bbar);
  append(proof.bytes, d);
  append(proof.bytes, e_hat);
  append(proof.bytes, r1_hat);
  append(proof.bytes, r3_hat);
  for (std::size_t k = 0; k < u; ++k) append(proof.bytes, m_tilde[k] + scalars[undisclosed[k]] * c);
  append(proof.bytes, c);
  proof.revealed_indices = std::move(disclosed);
  proof.total_count = count;
  proof.presentation_nonce.assign(presentation_nonce.begin(), presentation_nonce.end());
  return proof;
}

bool verify_proof(const PublicKey& pk, const SelectiveProof& proof, const std::map<std::size_t, Bytes>& revealed,
                  ByteView presentation_nonce, ByteView header) {
  const std::size_t count = proof.total_count;
  if (proof.bytes.size() < kProofBaseSize || (proof.bytes.size() - kProofBaseSize) % kScalarSize != 0)
    throw Error(Errc::MalformedProof, "proof length " + std::to_string(proof.bytes.size()) + " is not 272 + 32*U");
  const std::size_t u = (proof.bytes.size() - kProofBaseSize) / kScalarSize;
  const std::size_t r = proof.revealed_indices.size();
  if (count == 0 || count > kDefaultMaxMessages || r + u != count) return false;
  if (revealed.size() != r) return false;
  {
    std::size_t k = 0;
    for (const auto& [idx, msg] : revealed) {
      if (idx != proof.revealed_indices[k++] || idx >= count) return false;
    }
  }

  ByteView bytes(proof.bytes);
  std::size_t off = 0;
  auto take_point = [&]() {
    auto p = parse_g1(bytes.subspan(off, kG1Size));
    off += kG1Size;
    return p;
  };
  auto take_scalar = [&]() {
    auto s = parse_scalar(bytes.subspan(off, kScalarSize));
    off += kScalarSize;
    return s;
  };
  auto abar = take_point();
  auto bbar = take_point();
  auto d = take_point();
  if (!abar || !bbar || !d) return false;
  auto e_hat = take_scalar();
  auto r1_hat = take_scalar();
  auto r3_hat = take_scalar();
  if (!e_hat || !r1_hat || !r3_hat) return false;
  std::vector<Fr> m_hat(u);
  for (auto& m : m_hat) {
    auto s = take_scalar();
    if (!s) return false;
    m = *s;
  }
  auto cp = take_scalar();
  if (!cp) return false;

  auto w = parse_g2(pk.bytes);
  if (!w) return false;

  std::vector<Bytes> revealed_msgs;
  std::vector<std::size_t> disclosed;
  for (const auto& [idx, msg] : revealed) {
    disclosed.push_back(idx);
    revealed_msgs.push_back(msg);
  }
  std::vector<Fr> disclosed_scalars = messages_to_scalars(revealed_msgs);
  std::vector<std::size_t> undisclosed;
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < count; ++i) {
      if (k < disclosed.size() && disclosed[k] == i) {
        ++k;
      } else {
        undisclosed.push_back(i);
      }
    }
  }

  auto gens = generators().get(count + 1);
  Fr domain = calculate_domain(pk, gens, count, header);

  G1 t1 = (*bbar * *cp) + (*abar * *e_hat) + (*d * *r1_hat);
  G1 bv = compute_b(gens, domain, disclosed, disclosed_scalars);
  std::vector<const blst_p1_affine*> pts;
  std::vector<Fr> sc;
  for (std::size_t k = 0; k < u; ++k) {
    pts.push_back(gens[undisclosed[k] + 1]);
    sc.push_back(m_hat[k]);
  }
  G1 t2 = (bv * *cp) + (*d * *r3_hat) + msm(pts, sc);

  Fr expected = challenge(r, disclosed, disclosed_scalars, *abar, *bbar, *d, t1, t2, domain, presentation_nonce);
  if (!(expected == *cp)) return false;

  // e(Abar, W) * e(Bbar, -BP2) == 1
  blst_p2 w_proj, neg_bp2 = *blst_p2_generator();
  blst_p2_from_affine(&w_proj, &*w);
  blst_p2_cneg(&neg_bp2, true);
  return pairing_product_is_one(*abar, w_proj, *bbar, neg_bp2);
}

Bytes signature_to_bytes(const Signature& s) { return Bytes(s.bytes.begin(), s.bytes.end()); }

Signature signature_from_bytes(ByteView bytes, std::size_t message_count) {
  if (bytes.size() != kSignatureSize)
    throw Error(Errc::MalformedInput, "signature must be " + std::to_string(kSignatureSize) + " bytes");
  Signature s;
  std::copy(bytes.begin(), bytes.end(), s.bytes.begin());
  s.message_count = message_count;
  return s;
}

Bytes public_key_to_bytes(const PublicKey& pk) { return Bytes(pk.bytes.begin(), pk.bytes.end()); }

PublicKey public_key_from_bytes(ByteView bytes) {
  if (bytes.size() != kG2Size || !parse_g2(bytes))
    throw Error(Errc::MalformedInput, "not a valid compressed G2 public key");
  PublicKey pk;
  std::copy(bytes.begin(), bytes.end(), pk.bytes.begin());
  return pk;
}

}  // namespace selectshare::bbs
