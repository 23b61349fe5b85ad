#pragma once

// BBS multi-message signatures with selective-disclosure proofs over
// BLS12-381, ciphersuite BBS_BLS12381G1_XMD:SHA-256_SSWU_RO_H2G_HM2S_.
//
// Octet formats follow the IRTF CFRG BBS draft:
//   public key  96 bytes  compressed G2 point
//   signature   80 bytes  A (compressed G1) || e (32-byte big-endian scalar)
//   proof       272 + 32*U bytes for U undisclosed messages
//               Abar || Bbar || D || e^ || r1^ || r3^ || m^_1..m^_U || c
// blst supplies field, group and pairing arithmetic and hash_to_curve.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "selectshare/bytes.hpp"

namespace selectshare::bbs {

inline constexpr std::string_view kCiphersuiteId = "BBS_BLS12381G1_XMD:SHA-256_SSWU_RO_";
inline constexpr std::string_view kApiId = "BBS_BLS12381G1_XMD:SHA-256_SSWU_RO_H2G_HM2S_";

inline constexpr std::size_t kScalarSize = 32;
inline constexpr std::size_t kG1Size = 48;
inline constexpr std::size_t kG2Size = 96;
inline constexpr std::size_t kSignatureSize = kG1Size + kScalarSize;
inline constexpr std::size_t kProofBaseSize = 3 * kG1Size + 4 * kScalarSize;
inline constexpr std::size_t kDefaultMaxMessages = 1024;

struct SecretKey {
  std::array<std::uint8_t, kScalarSize> bytes{};  // big-endian
};

struct PublicKey {
  std::array<std::uint8_t, kG2Size> bytes{};

  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct KeyPair {
  SecretKey secret_key;
  PublicKey public_key;
  std::string key_id;
};

struct Signature {
  std::array<std::uint8_t, kSignatureSize> bytes{};
  std::size_t message_count = 0;
};

struct SelectiveProof {
  Bytes bytes;
  std::vector<std::size_t> revealed_indices;  // ascending
  std::size_t total_count = 0;
  Bytes presentation_nonce;
};

/// Ciphersuite KeyGen: hash_to_scalar(key_material || I2OSP(len(key_info), 2) || key_info).
/// Throws WeakSeed if key_material is shorter than 32 bytes.
SecretKey derive_secret_key(ByteView key_material, ByteView key_info = {});
PublicKey public_key_from_secret(const SecretKey& sk);

/// Deterministic for a given seed; draws 32 bytes of system entropy otherwise.
KeyPair keygen(std::optional<ByteView> seed = std::nullopt);

/// Stable short identifier for a public key.
std::string key_id_for(const PublicKey& pk);

Signature sign(const SecretKey& sk, const PublicKey& pk, const std::vector<Bytes>& messages,
               ByteView header = {}, std::size_t max_messages = kDefaultMaxMessages);

bool verify(const PublicKey& pk, const std::vector<Bytes>& messages, const Signature& signature,
            ByteView header = {});

/// Throws IndexOutOfRange, InvalidSignature, MalformedInput (empty nonce).
SelectiveProof derive_proof(const PublicKey& pk, const Signature& signature,
                            const std::vector<Bytes>& messages,
                            const std::vector<std::size_t>& revealed_indices,
                            ByteView presentation_nonce, ByteView header = {});

/// Returns false on any verification failure; throws MalformedProof when the
/// proof length cannot correspond to `proof.total_count`.
bool verify_proof(const PublicKey& pk, const SelectiveProof& proof,
                  const std::map<std::size_t, Bytes>& revealed, ByteView presentation_nonce,
                  ByteView header = {});

/// Exposed for tests: RFC 9380 expand_message_xmd with SHA-256.
Bytes expand_message_xmd(ByteView msg, ByteView dst, std::size_t len_in_bytes);
/// OS2IP(expand_message_xmd(msg, dst, 48)) mod r, as 32 big-endian bytes.
std::array<std::uint8_t, kScalarSize> hash_to_scalar(ByteView msg, ByteView dst);
/// Compressed P1 base point and the first `count` message generators (Q_1, H_1, ...).
std::array<std::uint8_t, kG1Size> base_point_p1();
std::vector<std::array<std::uint8_t, kG1Size>> generators_compressed(std::size_t count);

Bytes signature_to_bytes(const Signature& s);
Signature signature_from_bytes(ByteView bytes, std::size_t message_count);
Bytes public_key_to_bytes(const PublicKey& pk);
PublicKey public_key_from_bytes(ByteView bytes);

}  // namespace selectshare::bbs
