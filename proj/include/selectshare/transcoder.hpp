#pragma once

// Turns raw device readings into the signed measurement document format and
// uploads it to the storage node.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "selectshare/bbs.hpp"
#include "selectshare/storage.hpp"

namespace selectshare::transcoder {

using Json = nlohmann::json;

struct RawReading {
  std::string device_id;
  std::string field;
  std::string value;
  std::int64_t time = 0;  ///< unix seconds

  friend bool operator==(const RawReading&, const RawReading&) = default;
};

/// One measurements entry per distinct field, in order of first appearance.
/// Throws EmptyInput, MixedDevices, MalformedInput.
Json transcode(const std::vector<RawReading>& readings);

/// Header `device_id,field,value,time`; double-quoted cells may contain
/// commas and doubled quotes. Throws MalformedInputFile.
std::vector<RawReading> parse_csv(std::string_view text);
/// One {"device_id","field","value","time"} object per line.
std::vector<RawReading> parse_jsonl(std::string_view text);

/// {"secretKey": b64url, "publicKey": b64url, "keyId": "..."}
Json key_to_json(const bbs::KeyPair& key);
bbs::KeyPair key_from_json(const Json& j);
bbs::KeyPair load_key_file(const std::filesystem::path& path);
void save_key_file(const std::filesystem::path& path, const bbs::KeyPair& key);

struct Receipt {
  std::string device_id;
  std::int64_t stored_at = 0;
  std::size_t canonical_count = 0;
};

/// Throws SigningFailed.
storage::SignedDocument sign(const Json& doc, const bbs::KeyPair& key);

/// POSTs to <store_url>/store/<deviceID>. A rejection by the store surfaces
/// as BadSignature / UnknownSigner; transport failures as UploadFailed.
Receipt upload(const storage::SignedDocument& sd, const std::string& store_url, const std::string& api_key);

Receipt sign_and_upload(const Json& doc, const bbs::KeyPair& key, const std::string& store_url,
                        const std::string& api_key);

}  // namespace selectshare::transcoder
