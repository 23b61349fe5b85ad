#include "selectshare/transcoder.hpp"

#include <charconv>
#include <map>

#include <httplib.h>

#include "selectshare/error.hpp"
#include "support.hpp"

namespace selectshare::transcoder {

namespace {

[[noreturn]] void bad_file(std::size_t line, const std::string& why) {
  throw Error(Errc::MalformedInputFile, "line " + std::to_string(line) + ": " + why);
}

std::int64_t parse_time(std::string_view s, std::size_t line) {
  std::int64_t t = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), t);
  if (ec != std::errc() || ptr != s.data() + s.size() || t <= 0) bad_file(line, "time must be a positive integer");
  return t;
}

// Splits one CSV record; `pos` advances past the record's line break.
std::vector<std::string> csv_record(std::string_view text, std::size_t& pos, std::size_t line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  while (pos < text.size()) {
    char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cells.back() += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      if (!cells.back().empty()) bad_file(line, "stray quote");
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      cells.back() += c;
    }
  }
  if (quoted) bad_file(line, "unterminated quoted cell");
  return cells;
}

}  // namespace

Json transcode(const std::vector<RawReading>& readings) {
  if (readings.empty()) throw Error(Errc::EmptyInput, "no readings");
  const std::string& device = readings.front().device_id;
  Json measurements = Json::array();
  std::map<std::string, std::size_t> slot;
  for (const auto& r : readings) {
    if (r.device_id.empty() || r.field.empty() || r.value.empty() || r.time <= 0)
      throw Error(Errc::MalformedInput, "readings need a device, field, value and positive time");
    if (r.device_id != device) throw Error(Errc::MixedDevices, "readings span devices " + device + " and " + r.device_id);
    auto [it, fresh] = slot.try_emplace(r.field, measurements.size());
    if (fresh) measurements.push_back(Json{{"field", r.field}, {"values", Json::array()}});
    measurements[it->second]["values"].push_back(Json{{"time", std::to_string(r.time)}, {"value", r.value}});
  }
  return Json{{"deviceID", device}, {"measurements", measurements}};
}

std::vector<RawReading> parse_csv(std::string_view text) {
  std::size_t pos = 0, line = 1;
  auto header = csv_record(text, pos, line);
  if (header != std::vector<std::string>{"device_id", "field", "value", "time"})
    bad_file(1, "header must be device_id,field,value,time");
  std::vector<RawReading> out;
  while (pos < text.size()) {
    ++line;
    auto cells = csv_record(text, pos, line);
    if (cells.size() == 1 && cells[0].empty()) continue;
    if (cells.size() != 4) bad_file(line, "expected 4 cells");
    out.push_back({cells[0], cells[1], cells[2], parse_time(cells[3], line)});
  }
  return out;
}

std::vector<RawReading> parse_jsonl(std::string_view text) {
  std::vector<RawReading> out;
  std::size_t line = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    std::string_view row = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    ++line;
    if (row.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Json j = Json::parse(row, nullptr, false);
    if (j.is_discarded() || !j.is_object()) bad_file(line, "not a JSON object");
    RawReading r;
    for (auto [key, dst] : {std::pair{"device_id", &r.device_id}, {"field", &r.field}, {"value", &r.value}}) {
      if (!j.contains(key) || !j[key].is_string()) bad_file(line, std::string(key) + " must be a string");
      *dst = j[key].get<std::string>();
    }
    if (!j.contains("time")) bad_file(line, "time missing");
    if (j["time"].is_number_integer())
      r.time = j["time"].get<std::int64_t>();
    else if (j["time"].is_string())
      r.time = parse_time(j["time"].get<std::string>(), line);
    if (r.time <= 0) bad_file(line, "time must be a positive integer");
    out.push_back(std::move(r));
  }
  return out;
}

Json key_to_json(const bbs::KeyPair& key) {
  return Json{{"secretKey", base64url_encode(key.secret_key.bytes)},
              {"publicKey", base64url_encode(bbs::public_key_to_bytes(key.public_key))},
              {"keyId", key.key_id}};
}

bbs::KeyPair key_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("secretKey") || !j["secretKey"].is_string())
    throw Error(Errc::MalformedKey, "key file needs secretKey");
  Bytes sk = base64url_decode(j["secretKey"].get<std::string>());
  if (sk.size() != bbs::kScalarSize) throw Error(Errc::MalformedKey, "secretKey must be 32 bytes");
  bbs::KeyPair kp;
  std::copy(sk.begin(), sk.end(), kp.secret_key.bytes.begin());
  kp.public_key = bbs::public_key_from_secret(kp.secret_key);
  if (j.contains("publicKey") &&
      bbs::public_key_from_bytes(base64url_decode(j["publicKey"].get<std::string>())) != kp.public_key)
    throw Error(Errc::MalformedKey, "publicKey does not match secretKey");
  kp.key_id = j.value("keyId", bbs::key_id_for(kp.public_key));
  return kp;
}

bbs::KeyPair load_key_file(const std::filesystem::path& path) {
  Json j = Json::parse(support::read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::MalformedKey, "key file is not JSON");
  return key_from_json(j);
}

void save_key_file(const std::filesystem::path& path, const bbs::KeyPair& key) {
  support::atomic_write(path, key_to_json(key).dump(2) + "\n");
}

storage::SignedDocument sign(const Json& doc, const bbs::KeyPair& key) {
  try {
    return storage::sign_document(doc, key);
  } catch (const Error& e) {
    throw Error(Errc::SigningFailed, e.what());
  }
}

Receipt upload(const storage::SignedDocument& sd, const std::string& store_url, const std::string& api_key) {
  auto url = support::split_url(store_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("X-Api-Key", api_key);
  std::string path = url.path + "/store/" + httplib::detail::encode_url(sd.device_id());
  auto res = client.Post(path, headers, sd.to_json().dump(), "application/json");
  if (!res) throw Error(Errc::UploadFailed, "storage unreachable: " + httplib::to_string(res.error()));

  Json body = Json::parse(res->body, nullptr, false);
  if (res->status != 201) {
    std::string reason = body.is_object() ? body.value("reason", "") : "";
    std::string detail = body.is_object() ? body.value("detail", res->body) : res->body;
    if (reason == "BadSignature") throw Error(Errc::BadSignature, detail);
    if (reason == "UnknownSigner") throw Error(Errc::UnknownSigner, detail);
    throw Error(Errc::UploadFailed, "storage answered " + std::to_string(res->status) + ": " + detail);
  }
  if (!body.is_object()) throw Error(Errc::UploadFailed, "storage receipt is not JSON");
  try {
    return Receipt{body.at("deviceID").get<std::string>(), body.at("storedAt").get<std::int64_t>(),
                   body.at("canonicalCount").get<std::size_t>()};
  } catch (const Json::exception& e) {
    throw Error(Errc::UploadFailed, std::string("malformed receipt: ") + e.what());
  }
}

Receipt sign_and_upload(const Json& doc, const bbs::KeyPair& key, const std::string& store_url,
                        const std::string& api_key) {
  return upload(sign(doc, key), store_url, api_key);
}

}  // namespace selectshare::transcoder
