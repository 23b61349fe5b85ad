#include <filesystem>

#include <gtest/gtest.h>

#include "loopback.hpp"
#include "selectshare/bytes.hpp"
#include "selectshare/canonical.hpp"
#include "selectshare/error.hpp"
#include "selectshare/harness.hpp"
#include "selectshare/storage.hpp"
#include "selectshare/transcoder.hpp"
#include "test_support.hpp"

using namespace selectshare;
using transcoder::Json;
using transcoder::RawReading;
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

}  // namespace

TEST(Transcoder, DemoReadingsGiveTheExampleDocument) {
  std::vector<RawReading> in{{"monitor-1", "temperature", "30C", 1658162155}, {"monitor-1", "humidity", "50", 1658162155}};
  Json expected = Json::parse(R"({
    "deviceID": "monitor-1",
    "measurements": [
      {"field": "temperature", "values": [{"time": "1658162155", "value": "30C"}]},
      {"field": "humidity", "values": [{"time": "1658162155", "value": "50"}]}
    ]})");
  EXPECT_EQ(transcoder::transcode(in), expected);
  EXPECT_EQ(in, harness::demo_readings());
}

TEST(Transcoder, Errors) {
  EXPECT_EQ(code_of([] { transcoder::transcode({}); }), Errc::EmptyInput);
  EXPECT_EQ(code_of([] { transcoder::transcode({{"a", "f", "1", 1}, {"b", "f", "1", 1}}); }), Errc::MixedDevices);
  EXPECT_EQ(code_of([] { transcoder::transcode({{"a", "", "1", 1}}); }), Errc::MalformedInput);
  EXPECT_EQ(code_of([] { transcoder::transcode({{"a", "f", "1", 0}}); }), Errc::MalformedInput);
}

TEST(Transcoder, EveryReadingAppearsExactlyOnce) {
  Rng rng(61);
  auto pool = testsupport::field_pool();
  for (int t = 0; t < 300; ++t) {
    std::vector<RawReading> in;
    std::size_t n = testsupport::uniform(rng, 1, 30);
    for (std::size_t i = 0; i < n; ++i)
      in.push_back({"dev", pool[testsupport::uniform(rng, 0, 4)], std::to_string(testsupport::uniform(rng, 0, 9)),
                    static_cast<std::int64_t>(testsupport::uniform(rng, 1, 1u << 30))});
    Json doc = transcoder::transcode(in);
    EXPECT_EQ(doc, transcoder::transcode(in));

    // rebuild the readings from the document and compare, per field in input order
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> from_doc, from_input;
    std::vector<std::string> order;
    for (const auto& r : in) {
      if (!from_input.count(r.field)) order.push_back(r.field);
      from_input[r.field].emplace_back(std::to_string(r.time), r.value);
    }
    ASSERT_EQ(doc["measurements"].size(), order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Json& m = doc["measurements"][i];
      EXPECT_EQ(m["field"], order[i]);
      for (const auto& v : m["values"]) from_doc[m["field"]].emplace_back(v["time"], v["value"]);
    }
    EXPECT_EQ(from_doc, from_input);
    EXPECT_EQ(canonical::canonicalize(doc).count(), 1 + order.size() + 2 * in.size());
  }
}

TEST(Transcoder, Csv) {
  auto rows = transcoder::parse_csv(
      "device_id,field,value,time\r\n"
      "monitor-1,temperature,30C,1658162155\r\n"
      "\n"
      "monitor-1,\"note, with comma\",\"say \"\"hi\"\"\",1658162156\n");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (RawReading{"monitor-1", "temperature", "30C", 1658162155}));
  EXPECT_EQ(rows[1], (RawReading{"monitor-1", "note, with comma", "say \"hi\"", 1658162156}));

  for (const char* bad : {"device,field,value,time\n", "device_id,field,value,time\na,b,c\n",
                          "device_id,field,value,time\na,b,c,notatime\n", "device_id,field,value,time\na,b,\"c,1\n",
                          "device_id,field,value,time\na,b,c,-5\n"})
    EXPECT_EQ(code_of([&] { transcoder::parse_csv(bad); }), Errc::MalformedInputFile) << bad;
}

TEST(Transcoder, JsonLines) {
  auto rows = transcoder::parse_jsonl(
      R"({"device_id":"monitor-1","field":"temperature","value":"30C","time":1658162155})"
      "\n\n"
      R"({"device_id":"monitor-1","field":"humidity","value":"50","time":"1658162155"})");
  EXPECT_EQ(rows, harness::demo_readings());
  for (const char* bad : {"[1]", R"({"device_id":"a","field":"b","value":1,"time":1})",
                          R"({"device_id":"a","field":"b","value":"c"})", R"({"device_id":"a","field":"b","value":"c","time":0})"})
    EXPECT_EQ(code_of([&] { transcoder::parse_jsonl(bad); }), Errc::MalformedInputFile) << bad;
}

TEST(Transcoder, KeyFiles) {
  auto dir = fs::temp_directory_path() / ("ss-key-" + hex_encode(random_bytes(6)));
  fs::create_directories(dir);
  auto key = bbs::keygen();
  transcoder::save_key_file(dir / "k.json", key);
  auto back = transcoder::load_key_file(dir / "k.json");
  EXPECT_EQ(back.public_key, key.public_key);
  EXPECT_EQ(back.key_id, key.key_id);
  Json j = transcoder::key_to_json(key);
  j["publicKey"] = base64url_encode(bbs::public_key_to_bytes(bbs::keygen().public_key));
  EXPECT_EQ(code_of([&] { transcoder::key_from_json(j); }), Errc::MalformedKey);
  EXPECT_EQ(code_of([] { transcoder::key_from_json(Json{{"secretKey", "AAAA"}}); }), Errc::MalformedKey);
  fs::remove_all(dir);
}

TEST(Transcoder, SignFailsOnUnsignableDocuments) {
  EXPECT_EQ(code_of([] { transcoder::sign(Json{{"x", 1}}, bbs::keygen()); }), Errc::SigningFailed);
}

class Upload : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.upload_key = "up";
    store.register_signer(key.key_id, key.public_key, "owner-1");
    storage::mount_routes(host.server(), store, cfg);
    host.start();
  }
  storage::GatewayConfig cfg;
  storage::DocumentStore store;
  bbs::KeyPair key = bbs::keygen();
  testsupport::Loopback host;
};

TEST_F(Upload, ReceiptCountsCanonicalMessages) {
  Json doc = transcoder::transcode(harness::demo_readings());
  auto receipt = transcoder::sign_and_upload(doc, key, host.url(), "up");
  EXPECT_EQ(receipt.device_id, "monitor-1");
  EXPECT_EQ(receipt.canonical_count, testsupport::oracle_leaves(doc).size());
  EXPECT_EQ(receipt.canonical_count, 7u);
  EXPECT_EQ(store.get_latest("monitor-1").stored_at, receipt.stored_at);
}

TEST_F(Upload, Failures) {
  Json doc = transcoder::transcode(harness::demo_readings());
  auto sd = transcoder::sign(doc, key);
  sd.doc["measurements"][0]["values"][0]["value"] = "31C";
  EXPECT_EQ(code_of([&] { transcoder::upload(sd, host.url(), "up"); }), Errc::BadSignature);
  EXPECT_EQ(code_of([&] { transcoder::sign_and_upload(doc, bbs::keygen(), host.url(), "up"); }), Errc::UnknownSigner);
  EXPECT_EQ(code_of([&] { transcoder::sign_and_upload(doc, key, host.url(), "wrong"); }), Errc::UploadFailed);

  EXPECT_EQ(code_of([&] { transcoder::sign_and_upload(doc, key, "http://127.0.0.1:1", "up"); }), Errc::UploadFailed);
}
