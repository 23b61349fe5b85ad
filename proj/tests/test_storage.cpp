#include <filesystem>
#include <fstream>

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
using storage::DocumentStore;
using storage::Json;
using storage::SignedDocument;

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

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ss-store-" + hex_encode(random_bytes(6)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Json demo_doc() { return transcoder::transcode(harness::demo_readings()); }

Json doc_with(const std::string& device, const std::string& value) {
  return Json{{"deviceID", device},
              {"measurements", {{{"field", "temperature"}, {"values", {{{"time", "1"}, {"value", value}}}}}}}};
}

}  // namespace

TEST(Storage, SigningMessagesAreTheCanonicalEncodings) {
  auto msgs = storage::signing_messages(demo_doc());
  auto enc = canonical::canonicalize(demo_doc()).encodings();
  ASSERT_EQ(msgs.size(), 7u);
  for (std::size_t i = 0; i < enc.size(); ++i) EXPECT_EQ(to_string(msgs[i]), enc[i]);
}

TEST(Storage, SignedDocumentJsonRoundTrip) {
  auto key = bbs::keygen();
  auto sd = storage::sign_document(demo_doc(), key);
  EXPECT_EQ(sd.device_id(), "monitor-1");
  EXPECT_EQ(sd.signer_key_id, key.key_id);
  EXPECT_EQ(sd.canonical_count, 7u);
  auto back = SignedDocument::from_json(sd.to_json());
  EXPECT_EQ(back.doc, sd.doc);
  EXPECT_EQ(back.signature.bytes, sd.signature.bytes);
  EXPECT_EQ(back.signer_key_id, sd.signer_key_id);
  EXPECT_EQ(code_of([] { SignedDocument::from_json(Json::object()); }), Errc::MalformedInput);
  EXPECT_EQ(code_of([&] { storage::sign_document(Json{{"x", 1}}, key); }), Errc::MalformedInput);
  EXPECT_EQ(code_of([&] { storage::sign_document(Json{{"deviceID", ""}}, key); }), Errc::MalformedInput);
}

TEST(Storage, PutAndGet) {
  DocumentStore store;
  auto key = bbs::keygen();
  store.register_signer(key.key_id, key.public_key, "owner-1");
  EXPECT_EQ(code_of([&] { store.get_latest("monitor-1"); }), Errc::NotFound);

  auto first = store.put(storage::sign_document(doc_with("monitor-1", "1"), key));
  auto second = store.put(storage::sign_document(doc_with("monitor-1", "2"), key));
  EXPECT_LT(first.stored_at, second.stored_at);
  EXPECT_EQ(store.get_latest("monitor-1").doc, doc_with("monitor-1", "2"));

  auto all = store.query("monitor-1", INT64_MIN, INT64_MAX);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].doc, doc_with("monitor-1", "1"));
  EXPECT_EQ(store.query("monitor-1", second.stored_at, second.stored_at).size(), 1u);
  EXPECT_TRUE(store.query("monitor-1", 0, first.stored_at - 1).empty());
  EXPECT_EQ(code_of([&] { store.query("ghost", 0, 1); }), Errc::NotFound);
}

TEST(Storage, RejectsBadUploads) {
  DocumentStore store;
  auto key = bbs::keygen(), stranger = bbs::keygen(), other_owner = bbs::keygen();
  store.register_signer(key.key_id, key.public_key, "owner-1");
  store.register_signer(other_owner.key_id, other_owner.public_key, "owner-2");

  EXPECT_EQ(code_of([&] { store.put(storage::sign_document(demo_doc(), stranger)); }), Errc::UnknownSigner);

  auto sd = storage::sign_document(demo_doc(), key);
  sd.doc["measurements"][0]["values"][0]["value"] = "99C";
  EXPECT_EQ(code_of([&] { store.put(sd); }), Errc::BadSignature);

  // a registered key claiming to be another signer
  auto lying = storage::sign_document(demo_doc(), stranger);
  lying.signer_key_id = key.key_id;
  EXPECT_EQ(code_of([&] { store.put(lying); }), Errc::BadSignature);

  // device already belongs to owner-1; owner-2's signer may not write to it
  store.put(storage::sign_document(demo_doc(), key));
  EXPECT_EQ(code_of([&] { store.put(storage::sign_document(demo_doc(), other_owner)); }), Errc::UnknownSigner);
  EXPECT_EQ(store.query("monitor-1", INT64_MIN, INT64_MAX).size(), 1u);
}

TEST(Storage, DevicesAndThingDescriptions) {
  DocumentStore store;
  store.register_device("b-device", "owner-1", "Second");
  store.register_device("a-device", "owner-1");
  EXPECT_NO_THROW(store.register_device("a-device", "owner-1"));
  EXPECT_EQ(code_of([&] { store.register_device("a-device", "owner-2"); }), Errc::Unauthorized);
  EXPECT_EQ(store.list_things(), (std::vector<std::string>{"a-device", "b-device"}));
  EXPECT_TRUE(store.has_device("a-device"));
  EXPECT_FALSE(store.has_device("c-device"));

  Json td = store.thing_description("b-device", "https://proxy.example");
  EXPECT_EQ(td["@context"], "https://www.w3.org/2019/wot/td/v1");
  EXPECT_EQ(td["id"], "b-device");
  EXPECT_EQ(td["title"], "Second");
  EXPECT_EQ(td["actions"]["readMeasurements"]["forms"][0]["href"], "https://proxy.example/data?deviceID=b-device");
  EXPECT_EQ(code_of([&] { store.thing_description("zzz", ""); }), Errc::NotFound);
}

TEST(Storage, PersistsAcrossRestartAndDetectsCorruption) {
  TempDir dir;
  auto key = bbs::keygen();
  std::int64_t at = 0;
  {
    DocumentStore store(dir.path);
    store.register_signer(key.key_id, key.public_key, "owner-1");
    at = store.put(storage::sign_document(demo_doc(), key)).stored_at;
  }
  DocumentStore reopened(dir.path);
  EXPECT_EQ(reopened.get_latest("monitor-1").doc, demo_doc());
  EXPECT_EQ(reopened.list_things(), (std::vector<std::string>{"monitor-1"}));

  // edit the stored document on disk: reads must now fail rather than serve it
  fs::path entry;
  for (const auto& e : fs::recursive_directory_iterator(dir.path))
    if (e.path().filename() == std::to_string(at) + ".json") entry = e.path();
  ASSERT_FALSE(entry.empty());
  std::ifstream in(entry);
  Json record = Json::parse(in);
  in.close();
  record["doc"]["measurements"][1]["values"][0]["value"] = "51";
  std::ofstream(entry) << record.dump();
  EXPECT_EQ(code_of([&] { reopened.get_latest("monitor-1"); }), Errc::BadSignature);

  std::ofstream(entry) << "{not json";
  EXPECT_EQ(code_of([&] { reopened.get_latest("monitor-1"); }), Errc::BadSignature);
}

TEST(Storage, AppendOnly) {
  DocumentStore store;
  auto key = bbs::keygen();
  store.register_signer(key.key_id, key.public_key, "owner-1");
  std::vector<std::int64_t> stamps;
  for (int i = 0; i < 20; ++i) stamps.push_back(store.put(storage::sign_document(doc_with("d", std::to_string(i)), key)).stored_at);
  EXPECT_TRUE(std::is_sorted(stamps.begin(), stamps.end()));
  EXPECT_EQ(std::adjacent_find(stamps.begin(), stamps.end()), stamps.end());
  auto all = store.query("d", INT64_MIN, INT64_MAX);
  ASSERT_EQ(all.size(), 20u);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(all[i].doc, doc_with("d", std::to_string(i)));
}

// --- HTTP ---------------------------------------------------------------------------

class GatewayHttp : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg.upload_key = "up";
    cfg.read_key = "rd";
    cfg.admin_key = "adm";
    cfg.public_base_url = "https://proxy.example";
    storage::mount_routes(host.server(), store, cfg);
    host.start();
  }

  httplib::Headers h(const char* name, const char* v) { return {{name, v}}; }

  storage::GatewayConfig cfg;
  DocumentStore store;
  bbs::KeyPair key = bbs::keygen();
  testsupport::Loopback host;
};

TEST_F(GatewayHttp, UploadAndRead) {
  auto c = host.client();
  Json signer{{"publicKey", base64url_encode(bbs::public_key_to_bytes(key.public_key))}, {"ownerId", "owner-1"}};
  EXPECT_EQ(c.Post("/admin/signers", h("X-Admin-Key", "bad"), signer.dump(), "application/json")->status, 401);
  auto r = c.Post("/admin/signers", h("X-Admin-Key", "adm"), signer.dump(), "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(Json::parse(r->body)["keyId"], key.key_id);

  auto sd = storage::sign_document(demo_doc(), key);
  EXPECT_EQ(c.Post("/store/monitor-1", sd.to_json().dump(), "application/json")->status, 401);
  r = c.Post("/store/monitor-1", h("X-Api-Key", "up"), sd.to_json().dump(), "application/json");
  ASSERT_EQ(r->status, 201);
  EXPECT_EQ(Json::parse(r->body)["canonicalCount"], 7);
  EXPECT_EQ(c.Post("/store/monitor-2", h("X-Api-Key", "up"), sd.to_json().dump(), "application/json")->status, 400);

  EXPECT_EQ(c.Get("/store/monitor-1/latest")->status, 401);
  r = c.Get("/store/monitor-1/latest", h("X-Api-Key", "rd"));
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(Json::parse(r->body)["doc"], demo_doc());
  r = c.Post("/data?deviceID=monitor-1", h("X-Api-Key", "rd"), "{}", "application/json");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(Json::parse(r->body)["signerKeyId"], key.key_id);
  EXPECT_EQ(c.Post("/data?deviceID=ghost", h("X-Api-Key", "rd"), "{}", "application/json")->status, 404);
  EXPECT_EQ(c.Get("/store/monitor-1?from=abc", h("X-Api-Key", "rd"))->status, 400);
  r = c.Get("/store/monitor-1?from=0", h("X-Api-Key", "rd"));
  EXPECT_EQ(Json::parse(r->body).size(), 1u);

  EXPECT_EQ(Json::parse(c.Get("/things")->body), Json::array({"monitor-1"}));
  EXPECT_EQ(Json::parse(c.Get("/things/monitor-1")->body)["id"], "monitor-1");
  EXPECT_EQ(c.Get("/things/ghost")->status, 404);
  r = c.Get("/keys/" + key.key_id);
  EXPECT_EQ(bbs::public_key_from_bytes(base64url_decode(Json::parse(r->body)["publicKey"].get<std::string>())),
            key.public_key);
  EXPECT_EQ(c.Get("/keys/nope")->status, 404);
}

TEST_F(GatewayHttp, RejectionsCarryReasons) {
  auto c = host.client();
  auto sd = storage::sign_document(demo_doc(), key);
  auto r = c.Post("/store/monitor-1", h("X-Api-Key", "up"), sd.to_json().dump(), "application/json");
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(Json::parse(r->body)["reason"], "UnknownSigner");

  store.register_signer(key.key_id, key.public_key, "owner-1");
  Json tampered = sd.to_json();
  tampered["doc"]["deviceID"] = "monitor-1";
  tampered["doc"]["measurements"][0]["field"] = "humidity";
  r = c.Post("/store/monitor-1", h("X-Api-Key", "up"), tampered.dump(), "application/json");
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(Json::parse(r->body)["reason"], "BadSignature");

  std::string dup = R"({"doc":{"deviceID":"monitor-1","deviceID":"x"},"signature":"AA","signerKeyId":"k"})";
  r = c.Post("/store/monitor-1", h("X-Api-Key", "up"), dup, "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(Json::parse(r->body)["reason"], "DuplicateKey");
}
