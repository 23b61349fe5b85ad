#include <cmath>
#include <limits>
#include <set>

#include <gtest/gtest.h>

#include "selectshare/canonical.hpp"
#include "selectshare/error.hpp"
#include "selectshare/harness.hpp"
#include "selectshare/transcoder.hpp"
#include "test_support.hpp"

using namespace selectshare;
using canonical::Json;
using canonical::JsonPath;

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

const char* kDemoDoc = R"({
  "deviceID": "monitor-1",
  "measurements": [
    {"field": "temperature", "values": [{"time": "1658162155", "value": "30C"}]},
    {"field": "humidity", "values": [{"time": "1658162155", "value": "50"}]}
  ]
})";

}  // namespace

TEST(Canonical, DemoDocumentHasSevenMessages) {
  auto form = canonical::canonicalize_text(kDemoDoc);
  std::vector<std::string> expected = {
      R"("deviceID"="monitor-1")",
      R"("measurements"[0]"field"="temperature")",
      R"("measurements"[0]"values"[0]"time"="1658162155")",
      R"("measurements"[0]"values"[0]"value"="30C")",
      R"("measurements"[1]"field"="humidity")",
      R"("measurements"[1]"values"[0]"time"="1658162155")",
      R"("measurements"[1]"values"[0]"value"="50")",
  };
  EXPECT_EQ(form.encodings(), expected);
}

TEST(Canonical, TranscodedDemoMatchesHandWrittenDocument) {
  auto doc = transcoder::transcode(harness::demo_readings());
  EXPECT_EQ(canonical::canonicalize(doc).encodings(), canonical::canonicalize_text(kDemoDoc).encodings());
}

TEST(Canonical, CountMatchesOracleOnRandomDocuments) {
  testsupport::Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    Json doc = testsupport::random_document(rng);
    auto form = canonical::canonicalize(doc);
    auto oracle = testsupport::oracle_leaves(doc);
    ASSERT_EQ(form.count(), oracle.size()) << doc.dump();

    std::map<std::string, Json> expected(oracle.begin(), oracle.end());
    ASSERT_EQ(expected.size(), oracle.size());
    for (const auto& m : form.messages) {
      auto it = expected.find(testsupport::oracle_path(m.path));
      ASSERT_NE(it, expected.end()) << m.encoding;
      EXPECT_EQ(it->second, m.value) << m.encoding;
    }
  }
}

TEST(Canonical, OutputIsSortedUniqueAndDecodes) {
  testsupport::Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    Json doc = testsupport::random_document(rng);
    auto form = canonical::canonicalize(doc);
    for (std::size_t j = 0; j < form.count(); ++j) {
      if (j) ASSERT_LT(form.messages[j - 1].path, form.messages[j].path);
      auto [path, value] = canonical::decode_message(form.messages[j].encoding);
      EXPECT_EQ(path, form.messages[j].path);
      EXPECT_EQ(canonical::encode_message(path, value), form.messages[j].encoding);
    }
  }
}

TEST(Canonical, DistinctDocumentsGiveDistinctMessageSets) {
  testsupport::Rng rng(13);
  std::map<std::vector<std::string>, std::string> seen;
  for (int i = 0; i < 2000; ++i) {
    Json doc = testsupport::random_document(rng, 3);
    if (doc.empty()) continue;  // {} and [] both have no messages
    std::string rendered = canonical::render_document(doc);
    auto enc = canonical::canonicalize(doc).encodings();
    auto [it, fresh] = seen.emplace(enc, rendered);
    if (!fresh) EXPECT_EQ(it->second, rendered) << "two documents share a canonical form";
  }
}

TEST(Canonical, WhitespaceAndKeyOrderDoNotMatter) {
  auto a = canonical::canonicalize_text(R"({"b":[1,2,{"c":null}],"a":"x"})");
  auto b = canonical::canonicalize_text("{ \"a\" : \"x\",\n \"b\" : [ 1 , 2 , { \"c\" : null } ] }");
  EXPECT_EQ(a.encodings(), b.encodings());
}

TEST(Canonical, Numbers) {
  auto enc = [](const Json& v) { return canonical::encode_message(JsonPath{}.child("n"), v); };
  EXPECT_EQ(enc(1), R"("n"=1)");
  EXPECT_EQ(enc(1.0), R"("n"=1)");
  EXPECT_EQ(enc(-0.0), R"("n"=0)");
  EXPECT_EQ(enc(0.1), R"("n"=0.1)");
  EXPECT_EQ(enc(-2.5), R"("n"=-2.5)");
  EXPECT_EQ(enc(1e300), R"("n"=1e+300)");
  EXPECT_EQ(enc(std::numeric_limits<std::uint64_t>::max()), R"("n"=18446744073709551615)");
  EXPECT_EQ(enc(std::numeric_limits<std::int64_t>::min()), R"("n"=-9223372036854775808)");
  EXPECT_EQ(code_of([&] { enc(std::nan("")); }), Errc::NonFiniteNumber);
  EXPECT_EQ(code_of([&] { enc(std::numeric_limits<double>::infinity()); }), Errc::NonFiniteNumber);
}

TEST(Canonical, KeysAreQuotedAndEscaped) {
  JsonPath p = JsonPath{}.child("a\"b").child(std::size_t{3}).child("c\\d").child("[0]=");
  std::string e = canonical::encode_message(p, "v");
  EXPECT_EQ(e, R"("a\"b"[3]"c\\d""[0]="="v")");
  auto [back, value] = canonical::decode_message(e);
  EXPECT_EQ(back, p);
  EXPECT_EQ(value, "v");
}

TEST(Canonical, StringValuesUseJsonEscapes) {
  std::string e = canonical::encode_message(JsonPath{}.child("s"), "q\"\\\n\x01\xc3\xa9");
  EXPECT_EQ(e, "\"s\"=\"q\\\"\\\\\\n\\u0001\xc3\xa9\"");
}

TEST(Canonical, EmptyContainersAreTagged) {
  auto form = canonical::canonicalize_text(R"({"a":{},"b":[],"c":[[]]})");
  std::vector<std::string> expected = {R"("a"={})", R"("b"=[])", R"("c"[0]=[])"};
  EXPECT_EQ(form.encodings(), expected);
  EXPECT_EQ(canonical::canonicalize(Json::object()).count(), 0u);
  EXPECT_EQ(canonical::canonicalize(Json::array()).count(), 0u);
}

TEST(Canonical, Errors) {
  EXPECT_EQ(code_of([] { canonical::canonicalize_text(R"({"a":1,"a":2})"); }), Errc::DuplicateKey);
  EXPECT_EQ(code_of([] { canonical::canonicalize_text(R"({"x":{"a":1,"b":{"a":2},"a":3}})"); }), Errc::DuplicateKey);
  EXPECT_EQ(code_of([] { canonical::canonicalize_text("42"); }), Errc::NotAContainer);
  EXPECT_EQ(code_of([] { canonical::canonicalize(Json("text")); }), Errc::NotAContainer);
  EXPECT_EQ(code_of([] { canonical::canonicalize_text(R"({"":1})"); }), Errc::MalformedInput);
  EXPECT_EQ(code_of([] { canonical::canonicalize_text("{bad"); }), Errc::MalformedInput);

  std::string deep;
  for (int i = 0; i < 70; ++i) deep += "[";
  for (int i = 0; i < 70; ++i) deep += "]";
  EXPECT_EQ(code_of([&] { canonical::canonicalize_text(deep); }), Errc::DepthExceeded);
  EXPECT_EQ(canonical::canonicalize_text(deep, {.max_depth = 80}).count(), 1u);
}

TEST(Canonical, SameKeyInSiblingObjectsIsNotDuplicate) {
  EXPECT_EQ(canonical::canonicalize_text(R"([{"a":1},{"a":2}])").count(), 2u);
}

TEST(Canonical, DecodeRejectsMalformedAndNonCanonical) {
  for (const char* bad : {"", "=1", R"("a")", R"("a"=)", R"("a"=1.0)", R"("a"=01)", R"("a"[01]=1)", R"("a"[]=1)",
                          R"("a"[1=1)", R"("a=1)", R"(""=1)", R"(a=1)", R"("a"={"b":1})", R"("a"=[1])",
                          R"("a"= 1)", R"("a"="\u0041")", R"("a\x"=1)", R"("a"=-0)"}) {
    EXPECT_EQ(code_of([&] { canonical::decode_message(bad); }), Errc::MalformedMessage) << bad;
  }
}

TEST(Canonical, RenderDocumentSortsKeysCompactly) {
  Json doc = Json::parse(R"({"z":1,"a":[true,null,{"y":"s","b":2.50}]})");
  EXPECT_EQ(canonical::render_document(doc), R"({"a":[true,null,{"b":2.5,"y":"s"}],"z":1})");
}

TEST(Canonical, LeavesRoundTrip) {
  testsupport::Rng rng(14);
  for (int i = 0; i < 200; ++i) {
    Json doc = testsupport::random_document(rng);
    auto form = canonical::canonicalize(doc);
    std::vector<std::pair<JsonPath, Json>> leaves;
    for (const auto& m : form.messages) leaves.emplace_back(m.path, m.value);
    std::shuffle(leaves.begin(), leaves.end(), rng);
    EXPECT_EQ(canonical::canonicalize_leaves(leaves).encodings(), form.encodings());
  }
  std::vector<std::pair<JsonPath, Json>> dup{{JsonPath{}.child("a"), 1}, {JsonPath{}.child("a"), 2}};
  EXPECT_EQ(code_of([&] { canonical::canonicalize_leaves(dup); }), Errc::MalformedInput);
}
