#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "selectshare/canonical.hpp"
#include "selectshare/error.hpp"
#include "selectshare/framing.hpp"
#include "selectshare/harness.hpp"
#include "selectshare/transcoder.hpp"
#include "test_support.hpp"

using namespace selectshare;
using canonical::Json;
using canonical::JsonPath;
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

std::set<std::string> revealed_encodings(const framing::SparseSubItem& sub) {
  std::set<std::string> out;
  for (const auto& [p, v] : sub.revealed) out.insert(canonical::encode_message(p, v));
  return out;
}

// Written by hand from the document layout, not from the frame machinery.
std::set<std::string> expected_for_fields(const Json& doc, const std::set<std::string>& fields) {
  std::set<std::string> out;
  const Json& ms = doc["measurements"];
  for (std::size_t i = 0; i < ms.size(); ++i) {
    std::string f = ms[i]["field"];
    if (!fields.count(f)) continue;
    std::string prefix = "\"measurements\"[" + std::to_string(i) + "]";
    out.insert(prefix + "\"field\"=\"" + f + "\"");
    const Json& vs = ms[i]["values"];
    for (std::size_t j = 0; j < vs.size(); ++j)
      out.insert(prefix + "\"values\"[" + std::to_string(j) + "]\"value\"=\"" + vs[j]["value"].get<std::string>() +
                 "\"");
  }
  return out;
}

Json demo_doc() { return transcoder::transcode(harness::demo_readings()); }


}  // namespace

TEST(Framing, TemperatureRequestOnDemoDocument) {
  Json doc = demo_doc();
  auto sub = framing::apply_frame(doc, framing::frame_from_fields({"temperature"}));
  auto canon = canonical::canonicalize(doc);
  EXPECT_EQ(framing::reveal_indices(canon, sub), (std::vector<std::size_t>{1, 3}));
  auto display = framing::reconstruct(sub).display;
  EXPECT_EQ(display, harness::demo_expected_display());
  EXPECT_EQ(canonical::render_document(display),
            R"({"measurements":[{"field":"temperature","values":[{"value":"30C"}]}]})");
}

TEST(Framing, HumidityKeepsOriginalIndicesButCompactsDisplay) {
  Json doc = demo_doc();
  auto sub = framing::apply_frame(doc, framing::frame_from_fields({"humidity"}));
  EXPECT_EQ(revealed_encodings(sub), (std::set<std::string>{R"("measurements"[1]"field"="humidity")",
                                                            R"("measurements"[1]"values"[0]"value"="50")"}));
  auto r = framing::reconstruct(sub);
  EXPECT_EQ(canonical::render_document(r.display),
            R"({"measurements":[{"field":"humidity","values":[{"value":"50"}]}]})");
  ASSERT_EQ(r.positions.size(), 2u);
  EXPECT_EQ(r.positions[0].first, JsonPath{}.child("measurements").child(std::size_t{0}).child("field"));
  EXPECT_EQ(r.positions[0].second, JsonPath{}.child("measurements").child(std::size_t{1}).child("field"));
}

TEST(Framing, UnknownFieldRevealsNothing) {
  auto sub = framing::apply_frame(demo_doc(), framing::frame_from_fields({"pressure"}));
  EXPECT_TRUE(sub.empty());
  EXPECT_EQ(framing::reconstruct(sub).display, Json::object());
}

TEST(Framing, FieldSelectionMatchesHandOracle) {
  Rng rng(21);
  auto pool = testsupport::field_pool();
  pool.push_back("absent");
  for (int i = 0; i < 1000; ++i) {
    Json doc = testsupport::random_measurement_doc(rng, "dev");
    std::vector<std::string> req;
    for (const auto& f : pool)
      if (testsupport::coin(rng, 0.3)) req.push_back(f);
    if (req.empty()) req.push_back(pool[testsupport::uniform(rng, 0, pool.size() - 1)]);

    auto sub = framing::apply_frame(doc, framing::frame_from_fields(req));
    auto got = revealed_encodings(sub);
    EXPECT_EQ(got, expected_for_fields(doc, {req.begin(), req.end()})) << doc.dump();

    auto canon = canonical::canonicalize(doc);
    auto all = canon.encodings();
    for (const auto& e : got) EXPECT_NE(std::find(all.begin(), all.end(), e), all.end());
    auto idx = framing::reveal_indices(canon, sub);
    EXPECT_EQ(idx.size(), got.size());
    // nothing outside the requested fields leaks into the display
    for (const auto& m : framing::reconstruct(sub).display["measurements"])
      EXPECT_NE(std::find(req.begin(), req.end(), m["field"].get<std::string>()), req.end());
  }
}

TEST(Framing, MoreFieldsNeverRevealLess) {
  Rng rng(22);
  auto pool = testsupport::field_pool();
  for (int i = 0; i < 1000; ++i) {
    Json doc = testsupport::random_measurement_doc(rng, "dev");
    std::vector<std::string> small, big;
    for (const auto& f : pool) {
      bool in_big = testsupport::coin(rng, 0.5);
      if (in_big) big.push_back(f);
      if (in_big && testsupport::coin(rng, 0.5)) small.push_back(f);
    }
    if (small.empty()) continue;
    auto a = revealed_encodings(framing::apply_frame(doc, framing::frame_from_fields(small)));
    auto b = revealed_encodings(framing::apply_frame(doc, framing::frame_from_fields(big)));
    EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST(Framing, RandomFramesOnRandomDocumentsSelectSignedMessages) {
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    Json doc = testsupport::random_document(rng);
    if (!doc.is_object()) doc = Json{{"root", doc}};
    Json f1 = testsupport::random_frame(rng, doc, 5), f2 = testsupport::random_frame(rng, doc, 5);
    if (!f1.is_object()) f1 = Json::object();
    if (!f2.is_object()) f2 = Json::object();

    auto canon = canonical::canonicalize(doc);
    auto all = canon.encodings();
    std::set<std::string> all_set(all.begin(), all.end());

    auto s1 = revealed_encodings(framing::apply_frame(doc, framing::Frame::from_json(f1)));
    auto s2 = revealed_encodings(framing::apply_frame(doc, framing::Frame::from_json(f2)));
    auto both = framing::apply_frame(doc, framing::Frame::from_json(Json::array({f1, f2})));
    auto s12 = revealed_encodings(both);
    EXPECT_TRUE(std::includes(all_set.begin(), all_set.end(), s12.begin(), s12.end())) << doc.dump();

    std::set<std::string> uni = s1;
    uni.insert(s2.begin(), s2.end());
    EXPECT_EQ(s12, uni);

    // reconstruct and re-derive from the messages alone
    std::vector<std::pair<JsonPath, Json>> decoded;
    for (const auto& e : s12) decoded.push_back(canonical::decode_message(e));
    auto again = framing::sub_item_from_messages(decoded);
    EXPECT_EQ(framing::reconstruct(again).display, framing::reconstruct(both).display);
  }
}

TEST(Framing, ConstraintMustMatchExactly) {
  Json doc = Json::parse(R"({"a":{"k":1,"v":"x"},"b":[{"k":1.0,"v":"y"},{"k":2,"v":"z"}]})");
  auto sub = framing::apply_frame(doc, framing::Frame::from_json(Json::parse(R"({"b":{"*":{"k":1,"v":""}}})")));
  EXPECT_EQ(revealed_encodings(sub), (std::set<std::string>{R"("b"[0]"k"=1)", R"("b"[0]"v"="y")"}));

  auto none = framing::apply_frame(doc, framing::Frame::from_json(Json::parse(R"({"a":{"k":"1","v":""}})")));
  EXPECT_TRUE(none.empty());

  auto missing = framing::apply_frame(doc, framing::Frame::from_json(Json::parse(R"({"a":{"zz":1,"v":""}})")));
  EXPECT_TRUE(missing.empty());
}

TEST(Framing, RevealWholeSubtree) {
  Json doc = Json::parse(R"({"a":{"k":1,"e":{},"l":[true,null]},"b":2})");
  auto sub = framing::apply_frame(doc, framing::Frame::from_json(Json::parse(R"({"a":""})")));
  EXPECT_EQ(revealed_encodings(sub),
            (std::set<std::string>{R"("a""e"={})", R"("a""k"=1)", R"("a""l"[0]=true)", R"("a""l"[1]=null)"}));
}

TEST(Framing, ShapeErrors) {
  Json doc = demo_doc();
  auto apply = [&](const char* f) { framing::apply_frame(doc, framing::Frame::from_json(Json::parse(f))); };
  EXPECT_EQ(code_of([&] { apply(R"({"*":{}})"); }), Errc::FrameShapeMismatch);
  EXPECT_EQ(code_of([&] { apply(R"({"measurements":{"*":{},"x":""}})"); }), Errc::FrameShapeMismatch);
  EXPECT_EQ(code_of([&] { apply(R"({"measurements":[""]})"); }), Errc::FrameShapeMismatch);
  EXPECT_EQ(code_of([] { framing::Frame::from_json(Json("x")); }), Errc::FrameShapeMismatch);
  EXPECT_EQ(code_of([] { framing::Frame::from_json(Json::array({1})); }), Errc::FrameShapeMismatch);
  EXPECT_EQ(code_of([] { framing::frame_from_fields({}); }), Errc::EmptyFieldList);
  EXPECT_EQ(code_of([] { framing::frame_from_fields({""}); }), Errc::MalformedInput);
}

TEST(Framing, DuplicateFieldsCollapse) {
  auto f = framing::frame_from_fields({"temperature", "temperature"});
  EXPECT_EQ(f.alternatives().size(), 1u);
}

TEST(Framing, InconsistentPathsAreRejected) {
  JsonPath a = JsonPath{}.child("x");
  EXPECT_EQ(code_of([&] { framing::sub_item_from_messages({{a, 1}, {a, 2}}); }), Errc::InconsistentPaths);
  framing::SparseSubItem mixed{{{a.child("k"), 1}, {a.child(std::size_t{0}), 2}}};
  EXPECT_EQ(code_of([&] { framing::reconstruct(mixed); }), Errc::InconsistentPaths);
  framing::SparseSubItem nested{{{a, 1}, {a.child("k"), 2}}};
  EXPECT_EQ(code_of([&] { framing::reconstruct(nested); }), Errc::InconsistentPaths);
}

TEST(Framing, RevealIndicesRequiresSignedLeaves) {
  Json doc = demo_doc();
  auto canon = canonical::canonicalize(doc);
  framing::SparseSubItem forged{{{JsonPath{}.child("deviceID"), "monitor-2"}}};
  EXPECT_EQ(code_of([&] { framing::reveal_indices(canon, forged); }), Errc::MessageNotFound);
}
