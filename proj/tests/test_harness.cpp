#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "selectshare/canonical.hpp"
#include "selectshare/error.hpp"
#include "selectshare/harness.hpp"
#include "test_support.hpp"

using namespace selectshare;
using harness::Json;

TEST(Harness, GeneratedDocumentShape) {
  Json doc = harness::gen_doc(100);
  EXPECT_EQ(testsupport::oracle_leaves(doc).size(), 301u);
  EXPECT_EQ(canonical::canonicalize(doc).count(), 301u);
  EXPECT_EQ(doc["deviceID"], "bench-device");

  auto names = harness::field_names(doc);
  ASSERT_EQ(names.size(), 100u);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), 100u);
  EXPECT_EQ(names.front(), "field-000");

  Json one = harness::gen_doc(1, 5, "d");
  EXPECT_EQ(one["measurements"].size(), 1u);
  EXPECT_EQ(testsupport::oracle_leaves(one).size(), 4u);
  EXPECT_THROW(harness::gen_doc(0), Error);
}

TEST(Harness, SameSeedSameDocument) {
  EXPECT_EQ(harness::gen_doc(20, 9), harness::gen_doc(20, 9));
  EXPECT_NE(harness::gen_doc(20, 9), harness::gen_doc(20, 10));
}

TEST(Harness, BenchOnSmallCounts) {
  Json doc = harness::gen_doc(12);
  auto key = bbs::keygen();
  auto recs = harness::run_bench(doc, key, {1, 4, 8, 11}, 3);
  ASSERT_EQ(recs.size(), 4u);
  std::size_t total = 1 + 3 * 12;
  for (const auto& r : recs) {
    // each requested field reveals its name and value; time stays hidden
    std::size_t hidden = total - 2 * r.revealed_count;
    EXPECT_EQ(r.proof_bytes, 272 + 32 * hidden);
    EXPECT_GT(r.prove_ms, 0);
    EXPECT_GT(r.verify_ms, 0);
    EXPECT_GT(r.prove_adj_ms, 0);
    EXPECT_GT(r.verify_adj_ms, 0);
  }
  for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_LT(recs[i].proof_bytes, recs[i - 1].proof_bytes);

  EXPECT_THROW(harness::run_bench(doc, key, {13}, 1), Error);
  EXPECT_THROW(harness::run_bench(doc, key, {0}, 1), Error);
  EXPECT_THROW(harness::run_bench(doc, key, {1}, 0), Error);

  std::ostringstream csv;
  harness::write_csv(csv, recs);
  std::string text = csv.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "revealed_count,prove_ms,verify_ms,proof_bytes,prove_adj_ms,verify_adj_ms");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);

  Json series = harness::to_series(recs);
  EXPECT_EQ(series["revealed"], Json::array({1, 4, 8, 11}));
  EXPECT_EQ(series["proof_bytes"].size(), 4u);
  EXPECT_EQ(series["prove_adj_ms"].size(), 4u);
}

TEST(Harness, EndToEnd) {
  auto report = harness::run_e2e();
  for (const auto& s : report.steps) EXPECT_TRUE(s.ok) << s.name << ": " << s.detail;
  EXPECT_TRUE(report.ok());
  for (const char* name : {"setup", "issue", "upload", "authorized_request", "wrong_field", "unknown_device",
                           "missing_credential", "replayed_dpop", "dpop_method_mismatch", "dpop_uri_mismatch",
                           "expired", "revoked"})
    EXPECT_NE(report.find(name), nullptr) << name;
  EXPECT_EQ(report.to_json()["steps"].size(), report.steps.size());
}

TEST(Harness, E2EOptions) {
  auto o = harness::E2EOptions::from_json(Json{{"device_id", "m"}, {"start_time", 5}});
  EXPECT_EQ(o.device_id, "m");
  EXPECT_EQ(o.start_time, 5);
  EXPECT_EQ(o.owner_id, "owner-1");
  EXPECT_THROW(harness::E2EOptions::from_json(Json::array()), Error);
  EXPECT_THROW(harness::E2EOptions::from_json(Json{{"start_time", "x"}}), Error);
}
