#pragma once

// Benchmark and end-to-end scenario runner.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "selectshare/bbs.hpp"
#include "selectshare/transcoder.hpp"

namespace selectshare::harness {

using Json = nlohmann::json;

/// Measurement document with `n_fields` distinct fields, one (time, value)
/// pair each. Same seed, same document.
Json gen_doc(std::size_t n_fields, std::uint64_t seed = 1, const std::string& device_id = "bench-device");

/// Names of the fields in a gen_doc document, in order.
std::vector<std::string> field_names(const Json& doc);

struct BenchRecord {
  std::size_t revealed_count = 0;  ///< fields requested (each reveals its name and value)
  double prove_ms = 0;             ///< median
  double verify_ms = 0;            ///< median
  std::size_t proof_bytes = 0;
  /// Medians after scaling each sample by how fast a fixed reference workload
  /// ran just before it, relative to the whole run. Cancels host speed drift.
  double prove_adj_ms = 0;
  double verify_adj_ms = 0;
};

/// For each k, reveals the first k fields of `doc` and times derive_proof and
/// verify_proof in thread CPU time. Repetitions run round-robin over k, so
/// neighbouring k are always timed close together.
std::vector<BenchRecord> run_bench(const Json& doc, const bbs::KeyPair& key,
                                   const std::vector<std::size_t>& revealed_counts, std::size_t repetitions);

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records);
/// {"revealed": [...], "prove_ms": [...], "verify_ms": [...], "proof_bytes": [...], "prove_adj_ms": [...], "verify_adj_ms": [...]}
Json to_series(const std::vector<BenchRecord>& records);

/// The two readings of the demo device (temperature and humidity of monitor-1).
std::vector<transcoder::RawReading> demo_readings();
/// What a temperature-only request on the demo document must display.
Json demo_expected_display();

struct E2EOptions {
  std::string owner_id = "owner-1";
  std::string device_id = "monitor-1";
  std::string client_id = "client-1";
  std::string client_secret = "client-1-secret";
  std::string issuer_uri = "https://issuer.com";
  std::int64_t start_time = 1617559370;
  std::int64_t vc_lifetime_seconds = 864000;
  std::string host = "127.0.0.1";

  static E2EOptions from_json(const Json& j);
};

struct E2EStep {
  std::string name;
  bool ok = false;
  std::string detail;
};

struct E2EReport {
  std::vector<E2EStep> steps;
  double elapsed_ms = 0;

  bool ok() const;
  const E2EStep* find(const std::string& name) const;
  Json to_json() const;
};

/// Starts issuer, gateway and proxy on loopback ports inside this process and
/// walks setup, issuance, upload, an authorized request and the negative cases.
E2EReport run_e2e(const E2EOptions& options = {});

}  // namespace selectshare::harness
