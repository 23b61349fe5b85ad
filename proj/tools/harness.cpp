// Benchmark sweep and end-to-end scenario runner.

#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>

#include "selectshare/error.hpp"
#include "selectshare/harness.hpp"
#include "support.hpp"

using namespace selectshare;

int main(int argc, char** argv) {
  CLI::App app{"Benchmarks and end-to-end checks"};
  app.require_subcommand(1);

  auto* bench = app.add_subcommand("bench", "Proof time and size against the number of revealed fields");
  std::size_t fields = 100, reps = 20;
  std::uint64_t seed = 1;
  std::string out_csv, out_json;
  bench->add_option("--fields", fields, "Fields in the generated document")->check(CLI::Range(2, 1000));
  bench->add_option("--reps", reps, "Repetitions per revealed count")->check(CLI::Range(1, 10000));
  bench->add_option("--seed", seed, "Document generator seed");
  bench->add_option("--out", out_csv, "CSV output path (stdout when omitted)");
  bench->add_option("--json", out_json, "Plot-ready JSON series output path");

  auto* e2e = app.add_subcommand("e2e", "Run the full flow against in-process services");
  std::string config;
  e2e->add_option("--config", config, "JSON options file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench) {
      auto doc = harness::gen_doc(fields, seed);
      std::vector<std::size_t> counts(fields - 1);
      std::iota(counts.begin(), counts.end(), 1);
      auto records = harness::run_bench(doc, bbs::keygen(), counts, reps);
      if (out_csv.empty()) {
        harness::write_csv(std::cout, records);
      } else {
        std::ofstream f(out_csv);
        harness::write_csv(f, records);
        if (!f) throw Error(Errc::Io, "cannot write " + out_csv);
      }
      if (!out_json.empty()) support::atomic_write(out_json, harness::to_series(records).dump(2) + "\n");
      return 0;
    }
    harness::E2EOptions opts;
    if (!config.empty()) opts = harness::E2EOptions::from_json(nlohmann::json::parse(support::read_file(config)));
    auto report = harness::run_e2e(opts);
    for (const auto& s : report.steps) std::cout << (s.ok ? "ok   " : "FAIL ") << s.name << "  " << s.detail << "\n";
    std::cout << (report.ok() ? "e2e passed" : "e2e failed") << " in " << report.elapsed_ms << " ms\n";
    return report.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "harness: " << e.what() << "\n";
    return 2;
  }
}
