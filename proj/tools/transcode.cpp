// Owner-side transcoder: readings in, signed measurement document out.

#include <iostream>

#include <CLI11.hpp>

#include "selectshare/error.hpp"
#include "selectshare/transcoder.hpp"
#include "support.hpp"

using namespace selectshare;

int main(int argc, char** argv) {
  CLI::App app{"Transcode device readings, sign them and upload to the store"};

  std::string input, format = "csv", key_path, store_url, api_key;
  bool dry_run = false;
  app.add_option("--input", input, "Readings file")->check(CLI::ExistingFile);
  app.add_option("--format", format, "Input format")->check(CLI::IsMember({"csv", "jsonl"}));
  app.add_option("--key", key_path, "BBS key file");
  app.add_option("--store-url", store_url, "Storage node base URL");
  app.add_option("--api-key", api_key, "X-Api-Key for uploads")->envname("TRANSCODER_API_KEY");
  app.add_flag("--dry-run", dry_run, "Print the signed document instead of uploading");

  auto* keygen = app.add_subcommand("keygen", "Create a new key file");
  std::string keygen_out;
  keygen->add_option("--out", keygen_out, "Where to write the key file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*keygen) {
      auto key = bbs::keygen();
      transcoder::save_key_file(keygen_out, key);
      std::cout << transcoder::key_to_json(key).value("publicKey", "") << "  " << key.key_id << "\n";
      return 0;
    }
    if (input.empty() || key_path.empty()) throw Error(Errc::Config, "--input and --key are required");
    if (!dry_run && store_url.empty()) throw Error(Errc::Config, "--store-url is required unless --dry-run");

    std::string text = support::read_file(input);
    auto readings = format == "csv" ? transcoder::parse_csv(text) : transcoder::parse_jsonl(text);
    auto key = transcoder::load_key_file(key_path);
    auto doc = transcoder::transcode(readings);
    auto signed_doc = transcoder::sign(doc, key);
    if (dry_run) {
      std::cout << signed_doc.to_json().dump(2) << "\n";
      return 0;
    }
    auto receipt = transcoder::upload(signed_doc, store_url, api_key);
    std::cout << nlohmann::json{{"deviceID", receipt.device_id},
                                {"storedAt", receipt.stored_at},
                                {"canonicalCount", receipt.canonical_count}}
                     .dump()
              << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "transcode: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "transcode: " << e.what() << "\n";
    return 1;
  }
}
