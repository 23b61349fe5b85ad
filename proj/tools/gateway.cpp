// Storage node and WoT gateway.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "selectshare/storage.hpp"
#include "serve.hpp"
#include "support.hpp"

using namespace selectshare;

int main(int argc, char** argv) {
  CLI::App app{"Signed document store with a Web of Things gateway"};
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    auto config = storage::GatewayConfig::from_json(nlohmann::json::parse(support::read_file(config_path)));
    if (config.store_dir.empty()) std::cerr << "gateway: no store_dir, documents are kept in memory\n";
    storage::DocumentStore store(config.store_dir);
    httplib::Server server;
    storage::mount_routes(server, store, config);
    return tools::serve(server, config.listen_host, config.listen_port, "gateway");
  } catch (const std::exception& e) {
    std::cerr << "gateway: " << e.what() << "\n";
    return 1;
  }
}
