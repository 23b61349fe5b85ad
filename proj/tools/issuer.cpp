// VC issuer: OAuth token endpoint, revocation list and admin API.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "selectshare/issuer.hpp"
#include "serve.hpp"
#include "support.hpp"

using namespace selectshare;

int main(int argc, char** argv) {
  CLI::App app{"Capability VC issuer"};
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    auto config = issuer::IssuerConfig::from_json(nlohmann::json::parse(support::read_file(config_path)));
    if (config.admin_key.empty()) std::cerr << "issuer: admin_key is empty, admin endpoints are disabled\n";
    issuer::IssuerService service(config, issuer::load_or_create_key(config.signing_key_path));
    httplib::Server server;
    issuer::mount_routes(server, service, support::unix_now);
    return tools::serve(server, config.listen_host, config.listen_port, "issuer");
  } catch (const std::exception& e) {
    std::cerr << "issuer: " << e.what() << "\n";
    return 1;
  }
}
