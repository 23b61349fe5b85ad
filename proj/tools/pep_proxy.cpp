// Policy enforcement proxy in front of the gateway.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>

#include "selectshare/proxy.hpp"
#include "serve.hpp"
#include "support.hpp"

using namespace selectshare;

int main(int argc, char** argv) {
  CLI::App app{"Selective disclosure proxy"};
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    auto config = proxy::ProxyConfig::from_json(nlohmann::json::parse(support::read_file(config_path)));
    auto source = std::make_shared<proxy::HttpDocumentSource>(config.gateway_url, config.gateway_key);
    proxy::Proxy pep(config, source, proxy::http_status_fetcher());
    httplib::Server server;
    server.new_task_queue = [] { return new httplib::ThreadPool(std::max(2u, std::thread::hardware_concurrency())); };
    proxy::mount_routes(server, pep, support::unix_now);
    return tools::serve(server, config.listen_host, config.listen_port, "pep-proxy");
  } catch (const std::exception& e) {
    std::cerr << "pep-proxy: " << e.what() << "\n";
    return 1;
  }
}
