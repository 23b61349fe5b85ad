#pragma once

// Runs an httplib server until SIGINT or SIGTERM.

#include <csignal>
#include <iostream>
#include <string>
#include <thread>

#include <httplib.h>

namespace selectshare::tools {

inline int serve(httplib::Server& server, const std::string& host, int port, const std::string& name) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  if (!server.bind_to_port(host, port)) {
    std::cerr << name << ": cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  std::thread worker([&] { server.listen_after_bind(); });
  std::cerr << name << " listening on http://" << host << ":" << port << "\n";
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  worker.join();
  return 0;
}

}  // namespace selectshare::tools
