#pragma once

#include "talkdep/app.hpp"

#include <memory>
#include <string>

namespace talkdep {

int http_status(ErrorCode code);

// JSON HTTP API over an App. Errors are returned as {"code", "message"}.
class Service {
 public:
  explicit Service(App& app);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace talkdep
