#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "curator/error.hpp"

namespace curator::service {

/// HTTP status for a domain error: 404 for unknown ids, 400 for
/// validation failures, 409 for everything else.
int httpStatusFor(Errc code);

struct Options {
  std::optional<std::filesystem::path> uiDir;  // served under /ui when set
  std::chrono::milliseconds longPollTimeout{30000};
};

/// JSON-over-HTTP facade over one repository. Mutations are serialized
/// through one writer and the repository lock; every mutating endpoint
/// requires the `X-Curator-Author` header.
class Server {
 public:
  explicit Server(const std::filesystem::path& repoRoot, Options options = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds `port` (0 picks a free one) and returns the bound port.
  /// Throws Error(IoError) when the port is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace curator::service
