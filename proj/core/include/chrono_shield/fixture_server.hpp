#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "chrono_shield/history_client.hpp"

namespace chrono_shield {

struct FixtureRequest {
  std::string path;
  std::map<std::string, std::string> params;
};

// Returns an HTTP status to force for a request, or 0 to serve it normally.
using FaultInjector = std::function<int(const FixtureRequest&)>;

// Serves an archive directory over the history wire protocol:
//   GET /history?lat=&lon=&heading=&max=[&before=]  -> JSON [{image_url,date,lat,lon,heading}]
//   GET /images/<path>                              -> image bytes
//   GET /stats                                      -> {"hits": N, ...}
// Hits count /history and /images requests only.
class FixtureServer {
 public:
  explicit FixtureServer(std::filesystem::path archive_root, MatchPolicy policy = {});
  ~FixtureServer();
  FixtureServer(const FixtureServer&) = delete;
  FixtureServer& operator=(const FixtureServer&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  // Returns the bound port; throws IoError when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Serves on the calling thread until stop() is called from elsewhere.
  void run(const std::string& host, int port);
  void stop();

  std::string endpoint() const;
  std::size_t hits() const noexcept;
  void reset_hits() noexcept;
  void set_fault(FaultInjector fault);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chrono_shield
