#include "chrono_shield/fixture_server.hpp"

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace fs = std::filesystem;
using nlohmann::json;

struct FixtureServer::Impl {
  fs::path root;
  MatchPolicy policy;
  httplib::Server server;
  std::thread worker;
  std::string host = "127.0.0.1";
  int port = 0;
  std::atomic<std::size_t> hits{0};
  std::atomic<std::size_t> history_requests{0};
  std::atomic<std::size_t> image_requests{0};
  std::mutex fault_mutex;
  FaultInjector fault;

  int injected(const httplib::Request& req) {
    std::lock_guard lock(fault_mutex);
    if (!fault) return 0;
    FixtureRequest r{req.path, {}};
    for (const auto& [k, v] : req.params) r.params[k] = v;
    return fault(r);
  }

  void install_routes() {
    server.Get("/history", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      ++history_requests;
      if (int code = injected(req)) {
        res.status = code;
        return;
      }
      try {
        HistoryQuery q;
        q.location = {std::stod(req.get_param_value("lat")), std::stod(req.get_param_value("lon"))};
        q.heading = std::stod(req.get_param_value("heading"));
        if (req.has_param("max")) q.max_records = std::stoul(req.get_param_value("max"));
        if (req.has_param("before")) q.before = Date::parse(req.get_param_value("before"));
        validate(q);
        std::ifstream in(root / "manifest.json");
        std::ostringstream text;
        text << in.rdbuf();
        const auto manifest = parse_manifest(text.str());
        json out = json::array();
        for (const auto& e : select_entries(manifest.entries, q, policy)) {
          out.push_back({{"image_url", "/images/" + e.path},
                         {"date", e.date.iso()},
                         {"lat", e.location.lat},
                         {"lon", e.location.lon},
                         {"heading", e.heading}});
        }
        res.set_content(out.dump(), "application/json");
      } catch (const std::exception& ex) {
        res.status = 400;
        res.set_content(ex.what(), "text/plain");
      }
    });

    server.Get(R"(/images/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      ++image_requests;
      if (int code = injected(req)) {
        res.status = code;
        return;
      }
      const fs::path rel = fs::path(req.matches[1].str()).lexically_normal();
      if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") {
        res.status = 403;
        return;
      }
      std::ifstream in(root / rel, std::ios::binary);
      if (!in) {
        res.status = 404;
        return;
      }
      std::ostringstream body;
      body << in.rdbuf();
      const bool png = rel.extension() == ".png";
      res.set_content(body.str(), png ? "image/png" : "image/x-portable-pixmap");
    });

    server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
      const json stats = {{"hits", hits.load()},
                          {"history_requests", history_requests.load()},
                          {"image_requests", image_requests.load()}};
      res.set_content(stats.dump(), "application/json");
    });
  }
};

FixtureServer::FixtureServer(fs::path archive_root, MatchPolicy policy) : impl_(std::make_unique<Impl>()) {
  impl_->root = std::move(archive_root);
  impl_->policy = policy;
  impl_->install_routes();
}

FixtureServer::~FixtureServer() { stop(); }

int FixtureServer::start(const std::string& host, int port) {
  impl_->host = host;
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(host);
  } else {
    impl_->port = impl_->server.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port <= 0) raise(ErrorCode::IoError, "fixture server cannot bind " + host);
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void FixtureServer::run(const std::string& host, int port) {
  impl_->host = host;
  impl_->port = port;
  if (!impl_->server.listen(host, port)) raise(ErrorCode::IoError, "fixture server cannot listen on " + host);
}

void FixtureServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::string FixtureServer::endpoint() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

std::size_t FixtureServer::hits() const noexcept { return impl_->hits.load(); }

void FixtureServer::reset_hits() noexcept { impl_->hits = 0; }

void FixtureServer::set_fault(FaultInjector fault) {
  std::lock_guard lock(impl_->fault_mutex);
  impl_->fault = std::move(fault);
}

}  // namespace chrono_shield
