#include "chrono_shield/history_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>
#include <memory>
#include <random>
#include <sstream>

#include "chrono_shield/error.hpp"
#include "chrono_shield/image_io.hpp"

namespace chrono_shield {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Records with a shorter side than this are kept but flagged in the audit trail.
constexpr int kLowResolutionSide = 64;

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.7f", v);
  return buf;
}

std::string resolution_note(const RasterImage& img) {
  if (std::min(img.width(), img.height()) >= kLowResolutionSide) return {};
  return "low-resolution " + std::to_string(img.width()) + "x" + std::to_string(img.height());
}

ManifestEntry entry_from_json(const json& j, const char* path_key) {
  if (!j.is_object()) raise(ErrorCode::ManifestMalformed, "manifest entry is not an object");
  ManifestEntry e;
  try {
    e.path = j.at(path_key).get<std::string>();
    const auto date = Date::try_parse(j.at("date").get<std::string>());
    if (!date) raise(ErrorCode::ManifestMalformed, "entry '" + e.path + "' has a bad date");
    e.date = *date;
    e.location = {j.at("lat").get<double>(), j.at("lon").get<double>()};
    e.heading = j.at("heading").get<double>();
  } catch (const json::exception& ex) {
    raise(ErrorCode::ManifestMalformed, std::string("manifest entry: ") + ex.what());
  }
  if (!is_valid(e.location)) raise(ErrorCode::ManifestMalformed, "entry '" + e.path + "' has bad coordinates");
  if (e.path.empty()) raise(ErrorCode::ManifestMalformed, "manifest entry has an empty path");
  return e;
}

}  // namespace

void validate(const HistoryQuery& q) {
  if (q.max_records < 1) raise(ErrorCode::InvalidArgument, "max_records must be >= 1");
  if (!is_valid(q.location)) raise(ErrorCode::InvalidArgument, "query coordinates out of range");
  if (!std::isfinite(q.heading)) raise(ErrorCode::InvalidArgument, "query heading is not finite");
}

ArchiveManifest parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& ex) {
    raise(ErrorCode::ManifestMalformed, std::string("manifest is not valid JSON: ") + ex.what());
  }
  ArchiveManifest m;
  const json* list = &doc;
  if (doc.is_object()) {
    m.version = doc.value("version", 1);
    if (m.version != 1) raise(ErrorCode::ManifestMalformed, "unsupported manifest version");
    if (!doc.contains("entries")) raise(ErrorCode::ManifestMalformed, "manifest object lacks 'entries'");
    list = &doc["entries"];
  }
  if (!list->is_array()) raise(ErrorCode::ManifestMalformed, "manifest must be a JSON array");
  for (const auto& item : *list) m.entries.push_back(entry_from_json(item, "path"));
  return m;
}

std::string serialize_manifest(const ArchiveManifest& manifest) {
  json arr = json::array();
  for (const auto& e : manifest.entries) {
    arr.push_back({{"path", e.path},
                   {"date", e.date.iso()},
                   {"lat", e.location.lat},
                   {"lon", e.location.lon},
                   {"heading", e.heading}});
  }
  return arr.dump(2) + "\n";
}

bool matches(const ManifestEntry& entry, const HistoryQuery& q, const MatchPolicy& policy) noexcept {
  if (q.before && !(entry.date < *q.before)) return false;
  if (haversine_meters(entry.location, q.location) > policy.radius_m) return false;
  return heading_difference(entry.heading, q.heading) <= policy.heading_tolerance_deg;
}

std::vector<ManifestEntry> select_entries(std::vector<ManifestEntry> entries, const HistoryQuery& q,
                                          const MatchPolicy& policy) {
  std::erase_if(entries, [&](const ManifestEntry& e) { return !matches(e, q, policy); });
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    if (a.date != b.date) return a.date > b.date;
    return a.path < b.path;
  });
  if (entries.size() > q.max_records) entries.resize(q.max_records);
  return entries;
}

HistoryResult query_archive(const fs::path& root, const HistoryQuery& q, const MatchPolicy& policy) {
  validate(q);
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) {
    raise(ErrorCode::ManifestMissing, "no manifest.json under " + root.string());
  }
  const ArchiveManifest manifest = parse_manifest(read_text(manifest_path));

  // Select over all matches first so an unreadable entry does not hide an older readable one.
  HistoryQuery wide = q;
  wide.max_records = manifest.entries.size() + 1;
  HistoryResult out;
  for (const ManifestEntry& e : select_entries(manifest.entries, wide, policy)) {
    if (out.records.size() >= q.max_records) break;
    HistoricalRecord r;
    try {
      r.image = load_image(root / e.path);
    } catch (const Error& ex) {
      ++out.failed;
      out.notes.push_back("skipped " + e.path + ": " + ex.what());
      continue;
    }
    r.image = to_rgb(r.image);
    r.capture_date = e.date;
    r.location = e.location;
    r.heading = e.heading;
    r.source = RecordSource::archive;
    r.origin = e.path;
    r.note = resolution_note(r.image);
    out.records.push_back(std::move(r));
  }
  return out;
}

std::string cache_key(const HistoryQuery& q) {
  const auto bucket = static_cast<int>(std::floor(std::fmod(std::fmod(q.heading, 360.0) + 360.0, 360.0) / 15.0));
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.5f_%.5f_h%02d_%s_n%zu", q.location.lat, q.location.lon, bucket,
                q.before ? q.before->iso().c_str() : "latest", q.max_records);
  return buf;
}

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/', may be "/"
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) raise(ErrorCode::InvalidArgument, "not an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.origin = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  return p;
}

class HttpFetcher {
 public:
  explicit HttpFetcher(int timeout) : timeout_(timeout) {}

  httplib::Result get(const std::string& url) {
    const ParsedUrl u = parse_url(url);
    auto& client = clients_[u.origin];
    if (!client) {
      client = std::make_unique<httplib::Client>(u.origin);
      client->set_connection_timeout(timeout_, 0);
      client->set_read_timeout(timeout_, 0);
    }
    ++requests;
    return client->Get(u.path);
  }

  std::size_t requests = 0;

 private:
  int timeout_;
  std::map<std::string, std::unique_ptr<httplib::Client>> clients_;
};

std::string join_url(const std::string& endpoint, const std::string& ref) {
  if (ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0) return ref;
  const ParsedUrl base = parse_url(endpoint);
  if (!ref.empty() && ref.front() == '/') return base.origin + ref;
  std::string prefix = endpoint;
  if (prefix.back() != '/') prefix += '/';
  return prefix + ref;
}

std::optional<HistoryResult> load_cached(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) return std::nullopt;
  try {
    const auto manifest = parse_manifest(read_text(manifest_path));
    HistoryResult out;
    out.from_cache = true;
    for (const auto& e : manifest.entries) {
      HistoricalRecord r;
      r.image = to_rgb(load_image(dir / e.path));
      r.capture_date = e.date;
      r.location = e.location;
      r.heading = e.heading;
      r.source = RecordSource::remote;
      r.origin = e.path;
      r.note = resolution_note(r.image);
      out.records.push_back(std::move(r));
    }
    return out;
  } catch (const Error&) {
    return std::nullopt;  // damaged cache entry: refetch
  }
}

void store_cache(const fs::path& dir, const std::vector<HistoricalRecord>& records,
                 const std::vector<std::string>& names) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  fs::path tmp = dir;
  tmp += ".tmp-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1));
  fs::create_directories(tmp);
  ArchiveManifest m;
  for (std::size_t i = 0; i < records.size(); ++i) {
    save_image(records[i].image, tmp / names[i]);
    m.entries.push_back({names[i], records[i].capture_date, records[i].location, records[i].heading});
  }
  const std::string text = serialize_manifest(m);
  write_file_atomic(tmp / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  std::error_code ec;
  fs::rename(tmp, dir, ec);
  if (ec) fs::remove_all(tmp, ec);  // another writer won the race
}

}  // namespace

HistoryResult query_remote(const std::string& endpoint, const HistoryQuery& q, const RemoteOptions& options) {
  validate(q);
  fs::path cache_dir;
  if (!options.cache_dir.empty()) {
    cache_dir = options.cache_dir / cache_key(q);
    if (auto cached = load_cached(cache_dir)) return *std::move(cached);
  }

  HttpFetcher http(options.timeout_seconds);
  std::string url = endpoint;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/history?lat=" + format_coord(q.location.lat) + "&lon=" + format_coord(q.location.lon) +
         "&heading=" + format_coord(q.heading) + "&max=" + std::to_string(q.max_records);
  if (q.before) url += "&before=" + q.before->iso();

  auto res = http.get(url);
  if (!res) raise(ErrorCode::NetworkUnreachable, "cannot reach " + endpoint + ": " + httplib::to_string(res.error()));
  if (res->status >= 500) raise(ErrorCode::NetworkUnreachable, "history endpoint returned HTTP " + std::to_string(res->status));
  if (res->status != 200) raise(ErrorCode::ProtocolError, "history endpoint returned HTTP " + std::to_string(res->status));

  std::vector<ManifestEntry> listed;
  try {
    const json doc = json::parse(res->body);
    if (!doc.is_array()) raise(ErrorCode::ProtocolError, "history response is not a JSON array");
    for (const auto& item : doc) listed.push_back(entry_from_json(item, "image_url"));
  } catch (const json::exception& ex) {
    raise(ErrorCode::ProtocolError, std::string("history response is not valid JSON: ") + ex.what());
  } catch (const Error& ex) {
    if (ex.code() == ErrorCode::ProtocolError) throw;
    raise(ErrorCode::ProtocolError, ex.what());
  }

  HistoryResult out;
  std::vector<std::string> names;
  for (const ManifestEntry& e : select_entries(std::move(listed), q, options.policy)) {
    const std::string image_url = join_url(endpoint, e.path);
    auto img = http.get(image_url);
    if (!img || img->status != 200) {
      ++out.failed;
      out.notes.push_back("skipped " + image_url + ": " +
                          (img ? "HTTP " + std::to_string(img->status) : httplib::to_string(img.error())));
      continue;
    }
    HistoricalRecord r;
    try {
      const std::span bytes(reinterpret_cast<const std::uint8_t*>(img->body.data()), img->body.size());
      r.image = to_rgb(decode_image(bytes, detect_format(bytes)));
    } catch (const Error& ex) {
      ++out.failed;
      out.notes.push_back("skipped " + image_url + ": " + ex.what());
      continue;
    }
    r.capture_date = e.date;
    r.location = e.location;
    r.heading = e.heading;
    r.source = RecordSource::remote;
    r.origin = image_url;
    r.note = resolution_note(r.image);
    names.push_back("record" + std::to_string(out.records.size()) + ".png");
    out.records.push_back(std::move(r));
  }
  out.network_requests = http.requests;

  if (!cache_dir.empty() && !out.partial()) {
    fs::create_directories(options.cache_dir);
    store_cache(cache_dir, out.records, names);
  }
  return out;
}

HistoryResult query_history(const std::string& source, const HistoryQuery& q, const RemoteOptions& options) {
  if (source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0) {
    return query_remote(source, q, options);
  }
  if (!fs::is_directory(source)) raise(ErrorCode::MissingArchive, "archive directory not found: " + source);
  return query_archive(source, q, options.policy);
}

PrefetchReport prefetch_route(const std::string& source, const std::vector<Waypoint>& waypoints,
                              const HistoryQuery& query_template, const RemoteOptions& options) {
  if (waypoints.empty()) raise(ErrorCode::InvalidRoute, "route has no waypoints");
  PrefetchReport report;
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    HistoryQuery q = query_template;
    q.location = waypoints[i].location;
    q.heading = waypoints[i].heading;
    try {
      const HistoryResult r = query_history(source, q, options);
      if (r.partial()) {
        ++report.failed;
        report.errors.push_back("waypoint " + std::to_string(i) + ": " + std::to_string(r.failed) +
                                " image(s) failed");
      } else if (r.from_cache || r.network_requests == 0) {
        ++report.cached;
      } else {
        ++report.fetched;
      }
    } catch (const Error& ex) {
      ++report.failed;
      report.errors.push_back("waypoint " + std::to_string(i) + ": " + ex.what());
    }
  }
  return report;
}

}  // namespace chrono_shield
