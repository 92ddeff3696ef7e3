#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chrono_shield/geo.hpp"
#include "chrono_shield/time_travel.hpp"

namespace chrono_shield {

struct HistoryQuery {
  GeoPoint location;
  double heading = 0.0;
  std::size_t max_records = 3;
  std::optional<Date> before;  // exclusive upper bound on capture dates
};

// Throws InvalidArgument when the query violates its invariants.
void validate(const HistoryQuery& q);

struct MatchPolicy {
  double radius_m = 25.0;
  double heading_tolerance_deg = 45.0;
};

struct ManifestEntry {
  std::string path;  // relative to the archive root (or an image URL for remote manifests)
  Date date;
  GeoPoint location;
  double heading = 0.0;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct ArchiveManifest {
  int version = 1;
  std::vector<ManifestEntry> entries;
};

// Accepts a bare JSON array of {"path","date","lat","lon","heading"} or an
// object {"version": 1, "entries": [...]}. Throws ManifestMalformed.
ArchiveManifest parse_manifest(std::string_view json_text);
// Canonical array form.
std::string serialize_manifest(const ArchiveManifest& manifest);

bool matches(const ManifestEntry& entry, const HistoryQuery& q, const MatchPolicy& policy) noexcept;

// Filter by radius/heading/before, newest first (path breaks date ties),
// truncated to max_records.
std::vector<ManifestEntry> select_entries(std::vector<ManifestEntry> entries, const HistoryQuery& q,
                                          const MatchPolicy& policy);

struct HistoryResult {
  std::vector<HistoricalRecord> records;
  std::size_t failed = 0;  // entries skipped because their image could not be read or fetched
  std::vector<std::string> notes;
  bool from_cache = false;
  std::size_t network_requests = 0;

  bool partial() const noexcept { return failed > 0; }
};

// Reads root/manifest.json. Throws ManifestMissing, ManifestMalformed.
// Unreadable images are skipped and noted.
HistoryResult query_archive(const std::filesystem::path& root, const HistoryQuery& q,
                            const MatchPolicy& policy = {});

struct RemoteOptions {
  std::filesystem::path cache_dir;  // empty disables caching
  MatchPolicy policy;
  int timeout_seconds = 10;
};

// Cache directory name for a query: coordinates rounded to 5 decimals,
// 15-degree heading bucket, date bound and record cap.
std::string cache_key(const HistoryQuery& q);

// GET {endpoint}/history?..., then each image. Complete results are cached
// (temp dir + rename) and served offline on repeat queries. Throws
// NetworkUnreachable (connection failure or 5xx) and ProtocolError.
HistoryResult query_remote(const std::string& endpoint, const HistoryQuery& q, const RemoteOptions& options = {});

// Dispatches on the source string: http(s):// URLs go remote, anything else
// is an archive directory.
HistoryResult query_history(const std::string& source, const HistoryQuery& q, const RemoteOptions& options = {});

struct Waypoint {
  GeoPoint location;
  double heading = 0.0;
};

struct PrefetchReport {
  std::size_t fetched = 0;
  std::size_t cached = 0;
  std::size_t failed = 0;
  std::vector<std::string> errors;
};

// Populates the cache for every waypoint; per-waypoint failures are counted,
// not thrown. Throws InvalidRoute for an empty route.
PrefetchReport prefetch_route(const std::string& source, const std::vector<Waypoint>& waypoints,
                              const HistoryQuery& query_template, const RemoteOptions& options = {});

}  // namespace chrono_shield
