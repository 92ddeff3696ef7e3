#include "chrono_shield/geo.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "chrono_shield/error.hpp"

namespace chrono_shield {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double rad(double deg) noexcept { return deg * kPi / 180.0; }
constexpr double deg(double r) noexcept { return r * 180.0 / kPi; }

bool parse_int(std::string_view s, int& out) noexcept {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

bool is_valid_date(int year, int month, int day) noexcept {
  if (year < 1 || year > 9999 || month < 1 || month > 12 || day < 1) return false;
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int limit = kDays[static_cast<std::size_t>(month - 1)];
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) limit = 29;
  return day <= limit;
}

std::optional<Date> Date::try_parse(std::string_view iso) noexcept {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  Date d;
  if (!parse_int(iso.substr(0, 4), d.year) || !parse_int(iso.substr(5, 2), d.month) ||
      !parse_int(iso.substr(8, 2), d.day)) {
    return std::nullopt;
  }
  if (!is_valid_date(d.year, d.month, d.day)) return std::nullopt;
  return d;
}

Date Date::parse(std::string_view iso) {
  auto d = try_parse(iso);
  if (!d) raise(ErrorCode::InvalidArgument, "not an ISO-8601 calendar date: '" + std::string(iso) + "'");
  return *d;
}

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
  return buf;
}

std::string Date::month_year() const {
  static constexpr std::array<const char*, 12> kNames = {"Jan.", "Feb.", "Mar.", "Apr.", "May",  "Jun.",
                                                         "Jul.", "Aug.", "Sep.", "Oct.", "Nov.", "Dec."};
  return std::string(kNames[static_cast<std::size_t>(month - 1)]) + " " + std::to_string(year);
}

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 &&
         p.lon <= 180.0;
}

double haversine_meters(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double dlat = rad(b.lat - a.lat);
  const double dlon = rad(b.lon - a.lon);
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(rad(a.lat)) * std::cos(rad(b.lat)) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusMeters * std::asin(std::min(1.0, std::sqrt(h)));
}

double heading_difference(double a_deg, double b_deg) noexcept {
  double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

GeoPoint offset_point(const GeoPoint& from, double bearing_deg, double meters) noexcept {
  const double angular = meters / kEarthRadiusMeters;
  const double lat1 = rad(from.lat);
  const double lon1 = rad(from.lon);
  const double brg = rad(bearing_deg);
  const double lat2 = std::asin(std::sin(lat1) * std::cos(angular) + std::cos(lat1) * std::sin(angular) * std::cos(brg));
  const double lon2 =
      lon1 + std::atan2(std::sin(brg) * std::sin(angular) * std::cos(lat1), std::cos(angular) - std::sin(lat1) * std::sin(lat2));
  return {deg(lat2), deg(lon2)};
}

}  // namespace chrono_shield
