#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace chrono_shield {

// Proleptic Gregorian calendar date, ISO-8601 "YYYY-MM-DD" on the wire.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  // Throws InvalidArgument for malformed text or impossible dates.
  static Date parse(std::string_view iso);
  static std::optional<Date> try_parse(std::string_view iso) noexcept;
  std::string iso() const;
  // "Nov. 2020" style, as used in report tables.
  std::string month_year() const;

  friend auto operator<=>(const Date&, const Date&) = default;
};

bool is_valid_date(int year, int month, int day) noexcept;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr double kEarthRadiusMeters = 6371000.0;

bool is_valid(const GeoPoint& p) noexcept;

// Great-circle distance on a sphere of radius kEarthRadiusMeters.
double haversine_meters(const GeoPoint& a, const GeoPoint& b) noexcept;

// Smallest absolute angle between two headings, in [0, 180].
double heading_difference(double a_deg, double b_deg) noexcept;

// Point reached by moving meters along bearing_deg (used by fixtures).
GeoPoint offset_point(const GeoPoint& from, double bearing_deg, double meters) noexcept;

}  // namespace chrono_shield
