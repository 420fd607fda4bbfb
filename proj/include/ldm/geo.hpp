#pragma once

// Spherical-earth geodesy used by every spatial query.
//
// Distances are great-circle distances on a sphere of radius 6 371 000 m.
// The local frame is azimuthal equidistant about the origin: the ENU vector
// of a point has the length of the geodesic from the origin and points along
// its initial bearing. Altitude only feeds the `up` component and is ignored
// by every horizontal distance.

#include <numbers>

#include "ldm/core_model.hpp"

namespace ldm::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kLocalRangeM = 50'000.0;

constexpr double deg2rad(double d) noexcept { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) noexcept { return r * 180.0 / std::numbers::pi; }

struct EnuPoint {
  double east = 0.0;
  double north = 0.0;
  double up = 0.0;
  bool operator==(const EnuPoint&) const = default;
};

/// Great-circle distance in metres (haversine formula).
double haversine_m(const GeoPosition& a, const GeoPosition& b) noexcept;

/// Initial great-circle bearing from a to b, degrees in [0, 360).
double bearing_deg(const GeoPosition& a, const GeoPosition& b) noexcept;

/// Throws OutOfLocalRange when p is more than 50 km from the origin.
EnuPoint wgs84_to_enu(const GeoPosition& origin, const GeoPosition& p);

/// Same mapping without the range check; accuracy of planar geometry
/// degrades with distance but the result stays well defined.
EnuPoint wgs84_to_enu_unbounded(const GeoPosition& origin, const GeoPosition& p) noexcept;

/// Inverse of wgs84_to_enu. Accepts any offset; longitude wrapped to [-180, 180).
GeoPosition enu_to_wgs84(const GeoPosition& origin, const EnuPoint& enu) noexcept;

struct SegmentProjection {
  double distance = 0.0;
  double t = 0.0;
  EnuPoint foot;
};

/// Planar (east/north) projection of p onto segment [a, b], t clamped to [0, 1].
/// Segments shorter than 1e-6 m are treated as the point a.
SegmentProjection project_to_segment(const EnuPoint& p, const EnuPoint& a, const EnuPoint& b) noexcept;

/// Smallest absolute angle between two bearings, degrees in [0, 180].
double bearing_deviation(double a_deg, double b_deg) noexcept;

}  // namespace ldm::geo
