#include "ldm/geo.hpp"

#include <algorithm>
#include <cmath>

#include "ldm/error.hpp"

namespace ldm::geo {
namespace {

struct Vec3 {
  double x, y, z;
};

Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

// Unit normal of the sphere and its local east/north axes.
struct LocalBasis {
  Vec3 up, east, north;
};

LocalBasis basis_at(double lat_deg, double lon_deg) {
  const double phi = deg2rad(lat_deg), lam = deg2rad(lon_deg);
  const double sp = std::sin(phi), cp = std::cos(phi), sl = std::sin(lam), cl = std::cos(lam);
  return {{cp * cl, cp * sl, sp}, {-sl, cl, 0.0}, {-sp * cl, -sp * sl, cp}};
}

double wrap_lon(double lon) {
  double l = std::fmod(lon + 180.0, 360.0);
  if (l < 0.0) l += 360.0;
  l -= 180.0;
  if (l >= 180.0) l -= 360.0;
  return l;
}

}  // namespace

double haversine_m(const GeoPosition& a, const GeoPosition& b) noexcept {
  const double dphi = deg2rad(b.lat - a.lat);
  const double dlam = deg2rad(b.lon - a.lon);
  const double s1 = std::sin(dphi / 2.0), s2 = std::sin(dlam / 2.0);
  double h = s1 * s1 + std::cos(deg2rad(a.lat)) * std::cos(deg2rad(b.lat)) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

double bearing_deg(const GeoPosition& a, const GeoPosition& b) noexcept {
  const auto ba = basis_at(a.lat, a.lon);
  const auto pb = basis_at(b.lat, b.lon).up;
  return normalize_heading(rad2deg(std::atan2(dot(pb, ba.east), dot(pb, ba.north))));
}

EnuPoint wgs84_to_enu(const GeoPosition& origin, const GeoPosition& p) {
  const auto enu = wgs84_to_enu_unbounded(origin, p);
  const double dist = std::hypot(enu.east, enu.north);
  if (dist > kLocalRangeM) {
    throw Error(ErrorCode::OutOfLocalRange,
                "point is " + std::to_string(dist) + " m from the local origin (limit 50 km)");
  }
  return enu;
}

EnuPoint wgs84_to_enu_unbounded(const GeoPosition& origin, const GeoPosition& p) noexcept {
  const auto o = basis_at(origin.lat, origin.lon);
  const auto q = basis_at(p.lat, p.lon).up;
  // Central angle via atan2 stays accurate for both tiny and large offsets.
  const double angle = std::atan2(norm(cross(o.up, q)), dot(o.up, q));
  const double dist = angle * kEarthRadiusM;
  const double e = dot(q, o.east), n = dot(q, o.north);
  const double horiz = std::hypot(e, n);
  if (horiz == 0.0) return {0.0, 0.0, p.alt - origin.alt};
  return {dist * e / horiz, dist * n / horiz, p.alt - origin.alt};
}

GeoPosition enu_to_wgs84(const GeoPosition& origin, const EnuPoint& enu) noexcept {
  const auto o = basis_at(origin.lat, origin.lon);
  const double dist = std::hypot(enu.east, enu.north);
  if (dist == 0.0) return {origin.lat, origin.lon, origin.alt + enu.up};
  const double angle = dist / kEarthRadiusM;
  const Vec3 dir = (enu.north / dist) * o.north + (enu.east / dist) * o.east;
  const Vec3 q = std::cos(angle) * o.up + std::sin(angle) * dir;
  const double lat = rad2deg(std::atan2(q.z, std::hypot(q.x, q.y)));
  const double lon = rad2deg(std::atan2(q.y, q.x));
  return {lat, wrap_lon(lon), origin.alt + enu.up};
}

SegmentProjection project_to_segment(const EnuPoint& p, const EnuPoint& a, const EnuPoint& b) noexcept {
  const double dx = b.east - a.east, dy = b.north - a.north;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 1e-12) {
    t = ((p.east - a.east) * dx + (p.north - a.north) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const EnuPoint foot{a.east + t * dx, a.north + t * dy, 0.0};
  return {std::hypot(p.east - foot.east, p.north - foot.north), t, foot};
}

double bearing_deviation(double a_deg, double b_deg) noexcept {
  const double d = normalize_heading(a_deg - b_deg);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace ldm::geo
