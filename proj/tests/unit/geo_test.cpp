#include <gtest/gtest.h>

#include "ldm/error.hpp"
#include "ldm/geo.hpp"
#include "support/oracles.hpp"

namespace ldm {
namespace {

using geo::EnuPoint;
using testing::hp_distance_m;

// R·Δφ for 0.001° and π·R, evaluated at 50 digits.
double oracle_millidegree() { return static_cast<double>(hp_distance_m({0, 0, 0}, {0.001, 0, 0})); }
double oracle_antipodal() { return static_cast<double>(hp_distance_m({0, 0, 0}, {0, 180, 0})); }

TEST(Haversine, IdentityIsZero) {
  EXPECT_EQ(geo::haversine_m({12.5, -40.25, 0}, {12.5, -40.25, 0}), 0.0);
}

TEST(Haversine, MillidegreeNorth) {
  EXPECT_NEAR(oracle_millidegree(), 111.195, 0.01);
  EXPECT_NEAR(geo::haversine_m({0, 0, 0}, {0.001, 0, 0}), oracle_millidegree(), 0.01);
}

TEST(Haversine, Antipodal) {
  EXPECT_NEAR(oracle_antipodal(), 20015086.0, 10.0);
  EXPECT_NEAR(geo::haversine_m({0, 0, 0}, {0, 180, 0}), oracle_antipodal(), 10.0);
}

TEST(Haversine, IgnoresAltitude) {
  EXPECT_EQ(geo::haversine_m({1, 1, 0}, {1.01, 1, 0}), geo::haversine_m({1, 1, 500}, {1.01, 1, -20}));
}

TEST(Enu, OriginMapsToZero) {
  const auto e = geo::wgs84_to_enu({47.3, 8.5, 10}, {47.3, 8.5, 10});
  EXPECT_EQ(e.east, 0.0);
  EXPECT_EQ(e.north, 0.0);
  EXPECT_EQ(e.up, 0.0);
}

TEST(Enu, MillidegreeNorth) {
  const auto e = geo::wgs84_to_enu({0, 0, 0}, {0.001, 0, 0});
  EXPECT_NEAR(e.north, oracle_millidegree(), 1e-6);
  EXPECT_NEAR(e.east, 0.0, 1e-9);
}

TEST(Enu, UpIsAltitudeDifference) {
  EXPECT_DOUBLE_EQ(geo::wgs84_to_enu({10, 10, 100}, {10.001, 10, 130}).up, 30.0);
}

TEST(Enu, BeyondLocalRangeRejected) {
  try {
    geo::wgs84_to_enu({0, 0, 0}, {0.5, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfLocalRange);
  }
  EXPECT_NO_THROW(geo::wgs84_to_enu_unbounded({0, 0, 0}, {0.5, 0, 0}));
}

TEST(Enu, RoundTripWithinOneNanodegree) {
  testing::Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const GeoPosition o{rng.uniform(-85, 85), rng.uniform(-180, 179.99), 0};
    const auto p = geo::enu_to_wgs84(o, {rng.uniform(-30000, 30000), rng.uniform(-30000, 30000), 0});
    const auto back = geo::enu_to_wgs84(o, geo::wgs84_to_enu(o, p));
    EXPECT_NEAR(back.lat, p.lat, 1e-9);
    double dlon = std::fmod(std::abs(back.lon - p.lon), 360.0);
    if (dlon > 180) dlon = 360 - dlon;
    EXPECT_LT(dlon, 1e-9);
  }
}

TEST(Enu, InverseMatchesGeodesicDestination) {
  testing::Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const GeoPosition o{rng.uniform(-80, 80), rng.uniform(-180, 179.99), 0};
    const double e = rng.uniform(-10000, 10000), n = rng.uniform(-10000, 10000);
    const auto got = geo::enu_to_wgs84(o, {e, n, 0});
    const auto want = testing::hp_destination(o, e, n);
    EXPECT_LT(static_cast<double>(hp_distance_m(got, want)), 0.01);
  }
}

TEST(Enu, LongitudeWrapsAcrossAntimeridian) {
  const auto p = geo::enu_to_wgs84({0, 179.9999, 0}, {100, 0, 0});
  EXPECT_LT(p.lon, 0.0);
  EXPECT_GE(p.lon, -180.0);
}

TEST(Bearing, CardinalDirections) {
  EXPECT_NEAR(geo::bearing_deg({0, 0, 0}, {0.01, 0, 0}), 0.0, 1e-9);
  EXPECT_NEAR(geo::bearing_deg({0, 0, 0}, {0, 0.01, 0}), 90.0, 1e-9);
  EXPECT_NEAR(geo::bearing_deg({0, 0, 0}, {-0.01, 0, 0}), 180.0, 1e-9);
  EXPECT_NEAR(geo::bearing_deg({0, 0, 0}, {0, -0.01, 0}), 270.0, 1e-9);
}

TEST(BearingDeviation, ShortestArc) {
  EXPECT_DOUBLE_EQ(geo::bearing_deviation(350, 10), 20.0);
  EXPECT_DOUBLE_EQ(geo::bearing_deviation(0, 180), 180.0);
  EXPECT_DOUBLE_EQ(geo::bearing_deviation(90, 90), 0.0);
}

TEST(ProjectToSegment, Midpoint) {
  const auto r = geo::project_to_segment({1, 0, 0}, {0, 0, 0}, {2, 0, 0});
  EXPECT_DOUBLE_EQ(r.distance, 0.0);
  EXPECT_DOUBLE_EQ(r.t, 0.5);
}

TEST(ProjectToSegment, PerpendicularAtStart) {
  const auto r = geo::project_to_segment({0, 1, 0}, {0, 0, 0}, {2, 0, 0});
  EXPECT_DOUBLE_EQ(r.distance, 1.0);
  EXPECT_DOUBLE_EQ(r.t, 0.0);
  EXPECT_DOUBLE_EQ(r.foot.east, 0.0);
  EXPECT_DOUBLE_EQ(r.foot.north, 0.0);
}

TEST(ProjectToSegment, ClampedBeyondEnd) {
  const auto r = geo::project_to_segment({5, 4, 0}, {0, 0, 0}, {2, 0, 0});
  EXPECT_DOUBLE_EQ(r.t, 1.0);
  EXPECT_DOUBLE_EQ(r.distance, 5.0);
}

TEST(ProjectToSegment, DegenerateSegmentIsPoint) {
  const auto r = geo::project_to_segment({3, 4, 0}, {0, 0, 0}, {0, 0, 0});
  EXPECT_DOUBLE_EQ(r.distance, 5.0);
  EXPECT_DOUBLE_EQ(r.t, 0.0);
}

TEST(ProjectToSegmentProperty, NeverFartherThanEndpoints) {
  testing::Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    const EnuPoint p{rng.uniform(-100, 100), rng.uniform(-100, 100), 0};
    const EnuPoint a{rng.uniform(-100, 100), rng.uniform(-100, 100), 0};
    const EnuPoint b{rng.uniform(-100, 100), rng.uniform(-100, 100), 0};
    const auto r = geo::project_to_segment(p, a, b);
    EXPECT_LE(r.distance, std::hypot(p.east - a.east, p.north - a.north) + 1e-9);
    EXPECT_LE(r.distance, std::hypot(p.east - b.east, p.north - b.north) + 1e-9);
    EXPECT_GE(r.t, 0.0);
    EXPECT_LE(r.t, 1.0);
  }
}

}  // namespace
}  // namespace ldm
