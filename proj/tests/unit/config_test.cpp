#include <gtest/gtest.h>

#include "ldm/config.hpp"
#include "ldm/error.hpp"

namespace ldm {
namespace {

using namespace std::chrono_literals;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

TEST(Config, DefaultsAreValid) {
  LdmConfig cfg;
  EXPECT_NO_THROW(validate_config(cfg));
  EXPECT_FALSE(cfg.ttl(LdmLayer::L1_Static).has_value());
  EXPECT_EQ(cfg.ttl(LdmLayer::L2_QuasiStatic), Duration(24h));
  EXPECT_EQ(cfg.ttl(LdmLayer::L3_Transient), Duration(10min));
  EXPECT_EQ(cfg.ttl(LdmLayer::L4_Dynamic), Duration(30s));
  EXPECT_EQ(cfg.eviction_period, Duration(1s));
}

TEST(Config, EvictionPeriodAboveMinTtlRejected) {
  LdmConfig cfg;
  cfg.eviction_period = 31s;
  EXPECT_EQ(code_of([&] { validate_config(cfg); }), ErrorCode::InvalidConfig);
  try {
    validate_config(cfg);
  } catch (const Error& e) {
    EXPECT_NE(e.message().find("eviction_period"), std::string::npos);
  }
}

TEST(Config, NonPositiveTtlRejected) {
  LdmConfig cfg;
  cfg.ttl_per_layer[LdmLayer::L3_Transient] = Duration(0);
  EXPECT_EQ(code_of([&] { validate_config(cfg); }), ErrorCode::InvalidConfig);
}

TEST(Config, InvertedFilterBoxRejected) {
  LdmConfig cfg;
  cfg.spatial_filter = GeoBox{10, 10, 5, 20};
  EXPECT_EQ(code_of([&] { validate_config(cfg); }), ErrorCode::InvalidConfig);
}

TEST(ParseDuration, Units) {
  EXPECT_EQ(parse_duration("500us"), Duration(500));
  EXPECT_EQ(parse_duration("250ms"), Duration(250ms));
  EXPECT_EQ(parse_duration("30s"), Duration(30s));
  EXPECT_EQ(parse_duration("10min"), Duration(10min));
  EXPECT_EQ(parse_duration("24h"), Duration(24h));
  EXPECT_FALSE(parse_duration("inf").has_value());
  EXPECT_THROW(parse_duration("12parsecs"), Error);
  EXPECT_THROW(parse_duration(""), Error);
}

TEST(ParseConfigText, AllKeys) {
  const auto cfg = parse_config_text(R"(# test config
ttl.L1 = inf
ttl.L2 = 2h
ttl.L3 = 5min
ttl.L4 = 20s
eviction_period = 500ms
spatial_filter = 48.0, 11.0, 48.5, 11.8
archive_dir = /tmp/ldm-archive
max_frames_per_element = 1000
match_threshold_m = 30
match_inflation_m = 80
stationary_window = 3s
stationary_speed_eps = 0.2
)");
  EXPECT_FALSE(cfg.ttl(LdmLayer::L1_Static).has_value());
  EXPECT_EQ(cfg.ttl(LdmLayer::L2_QuasiStatic), Duration(2h));
  EXPECT_EQ(cfg.ttl(LdmLayer::L4_Dynamic), Duration(20s));
  EXPECT_EQ(cfg.eviction_period, Duration(500ms));
  ASSERT_TRUE(cfg.spatial_filter.has_value());
  EXPECT_EQ(*cfg.spatial_filter, (GeoBox{48.0, 11.0, 48.5, 11.8}));
  EXPECT_EQ(cfg.archive_dir, std::filesystem::path("/tmp/ldm-archive"));
  EXPECT_EQ(cfg.max_frames_per_element, 1000u);
  EXPECT_DOUBLE_EQ(cfg.match_threshold_m, 30);
  EXPECT_DOUBLE_EQ(cfg.match_inflation_m, 80);
  EXPECT_EQ(cfg.stationary_window, Duration(3s));
  EXPECT_DOUBLE_EQ(cfg.stationary_speed_eps, 0.2);
}

TEST(ParseConfigText, UnknownKeyRejected) {
  EXPECT_EQ(code_of([] { parse_config_text("colour = blue\n"); }), ErrorCode::InvalidConfig);
}

TEST(ParseConfigText, ResultIsValidated) {
  EXPECT_EQ(code_of([] { parse_config_text("ttl.L4 = 1s\neviction_period = 2s\n"); }), ErrorCode::InvalidConfig);
}

TEST(ParseConfigText, EmptyKeepsDefaults) { EXPECT_EQ(parse_config_text("\n# nothing\n"), LdmConfig{}); }

}  // namespace
}  // namespace ldm
