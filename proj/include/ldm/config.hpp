#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "ldm/core_model.hpp"

namespace ldm {

struct GeoBox {
  double min_lat = -90.0;
  double min_lon = -180.0;
  double max_lat = 90.0;
  double max_lon = 180.0;

  [[nodiscard]] bool contains(double lat, double lon) const noexcept {
    return lat >= min_lat && lat <= max_lat && lon >= min_lon && lon <= max_lon;
  }
  bool operator==(const GeoBox&) const = default;
};

struct LdmConfig {
  /// nullopt is an infinite TTL.
  std::map<LdmLayer, std::optional<Duration>> ttl_per_layer{
      {LdmLayer::L1_Static, std::nullopt},
      {LdmLayer::L2_QuasiStatic, std::chrono::hours{24}},
      {LdmLayer::L3_Transient, std::chrono::minutes{10}},
      {LdmLayer::L4_Dynamic, std::chrono::seconds{30}},
  };
  Duration eviction_period = std::chrono::seconds{1};
  std::optional<GeoBox> spatial_filter;
  std::optional<std::filesystem::path> archive_dir;
  std::optional<std::size_t> max_frames_per_element;

  // Map-matching and stationary-query defaults.
  double match_threshold_m = 50.0;
  double match_inflation_m = 100.0;
  Duration stationary_window = std::chrono::seconds{5};
  double stationary_speed_eps = 0.5;

  [[nodiscard]] std::optional<Duration> ttl(LdmLayer layer) const {
    auto it = ttl_per_layer.find(layer);
    return it == ttl_per_layer.end() ? std::nullopt : it->second;
  }

  bool operator==(const LdmConfig&) const = default;
};

/// Throws InvalidConfig naming the first offending field.
void validate_config(const LdmConfig& cfg);

/// Parses the `key = value` configuration format (see docs/formats.md).
/// Unset keys keep their defaults. Throws InvalidConfig.
LdmConfig parse_config_text(std::string_view text);

/// Parses "250ms", "30s", "10min", "24h", "500us" or "inf".
std::optional<Duration> parse_duration(std::string_view text);

}  // namespace ldm
