#include "ldm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <vector>

#include "ldm/error.hpp"

namespace ldm {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidConfig, std::string(key) + ": not a number: " + std::string(text));
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::optional<Duration> parse_duration(std::string_view text) {
  text = trim(text);
  if (text == "inf") return std::nullopt;
  static constexpr std::pair<std::string_view, std::int64_t> kUnits[] = {
      {"us", 1}, {"ms", 1'000}, {"min", 60'000'000}, {"s", 1'000'000}, {"h", 3'600'000'000}};
  for (const auto& [suffix, scale] : kUnits) {
    if (text.size() > suffix.size() && text.ends_with(suffix)) {
      const auto digits = text.substr(0, text.size() - suffix.size());
      const double v = parse_number("duration", digits);
      return Duration{static_cast<std::int64_t>(std::llround(v * static_cast<double>(scale)))};
    }
  }
  throw Error(ErrorCode::InvalidConfig, "duration needs a unit (us, ms, s, min, h) or inf: " + std::string(text));
}

void validate_config(const LdmConfig& cfg) {
  std::optional<Duration> min_finite;
  for (const auto& [layer, ttl] : cfg.ttl_per_layer) {
    if (!ttl) continue;
    if (ttl->count() <= 0) {
      throw Error(ErrorCode::InvalidConfig, "ttl." + std::string(to_string(layer)) + " must be > 0");
    }
    min_finite = min_finite ? std::min(*min_finite, *ttl) : *ttl;
  }
  if (cfg.eviction_period.count() <= 0) throw Error(ErrorCode::InvalidConfig, "eviction_period must be > 0");
  if (min_finite && cfg.eviction_period > *min_finite) {
    throw Error(ErrorCode::InvalidConfig, "eviction_period exceeds the smallest finite ttl");
  }
  if (cfg.spatial_filter) {
    const auto& b = *cfg.spatial_filter;
    if (!(b.min_lat <= b.max_lat && b.min_lon <= b.max_lon && b.min_lat >= -90.0 && b.max_lat <= 90.0 &&
          b.min_lon >= -180.0 && b.max_lon <= 180.0)) {
      throw Error(ErrorCode::InvalidConfig, "spatial_filter is not a valid lat/lon box");
    }
  }
  if (cfg.max_frames_per_element && *cfg.max_frames_per_element == 0) {
    throw Error(ErrorCode::InvalidConfig, "max_frames_per_element must be > 0");
  }
  if (!(cfg.match_threshold_m > 0.0)) throw Error(ErrorCode::InvalidConfig, "match_threshold_m must be > 0");
  if (!(cfg.match_inflation_m >= cfg.match_threshold_m)) {
    throw Error(ErrorCode::InvalidConfig, "match_inflation_m must be >= match_threshold_m");
  }
  if (cfg.stationary_window.count() <= 0) throw Error(ErrorCode::InvalidConfig, "stationary_window must be > 0");
  if (!(cfg.stationary_speed_eps >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "stationary_speed_eps must be >= 0");
  }
}

LdmConfig parse_config_text(std::string_view text) {
  LdmConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));

    if (key.starts_with("ttl.")) {
      auto layer = parse_layer(key.substr(4));
      if (!layer) throw Error(ErrorCode::InvalidConfig, "unknown layer in " + std::string(key));
      cfg.ttl_per_layer[*layer] = parse_duration(value);
    } else if (key == "eviction_period") {
      auto d = parse_duration(value);
      if (!d) throw Error(ErrorCode::InvalidConfig, "eviction_period must be finite");
      cfg.eviction_period = *d;
    } else if (key == "spatial_filter") {
      if (value == "none") {
        cfg.spatial_filter.reset();
        continue;
      }
      auto parts = split(value, ',');
      if (parts.size() != 4) {
        throw Error(ErrorCode::InvalidConfig, "spatial_filter: expected min_lat,min_lon,max_lat,max_lon");
      }
      cfg.spatial_filter = GeoBox{parse_number(key, parts[0]), parse_number(key, parts[1]),
                                  parse_number(key, parts[2]), parse_number(key, parts[3])};
    } else if (key == "archive_dir") {
      cfg.archive_dir = std::filesystem::path(std::string(value));
    } else if (key == "max_frames_per_element") {
      const double v = parse_number(key, value);
      if (v < 1.0 || v != std::floor(v)) {
        throw Error(ErrorCode::InvalidConfig, "max_frames_per_element must be a positive integer");
      }
      cfg.max_frames_per_element = static_cast<std::size_t>(v);
    } else if (key == "match_threshold_m") {
      cfg.match_threshold_m = parse_number(key, value);
    } else if (key == "match_inflation_m") {
      cfg.match_inflation_m = parse_number(key, value);
    } else if (key == "stationary_window") {
      auto d = parse_duration(value);
      if (!d) throw Error(ErrorCode::InvalidConfig, "stationary_window must be finite");
      cfg.stationary_window = *d;
    } else if (key == "stationary_speed_eps") {
      cfg.stationary_speed_eps = parse_number(key, value);
    } else {
      throw Error(ErrorCode::InvalidConfig, "unknown key: " + std::string(key));
    }
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace ldm
