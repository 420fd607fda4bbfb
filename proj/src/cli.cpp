#include "ldm/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "ldm/error.hpp"
#include "ldm/feed.hpp"
#include "ldm/ldm.hpp"

namespace ldm {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileError, p.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The --db state directory: an append-only journal of mutating commands,
// replayed on every invocation.
//   {"op":"load-map","file":"maps/N.osm"}
//   {"op":"envelope","envelope":{"type":...,"payload":...}}
//   {"op":"replay","file":"scenarios/N.ndjson"}
//   {"op":"evict","now":us}
class Journal {
 public:
  explicit Journal(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
  }

  void replay_into(Ldm& ldm) {
    const auto path = dir_ / "journal.ndjson";
    if (!fs::exists(path)) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileError, path.string() + ": cannot open");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      ++entries_;
      try {
        apply(json::parse(line), ldm);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::FileError, path.string() + ": corrupt entry at line " + std::to_string(n));
      }
    }
  }

  /// Copies `src` into the state dir and returns the stored relative path.
  std::string keep_copy(const fs::path& src, const std::string& subdir, const std::string& ext) {
    fs::create_directories(dir_ / subdir);
    const auto rel = subdir + "/" + std::to_string(entries_) + ext;
    std::error_code ec;
    fs::copy_file(src, dir_ / rel, fs::copy_options::overwrite_existing, ec);
    if (ec) throw Error(ErrorCode::FileError, src.string() + ": " + ec.message());
    return rel;
  }

  void append(const json& entry) {
    std::lock_guard lock(mutex_);
    std::ofstream out(dir_ / "journal.ndjson", std::ios::binary | std::ios::app);
    out << entry.dump() << '\n';
    if (!out) throw Error(ErrorCode::FileError, (dir_ / "journal.ndjson").string() + ": write failed");
    ++entries_;
  }

  [[nodiscard]] const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::size_t entries_ = 0;
  std::mutex mutex_;

  void apply(const json& e, Ldm& ldm) {
    const auto op = e.at("op").get<std::string>();
    if (op == "load-map") {
      std::ifstream in(dir_ / e.at("file").get<std::string>(), std::ios::binary);
      if (!in) throw Error(ErrorCode::FileError, "journal map copy missing: " + e.at("file").get<std::string>());
      ldm.load_osm(in);
    } else if (op == "envelope") {
      feed::dispatch(feed::parse_envelope(e.at("envelope"), Timestamp{}), ldm);
    } else if (op == "replay") {
      feed::replay(dir_ / e.at("file").get<std::string>(), feed::kAsFastAsPossible, ldm);
    } else if (op == "evict") {
      ldm.evict(from_us(e.at("now").get<std::int64_t>()));
    } else {
      throw Error(ErrorCode::FileError, "journal: unknown op " + op);
    }
  }
};

json counts_json(const CommitCounts& c) {
  return {{"elements", c.elements}, {"frames", c.frames}, {"relations", c.relations}};
}

double parse_speed(const std::string& s) {
  if (s == "inf" || s == "max") return feed::kAsFastAsPossible;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "speed must be positive or 'inf'");
  return v;
}

void print_reports(std::ostream& out, const std::vector<ObjectReport>& rows, bool pretty) {
  if (!pretty) {
    for (const auto& r : rows) out << to_json(r).dump() << '\n';
    return;
  }
  out << std::left << std::setw(8) << "id" << std::setw(24) << "name" << std::setw(20) << "type" << std::setw(6)
      << "layer" << std::setw(14) << "lat" << std::setw(14) << "lon" << std::setw(12) << "distance" << "way\n";
  for (const auto& r : rows) {
    std::ostringstream lat, lon, dist;
    lat << std::fixed << std::setprecision(7);
    lon << std::fixed << std::setprecision(7);
    dist << std::fixed << std::setprecision(2);
    if (r.pose) {
      lat << r.pose->lat;
      lon << r.pose->lon;
    }
    if (r.distance_to_ego) dist << *r.distance_to_ego;
    if (r.distance_to_node) dist << *r.distance_to_node;
    out << std::setw(8) << r.element_id.value << std::setw(24) << r.name << std::setw(20) << r.semantic_type
        << std::setw(6) << to_string(r.layer) << std::setw(14) << lat.str() << std::setw(14) << lon.str()
        << std::setw(12) << dist.str() << (r.matched_way ? std::to_string(*r.matched_way) : "-") << '\n';
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Local dynamic map: layered scene store with map, perception and V2X input", "ldm"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, db_dir;
  app.add_option("--config", config_path, "Configuration file (key = value)");
  app.add_option("--db", db_dir, "State directory; commands are journaled and replayed from it");

  auto* serve = app.add_subcommand("serve", "Run the TCP feed listener with periodic eviction");
  std::string listen = "127.0.0.1:7878", clock = "wall";
  serve->add_option("--listen", listen, "host:port (port 0 picks a free port)");
  serve->add_option("--clock", clock, "Eviction clock")->check(CLI::IsMember({"wall", "data"}));

  auto* load_map = app.add_subcommand("load-map", "Load an OSM XML road map");
  std::string osm_path;
  load_map->add_option("osm", osm_path, "OSM XML file")->required();

  auto* ingest = app.add_subcommand("ingest", "Commit one payload file");
  std::string payload_path, payload_type = "openlabel";
  ingest->add_option("payload", payload_path, "JSON payload file")->required();
  ingest->add_option("--type", payload_type, "Payload kind")->check(CLI::IsMember({"openlabel", "cpm"}));

  auto* replay = app.add_subcommand("replay", "Replay a scenario file");
  std::string scenario_path, speed_text = "inf";
  replay->add_option("scenario", scenario_path, "Scenario file (JSON lines with offset_ms)")->required();
  replay->add_option("--speed", speed_text, "Pacing factor, or 'inf'");

  auto* query = app.add_subcommand("query", "Run a geo-query; prints JSON lines");
  query->require_subcommand(1);
  std::uint64_t ego = 0;
  double radius = 0;
  std::int64_t at_us = 0, node = 0;
  std::size_t k = 1;
  std::string window_text;
  std::optional<double> eps;
  bool pretty = false;
  auto add_at = [&](CLI::App* c) { c->add_option("--at", at_us, "Query instant, microseconds since epoch")->required(); };
  auto add_pretty = [&](CLI::App* c) { c->add_flag("--pretty", pretty, "Human-readable table"); };

  auto* q_within = query->add_subcommand("objects-within", "Objects within a radius of the ego element");
  q_within->add_option("--ego", ego, "Ego element id")->required();
  q_within->add_option("--radius", radius, "Radius in metres")->required();
  add_at(q_within);
  add_pretty(q_within);

  auto* q_way = query->add_subcommand("same-way", "Objects matched to the ego element's way");
  q_way->add_option("--ego", ego, "Ego element id")->required();
  add_at(q_way);
  add_pretty(q_way);

  auto* q_stationary = query->add_subcommand("stationary", "Non-moving objects");
  add_at(q_stationary);
  q_stationary->add_option("--window", window_text, "Look-back window, e.g. 5s");
  q_stationary->add_option("--eps", eps, "Speed threshold in m/s");
  add_pretty(q_stationary);

  auto* q_next = query->add_subcommand("next-nodes", "Next road nodes ahead of the ego element");
  q_next->add_option("--ego", ego, "Ego element id")->required();
  q_next->add_option("--k", k, "Number of nodes");
  add_at(q_next);

  auto* q_near = query->add_subcommand("near-node", "Objects within a radius of a road node");
  q_near->add_option("--node", node, "OSM node id")->required();
  q_near->add_option("--radius", radius, "Radius in metres")->required();
  add_at(q_near);
  add_pretty(q_near);

  auto* exp = app.add_subcommand("export", "Export an interval as an OpenLABEL archive");
  std::int64_t from_us_v = 0, to_us_v = 0;
  std::string out_path;
  exp->add_option("--from", from_us_v, "Interval start, microseconds (inclusive)")->required();
  exp->add_option("--to", to_us_v, "Interval end, microseconds (exclusive)")->required();
  exp->add_option("--out", out_path, "Output file; stdout when omitted");

  auto* info = app.add_subcommand("info", "Print the info field list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    LdmConfig cfg;
    if (!config_path.empty()) cfg = parse_config_text(read_file(config_path));
    Ldm ldm(cfg);

    std::optional<Journal> journal;
    if (!db_dir.empty()) {
      journal.emplace(db_dir);
      journal->replay_into(ldm);
    }

    if (serve->parsed()) {
      const auto ep = feed::parse_endpoint(listen);
      std::mutex journal_mutex;
      feed::Listener listener(ldm, ep, [&](std::string_view line, std::chrono::nanoseconds, const feed::LineResult& r) {
        if (!r.ok || !journal) return;
        json e;
        e["op"] = "envelope";
        e["envelope"] = json::parse(line);
        journal->append(e);
      });
      feed::PeriodicEvictor evictor(ldm, clock == "wall" ? feed::EvictionClock::Wall : feed::EvictionClock::Data,
                                    [&](Timestamp now) {
                                      if (journal) journal->append({{"op", "evict"}, {"now", to_us(now)}});
                                    });
      out << "listening on " << ep.host << ":" << listener.port() << std::endl;
      g_interrupted.store(false);
      auto old_int = std::signal(SIGINT, on_signal);
      auto old_term = std::signal(SIGTERM, on_signal);
      while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      std::signal(SIGINT, old_int);
      std::signal(SIGTERM, old_term);
      listener.stop();
      evictor.stop();
      out << "stopped after " << listener.lines_handled() << " lines" << std::endl;
      return 0;
    }

    if (load_map->parsed()) {
      std::ifstream in(osm_path, std::ios::binary);
      if (!in) throw Error(ErrorCode::FileError, osm_path + ": cannot open");
      const auto result = ldm.load_osm(in);
      for (const auto& w : result.warnings) err << "warning: " << w << '\n';
      if (journal) journal->append({{"op", "load-map"}, {"file", journal->keep_copy(osm_path, "maps", ".osm")}});
      out << json{{"nodes", result.counts.nodes}, {"ways", result.counts.ways}}.dump() << '\n';
      return 0;
    }

    if (ingest->parsed()) {
      json envelope{{"type", payload_type}};
      try {
        envelope["payload"] = json::parse(read_file(payload_path));
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SyntaxError, payload_path + ": byte " + std::to_string(e.byte));
      }
      const auto counts = feed::dispatch(feed::parse_envelope(envelope, Timestamp{}), ldm);
      if (journal) journal->append({{"op", "envelope"}, {"envelope", envelope}});
      out << counts_json(counts).dump() << '\n';
      return 0;
    }

    if (replay->parsed()) {
      const auto summary = feed::replay(fs::path(scenario_path), parse_speed(speed_text), ldm);
      if (journal) {
        journal->append({{"op", "replay"}, {"file", journal->keep_copy(scenario_path, "scenarios", ".ndjson")}});
      }
      out << json{{"messages", summary.messages},
                  {"committed", summary.committed},
                  {"errors", summary.errors},
                  {"wall_ms", summary.wall.count()}}
                 .dump()
          << '\n';
      return 0;
    }

    if (query->parsed()) {
      const Timestamp at = from_us(at_us);
      if (q_within->parsed()) print_reports(out, ldm.objects_within(ElementId{ego}, radius, at), pretty);
      if (q_way->parsed()) print_reports(out, ldm.objects_on_same_way(ElementId{ego}, at), pretty);
      if (q_stationary->parsed()) {
        std::optional<Duration> window;
        if (!window_text.empty()) {
          window = parse_duration(window_text);
          if (!window) throw Error(ErrorCode::InvalidArgument, "window must be finite");
        }
        print_reports(out, ldm.stationary_objects(at, window, eps), pretty);
      }
      if (q_next->parsed()) {
        for (auto id : ldm.next_road_nodes(ElementId{ego}, k, at)) out << id << '\n';
      }
      if (q_near->parsed()) print_reports(out, ldm.objects_near_node(node, radius, at), pretty);
      return 0;
    }

    if (exp->parsed()) {
      const TimeInterval interval{from_us(from_us_v), from_us(to_us_v)};
      if (out_path.empty()) {
        ldm.export_archive(interval, out);
      } else {
        const auto c = ldm.export_archive(interval, fs::path(out_path));
        out << json{{"elements", c.elements}, {"frames", c.frames}, {"relations", c.relations}}.dump() << '\n';
      }
      return 0;
    }

    if (info->parsed()) {
      out << to_json(ldm.get_info()).dump() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace ldm
