#pragma once

// Real-time input: newline-delimited JSON envelopes over TCP, a timed
// scenario replay driver, and a background eviction timer.
//
// Wire line:     {"type":"cpm"|"openlabel","payload":{...}}
// Scenario line: {"offset_ms":N,"type":...,"payload":{...}}
// Reply line:    {"ok":true,"committed":{...}} or {"ok":false,"error":"..."}

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include <nlohmann/json.hpp>

#include "ldm/ldm.hpp"

namespace ldm::feed {

enum class MessageType { Cpm, OpenLabel };

std::string_view to_string(MessageType t) noexcept;

struct FeedEnvelope {
  MessageType type = MessageType::Cpm;
  nlohmann::json payload;
  /// Provenance only; store time comes from the payload.
  Timestamp recv_time{};
};

/// Throws SyntaxError or InvalidMessage.
FeedEnvelope parse_envelope(std::string_view line, Timestamp recv_time);
FeedEnvelope parse_envelope(const nlohmann::json& doc, Timestamp recv_time);

/// Converts (for CPM) and commits one envelope. Throws any domain error.
CommitCounts dispatch(const FeedEnvelope& envelope, Ldm& ldm);

struct LineResult {
  bool ok = false;
  CommitCounts committed;
  std::string error;
};

/// Parses and dispatches one wire line; never throws for bad input.
LineResult handle_line(std::string_view line, Ldm& ldm, Timestamp recv_time);

/// One-line JSON reply, without the trailing newline.
std::string reply_line(const LineResult& r);

inline constexpr std::size_t kMaxLineBytes = 1 << 20;

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

/// Parses "host:port"; throws InvalidArgument.
Endpoint parse_endpoint(std::string_view text);

class Listener {
 public:
  /// Called after every line with the line, its handling latency and outcome.
  /// May run concurrently from several connection threads.
  using LineHook =
      std::function<void(std::string_view line, std::chrono::nanoseconds latency, const LineResult& result)>;

  /// Binds and starts accepting; port 0 picks an ephemeral port. Throws BindError.
  Listener(Ldm& ldm, Endpoint endpoint, LineHook hook = {});
  ~Listener();

  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  [[nodiscard]] std::uint16_t port() const noexcept { return port_; }
  [[nodiscard]] std::uint64_t lines_handled() const noexcept { return lines_.load(); }

  /// Stops accepting, lets every connection finish the line in progress,
  /// then joins all threads. Idempotent.
  void stop();

 private:
  struct Connection {
    std::thread thread;
    std::atomic<bool> done{false};
  };

  Ldm& ldm_;
  LineHook hook_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> lines_{0};
  std::thread acceptor_;
  std::mutex conns_mutex_;
  std::list<std::unique_ptr<Connection>> conns_;

  void accept_loop();
  void serve_connection(int fd);
  void reap_finished();
};

struct ReplaySummary {
  std::size_t messages = 0;
  std::size_t committed = 0;
  std::size_t errors = 0;
  std::chrono::milliseconds wall{0};
};

inline constexpr double kAsFastAsPossible = std::numeric_limits<double>::infinity();

/// Commits scenario lines in order, sleeping until offset/speed after the
/// start. Per-line errors are counted and skipped. Throws InvalidArgument
/// for speed <= 0.
ReplaySummary replay(std::istream& scenario, double speed, Ldm& ldm);
/// Throws FileError when the file cannot be opened.
ReplaySummary replay(const std::filesystem::path& file, double speed, Ldm& ldm);

enum class EvictionClock {
  /// Evict against the system clock.
  Wall,
  /// Evict against the newest committed payload timestamp.
  Data,
};

/// Calls Ldm::evict every config().eviction_period on a background thread.
class PeriodicEvictor {
 public:
  /// `on_evict` sees each eviction instant after it has been applied.
  PeriodicEvictor(Ldm& ldm, EvictionClock clock, std::function<void(Timestamp)> on_evict = {});
  ~PeriodicEvictor();

  PeriodicEvictor(const PeriodicEvictor&) = delete;
  PeriodicEvictor& operator=(const PeriodicEvictor&) = delete;

  void stop();
  [[nodiscard]] std::uint64_t runs() const noexcept { return runs_.load(); }

 private:
  Ldm& ldm_;
  EvictionClock clock_;
  std::function<void(Timestamp)> on_evict_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::atomic<std::uint64_t> runs_{0};
  std::thread thread_;
};

}  // namespace ldm::feed
