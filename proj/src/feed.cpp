#include "ldm/feed.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>

#include "ldm/cpm.hpp"
#include "ldm/error.hpp"
#include "ldm/ingest.hpp"
#include "ldm/openlabel.hpp"

namespace ldm::feed {

using json = nlohmann::json;

std::string_view to_string(MessageType t) noexcept { return t == MessageType::Cpm ? "cpm" : "openlabel"; }

FeedEnvelope parse_envelope(const json& doc, Timestamp recv_time) {
  if (!doc.is_object()) throw Error(ErrorCode::InvalidMessage, "envelope: expected object");
  auto type = doc.find("type");
  if (type == doc.end() || !type->is_string()) throw Error(ErrorCode::InvalidMessage, "type: missing");
  auto payload = doc.find("payload");
  if (payload == doc.end() || !payload->is_object()) throw Error(ErrorCode::InvalidMessage, "payload: missing");

  FeedEnvelope env;
  const auto t = type->get<std::string>();
  if (t == "cpm") {
    env.type = MessageType::Cpm;
    if (!payload->contains("station_id")) throw Error(ErrorCode::InvalidMessage, "payload: not a cpm message");
  } else if (t == "openlabel") {
    env.type = MessageType::OpenLabel;
    if (!payload->contains("openlabel") && !payload->contains("vcd")) {
      throw Error(ErrorCode::InvalidMessage, "payload: not an openlabel document");
    }
  } else {
    throw Error(ErrorCode::InvalidMessage, "type: unknown message type " + t);
  }
  env.payload = *payload;
  env.recv_time = recv_time;
  return env;
}

FeedEnvelope parse_envelope(std::string_view line, Timestamp recv_time) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError, "byte " + std::to_string(e.byte));
  }
  return parse_envelope(doc, recv_time);
}

CommitCounts dispatch(const FeedEnvelope& env, Ldm& ldm) {
  if (env.type == MessageType::Cpm) return ldm.add_cpm(parse_cpm(env.payload));
  return ldm.add_objects(parse_openlabel(env.payload), FrameSource::LocalPerception);
}

namespace {

LineResult run_guarded(const std::function<CommitCounts()>& f) {
  LineResult r;
  try {
    r.committed = f();
    r.ok = true;
  } catch (const Error& e) {
    r.error = e.what();
  } catch (const std::exception& e) {
    // Anything else (json type errors, allocation) is reported, never fatal.
    r.error = std::string("InvalidMessage: ") + e.what();
  }
  return r;
}

Timestamp wall_now() { return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now()); }

}  // namespace

LineResult handle_line(std::string_view line, Ldm& ldm, Timestamp recv_time) {
  return run_guarded([&] { return dispatch(parse_envelope(line, recv_time), ldm); });
}

std::string reply_line(const LineResult& r) {
  nlohmann::ordered_json j;
  j["ok"] = r.ok;
  if (r.ok) {
    j["committed"] = {{"elements", r.committed.elements},
                      {"frames", r.committed.frames},
                      {"relations", r.committed.relations}};
  } else {
    j["error"] = r.error;
  }
  // Invalid UTF-8 echoed from a bad line must not throw here.
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error(ErrorCode::InvalidArgument, "endpoint must be host:port");
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  if (ep.host.empty()) ep.host = "0.0.0.0";
  const auto port_text = std::string(text.substr(colon + 1));
  std::size_t used = 0;
  long port = -1;
  try {
    port = std::stol(port_text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port_text.size() || port < 0 || port > 65535) {
    throw Error(ErrorCode::InvalidArgument, "bad port '" + port_text + "'");
  }
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

// ---- Listener ------------------------------------------------------------------

Listener::Listener(Ldm& ldm, Endpoint endpoint, LineHook hook) : ldm_(ldm), hook_(std::move(hook)) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const auto port_str = std::to_string(endpoint.port);
  if (int rc = ::getaddrinfo(endpoint.host.c_str(), port_str.c_str(), &hints, &res); rc != 0) {
    throw Error(ErrorCode::BindError, endpoint.host + ": " + ::gai_strerror(rc));
  }
  std::string failure = "no address";
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      failure = std::strerror(errno);
      continue;
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    failure = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (listen_fd_ < 0) {
    throw Error(ErrorCode::BindError, endpoint.host + ":" + port_str + ": " + failure);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

Listener::~Listener() { stop(); }

void Listener::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  std::lock_guard lock(conns_mutex_);
  for (auto& c : conns_) {
    if (c->thread.joinable()) c->thread.join();
  }
  conns_.clear();
}

void Listener::reap_finished() {
  std::lock_guard lock(conns_mutex_);
  for (auto it = conns_.begin(); it != conns_.end();) {
    if ((*it)->done.load()) {
      (*it)->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void Listener::accept_loop() {
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 50);
    if (rc <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    reap_finished();
    auto conn = std::make_unique<Connection>();
    auto* raw = conn.get();
    std::lock_guard lock(conns_mutex_);
    conns_.push_back(std::move(conn));
    raw->thread = std::thread([this, fd, raw] {
      serve_connection(fd);
      raw->done.store(true);
    });
  }
}

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

void Listener::serve_connection(int fd) {
  std::string buffer;
  bool discarding = false;  // inside an over-long line
  char chunk[64 * 1024];
  bool open = true;

  auto respond = [&](const LineResult& r) {
    lines_.fetch_add(1);
    if (!send_all(fd, reply_line(r) + "\n")) open = false;
  };

  while (open && !stopping_.load()) {
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 50);
    if (rc < 0 && errno != EINTR) break;
    if (rc <= 0) continue;
    const auto n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n == 0) break;
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));

    std::size_t start = 0;
    for (;;) {
      const auto nl = buffer.find('\n', start);
      if (nl == std::string::npos) break;
      std::string_view line(buffer.data() + start, nl - start);
      start = nl + 1;
      if (discarding) {
        discarding = false;
        continue;
      }
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      if (line.size() > kMaxLineBytes) {
        respond({false, {}, "InvalidMessage: line exceeds 1 MiB"});
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto result = handle_line(line, ldm_, wall_now());
      const auto latency = std::chrono::steady_clock::now() - t0;
      if (hook_) hook_(line, std::chrono::duration_cast<std::chrono::nanoseconds>(latency), result);
      respond(result);
      if (!open) break;
    }
    buffer.erase(0, start);
    if (buffer.size() > kMaxLineBytes) {
      if (!discarding) respond({false, {}, "InvalidMessage: line exceeds 1 MiB"});
      discarding = true;
      buffer.clear();
    }
  }
  ::close(fd);
}

// ---- Replay --------------------------------------------------------------------

ReplaySummary replay(std::istream& scenario, double speed, Ldm& ldm) {
  if (!(speed > 0.0)) throw Error(ErrorCode::InvalidArgument, "speed must be positive");
  ReplaySummary summary;
  const auto start = std::chrono::steady_clock::now();
  std::int64_t last_offset = 0;
  std::string line;
  while (std::getline(scenario, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++summary.messages;
    const auto r = run_guarded([&]() -> CommitCounts {
      json doc;
      try {
        doc = json::parse(line);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::SyntaxError, "byte " + std::to_string(e.byte));
      }
      if (!doc.is_object() || !doc.contains("offset_ms") || !doc["offset_ms"].is_number_integer()) {
        throw Error(ErrorCode::InvalidMessage, "offset_ms: missing");
      }
      const auto offset = doc["offset_ms"].get<std::int64_t>();
      if (offset < last_offset) throw Error(ErrorCode::InvalidMessage, "offset_ms: decreasing");
      last_offset = offset;
      if (std::isfinite(speed)) {
        const auto due = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                     std::chrono::duration<double, std::milli>(static_cast<double>(offset) / speed));
        std::this_thread::sleep_until(due);
      }
      return dispatch(parse_envelope(doc, wall_now()), ldm);
    });
    if (r.ok) {
      ++summary.committed;
    } else {
      ++summary.errors;
    }
  }
  summary.wall =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return summary;
}

ReplaySummary replay(const std::filesystem::path& file, double speed, Ldm& ldm) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileError, file.string() + ": " + std::strerror(errno));
  return replay(in, speed, ldm);
}

// ---- Eviction timer ------------------------------------------------------------

PeriodicEvictor::PeriodicEvictor(Ldm& ldm, EvictionClock clock, std::function<void(Timestamp)> on_evict)
    : ldm_(ldm), clock_(clock), on_evict_(std::move(on_evict)) {
  thread_ = std::thread([this] {
    std::unique_lock lock(mutex_);
    while (!stopping_) {
      const auto period = ldm_.config().eviction_period;
      if (cv_.wait_for(lock, period, [this] { return stopping_; })) break;
      lock.unlock();
      const Timestamp now = clock_ == EvictionClock::Wall ? wall_now() : ldm_.store().stats().last_update;
      try {
        ldm_.evict(now);
        if (on_evict_) on_evict_(now);
      } catch (const std::exception& e) {
        std::cerr << "eviction failed: " << e.what() << '\n';
      }
      runs_.fetch_add(1);
      lock.lock();
    }
  });
}

PeriodicEvictor::~PeriodicEvictor() { stop(); }

void PeriodicEvictor::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ldm::feed
