#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "reachkin/ingest/format.hpp"

namespace reachkin::ingest {

inline constexpr std::size_t kReorderWindow = 16;

/// Per-device reorder buffer: holds up to `capacity` records and releases the
/// lowest sequence number once full, so local shuffles come out in order.
class ReorderBuffer {
 public:
  explicit ReorderBuffer(std::size_t capacity = kReorderWindow) : capacity_(capacity) {}
  /// Records released by this push, in sequence order.
  std::vector<StreamRecord> push(StreamRecord r);
  std::vector<StreamRecord> flush();

 private:
  std::size_t capacity_;
  std::map<std::string, std::map<std::uint64_t, StreamRecord>> pending_;
};

struct ConnectionStats {
  std::uint64_t lines = 0;
  std::uint64_t records = 0;
  std::uint64_t malformed = 0;
  std::uint64_t duplicates = 0;
  bool terminated = false;  // saw the end-of-session line
  bool timed_out = false;
};

/// Called once per connection, from the assembler thread.
using SessionSink = std::function<void(SessionFile, ConnectionStats)>;

struct ServerConfig {
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  std::string bind_address = "127.0.0.1";
  std::chrono::milliseconds idle_timeout{5000};
  std::size_t reorder_window = kReorderWindow;
};

/// Line-protocol ingest over TCP, one session per connection. Each connection
/// gets a reader thread; all of them feed one ordered queue drained by a
/// single assembler thread.
class IngestServer {
 public:
  IngestServer(ServerConfig config, SessionSink sink);
  ~IngestServer();
  IngestServer(const IngestServer&) = delete;
  IngestServer& operator=(const IngestServer&) = delete;

  /// Binds and starts accepting. Throws IoError when the port is unavailable.
  void start();
  /// Stops accepting, closes open connections and drains the queue.
  void stop();
  std::uint16_t port() const { return port_; }
  std::uint64_t sessions_completed() const { return completed_.load(); }

 private:
  struct Event {
    enum class Type { Header, Version, Record, Malformed, End } type;
    std::uint64_t connection;
    std::string key, value;
    StreamRecord record;
    bool terminated = false;
    bool timed_out = false;
  };

  void accept_loop();
  void reader(std::uint64_t id, int fd);
  void assembler_loop();
  void post(Event e);

  ServerConfig config_;
  SessionSink sink_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> completed_{0};

  std::thread acceptor_;
  std::thread assembler_;
  std::mutex readers_mu_;
  std::vector<std::thread> readers_;
  std::map<std::uint64_t, int> open_fds_;

  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<Event> queue_;
  bool queue_closed_ = false;
};

/// Connects, sends each line followed by '\n' and closes. Throws IoError.
void send_lines(const std::string& host, std::uint16_t port, const std::vector<std::string>& lines);

/// Lines of a session as a client would stream it: version, header, records
/// and the end-of-session terminator.
std::vector<std::string> session_lines(const SessionFile& s);

}  // namespace reachkin::ingest
