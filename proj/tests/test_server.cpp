#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

#include "helpers.hpp"
#include "reachkin/error.hpp"
#include "reachkin/ingest/format.hpp"
#include "reachkin/ingest/server.hpp"
#include "reachkin/ingest/synth.hpp"

using namespace reachkin;
using namespace reachkin::ingest;
using namespace std::chrono_literals;

namespace {

/// Collects sessions delivered by the server and waits for a given count.
struct Collector {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::pair<SessionFile, ConnectionStats>> got;

  SessionSink sink() {
    return [this](SessionFile s, ConnectionStats st) {
      std::lock_guard lk(mu);
      got.emplace_back(std::move(s), st);
      cv.notify_all();
    };
  }
  bool wait_for(std::size_t n, std::chrono::milliseconds limit = 10s) {
    std::unique_lock lk(mu);
    return cv.wait_for(lk, limit, [&] { return got.size() >= n; });
  }
};

StreamRecord q(const char* dev, std::uint64_t seq) {
  StreamRecord r;
  r.kind = RecordKind::Quaternion;
  r.device = dev;
  r.seq = seq;
  r.t_ms = 50.0 * static_cast<double>(seq);
  r.payload = {1, 0, 0, 0};
  return r;
}

SessionFile small_session() {
  SynthConfig c;
  c.task = sessions::task_by_id(3);
  c.seed = 9;
  c.imu = c.emg = c.impulses = false;
  return synth_session(c).session;
}

/// Raw client that keeps the connection open until closed.
class RawClient {
 public:
  explicit RawClient(std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  }
  ~RawClient() { ::close(fd_); }
  void send(const std::string& text) { REQUIRE(::send(fd_, text.data(), text.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(text.size())); }

 private:
  int fd_ = -1;
};

}  // namespace

TEST_CASE("reorder buffer") {
  SUBCASE("local shuffles come out in sequence order") {
    std::mt19937_64 rng(111);
    std::vector<StreamRecord> recs;
    for (std::uint64_t k = 0; k < 200; ++k) recs.push_back(q("a", k));
    for (std::size_t b = 0; b < recs.size(); b += 8) {
      std::shuffle(recs.begin() + static_cast<std::ptrdiff_t>(b),
                   recs.begin() + static_cast<std::ptrdiff_t>(std::min(b + 8, recs.size())), rng);
    }
    ReorderBuffer buf(16);
    std::vector<std::uint64_t> out;
    for (auto& r : recs)
      for (auto& o : buf.push(r)) out.push_back(o.seq);
    for (auto& o : buf.flush()) out.push_back(o.seq);
    REQUIRE(out.size() == 200);
    CHECK(std::is_sorted(out.begin(), out.end()));
  }
  SUBCASE("holds up to capacity per device") {
    ReorderBuffer buf(2);
    CHECK(buf.push(q("a", 5)).empty());
    CHECK(buf.push(q("b", 1)).empty());
    CHECK(buf.push(q("a", 3)).empty());
    const auto out = buf.push(q("a", 4));
    REQUIRE(out.size() == 1);
    CHECK(out[0].seq == 3);
    CHECK(buf.flush().size() == 3);
  }
  SUBCASE("a pending duplicate is dropped") {
    ReorderBuffer buf(4);
    buf.push(q("a", 1));
    buf.push(q("a", 1));
    CHECK(buf.flush().size() == 1);
  }
}

TEST_CASE("loopback ingest") {
  Collector col;
  ServerConfig cfg;
  cfg.idle_timeout = 2000ms;
  IngestServer server(cfg, col.sink());
  server.start();
  REQUIRE(server.port() != 0);

  const SessionFile s = small_session();

  SUBCASE("in-order stream equals the file") {
    send_lines("127.0.0.1", server.port(), session_lines(s));
    REQUIRE(col.wait_for(1));
    CHECK(col.got[0].first == s);
    CHECK(col.got[0].second.terminated);
    CHECK(col.got[0].second.records == s.records.size());
    CHECK(col.got[0].second.malformed == 0);
  }
  SUBCASE("duplicate sequence numbers are dropped and counted") {
    auto lines = session_lines(s);
    lines.insert(lines.end() - 1, lines[lines.size() - 2]);  // repeat the last record
    lines.insert(lines.end() - 1, lines[lines.size() / 2]);  // and one from the middle
    send_lines("127.0.0.1", server.port(), lines);
    REQUIRE(col.wait_for(1));
    CHECK(col.got[0].second.duplicates >= 1);
    CHECK(col.got[0].first.duplicates == col.got[0].second.duplicates);
    auto got = col.got[0].first;
    got.duplicates = 0;
    CHECK(got == s);
  }
  SUBCASE("malformed lines are counted and the connection kept") {
    auto lines = session_lines(s);
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(lines.size() / 2), "Q chest notanumber 0 1 0 0 0");
    lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(lines.size() / 3), "garbage");
    send_lines("127.0.0.1", server.port(), lines);
    REQUIRE(col.wait_for(1));
    CHECK(col.got[0].second.malformed == 2);
    CHECK(col.got[0].second.terminated);
    CHECK(col.got[0].first == s);
  }
  SUBCASE("concurrent connections are independent sessions") {
    std::vector<std::thread> clients;
    for (int k = 0; k < 6; ++k) {
      clients.emplace_back([&, k] {
        SessionFile mine = s;
        mine.header["subject"] = "S" + std::to_string(k);
        send_lines("127.0.0.1", server.port(), session_lines(mine));
      });
    }
    for (auto& t : clients) t.join();
    REQUIRE(col.wait_for(6));
    std::vector<std::string> subjects;
    for (auto& [sess, st] : col.got) {
      subjects.push_back(sess.header.at("subject"));
      CHECK(sess.records == s.records);
    }
    std::sort(subjects.begin(), subjects.end());
    CHECK(subjects == std::vector<std::string>{"S0", "S1", "S2", "S3", "S4", "S5"});
    CHECK(server.sessions_completed() == 6);
  }
  server.stop();
}

TEST_CASE("idle timeout closes a silent connection") {
  Collector col;
  ServerConfig cfg;
  cfg.idle_timeout = 150ms;
  IngestServer server(cfg, col.sink());
  server.start();
  {
    RawClient c(server.port());
    c.send("# reachkin/1\nQ a 0 0 1 0 0 0\nQ a 1 50 1 0 0 0\n");
    REQUIRE(col.wait_for(1, 5s));
  }
  CHECK(col.got[0].second.timed_out);
  CHECK_FALSE(col.got[0].second.terminated);
  CHECK(col.got[0].first.records.size() == 2);
  server.stop();
}

TEST_CASE("unterminated connection still yields its records") {
  Collector col;
  IngestServer server(ServerConfig{}, col.sink());
  server.start();
  send_lines("127.0.0.1", server.port(), {"# reachkin/1", "Q a 0 0 1 0 0 0", "Q a 2 100 1 0 0 0"});
  REQUIRE(col.wait_for(1));
  CHECK_FALSE(col.got[0].second.terminated);
  CHECK_FALSE(col.got[0].second.timed_out);
  CHECK(col.got[0].first.gaps == std::vector<Gap>{{"a", 1, 1}});
  server.stop();
}

TEST_CASE("port already in use") {
  IngestServer a(ServerConfig{}, nullptr);
  a.start();
  ServerConfig cfg;
  cfg.port = a.port();
  IngestServer b(cfg, nullptr);
  CHECK_THROWS_AS(b.start(), IoError);
  a.stop();
  CHECK_THROWS_AS(send_lines("127.0.0.1", cfg.port, {"x"}), IoError);
}
