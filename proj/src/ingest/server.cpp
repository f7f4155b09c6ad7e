#include "reachkin/ingest/server.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "reachkin/error.hpp"

namespace reachkin::ingest {

namespace {

std::string errno_text() { return std::strerror(errno); }

std::string_view strip_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

std::vector<StreamRecord> ReorderBuffer::push(StreamRecord r) {
  auto& dev = pending_[r.device];
  const std::uint64_t seq = r.seq;
  dev.emplace(seq, std::move(r));  // a pending duplicate is dropped here
  std::vector<StreamRecord> out;
  while (dev.size() > capacity_) {
    out.push_back(std::move(dev.begin()->second));
    dev.erase(dev.begin());
  }
  return out;
}

std::vector<StreamRecord> ReorderBuffer::flush() {
  std::vector<StreamRecord> out;
  for (auto& [device, recs] : pending_) {
    for (auto& [seq, r] : recs) out.push_back(std::move(r));
  }
  pending_.clear();
  return out;
}

IngestServer::IngestServer(ServerConfig config, SessionSink sink) : config_(std::move(config)), sink_(std::move(sink)) {}

IngestServer::~IngestServer() { stop(); }

void IngestServer::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError("socket: " + errno_text());
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(config_.port);
  if (::inet_pton(AF_INET, config_.bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("bad bind address " + config_.bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 64) < 0) {
    const std::string msg = errno_text();
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("cannot listen on port " + std::to_string(config_.port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  queue_closed_ = false;
  assembler_ = std::thread([this] { assembler_loop(); });
  acceptor_ = std::thread([this] { accept_loop(); });
}

void IngestServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  {
    std::lock_guard lk(readers_mu_);
    for (const auto& [id, fd] : open_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  for (auto& t : readers_) {
    if (t.joinable()) t.join();
  }
  readers_.clear();
  {
    std::lock_guard lk(queue_mu_);
    queue_closed_ = true;
  }
  queue_cv_.notify_all();
  if (assembler_.joinable()) assembler_.join();
}

void IngestServer::accept_loop() {
  std::uint64_t next_id = 0;
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (!running_) {
      ::close(fd);
      break;
    }
    timeval tv{};
    const auto ms = config_.idle_timeout.count();
    tv.tv_sec = static_cast<time_t>(ms / 1000);
    tv.tv_usec = static_cast<suseconds_t>((ms % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    const std::uint64_t id = next_id++;
    std::lock_guard lk(readers_mu_);
    open_fds_[id] = fd;
    readers_.emplace_back([this, id, fd] { reader(id, fd); });
  }
}

void IngestServer::post(Event e) {
  {
    std::lock_guard lk(queue_mu_);
    queue_.push_back(std::move(e));
  }
  queue_cv_.notify_one();
}

void IngestServer::reader(std::uint64_t id, int fd) {
  std::string buf;
  char chunk[8192];
  bool terminated = false, timed_out = false;

  auto handle = [&](std::string_view line) {
    line = strip_cr(line);
    if (line.empty()) return;
    if (line == kEndOfSession) {
      terminated = true;
      return;
    }
    Event e{};
    e.connection = id;
    if (line.front() == '#') {
      if (line.substr(0, 2 + kFormatName.size()) == "# " + std::string(kFormatName)) {
        try {
          const auto [major, minor] = parse_version_line(line);
          e.type = Event::Type::Version;
          e.key = std::to_string(major);
          e.value = std::to_string(minor);
        } catch (const DataError&) {
          e.type = Event::Type::Malformed;
        }
      } else {
        std::string_view kv = strip_cr(line.substr(1));
        const auto sp = kv.find_first_of(" \t");
        e.type = Event::Type::Header;
        e.key = std::string(kv.substr(0, sp));
        if (sp != std::string_view::npos) e.value = std::string(strip_cr(kv.substr(sp)));
      }
    } else {
      try {
        e.record = parse_record(line);
        e.type = Event::Type::Record;
      } catch (const DataError&) {
        e.type = Event::Type::Malformed;
      }
    }
    post(std::move(e));
  };

  while (!terminated) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) timed_out = true;
      break;
    }
    if (n == 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; !terminated && (nl = buf.find('\n', start)) != std::string::npos; start = nl + 1) {
      handle(std::string_view(buf).substr(start, nl - start));
    }
    buf.erase(0, start);
  }
  if (!terminated && !buf.empty()) handle(buf);

  {
    std::lock_guard lk(readers_mu_);
    open_fds_.erase(id);
  }
  ::close(fd);
  Event end{};
  end.type = Event::Type::End;
  end.connection = id;
  end.terminated = terminated;
  end.timed_out = timed_out;
  post(std::move(end));
}

void IngestServer::assembler_loop() {
  struct Conn {
    SessionAssembler assembler;
    ReorderBuffer reorder;
    ConnectionStats stats;
    std::uint64_t submitted = 0;
  };
  std::map<std::uint64_t, Conn> conns;

  auto feed = [](Conn& c, std::vector<StreamRecord> recs) {
    for (auto& r : recs) c.assembler.add(std::move(r));
  };

  for (;;) {
    Event e;
    {
      std::unique_lock lk(queue_mu_);
      queue_cv_.wait(lk, [&] { return !queue_.empty() || queue_closed_; });
      if (queue_.empty()) break;
      e = std::move(queue_.front());
      queue_.pop_front();
    }
    auto [it, fresh] = conns.try_emplace(e.connection);
    Conn& c = it->second;
    if (fresh) c.reorder = ReorderBuffer(config_.reorder_window);
    switch (e.type) {
      case Event::Type::Version:
        ++c.stats.lines;
        c.assembler.set_version(std::stoi(e.key), std::stoi(e.value));
        break;
      case Event::Type::Header:
        ++c.stats.lines;
        c.assembler.set_header(std::move(e.key), std::move(e.value));
        break;
      case Event::Type::Malformed:
        ++c.stats.lines;
        ++c.stats.malformed;
        break;
      case Event::Type::Record:
        ++c.stats.lines;
        ++c.stats.records;
        ++c.submitted;
        feed(c, c.reorder.push(std::move(e.record)));
        break;
      case Event::Type::End: {
        feed(c, c.reorder.flush());
        SessionFile s = c.assembler.finish();
        // Duplicates caught while still pending never reach the assembler.
        s.duplicates = c.submitted - s.records.size();
        c.stats.duplicates = s.duplicates;
        c.stats.terminated = e.terminated;
        c.stats.timed_out = e.timed_out;
        ConnectionStats stats = c.stats;
        conns.erase(it);
        ++completed_;
        if (sink_) sink_(std::move(s), stats);
        break;
      }
    }
  }
}

void send_lines(const std::string& host, std::uint16_t port, const std::vector<std::string>& lines) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw IoError("socket: " + errno_text());
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw IoError("bad address " + host);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    const std::string msg = errno_text();
    ::close(fd);
    throw IoError("connect to " + host + ":" + std::to_string(port) + ": " + msg);
  }
  std::string payload;
  for (const auto& l : lines) {
    payload += l;
    payload += '\n';
  }
  std::size_t off = 0;
  while (off < payload.size()) {
    const ssize_t n = ::send(fd, payload.data() + off, payload.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      const std::string msg = errno_text();
      ::close(fd);
      throw IoError("send: " + msg);
    }
    off += static_cast<std::size_t>(n);
  }
  ::shutdown(fd, SHUT_WR);
  char sink[256];
  while (::recv(fd, sink, sizeof sink, 0) > 0) {
  }
  ::close(fd);
}

std::vector<std::string> session_lines(const SessionFile& s) {
  std::vector<std::string> out;
  out.push_back("# " + std::string(kFormatName) + "/" + std::to_string(s.major) + "." + std::to_string(s.minor));
  for (const auto& [k, v] : s.header) out.push_back("# " + k + (v.empty() ? "" : " ") + v);
  for (const auto& r : s.records) out.push_back(format_record(r));
  out.emplace_back(kEndOfSession);
  return out;
}

}  // namespace reachkin::ingest
