#include "reachkin/ingest/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <tuple>

#include "reachkin/error.hpp"

namespace reachkin::ingest {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, const char* what) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    throw DataError(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

void append_double(std::string& out, double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

bool arity_ok(RecordKind k, std::size_t n) {
  switch (k) {
    case RecordKind::Quaternion: return n == 4;
    case RecordKind::Imu: return n == 6 || n == 9 || n == 10;
    case RecordKind::Emg: return n == 8;
    case RecordKind::Impulse: return n >= 1;
    case RecordKind::Marker: return true;
  }
  return false;
}

bool record_less(const StreamRecord& a, const StreamRecord& b) {
  return std::tie(a.t_ms, a.device, a.seq) < std::tie(b.t_ms, b.device, b.seq);
}

}  // namespace

StreamRecord parse_record(std::string_view line) {
  const auto f = split_ws(trim(line));
  if (f.size() < 4) throw DataError("record needs kind, device, seq and t_ms");
  if (f[0].size() != 1) throw DataError("bad record kind '" + std::string(f[0]) + "'");
  StreamRecord r;
  switch (f[0][0]) {
    case 'Q': r.kind = RecordKind::Quaternion; break;
    case 'I': r.kind = RecordKind::Imu; break;
    case 'E': r.kind = RecordKind::Emg; break;
    case 'J': r.kind = RecordKind::Impulse; break;
    case 'M': r.kind = RecordKind::Marker; break;
    default: throw DataError("bad record kind '" + std::string(f[0]) + "'");
  }
  r.device = std::string(f[1]);
  {
    const auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), r.seq);
    if (ec != std::errc() || p != f[2].data() + f[2].size()) {
      throw DataError("bad sequence number '" + std::string(f[2]) + "'");
    }
  }
  r.t_ms = parse_double(f[3], "timestamp");
  if (r.kind == RecordKind::Marker) {
    if (f.size() < 5) throw DataError("marker without a tag");
    for (std::size_t k = 4; k < f.size(); ++k) {
      if (k > 4) r.tag += ' ';
      r.tag += f[k];
    }
    return r;
  }
  for (std::size_t k = 4; k < f.size(); ++k) r.payload.push_back(parse_double(f[k], "payload value"));
  if (!arity_ok(r.kind, r.payload.size())) {
    throw DataError(std::string("wrong payload arity ") + std::to_string(r.payload.size()) + " for " +
                    static_cast<char>(r.kind) + " record");
  }
  return r;
}

std::string format_record(const StreamRecord& r) {
  std::string out;
  out += static_cast<char>(r.kind);
  out += ' ';
  out += r.device;
  out += ' ';
  out += std::to_string(r.seq);
  out += ' ';
  append_double(out, r.t_ms);
  if (r.kind == RecordKind::Marker) {
    out += ' ';
    out += r.tag;
  }
  for (double v : r.payload) {
    out += ' ';
    append_double(out, v);
  }
  return out;
}

void SessionAssembler::set_version(int major, int minor) {
  major_ = major;
  minor_ = minor;
}

void SessionAssembler::set_header(std::string key, std::string value) { header_[std::move(key)] = std::move(value); }

bool SessionAssembler::add(StreamRecord r) {
  if (!seen_.emplace(r.device, r.seq).second) {
    ++duplicates_;
    return false;
  }
  records_.push_back(std::move(r));
  return true;
}

SessionFile SessionAssembler::finish() const {
  SessionFile s;
  s.major = major_;
  s.minor = minor_;
  s.header = header_;
  s.records = records_;
  s.duplicates = duplicates_;
  std::sort(s.records.begin(), s.records.end(), record_less);

  // seen_ is ordered by (device, seq), which is exactly what gap finding needs.
  const std::string* device = nullptr;
  std::uint64_t prev = 0;
  for (const auto& [dev, seq] : seen_) {
    if (device && *device == dev && seq > prev + 1) s.gaps.push_back({dev, prev + 1, seq - prev - 1});
    device = &dev;
    prev = seq;
  }
  return s;
}

std::pair<int, int> parse_version_line(std::string_view line) {
  line = trim(line);
  const std::string prefix = "# " + std::string(kFormatName) + "/";
  if (line.substr(0, prefix.size()) != prefix) throw DataError("missing '" + prefix + "<version>' header");
  const std::string_view v = line.substr(prefix.size());
  int major = 0, minor = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), major);
  if (ec != std::errc()) throw DataError("bad format version '" + std::string(v) + "'");
  if (p != v.data() + v.size()) {
    if (*p != '.') throw DataError("bad format version '" + std::string(v) + "'");
    auto [q, ec2] = std::from_chars(p + 1, v.data() + v.size(), minor);
    if (ec2 != std::errc() || q != v.data() + v.size()) {
      throw DataError("bad format version '" + std::string(v) + "'");
    }
  }
  if (major != kFormatMajor) throw DataError("unsupported format version " + std::string(v));
  return {major, minor};
}

SessionFile read_session(std::istream& in) {
  SessionAssembler as;
  std::string line;
  std::size_t lineno = 0;
  bool have_version = false;
  bool in_body = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = trim(line);
    try {
      if (!have_version) {
        if (s.empty()) continue;
        const auto [major, minor] = parse_version_line(s);
        as.set_version(major, minor);
        have_version = true;
        continue;
      }
      if (s.empty()) continue;
      if (s.front() == '#') {
        if (in_body) throw DataError("header line after the first record");
        const std::string_view kv = trim(s.substr(1));
        const auto sp = kv.find_first_of(" \t");
        if (kv.empty()) continue;
        if (sp == std::string_view::npos) {
          as.set_header(std::string(kv), "");
        } else {
          as.set_header(std::string(kv.substr(0, sp)), std::string(trim(kv.substr(sp))));
        }
        continue;
      }
      in_body = true;
      as.add(parse_record(s));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (in.bad()) throw IoError("read error");
  if (!have_version) throw DataError("line " + std::to_string(lineno) + ": missing version header");
  return as.finish();
}

SessionFile read_session(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  try {
    return read_session(f);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void write_session(std::ostream& out, const SessionFile& s) {
  out << "# " << kFormatName << '/' << s.major << '.' << s.minor << '\n';
  for (const auto& [k, v] : s.header) out << "# " << k << (v.empty() ? "" : " ") << v << '\n';
  for (const auto& r : s.records) out << format_record(r) << '\n';
}

void write_session(const std::string& path, const SessionFile& s) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_session(f, s);
  f.flush();
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace reachkin::ingest
