#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace reachkin::ingest {

inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;
inline constexpr std::string_view kFormatName = "reachkin";
/// Literal line that closes a session on the TCP protocol.
inline constexpr std::string_view kEndOfSession = "M end session";

enum class RecordKind : char {
  Quaternion = 'Q',  // w x y z
  Imu = 'I',         // gx gy gz ax ay az [mx my mz [temp]]
  Emg = 'E',         // 8 channels
  Impulse = 'J',     // one cumulative impulse per fingertip
  Marker = 'M',      // free-text tag
};

struct StreamRecord {
  RecordKind kind = RecordKind::Marker;
  std::string device;
  std::uint64_t seq = 0;
  double t_ms = 0.0;
  std::vector<double> payload;
  std::string tag;  // markers only

  bool operator==(const StreamRecord&) const = default;
};

/// `K device seq t_ms payload...`. Throws DataError describing the problem.
StreamRecord parse_record(std::string_view line);
/// Shortest round-trip number formatting, so parse(format(r)) == r.
std::string format_record(const StreamRecord& r);

/// Missing sequence numbers [first, first + count) on one device.
struct Gap {
  std::string device;
  std::uint64_t first = 0;
  std::uint64_t count = 0;

  bool operator==(const Gap&) const = default;
};

struct SessionFile {
  int major = kFormatMajor;
  int minor = kFormatMinor;
  std::map<std::string, std::string> header;
  std::vector<StreamRecord> records;  // sorted by (t_ms, device, seq)
  std::vector<Gap> gaps;              // sorted by (device, first)
  std::uint64_t duplicates = 0;

  bool operator==(const SessionFile&) const = default;
};

/// Builds a SessionFile from records in any order: duplicates of a
/// (device, seq) pair are dropped and counted, the body is sorted and gaps are
/// derived per device between its lowest and highest sequence numbers.
class SessionAssembler {
 public:
  void set_version(int major, int minor);
  void set_header(std::string key, std::string value);
  /// Returns false for a duplicate.
  bool add(StreamRecord r);
  SessionFile finish() const;

 private:
  int major_ = kFormatMajor;
  int minor_ = kFormatMinor;
  std::map<std::string, std::string> header_;
  std::vector<StreamRecord> records_;
  std::set<std::pair<std::string, std::uint64_t>> seen_;
  std::uint64_t duplicates_ = 0;
};

/// `# reachkin/<major>[.<minor>]`. Throws DataError for anything else and
/// for an unsupported major version.
std::pair<int, int> parse_version_line(std::string_view line);

/// Throws DataError with "line N:" context, IoError when unreadable.
SessionFile read_session(std::istream& in);
SessionFile read_session(const std::string& path);
void write_session(std::ostream& out, const SessionFile& s);
void write_session(const std::string& path, const SessionFile& s);

/// Header keys the generator and CLI use.
namespace keys {
inline constexpr const char* kSubject = "subject";
inline constexpr const char* kPhase = "phase";
inline constexpr const char* kDay = "day";
inline constexpr const char* kSystem = "system";
inline constexpr const char* kUpperLength = "arm.upper_length_m";
inline constexpr const char* kForearmLength = "arm.forearm_length_m";
inline constexpr const char* kLimbMass = "mass.limb_kg";
inline constexpr const char* kObjectMass = "mass.object_kg";
inline constexpr const char* kMassNote = "mass.note";
inline constexpr const char* kLatency = "latency.visual_ms";
}  // namespace keys

}  // namespace reachkin::ingest
