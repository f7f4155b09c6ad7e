#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "reachkin/error.hpp"
#include "reachkin/ingest/format.hpp"
#include "reachkin/ingest/synth.hpp"

using namespace reachkin;
using namespace reachkin::ingest;

namespace {

SessionFile roundtrip(const SessionFile& s) {
  std::stringstream io;
  write_session(io, s);
  return read_session(io);
}

std::string text_of(const SessionFile& s) {
  std::ostringstream out;
  write_session(out, s);
  return out.str();
}

SessionFile parse_text(const std::string& text) {
  std::istringstream in(text);
  return read_session(in);
}

StreamRecord q(const char* dev, std::uint64_t seq, double t) {
  StreamRecord r;
  r.kind = RecordKind::Quaternion;
  r.device = dev;
  r.seq = seq;
  r.t_ms = t;
  r.payload = {1, 0, 0, 0};
  return r;
}

}  // namespace

TEST_CASE("record parse and format") {
  const auto r = parse_record("Q chest 12 600 0.5 0.5 -0.5 0.5");
  CHECK(r.kind == RecordKind::Quaternion);
  CHECK(r.device == "chest");
  CHECK(r.seq == 12);
  CHECK(r.t_ms == 600.0);
  CHECK(r.payload == std::vector<double>{0.5, 0.5, -0.5, 0.5});
  CHECK(format_record(r) == "Q chest 12 600 0.5 0.5 -0.5 0.5");

  const auto m = parse_record("M host 3 1250.5 phase reach grip=hand-open");
  CHECK(m.tag == "phase reach grip=hand-open");
  CHECK(parse_record(format_record(m)) == m);

  SUBCASE("shortest round-trip numbers") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> g(0.0, 1e3);
    for (int k = 0; k < 500; ++k) {
      StreamRecord e;
      e.kind = RecordKind::Emg;
      e.device = "myo";
      e.seq = static_cast<std::uint64_t>(k);
      e.t_ms = std::abs(g(rng));
      for (int c = 0; c < 8; ++c) e.payload.push_back(g(rng) * 1e-7);
      CHECK(parse_record(format_record(e)) == e);
    }
  }
  SUBCASE("arity") {
    CHECK_NOTHROW(parse_record("I upper 0 0 0 0 0 0 0 1"));
    CHECK_NOTHROW(parse_record("I upper 0 0 0 0 0 0 0 1 0.3 0 -0.9"));
    CHECK_NOTHROW(parse_record("I upper 0 0 0 0 0 0 0 1 0.3 0 -0.9 24.5"));
    CHECK_THROWS_AS(parse_record("I upper 0 0 0 0 0 0 0 1 0.3"), DataError);
    CHECK_THROWS_AS(parse_record("Q chest 0 0 1 0 0"), DataError);
    CHECK_THROWS_AS(parse_record("E myo 0 0 1 2 3 4 5 6 7"), DataError);
    CHECK_NOTHROW(parse_record("J hand 0 0 0.1 0.2 0.3 0.4 0.5"));
    CHECK_THROWS_AS(parse_record("J hand 0 0"), DataError);
    CHECK_THROWS_AS(parse_record("M host 0 0"), DataError);
  }
  SUBCASE("malformed fields") {
    CHECK_THROWS_AS(parse_record("X chest 0 0 1 0 0 0"), DataError);
    CHECK_THROWS_AS(parse_record("QQ chest 0 0 1 0 0 0"), DataError);
    CHECK_THROWS_AS(parse_record("Q chest -1 0 1 0 0 0"), DataError);
    CHECK_THROWS_AS(parse_record("Q chest 1 abc 1 0 0 0"), DataError);
    CHECK_THROWS_AS(parse_record("Q chest 1 0 1 0 0 zz"), DataError);
    CHECK_THROWS_AS(parse_record("Q chest"), DataError);
  }
}

TEST_CASE("session round trips") {
  SUBCASE("empty body") {
    const auto s = parse_text("# reachkin/1\n# subject S01\n");
    CHECK(s.records.empty());
    CHECK(s.gaps.empty());
    CHECK(s.header.at("subject") == "S01");
    CHECK(roundtrip(s) == s);
    CHECK(roundtrip(SessionFile{}) == SessionFile{});
  }
  SUBCASE("synthetic session") {
    SynthConfig c;
    c.task = sessions::task_by_id(2);
    c.seed = 5;
    const auto s = synth_session(c).session;
    CHECK(roundtrip(s) == s);
    CHECK(text_of(roundtrip(s)) == text_of(s));
  }
  SUBCASE("10^5 records are byte-stable across writes") {
    SessionFile s;
    s.header["subject"] = "S09";
    SessionAssembler as;
    std::mt19937_64 rng(102);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::uint64_t k = 0; k < 100000; ++k) {
      StreamRecord r;
      r.kind = RecordKind::Emg;
      r.device = "myo";
      r.seq = k;
      r.t_ms = 5.0 * static_cast<double>(k);
      for (int c = 0; c < 8; ++c) r.payload.push_back(g(rng));
      as.add(std::move(r));
    }
    s.records = as.finish().records;
    const std::string a = text_of(s), b = text_of(s);
    CHECK(a == b);
    CHECK(text_of(parse_text(a)) == a);
  }
}

TEST_CASE("ordering, gaps and duplicates") {
  SUBCASE("out-of-order input matches the sorted file") {
    const std::string sorted = "# reachkin/1.0\nQ a 0 0 1 0 0 0\nQ b 0 0 1 0 0 0\nQ a 1 50 1 0 0 0\nQ b 1 50 1 0 0 0\n";
    const std::string shuffled = "# reachkin/1\nQ b 1 50 1 0 0 0\nQ a 1 50 1 0 0 0\nQ b 0 0 1 0 0 0\nQ a 0 0 1 0 0 0\n";
    CHECK(parse_text(shuffled) == parse_text(sorted));
    CHECK(text_of(parse_text(shuffled)) == sorted);
  }
  SUBCASE("one dropped sequence number") {
    SessionAssembler as;
    for (std::uint64_t k = 0; k < 20; ++k)
      if (k != 7) as.add(q("chest", k, 50.0 * static_cast<double>(k)));
    const auto s = as.finish();
    REQUIRE(s.gaps.size() == 1);
    CHECK(s.gaps[0] == Gap{"chest", 7, 1});
  }
  SUBCASE("gaps are per device") {
    SessionAssembler as;
    for (std::uint64_t k : {0, 1, 5, 6}) as.add(q("a", k, 10.0 * static_cast<double>(k)));
    for (std::uint64_t k : {2, 3, 4, 10}) as.add(q("b", k, 10.0 * static_cast<double>(k)));
    const auto s = as.finish();
    CHECK(s.gaps == std::vector<Gap>{{"a", 2, 3}, {"b", 5, 5}});
  }
  SUBCASE("duplicates are dropped and counted") {
    SessionAssembler as;
    CHECK(as.add(q("a", 0, 0)));
    CHECK(as.add(q("a", 1, 50)));
    CHECK_FALSE(as.add(q("a", 1, 50)));
    CHECK(as.add(q("b", 1, 50)));
    const auto s = as.finish();
    CHECK(s.records.size() == 3);
    CHECK(s.duplicates == 1);
  }
}

TEST_CASE("versions") {
  CHECK(parse_version_line("# reachkin/1") == std::pair{1, 0});
  CHECK(parse_version_line("# reachkin/1.3") == std::pair{1, 3});
  const auto newer = parse_text("# reachkin/1.7\nQ a 0 0 1 0 0 0\n");
  CHECK(newer.minor == 7);
  CHECK(newer.records.size() == 1);
  CHECK_THROWS_AS(parse_version_line("# reachkin/2.0"), DataError);
  CHECK_THROWS_AS(parse_version_line("# reachkin/x"), DataError);
  CHECK_THROWS_AS(parse_version_line("# otherformat/1"), DataError);
  CHECK_THROWS_AS(parse_text("Q a 0 0 1 0 0 0\n"), DataError);
  CHECK_THROWS_AS(parse_text(""), DataError);
}

TEST_CASE("errors carry line numbers and paths") {
  try {
    parse_text("# reachkin/1\n# subject S01\nQ a 0 0 1 0 0 0\nQ a 1 50 1 0 0\n");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
  try {
    parse_text("# reachkin/1\nQ a 0 0 1 0 0 0\n# late header\n");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  const std::string missing = "/nonexistent/dir/session.txt";
  try {
    read_session(missing);
    FAIL("expected an I/O error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(missing) != std::string::npos);
  }
  CHECK_THROWS_AS(write_session(missing, SessionFile{}), IoError);

  const auto dir = std::filesystem::temp_directory_path() / "reachkin_format_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "bad.txt").string();
  {
    SessionFile s;
    s.records.push_back(q("a", 0, 0));
    write_session(path, s);
    CHECK(read_session(path) == s);
  }
  {
    std::ofstream f(path);
    f << "# reachkin/1\nQ a zero 0 1 0 0 0\n";
  }
  try {
    read_session(path);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(path) != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
