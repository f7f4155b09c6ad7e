#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "reachkin/cli.hpp"

namespace fs = std::filesystem;
using reachkin::cli::run;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("reachkin_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  return {std::istreambuf_iterator<char>(f), {}};
}

const std::vector<std::string> kSubcommands{"fuse",       "kin",      "dtw",   "confusion", "energy",   "decode-train",
                                            "decode-eval", "contacts", "score", "progress",  "simulate", "serve"};

}  // namespace

TEST_CASE("help and usage") {
  const auto top = call({"--help"});
  CHECK(top.code == 0);
  for (const auto& s : kSubcommands) {
    CAPTURE(s);
    CHECK(top.out.find(s) != std::string::npos);
    const auto h = call({s, "--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("--") != std::string::npos);
  }
  CHECK(call({"simulate", "--help"}).out.find("--no-emg") != std::string::npos);
  CHECK(call({"dtw", "--help"}).out.find("--radius") != std::string::npos);

  const auto unknown = call({"simulate", "--bogus"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("simulate") != std::string::npos);  // usage text
  CHECK(call({}).code == 1);
  CHECK(call({"frobnicate"}).code == 1);
}

TEST_CASE("conflicting flags are rejected before work") {
  TempDir dir;
  const auto model = dir / "m.lda";
  CHECK(call({"dtw", "--a", "x", "--b", "y", "--exact", "--radius", "3"}).code == 1);
  CHECK(call({"decode-train", "--in", "x", "--synthetic", "10", "--out", model}).code == 1);
  CHECK(call({"simulate", "--fixture", "outcomes", "--task", "2"}).code == 1);
  CHECK(call({"simulate", "--task", "7"}).code == 1);
  CHECK_FALSE(fs::exists(model));
}

TEST_CASE("simulate is deterministic") {
  const std::vector<std::string> args{"simulate", "--task", "2", "--trials", "5", "--seed", "42"};
  const auto a = call(args), b = call(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.rfind("# reachkin/1", 0) == 0);
  auto other = args;
  other.back() = "43";
  CHECK(call(other).out != a.out);
}

TEST_CASE("dtw of a file against itself costs zero") {
  TempDir dir;
  const auto series = dir / "s.txt";
  std::ostringstream text;
  text << "# t w x y z\n";
  for (int k = 0; k < 40; ++k) {
    const double h = 0.01 * k;
    text << 0.05 * k << ' ' << std::cos(h) << ' ' << std::sin(h) << " 0 0\n";
  }
  write_file(series, text.str());
  for (const auto& extra : {std::vector<std::string>{}, {"--exact"}, {"--raw"}}) {
    std::vector<std::string> args{"dtw", "--a", series, "--b", series};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = call(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("cost\t0.000000000\n", 0) == 0);
  }

  const auto session = dir / "sess.txt";
  REQUIRE(call({"simulate", "--task", "1", "--seed", "4", "--no-emg", "--no-imu", "--no-impulses", "--out", session}).code == 0);
  const auto r = call({"dtw", "--a", session, "--b", session});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("cost\t0.000000000") != std::string::npos);
  CHECK(call({"dtw", "--a", session, "--b", series}).code == 2);
}

TEST_CASE("score on the outcome fixture") {
  TempDir dir;
  const auto table = dir / "trials.tsv", report = dir / "report.txt";
  REQUIRE(call({"simulate", "--fixture", "outcomes", "--out", table}).code == 0);
  const auto r = call({"score", "--in", table, "--report", report});
  REQUIRE(r.code == 0);
  for (const char* pct : {"22.22", "23.50", "28.50"}) {
    CAPTURE(pct);
    CHECK(r.out.find(pct) != std::string::npos);
    CHECK(read_file(report).find(pct) != std::string::npos);
  }
  CHECK(call({"score", "--in", table}).out == r.out);
}

TEST_CASE("error exit codes") {
  TempDir dir;
  SUBCASE("missing input is an I/O error") {
    const auto r = call({"score", "--in", dir / "absent.tsv"});
    CHECK(r.code == 3);
    CHECK(r.err.find("absent.tsv") != std::string::npos);
    CHECK(call({"kin", "--in", dir / "absent.txt"}).code == 3);
  }
  SUBCASE("malformed input is a data error") {
    const auto bad = dir / "bad.txt";
    write_file(bad, "# reachkin/1\nQ chest 0 zero 1 0 0 0\n");
    const auto r = call({"kin", "--in", bad});
    CHECK(r.code == 2);
    CHECK(r.err.find("line 2") != std::string::npos);
    write_file(bad, "subject\tphase\tday\tsystem\ttask\tcompletion_s\tordr\nS1\tnap\t1\tCRT\t1\t5\t0\n");
    CHECK(call({"score", "--in", bad}).code == 2);
  }
  SUBCASE("unwritable output is an I/O error") {
    CHECK(call({"simulate", "--task", "1", "--out", "/nonexistent/dir/x.txt"}).code == 3);
  }
}

TEST_CASE("decoder train and evaluate") {
  TempDir dir;
  const auto model = dir / "m.lda";
  REQUIRE(call({"decode-train", "--synthetic", "100", "--seed", "1", "--out", model}).code == 0);
  const auto a = call({"decode-eval", "--model", model, "--synthetic", "100", "--seed", "2"});
  REQUIRE(a.code == 0);
  CHECK(a.out == call({"decode-eval", "--model", model, "--synthetic", "100", "--seed", "2"}).out);
  CHECK(call({"decode-train", "--out", model}).code == 2);  // no data source
}
