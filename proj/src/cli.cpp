#include "reachkin/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "reachkin/alignment.hpp"
#include "reachkin/analysis.hpp"
#include "reachkin/contact.hpp"
#include "reachkin/emg.hpp"
#include "reachkin/energetics.hpp"
#include "reachkin/error.hpp"
#include "reachkin/ingest/format.hpp"
#include "reachkin/ingest/server.hpp"
#include "reachkin/ingest/synth.hpp"
#include "reachkin/sessions.hpp"

namespace reachkin::cli {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string deg(double rad) { return fmt("%.4f", rad * 180.0 / std::numbers::pi); }

void emit(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    sessions::write_text_file(path, text);
  }
}

bool is_session_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line == "\r") continue;
    return line.rfind("# " + std::string(ingest::kFormatName) + "/", 0) == 0;
  }
  return false;
}

/// `t w x y z` per line; '#' starts a comment.
QuaternionSeries read_series(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  QuaternionSeries s;
  s.label = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double t, w, x, y, z;
    if (!(row >> t)) continue;
    if (!(row >> w >> x >> y >> z)) throw DataError(path + ": line " + std::to_string(lineno) + ": expected t w x y z");
    try {
      s.push_back(t, Quaternion::from_components(w, x, y, z));
    } catch (const Error& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate(s);
  return s;
}

std::vector<sessions::TrialRecord> load_trials(const std::vector<std::string>& paths,
                                               const analysis::AnalysisOptions& options) {
  std::vector<sessions::TrialRecord> out;
  for (const auto& p : paths) {
    std::vector<sessions::TrialRecord> part;
    if (is_session_file(p)) {
      const auto s = ingest::read_session(p);
      auto opts = options;
      opts.arm = analysis::arm_from_header(s, options.arm);
      part = analysis::session_trials(s, opts);
    } else {
      std::ifstream f(p);
      if (!f) throw IoError("cannot open " + p);
      try {
        part = sessions::parse_trial_table(f);
      } catch (const DataError& e) {
        throw DataError(p + ": " + e.what());
      }
    }
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

alignment::Metric parse_metric(const std::string& m) {
  if (m == "chordal") return alignment::Metric::Chordal;
  if (m == "geodesic") return alignment::Metric::Geodesic;
  throw DataError("unknown metric '" + m + "'");
}

struct AlignFlags {
  bool exact = false;
  std::size_t radius = alignment::kDefaultRadius;
  std::string metric = "chordal";
  bool raw = false;
  bool normalize = false;
  double rate = 20.0;

  void add(CLI::App* app) {
    auto* e = app->add_flag("--exact", exact, "Exact DTW instead of FastDTW");
    auto* r = app->add_option("--radius", radius, "FastDTW search radius")->check(CLI::NonNegativeNumber);
    e->excludes(r);
    app->add_option("--metric", metric, "Pointwise cost: chordal or geodesic")
        ->check(CLI::IsMember({"chordal", "geodesic"}));
    app->add_flag("--raw", raw, "Align raw samples without resampling to a common grid");
    app->add_option("--rate", rate, "Resampling rate, Hz")->check(CLI::PositiveNumber);
    app->add_flag("--normalize", normalize, "Report cost per warp-path step");
  }

  alignment::AlignOptions options() const {
    alignment::AlignOptions o;
    o.exact = exact;
    o.radius = radius;
    o.metric = parse_metric(metric);
    o.resample = !raw;
    o.rate_hz = rate;
    o.normalize = normalize;
    return o;
  }
};

struct ArmFlags {
  std::optional<double> upper, forearm;

  void add(CLI::App* app) {
    app->add_option("--upper-length", upper, "Upper-arm length, m (overrides the session header)")
        ->check(CLI::PositiveNumber);
    app->add_option("--forearm-length", forearm, "Forearm length, m (overrides the session header)")
        ->check(CLI::PositiveNumber);
  }

  kinematics::ArmModel resolve(const ingest::SessionFile* s) const {
    kinematics::ArmModel arm = s ? analysis::arm_from_header(*s) : kinematics::ArmModel{};
    if (upper) arm.upper_length = *upper;
    if (forearm) arm.forearm_length = *forearm;
    return arm;
  }
};

analysis::OrientationSource parse_source(const std::string& s) {
  return s == "fused" ? analysis::OrientationSource::Fused : analysis::OrientationSource::Quaternion;
}

// ---- subcommands ----

int cmd_fuse(const std::string& in, const std::string& out_path, double beta, std::ostream& out) {
  const auto s = ingest::read_session(in);
  const auto streams = analysis::split_streams(s);
  if (streams.imu.empty()) throw DataError(in + ": no IMU records to fuse");
  ingest::SessionAssembler as;
  as.set_version(s.major, s.minor);
  for (const auto& [k, v] : s.header) as.set_header(k, v);
  for (const auto& r : s.records) {
    if (r.kind == ingest::RecordKind::Imu) continue;
    if (r.kind == ingest::RecordKind::Quaternion && streams.imu.count(r.device)) continue;
    as.add(r);
  }
  fusion::FuseOptions opts;
  opts.beta = beta;
  for (const auto& [device, frames] : streams.imu) {
    const auto fused = fusion::fuse_series(frames, opts);
    std::size_t k = 0;
    for (const auto& r : s.records) {
      if (r.kind != ingest::RecordKind::Imu || r.device != device) continue;
      ingest::StreamRecord q;
      q.kind = ingest::RecordKind::Quaternion;
      q.device = device;
      q.seq = r.seq;
      q.t_ms = r.t_ms;
      const auto c = fused.q[k++].components();
      q.payload.assign(c.begin(), c.end());
      as.add(std::move(q));
    }
  }
  const auto result = as.finish();
  if (out_path.empty() || out_path == "-") {
    ingest::write_session(out, result);
  } else {
    ingest::write_session(out_path, result);
  }
  return kOk;
}

int cmd_kin(const std::string& in, const std::string& out_path, const std::string& source, const ArmFlags& arm_flags,
            double beta, std::ostream& out) {
  const auto s = ingest::read_session(in);
  analysis::AnalysisOptions opts;
  opts.source = parse_source(source);
  opts.fuse.beta = beta;
  opts.arm = arm_flags.resolve(&s);
  const auto js = analysis::session_joints(analysis::split_streams(s), opts);
  std::ostringstream o;
  o << "t_s\tshoulder_w\tshoulder_x\tshoulder_y\tshoulder_z\tshoulder_z_deg\tshoulder_x_deg\tshoulder_y_deg\t"
       "elbow_deg\telbow_x_m\telbow_y_m\telbow_z_m\thand_x_m\thand_y_m\thand_z_m\tgimbal_lock\n";
  for (std::size_t k = 0; k < js.size(); ++k) {
    const auto& st = js.states[k];
    const auto e = to_euler(st.shoulder, EulerSequence::ZXY);
    const auto pos = kinematics::joint_positions(opts.arm, st);
    o << fmt("%.6f", js.t[k]) << '\t' << fmt("%.9f", st.shoulder.w()) << '\t' << fmt("%.9f", st.shoulder.x()) << '\t'
      << fmt("%.9f", st.shoulder.y()) << '\t' << fmt("%.9f", st.shoulder.z()) << '\t' << deg(e.angles[0]) << '\t'
      << deg(e.angles[1]) << '\t' << deg(e.angles[2]) << '\t' << deg(st.elbow_flexion) << '\t'
      << fmt("%.6f", pos.elbow.x()) << '\t' << fmt("%.6f", pos.elbow.y()) << '\t' << fmt("%.6f", pos.elbow.z())
      << '\t' << fmt("%.6f", pos.hand.x()) << '\t' << fmt("%.6f", pos.hand.y()) << '\t' << fmt("%.6f", pos.hand.z())
      << '\t' << (e.gimbal_lock ? 1 : 0) << '\n';
  }
  emit(out, out_path, o.str());
  return kOk;
}

int cmd_dtw(const std::string& a, const std::string& b, const AlignFlags& flags, const std::string& path_out,
            std::ostream& out) {
  const auto opts = flags.options();
  std::ostringstream o;
  if (is_session_file(a) != is_session_file(b)) throw DataError("--a and --b must both be sessions or both series");
  if (is_session_file(a)) {
    auto joints = [](const std::string& p) {
      return analysis::session_joints(analysis::split_streams(ingest::read_session(p)));
    };
    const auto cost = alignment::similarity_cost(joints(a), joints(b), opts);
    for (const auto& [joint, c] : cost.per_joint) o << joint << '\t' << fmt("%.9f", c) << '\n';
    o << "cost\t" << fmt("%.9f", cost.total) << '\n';
    out << o.str();
    return kOk;
  }
  QuaternionSeries sa = read_series(a), sb = read_series(b);
  if (opts.resample) {
    sa = resample(sa, opts.rate_hz);
    sb = resample(sb, opts.rate_hz);
  }
  const auto w = opts.exact ? alignment::dtw(sa, sb, opts.metric) : alignment::fastdtw(sa, sb, opts.radius, opts.metric);
  o << "cost\t" << fmt("%.9f", opts.normalize ? w.normalized_cost() : w.cost) << '\n';
  o << "length\t" << w.length() << '\n';
  out << o.str();
  if (!path_out.empty()) {
    std::ostringstream p;
    p << "i\tj\n";
    for (const auto& [i, j] : w.pairs) p << i << '\t' << j << '\n';
    emit(out, path_out, p.str());
  }
  return kOk;
}

int cmd_confusion(const std::vector<std::string>& a, const std::vector<std::string>& b, const AlignFlags& flags,
                  const std::string& out_path, std::ostream& out) {
  auto group = [](const std::vector<std::string>& paths) {
    alignment::TaskTrials tt;
    for (const auto& t : load_trials(paths, {})) {
      if (t.joints.empty()) throw DataError("trial of subject " + t.subject + " has no joint series");
      tt[t.task.id].push_back(alignment::joint_channels(t.joints));
    }
    return tt;
  };
  const auto m = alignment::task_confusion(group(a), group(b), flags.options());
  std::ostringstream o;
  o << "task";
  for (int t : m.tasks) o << "\tT" << t;
  o << '\n';
  for (std::size_t i = 0; i < m.tasks.size(); ++i) {
    o << 'T' << m.tasks[i];
    for (double c : m.cost[i]) o << '\t' << fmt("%.6f", c);
    o << '\n';
  }
  emit(out, out_path, o.str());
  return kOk;
}

int cmd_energy(const std::vector<std::string>& in, double mass, const ArmFlags& arm_flags, const std::string& out_path,
               std::ostream& out) {
  energetics::EnergyParams params;
  params.mass = mass;
  params.validate();
  std::ostringstream o;
  o << "subject\ttrial\ttask\treaches\tpath_m\tduration_s\tenergy_j\n";
  std::map<int, std::vector<double>> per_task;
  for (const auto& p : in) {
    const auto s = ingest::read_session(p);
    analysis::AnalysisOptions opts;
    opts.arm = arm_flags.resolve(&s);
    const auto trials = analysis::session_trials(s, opts);
    for (const auto& t : trials) {
      const auto trace = analysis::endpoint_trace(opts.arm, t.joints);
      if (t.joints.size() < 3) throw DataError("trial " + std::to_string(t.order) + " in " + p + " is too short");
      const auto segs = kinematics::segment_reaches(t.joints.t, trace);
      if (segs.empty()) throw DataError("no reaches detected in trial " + std::to_string(t.order) + " of " + p);
      const auto e = energetics::task_energy(segs, params);
      double path = 0.0, duration = 0.0;
      for (const auto& sg : segs) {
        path += sg.path_length;
        duration += sg.duration;
      }
      o << t.subject << '\t' << t.order << "\tT" << t.task.id << '\t' << segs.size() << '\t' << fmt("%.4f", path)
        << '\t' << fmt("%.3f", duration) << '\t' << fmt("%.3f", e.total) << '\n';
      per_task[t.task.id].push_back(e.total);
    }
  }
  o << "\ntask\tn\tmean_energy_j\tsem_j\n";
  for (const auto& [task, v] : per_task) {
    const auto ms = energetics::summarize(v);
    o << 'T' << task << '\t' << ms.n << '\t' << fmt("%.3f", ms.mean) << '\t' << fmt("%.3f", ms.sem) << '\n';
  }
  emit(out, out_path, o.str());
  return kOk;
}

std::vector<emg::LabeledFeature> session_features(const std::vector<std::string>& paths) {
  std::vector<emg::LabeledFeature> out;
  for (const auto& p : paths) {
    const auto part = analysis::labeled_windows(analysis::split_streams(ingest::read_session(p)));
    out.insert(out.end(), part.begin(), part.end());
  }
  if (out.empty()) throw DataError("no labeled EMG windows in the input sessions");
  return out;
}

std::string format_confusion(const emg::ConfusionMatrix& m) {
  std::ostringstream o;
  o << "truth\\pred";
  for (auto g : emg::kAllGrips) o << '\t' << emg::grip_name(g);
  o << '\n';
  for (auto t : emg::kAllGrips) {
    o << emg::grip_name(t);
    for (auto p : emg::kAllGrips) o << '\t' << m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    o << '\n';
  }
  o << "accuracy\t" << fmt("%.4f", m.accuracy) << '\n';
  o << "total\t" << m.total << '\n';
  return o.str();
}

int cmd_contacts(const std::string& in, double threshold, std::size_t debounce, const std::string& out_path,
                 std::ostream& out) {
  const auto streams = analysis::split_streams(ingest::read_session(in));
  if (streams.impulses.empty()) throw DataError(in + ": no impulse records");
  if (streams.impulse_t.size() < 2) throw DataError(in + ": need at least two impulse frames");
  std::vector<double> dts;
  for (std::size_t k = 1; k < streams.impulse_t.size(); ++k) dts.push_back(streams.impulse_t[k] - streams.impulse_t[k - 1]);
  std::nth_element(dts.begin(), dts.begin() + static_cast<std::ptrdiff_t>(dts.size() / 2), dts.end());
  contact::DetectorConfig cfg;
  cfg.threshold = threshold;
  cfg.debounce = debounce;
  cfg.dt = dts[dts.size() / 2];
  const double t0 = streams.impulse_t.front();

  std::ostringstream o, fb;
  o << "fingertip\tonset_s\trelease_s\tpeak_n\timpulse_ns\n";
  struct Cmd {
    double time;
    std::size_t finger;
    contact::Feedback action;
  };
  std::vector<Cmd> cmds;
  for (std::size_t f = 0; f < streams.impulses.size(); ++f) {
    const auto force = contact::force_from_impulse(streams.impulses[f], cfg.dt);
    const auto events = contact::detect_contacts(force, cfg);
    for (const auto& e : events) {
      o << f << '\t' << fmt("%.4f", t0 + e.onset_time) << '\t' << fmt("%.4f", t0 + e.release_time) << '\t'
        << fmt("%.4f", e.peak_force) << '\t' << fmt("%.5f", e.delivered_impulse) << '\n';
    }
    for (const auto& c : contact::feedback_commands(events)) cmds.push_back({t0 + c.time, f, c.action});
  }
  std::stable_sort(cmds.begin(), cmds.end(), [](const Cmd& a, const Cmd& b) { return a.time < b.time; });
  o << "\ntime_s\tfingertip\tcommand\n";
  for (const auto& c : cmds) {
    o << fmt("%.4f", c.time) << '\t' << c.finger << '\t'
      << (c.action == contact::Feedback::VibrateOn ? "vibrate-on" : "vibrate-off") << '\n';
  }
  emit(out, out_path, o.str());
  return kOk;
}

int cmd_score(const std::vector<std::string>& in, const std::string& report, const std::string& table,
              std::ostream& out) {
  const auto trials = load_trials(in, {});
  sessions::SessionReport r;
  r.outcomes = sessions::score_outcomes(trials);
  r.schedule = sessions::schedule_issues(trials);
  out << sessions::format_report_text(r);
  if (!report.empty()) sessions::write_text_file(report, sessions::format_report(r));
  if (!table.empty()) sessions::write_text_file(table, sessions::task_time_table(trials));
  return kOk;
}

int cmd_progress(const std::vector<std::string>& in, const std::vector<std::string>& baseline, const AlignFlags& flags,
                 const std::string& report, const std::string& table, std::ostream& out) {
  const auto trials = load_trials(in, {});
  const auto base = baseline.empty() ? sessions::baselines_from_trials(trials)
                                     : sessions::baselines_from_trials(load_trials(baseline, {}));
  sessions::SessionReport r;
  r.progression = sessions::progression_report(trials, base, flags.options());
  r.schedule = sessions::schedule_issues(trials);
  out << sessions::format_report_text(r);
  if (!report.empty()) sessions::write_text_file(report, sessions::format_report(r));
  if (!table.empty()) sessions::write_text_file(table, sessions::day_cost_table(*r.progression));
  return kOk;
}

struct SimulateFlags {
  int task = 1;
  int trials = 1;
  std::uint64_t seed = 0;
  std::string noise = "none";
  bool no_imu = false, no_emg = false, no_impulses = false;
  std::string subject = "S01";
  std::string phase = "training";
  std::string system = "HoloPHAM";
  int day = 1;
  std::string out;
  std::string fixture;
  std::string out_dir;
  int subjects = 4;
  int days = 5;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  if (f.fixture == "outcomes") {
    emit(out, f.out, sessions::format_trial_table(ingest::outcome_fixture()));
    return kOk;
  }
  if (f.fixture == "study") {
    if (f.out_dir.empty()) throw DataError("--fixture study needs --out-dir");
    ingest::StudyConfig cfg;
    cfg.subjects = f.subjects;
    cfg.training_days = f.days;
    cfg.seed = f.seed;
    fs::create_directories(f.out_dir);
    for (const auto& s : ingest::synth_study(cfg)) {
      const std::string name = s.header.at(ingest::keys::kSubject) + "_day" + s.header.at(ingest::keys::kDay) + "_" +
                               s.header.at(ingest::keys::kPhase) + ".txt";
      ingest::write_session((fs::path(f.out_dir) / name).string(), s);
    }
    return kOk;
  }
  ingest::SynthConfig c;
  c.task = sessions::task_by_id(f.task);
  c.trials = f.trials;
  c.seed = f.seed;
  if (f.noise == "nominal") c.noise = ingest::nominal_noise();
  c.imu = !f.no_imu;
  c.emg = !f.no_emg;
  c.impulses = !f.no_impulses;
  c.subject = f.subject;
  c.phase = sessions::parse_phase(f.phase);
  c.system = sessions::parse_system(f.system);
  c.day = f.day;
  const auto s = ingest::synth_session(c);
  if (f.out.empty() || f.out == "-") {
    ingest::write_session(out, s.session);
  } else {
    ingest::write_session(f.out, s.session);
  }
  return kOk;
}

int cmd_serve(std::uint16_t port, int idle_ms, const std::string& out_dir, int max_sessions, std::ostream& out) {
  std::mutex mu;
  std::condition_variable cv;
  int done = 0;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  ingest::ServerConfig cfg;
  cfg.port = port;
  cfg.idle_timeout = std::chrono::milliseconds(idle_ms);
  ingest::IngestServer server(cfg, [&](ingest::SessionFile s, ingest::ConnectionStats st) {
    std::lock_guard lk(mu);
    const int n = done + 1;
    if (!out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "session-%04d.txt", n);
      ingest::write_session((fs::path(out_dir) / name).string(), s);
    }
    out << "session " << n << ": " << s.records.size() << " records, " << s.gaps.size() << " gaps, " << st.duplicates
        << " duplicates, " << st.malformed << " malformed" << (st.terminated ? "" : ", unterminated") << std::endl;
    done = n;
    cv.notify_all();
  });
  server.start();
  out << "listening on 127.0.0.1:" << server.port() << std::endl;
  std::unique_lock lk(mu);
  cv.wait(lk, [&] { return max_sessions > 0 && done >= max_sessions; });
  lk.unlock();
  server.stop();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinematic and myoelectric assessment toolkit", "reachkin"};
  app.require_subcommand(1, 1);
  const char* env = std::getenv("REACHKIN_CONFIG");
  app.set_config("--config", env ? env : "", "Defaults file (INI/TOML, one [section] per subcommand)");

  // fuse
  std::string fuse_in, fuse_out;
  double beta = fusion::kDefaultBeta;
  auto* fuse = app.add_subcommand("fuse", "Fuse raw IMU records into orientation records");
  fuse->add_option("--in", fuse_in, "Session file")->required();
  fuse->add_option("--out", fuse_out, "Output session (default stdout)");
  fuse->add_option("--beta", beta, "Filter gain, rad/s")->check(CLI::NonNegativeNumber);

  // kin
  std::string kin_in, kin_out, kin_source = "q";
  ArmFlags kin_arm;
  double kin_beta = fusion::kDefaultBeta;
  auto* kin = app.add_subcommand("kin", "Joint angles and endpoint positions from orientations");
  kin->add_option("--in", kin_in, "Session file")->required();
  kin->add_option("--out", kin_out, "Output table (default stdout)");
  kin->add_option("--source", kin_source, "Orientation source: q (Q records) or fused (I records)")
      ->check(CLI::IsMember({"q", "fused"}));
  kin->add_option("--beta", kin_beta, "Filter gain for --source fused")->check(CLI::NonNegativeNumber);
  kin_arm.add(kin);

  // dtw
  std::string dtw_a, dtw_b, dtw_path;
  AlignFlags dtw_flags;
  auto* dtw = app.add_subcommand("dtw", "Similarity cost between two series or two sessions");
  dtw->add_option("--a", dtw_a, "Series (t w x y z per line) or session file")->required();
  dtw->add_option("--b", dtw_b, "Series or session file")->required();
  dtw->add_option("--path", dtw_path, "Write the warp path here (series input only)");
  dtw_flags.add(dtw);

  // confusion
  std::vector<std::string> conf_a, conf_b;
  std::string conf_out;
  AlignFlags conf_flags;
  auto* confusion = app.add_subcommand("confusion", "Task-by-task mean similarity cost between two session sets");
  confusion->add_option("--a", conf_a, "Sessions of set A")->required();
  confusion->add_option("--b", conf_b, "Sessions of set B")->required();
  confusion->add_option("--out", conf_out, "Output table (default stdout)");
  conf_flags.add(confusion);

  // energy
  std::vector<std::string> energy_in;
  std::string energy_out;
  double mass = energetics::EnergyParams{}.mass;
  ArmFlags energy_arm;
  auto* energy = app.add_subcommand("energy", "Per-trial and per-task reach energy");
  energy->add_option("--in", energy_in, "Session files")->required();
  energy->add_option("--mass", mass, "Effective limb mass, kg")->check(CLI::PositiveNumber);
  energy->add_option("--out", energy_out, "Output table (default stdout)");
  energy_arm.add(energy);

  // decode-train
  std::vector<std::string> dt_in;
  std::size_t dt_synthetic = 0;
  std::uint64_t dt_seed = 0;
  double dt_lambda = emg::kDefaultShrinkage, dt_separation = 4.0;
  std::string dt_out;
  auto* dtrain = app.add_subcommand("decode-train", "Train the grip decoder");
  auto* dt_in_opt = dtrain->add_option("--in", dt_in, "Sessions with EMG and phase markers");
  auto* dt_syn_opt = dtrain->add_option("--synthetic", dt_synthetic, "Synthetic windows per class instead of --in");
  dt_in_opt->excludes(dt_syn_opt);
  dtrain->add_option("--seed", dt_seed, "Seed for --synthetic");
  dtrain->add_option("--separation", dt_separation, "Class separation for --synthetic, in envelope sigmas")
      ->check(CLI::NonNegativeNumber);
  dtrain->add_option("--lambda", dt_lambda, "Covariance shrinkage")->check(CLI::Range(0.0, 1.0));
  dtrain->add_option("--out", dt_out, "Model file")->required();

  // decode-eval
  std::vector<std::string> de_in;
  std::size_t de_synthetic = 0;
  std::uint64_t de_seed = 1;
  double de_separation = 4.0;
  bool de_shuffle = false;
  std::string de_model, de_out;
  auto* deval = app.add_subcommand("decode-eval", "Confusion matrix of a trained decoder");
  deval->add_option("--model", de_model, "Model file")->required();
  auto* de_in_opt = deval->add_option("--in", de_in, "Sessions with EMG and phase markers");
  auto* de_syn_opt = deval->add_option("--synthetic", de_synthetic, "Synthetic windows per class instead of --in");
  de_in_opt->excludes(de_syn_opt);
  deval->add_option("--seed", de_seed, "Seed for --synthetic and --shuffle-labels");
  deval->add_option("--separation", de_separation, "Class separation for --synthetic")->check(CLI::NonNegativeNumber);
  deval->add_flag("--shuffle-labels", de_shuffle, "Permute the labels (chance-level check)");
  deval->add_option("--out", de_out, "Output table (default stdout)");

  // contacts
  std::string ct_in, ct_out;
  double ct_threshold = contact::kDefaultThreshold;
  std::size_t ct_debounce = contact::kDefaultDebounce;
  auto* contacts = app.add_subcommand("contacts", "Fingertip contact events and feedback commands");
  contacts->add_option("--in", ct_in, "Session file")->required();
  contacts->add_option("--threshold", ct_threshold, "Contact force threshold, N")->check(CLI::PositiveNumber);
  contacts->add_option("--debounce", ct_debounce, "Frames a state change must persist")->check(CLI::PositiveNumber);
  contacts->add_option("--out", ct_out, "Output table (default stdout)");

  // score
  std::vector<std::string> sc_in;
  std::string sc_report, sc_table;
  auto* score = app.add_subcommand("score", "Completion-time statistics, initial evaluation vs testing");
  score->add_option("--in", sc_in, "Sessions or trial tables")->required();
  score->add_option("--report", sc_report, "Structured report file");
  score->add_option("--table", sc_table, "Plot table: system, phase, task, mean time");

  // progress
  std::vector<std::string> pg_in, pg_base;
  std::string pg_report, pg_table;
  AlignFlags pg_flags;
  auto* progress = app.add_subcommand("progress", "Daily similarity cost against baselines, with washout");
  progress->add_option("--in", pg_in, "Session files")->required();
  progress->add_option("--baseline", pg_base, "Baseline sessions (default: day-0 PHAM sessions in --in)");
  progress->add_option("--report", pg_report, "Structured report file");
  progress->add_option("--table", pg_table, "Plot table: task, day, mean cost");
  pg_flags.add(progress);

  // simulate
  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Synthetic sessions and fixtures");
  auto* sim_task = simulate->add_option("--task", sim.task, "Task id 1-4")->check(CLI::Range(1, 4));
  simulate->add_option("--trials", sim.trials, "Trials in the session")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--noise", sim.noise, "Sensor noise: none or nominal")->check(CLI::IsMember({"none", "nominal"}));
  simulate->add_flag("--no-imu", sim.no_imu, "Omit raw IMU records");
  simulate->add_flag("--no-emg", sim.no_emg, "Omit EMG records");
  simulate->add_flag("--no-impulses", sim.no_impulses, "Omit fingertip impulse records");
  simulate->add_option("--subject", sim.subject, "Subject id for the header");
  simulate->add_option("--phase", sim.phase, "Study phase for the header")
      ->check(CLI::IsMember({"initial-eval", "training", "testing", "washout"}));
  simulate->add_option("--system", sim.system, "Outcome system for the header")
      ->check(CLI::IsMember({"CRT", "PHAM", "HoloPHAM"}));
  simulate->add_option("--day", sim.day, "Calendar day for the header");
  simulate->add_option("--out", sim.out, "Output file (default stdout)");
  auto* sim_fixture = simulate->add_option("--fixture", sim.fixture, "Emit a fixture instead: outcomes or study")
                          ->check(CLI::IsMember({"outcomes", "study"}));
  simulate->add_option("--out-dir", sim.out_dir, "Directory for --fixture study");
  simulate->add_option("--subjects", sim.subjects, "Subjects for --fixture study")->check(CLI::PositiveNumber);
  simulate->add_option("--days", sim.days, "Training days for --fixture study")->check(CLI::PositiveNumber);
  sim_fixture->excludes(sim_task);

  // serve
  int sv_port = 7700, sv_idle = 5000, sv_max = 1;
  std::string sv_dir;
  auto* serve = app.add_subcommand("serve", "TCP ingest endpoint, one session per connection");
  serve->add_option("--port", sv_port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--idle-timeout", sv_idle, "Idle timeout per connection, ms")->check(CLI::PositiveNumber);
  serve->add_option("--out-dir", sv_dir, "Write each received session here");
  serve->add_option("--max-sessions", sv_max, "Exit after this many sessions")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help("", CLI::AppFormatMode::Normal);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }

  try {
    if (fuse->parsed()) return cmd_fuse(fuse_in, fuse_out, beta, out);
    if (kin->parsed()) return cmd_kin(kin_in, kin_out, kin_source, kin_arm, kin_beta, out);
    if (dtw->parsed()) return cmd_dtw(dtw_a, dtw_b, dtw_flags, dtw_path, out);
    if (confusion->parsed()) return cmd_confusion(conf_a, conf_b, conf_flags, conf_out, out);
    if (energy->parsed()) return cmd_energy(energy_in, mass, energy_arm, energy_out, out);
    if (dtrain->parsed()) {
      if (dt_in.empty() && dt_synthetic == 0) throw DataError("decode-train needs --in or --synthetic");
      ingest::EmgSynthConfig ec;
      ec.separation = dt_separation;
      const auto data = dt_in.empty() ? ingest::synth_feature_set(dt_synthetic, ec, dt_seed) : session_features(dt_in);
      const auto model = emg::lda_train(data, dt_lambda);
      emg::save_model(dt_out, model);
      out << "trained on " << data.size() << " windows, " << model.classes().size() << " classes\n";
      return kOk;
    }
    if (deval->parsed()) {
      if (de_in.empty() && de_synthetic == 0) throw DataError("decode-eval needs --in or --synthetic");
      ingest::EmgSynthConfig ec;
      ec.separation = de_separation;
      auto data = de_in.empty() ? ingest::synth_feature_set(de_synthetic, ec, de_seed) : session_features(de_in);
      if (de_shuffle) {
        std::vector<emg::GripClass> labels;
        for (const auto& d : data) labels.push_back(d.label);
        std::mt19937_64 rng(de_seed);
        std::shuffle(labels.begin(), labels.end(), rng);
        for (std::size_t k = 0; k < data.size(); ++k) data[k].label = labels[k];
      }
      const auto model = emg::load_model(de_model);
      emit(out, de_out, format_confusion(emg::confusion_eval(model, data)));
      return kOk;
    }
    if (contacts->parsed()) return cmd_contacts(ct_in, ct_threshold, ct_debounce, ct_out, out);
    if (score->parsed()) return cmd_score(sc_in, sc_report, sc_table, out);
    if (progress->parsed()) return cmd_progress(pg_in, pg_base, pg_flags, pg_report, pg_table, out);
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (serve->parsed()) return cmd_serve(static_cast<std::uint16_t>(sv_port), sv_idle, sv_dir, sv_max, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kUsage;
}

}  // namespace reachkin::cli
