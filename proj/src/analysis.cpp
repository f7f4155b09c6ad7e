#include "reachkin/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string_view>

#include "reachkin/error.hpp"
#include "reachkin/ingest/synth.hpp"

namespace reachkin::analysis {

namespace {

constexpr double kMsPerS = 1000.0;

int parse_task_tag(std::string_view tag) {
  const auto pos = tag.find("task=");
  if (pos == std::string_view::npos) return 0;
  return std::atoi(std::string(tag.substr(pos + 5)).c_str());
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

template <class T>
std::pair<std::size_t, std::size_t> time_range(const std::vector<T>& t, double start, double end) {
  const auto lo = std::lower_bound(t.begin(), t.end(), start) - t.begin();
  const auto hi = std::upper_bound(t.begin(), t.end(), end) - t.begin();
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

SessionStreams split_streams(const ingest::SessionFile& s) {
  SessionStreams out;
  for (const auto& r : s.records) {
    const double t = r.t_ms / kMsPerS;
    switch (r.kind) {
      case ingest::RecordKind::Quaternion: {
        auto& series = out.orientations[r.device];
        series.label = r.device;
        series.push_back(t, Quaternion::from_components(r.payload[0], r.payload[1], r.payload[2], r.payload[3]));
        break;
      }
      case ingest::RecordKind::Imu: {
        fusion::ImuFrame f;
        f.timestamp = t;
        f.gyro = Vec3(r.payload[0], r.payload[1], r.payload[2]);
        f.accel = Vec3(r.payload[3], r.payload[4], r.payload[5]);
        if (r.payload.size() >= 9) f.mag = Vec3(r.payload[6], r.payload[7], r.payload[8]);
        out.imu[r.device].push_back(f);
        break;
      }
      case ingest::RecordKind::Emg: {
        std::array<double, emg::kChannels> row{};
        std::copy(r.payload.begin(), r.payload.end(), row.begin());
        out.emg.t.push_back(t);
        out.emg.samples.push_back(row);
        break;
      }
      case ingest::RecordKind::Impulse:
        if (out.impulses.empty()) out.impulses.resize(r.payload.size());
        if (r.payload.size() != out.impulses.size()) {
          throw DataError("impulse records change fingertip count at " + std::to_string(r.t_ms) + " ms");
        }
        out.impulse_t.push_back(t);
        for (std::size_t f = 0; f < r.payload.size(); ++f) out.impulses[f].push_back(r.payload[f]);
        break;
      case ingest::RecordKind::Marker:
        out.markers.push_back(r);
        break;
    }
  }
  return out;
}

Quaternion sample_at(const QuaternionSeries& s, double t) {
  if (s.empty()) throw DomainError("cannot sample an empty series");
  if (t <= s.t.front()) return s.q.front();
  if (t >= s.t.back()) return s.q.back();
  const auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - s.t.begin());
  const double t0 = s.t[k - 1], t1 = s.t[k];
  if (t == t0) return s.q[k - 1];
  return slerp(s.q[k - 1], s.q[k], (t - t0) / (t1 - t0));
}

kinematics::JointSeries joint_series(const QuaternionSeries& chest, const QuaternionSeries& upper,
                                     const QuaternionSeries& forearm) {
  kinematics::JointSeries js;
  js.t = chest.t;
  js.states.reserve(chest.size());
  for (std::size_t k = 0; k < chest.size(); ++k) {
    const double t = chest.t[k];
    js.states.push_back(kinematics::joint_angles(chest.q[k], sample_at(upper, t), sample_at(forearm, t)));
  }
  return js;
}

kinematics::JointSeries session_joints(const SessionStreams& streams, const AnalysisOptions& options) {
  const std::array<const char*, 3> names{ingest::devices::kChest, ingest::devices::kUpper,
                                         ingest::devices::kForearm};
  std::array<QuaternionSeries, 3> series;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (options.source == OrientationSource::Quaternion) {
      const auto it = streams.orientations.find(names[k]);
      if (it == streams.orientations.end()) {
        throw DataError(std::string("no orientation records from device '") + names[k] + "'");
      }
      series[k] = it->second;
    } else {
      const auto it = streams.imu.find(names[k]);
      if (it == streams.imu.end()) throw DataError(std::string("no IMU records from device '") + names[k] + "'");
      series[k] = fusion::fuse_series(it->second, options.fuse);
    }
  }
  return joint_series(series[0], series[1], series[2]);
}

std::vector<Vec3> endpoint_trace(const kinematics::ArmModel& arm, const kinematics::JointSeries& js) {
  std::vector<Vec3> p;
  p.reserve(js.size());
  for (const auto& s : js.states) p.push_back(kinematics::endpoint(arm, s));
  return p;
}

std::vector<TrialWindow> trial_windows(const std::vector<ingest::StreamRecord>& markers) {
  std::vector<TrialWindow> out;
  std::optional<TrialWindow> open;
  for (const auto& m : markers) {
    const double t = m.t_ms / kMsPerS;
    if (starts_with(m.tag, ingest::tags::kTrialStart)) {
      if (open) throw DataError("trial starting at " + std::to_string(m.t_ms) + " ms nests inside another");
      open = TrialWindow{parse_task_tag(m.tag), t, t};
    } else if (starts_with(m.tag, ingest::tags::kTrialEnd)) {
      if (!open) throw DataError("trial end at " + std::to_string(m.t_ms) + " ms without a start");
      open->end = t;
      out.push_back(*open);
      open.reset();
    }
  }
  if (open) throw DataError("trial starting at " + std::to_string(open->start * kMsPerS) + " ms never ends");
  return out;
}

kinematics::JointSeries slice(const kinematics::JointSeries& js, double start, double end) {
  const auto [lo, hi] = time_range(js.t, start, end);
  kinematics::JointSeries out;
  out.t.assign(js.t.begin() + static_cast<std::ptrdiff_t>(lo), js.t.begin() + static_cast<std::ptrdiff_t>(hi));
  out.states.assign(js.states.begin() + static_cast<std::ptrdiff_t>(lo),
                    js.states.begin() + static_cast<std::ptrdiff_t>(hi));
  return out;
}

emg::EmgStream slice(const emg::EmgStream& e, double start, double end) {
  const auto [lo, hi] = time_range(e.t, start, end);
  emg::EmgStream out;
  out.t.assign(e.t.begin() + static_cast<std::ptrdiff_t>(lo), e.t.begin() + static_cast<std::ptrdiff_t>(hi));
  out.samples.assign(e.samples.begin() + static_cast<std::ptrdiff_t>(lo),
                     e.samples.begin() + static_cast<std::ptrdiff_t>(hi));
  return out;
}

TaskEstimate identify_task(const kinematics::JointSeries& joints, const emg::EmgStream& emg,
                           const emg::LdaModel& decoder, const kinematics::ArmModel& arm) {
  TaskEstimate est;
  if (joints.size() >= 3) {
    const auto p = endpoint_trace(arm, joints);
    const auto reaches = kinematics::segment_reaches(joints.t, p);
    est.reaches = reaches.size();
    if (!reaches.empty()) {
      // reach, relocate, return: the relocation is the middle one.
      const auto& r = reaches[reaches.size() >= 3 ? 1 : reaches.size() / 2];
      est.relocation = r.trace.back() - r.trace.front();
      const double lateral = est.relocation.y(), vertical = est.relocation.z();
      if (std::abs(lateral) >= std::abs(vertical)) est.delta_d = lateral > 0.0 ? 1 : -1;
    }
  }

  if (!emg.samples.empty()) {
    std::size_t run = 0;
    for (const auto& w : emg::make_windows(emg)) {
      const auto label = emg::lda_predict(decoder, emg::extract_features(w)).label;
      run = (label == emg::GripClass::WaveOut || label == emg::GripClass::WaveIn) ? run + 1 : 0;
      est.rotation_windows = std::max(est.rotation_windows, run);
    }
  }
  est.delta_theta = est.rotation_windows >= kMinRotationRun ? 1 : 0;
  est.task = sessions::task_from_features(est.delta_d, est.delta_theta);
  return est;
}

void apply_decoded_grips(kinematics::JointSeries& joints, const emg::EmgStream& emg, const emg::LdaModel& decoder,
                         const emg::DofMap& map) {
  if (joints.t.size() != joints.states.size()) throw DataError("joint series timestamps and states differ in length");
  std::vector<double> ends;
  std::vector<emg::GripClass> labels;
  if (!emg.samples.empty()) {
    for (const auto& w : emg::make_windows(emg)) {
      ends.push_back(w.timestamp);
      labels.push_back(emg::lda_predict(decoder, emg::extract_features(w)).label);
    }
  }

  kinematics::JointState dof;
  std::size_t next = 0;  // first window not yet in effect
  emg::GripClass active = emg::GripClass::Rest;
  for (std::size_t k = 0; k < joints.size(); ++k) {
    if (k > 0) {
      // Walk the window boundaries inside (t[k-1], t[k]].
      double from = joints.t[k - 1];
      const double to = joints.t[k];
      while (next < ends.size() && ends[next] <= to) {
        if (ends[next] > from) {
          emg::apply_grip(dof, active, ends[next] - from, map);
          from = ends[next];
        }
        active = labels[next++];
      }
      emg::apply_grip(dof, active, to - from, map);
    } else {
      while (next < ends.size() && ends[next] <= joints.t[0]) active = labels[next++];
    }
    joints.states[k].wrist_rotation = dof.wrist_rotation;
    joints.states[k].hand_aperture = dof.hand_aperture;
  }
}

std::vector<emg::LabeledFeature> labeled_windows(const SessionStreams& streams) {
  struct Interval {
    double start;
    emg::GripClass grip;
  };
  std::vector<Interval> phases;
  for (const auto& m : streams.markers) {
    if (!starts_with(m.tag, ingest::tags::kPhase)) continue;
    const auto pos = m.tag.find("grip=");
    if (pos == std::string::npos) continue;
    const std::string name = m.tag.substr(pos + 5, m.tag.find(' ', pos) - (pos + 5));
    phases.push_back({m.t_ms / kMsPerS, emg::parse_grip(name)});
  }
  std::vector<emg::LabeledFeature> out;
  if (phases.empty() || streams.emg.samples.empty()) return out;
  const double span = (emg::kWindowMs / kMsPerS) - 1.0 / emg::kSampleRateHz;
  for (const auto& w : emg::make_windows(streams.emg)) {
    const double end = w.timestamp, start = end - span;
    auto owner = [&](double t) -> std::ptrdiff_t {
      const auto it = std::upper_bound(phases.begin(), phases.end(), t,
                                       [](double v, const Interval& p) { return v < p.start; });
      return (it - phases.begin()) - 1;
    };
    const auto a = owner(start), b = owner(end);
    if (a < 0 || a != b) continue;
    out.push_back({emg::extract_features(w), phases[static_cast<std::size_t>(a)].grip});
  }
  return out;
}

kinematics::ArmModel arm_from_header(const ingest::SessionFile& s, kinematics::ArmModel fallback) {
  auto read = [&](const char* key, double& v) {
    const auto it = s.header.find(key);
    if (it == s.header.end()) return;
    char* end = nullptr;
    const double x = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0' || !(x > 0.0)) {
      throw DataError(std::string("bad header value for ") + key + ": '" + it->second + "'");
    }
    v = x;
  };
  read(ingest::keys::kUpperLength, fallback.upper_length);
  read(ingest::keys::kForearmLength, fallback.forearm_length);
  return fallback;
}

std::vector<sessions::TrialRecord> session_trials(const ingest::SessionFile& s, const AnalysisOptions& options) {
  const SessionStreams streams = split_streams(s);
  const auto windows = trial_windows(streams.markers);
  std::vector<sessions::TrialRecord> out;
  if (windows.empty()) return out;

  auto header = [&](const char* key) -> std::string {
    const auto it = s.header.find(key);
    if (it == s.header.end()) throw DataError(std::string("session header lacks '") + key + "'");
    return it->second;
  };
  const std::string subject = header(ingest::keys::kSubject);
  const sessions::Phase phase = sessions::parse_phase(header(ingest::keys::kPhase));
  const sessions::System system = sessions::parse_system(header(ingest::keys::kSystem));
  const int day = std::atoi(header(ingest::keys::kDay).c_str());

  const bool have_orientation = options.source == OrientationSource::Quaternion ? !streams.orientations.empty()
                                                                                : !streams.imu.empty();
  kinematics::JointSeries joints;
  if (have_orientation) joints = session_joints(streams, options);
  if (have_orientation && !streams.emg.samples.empty()) {
    if (options.decoder) {
      apply_decoded_grips(joints, streams.emg, *options.decoder);
    } else {
      static const emg::LdaModel builtin = ingest::default_decoder();
      apply_decoded_grips(joints, streams.emg, builtin);
    }
  }

  for (std::size_t k = 0; k < windows.size(); ++k) {
    const auto& w = windows[k];
    sessions::TrialRecord r;
    r.subject = subject;
    r.task = sessions::task_by_id(w.task_id);
    r.phase = phase;
    r.day = day;
    r.system = system;
    r.completion_time = w.end - w.start;
    r.order = static_cast<int>(k);
    r.joints = slice(joints, w.start, w.end);
    if (!streams.emg.samples.empty()) r.emg = slice(streams.emg, w.start, w.end);
    if (!streams.impulses.empty()) {
      const auto [lo, hi] = time_range(streams.impulse_t, w.start, w.end);
      for (const auto& f : streams.impulses) {
        r.impulses.emplace_back(f.begin() + static_cast<std::ptrdiff_t>(lo),
                                f.begin() + static_cast<std::ptrdiff_t>(hi));
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace reachkin::analysis
