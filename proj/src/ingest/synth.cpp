#include "reachkin/ingest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <tuple>

#include "reachkin/error.hpp"

namespace reachkin::ingest {

namespace {

using emg::GripClass;
using sessions::TaskSpec;

constexpr double kPi = std::numbers::pi;

// Phase durations, s.
constexpr double kHold = 0.5;
constexpr double kMove = 1.2;
constexpr double kGrip = 0.4;

constexpr double kEnvelopeBlock = 0.050;  // s between envelope redraws
constexpr double kMinEnvelope = 0.01;

const Vec3 kEarthField = Vec3(0.5, 0.0, -std::sqrt(3.0) / 2.0);
const std::array<double, kFingertips> kFingertipForce{2.0, 1.5, 1.2, 1.0, 0.8};  // N

Pose home_pose() { return {Quaternion::identity(), kPi / 2.0, 0.0, 0.2}; }

struct Segment {
  double t0 = 0.0, t1 = 0.0;
  Pose from, to;
  bool movement = false;
  Deviation deviation;
  GripClass grip = GripClass::Rest;
  const char* name = "";
  double contact_from = 0.0, contact_to = 0.0;  // fingertip load fraction
};

struct Plan {
  std::vector<Segment> segments;
  std::vector<TrialTruth> trials;
  double end = 0.0;
};

double jitter_factor(std::mt19937_64& rng, bool enabled) {
  if (!enabled) return 1.0;
  return std::uniform_real_distribution<double>(0.9, 1.1)(rng);
}

Plan make_plan(const SynthConfig& c, std::mt19937_64& rng) {
  std::vector<TaskSpec> seq = c.sequence;
  if (seq.empty()) seq.assign(static_cast<std::size_t>(std::max(c.trials, 0)), c.task);
  Plan plan;
  double t = 0.0;
  const Pose home = home_pose();
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const TaskSpec task = sessions::task_by_id(seq[k].id);
    const Deviation dev = k < c.deviations.size() ? c.deviations[k] : c.deviation;
    const auto [start, goal] = task_stations(task, c.layout);
    Pose at_start = inverse_kinematics(c.arm, start);
    at_start.aperture = 1.0;
    Pose gripped = at_start;
    gripped.aperture = 0.3;
    Pose at_goal = inverse_kinematics(c.arm, goal);
    at_goal.aperture = 0.3;
    at_goal.wrist = task.delta_theta ? kPi / 2.0 : 0.0;
    Pose released = at_goal;
    released.aperture = 1.0;
    const bool rotate = task.delta_theta != 0;

    TrialTruth truth;
    truth.task = task;
    truth.start = t;
    auto add = [&](const char* name, double base, const Pose& from, const Pose& to, bool movement, GripClass grip,
                   double c0, double c1) {
      Segment s;
      s.t0 = t;
      s.t1 = t + base * jitter_factor(rng, c.timing_jitter);
      s.from = from;
      s.to = to;
      s.movement = movement;
      s.deviation = dev;
      s.grip = grip;
      s.name = name;
      s.contact_from = c0;
      s.contact_to = c1;
      plan.segments.push_back(s);
      t = s.t1;
    };
    add("hold", kHold, home, home, false, GripClass::Rest, 0, 0);
    add("reach", kMove, home, at_start, true, GripClass::HandOpen, 0, 0);
    add("grasp", kGrip, at_start, gripped, false, GripClass::HandClose, 0, 1);
    add("relocate", kMove, gripped, at_goal, true, rotate ? GripClass::WaveOut : GripClass::Rest, 1, 1);
    add("release", kGrip, at_goal, released, false, GripClass::HandOpen, 1, 0);
    add("return", kMove, released, home, true, rotate ? GripClass::WaveIn : GripClass::Rest, 0, 0);
    add("hold", kHold, home, home, false, GripClass::Rest, 0, 0);
    truth.end = t;
    truth.completion_time = truth.end - truth.start;
    plan.trials.push_back(truth);
  }
  plan.end = t;
  return plan;
}

const Segment& segment_at(const Plan& p, double t) {
  auto it = std::upper_bound(p.segments.begin(), p.segments.end(), t,
                             [](double v, const Segment& s) { return v < s.t1; });
  if (it == p.segments.end()) return p.segments.back();
  return *it;
}

double progress(const Segment& s, double t) { return min_jerk((t - s.t0) / (s.t1 - s.t0)); }

kinematics::JointState joints_at(const Plan& p, double t) {
  const Segment& s = segment_at(p, t);
  const double u = progress(s, t);
  kinematics::JointState js;
  Quaternion sh = slerp(s.from.shoulder, s.to.shoulder, u);
  if (s.movement && s.deviation.amplitude != 0.0) {
    sh = sh * Quaternion::from_axis_angle(s.deviation.axis, s.deviation.amplitude * std::sin(kPi * u));
  }
  js.shoulder = sh;
  js.elbow_flexion = s.from.elbow + (s.to.elbow - s.from.elbow) * u;
  js.wrist_rotation = s.from.wrist + (s.to.wrist - s.from.wrist) * u;
  js.hand_aperture = s.from.aperture + (s.to.aperture - s.from.aperture) * u;
  return js;
}

double contact_load(const Plan& p, double t) {
  const Segment& s = segment_at(p, t);
  return s.contact_from + (s.contact_to - s.contact_from) * progress(s, t);
}

// Slow postural sway with zero rate at t = 0.
Quaternion chest_at(double t) {
  const double pitch = 0.035 * (1.0 - std::cos(2.0 * kPi * 0.10 * t));
  const double roll = 0.026 * (1.0 - std::cos(2.0 * kPi * 0.07 * t));
  return rot_x(roll) * rot_y(pitch);
}

struct SegmentOrientations {
  Quaternion chest, upper, forearm;
};

SegmentOrientations orientations_at(const Plan& p, double t) {
  const auto js = joints_at(p, t);
  SegmentOrientations o;
  o.chest = chest_at(t);
  o.upper = o.chest * js.shoulder;
  o.forearm = o.upper * kinematics::rot_flexion(js.elbow_flexion);
  return o;
}

Vec3 gaussian3(std::mt19937_64& rng, double sd) {
  if (sd == 0.0) return Vec3::Zero();
  std::normal_distribution<double> n(0.0, sd);
  const double x = n(rng), y = n(rng), z = n(rng);
  return {x, y, z};
}

/// Envelope-modulated AR(1) carrier, one per channel.
class EmgGenerator {
 public:
  EmgGenerator(const EmgSynthConfig& c, std::mt19937_64& rng) : c_(c), rng_(rng) {
    if (!(c.smoothing >= 0.0 && c.smoothing < 1.0)) throw DomainError("EMG smoothing must be in [0, 1)");
    for (auto& x : carrier_) x = normal_(rng_);
  }

  void redraw(GripClass g) {
    for (std::size_t ch = 0; ch < emg::kChannels; ++ch) {
      double level = c_.base;
      if (g != GripClass::Rest && ch / 2 + 1 == static_cast<std::size_t>(g)) level += c_.separation * c_.sigma;
      envelope_[ch] = std::max(kMinEnvelope, level + c_.sigma * normal_(rng_));
    }
  }

  std::array<double, emg::kChannels> sample() {
    std::array<double, emg::kChannels> out{};
    const double a = c_.smoothing, b = std::sqrt(1.0 - a * a);
    for (std::size_t ch = 0; ch < emg::kChannels; ++ch) {
      carrier_[ch] = a * carrier_[ch] + b * normal_(rng_);
      out[ch] = envelope_[ch] * carrier_[ch];
    }
    return out;
  }

 private:
  EmgSynthConfig c_;
  std::mt19937_64& rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::array<double, emg::kChannels> carrier_{};
  std::array<double, emg::kChannels> envelope_{};
};

std::vector<double> components(const Quaternion& q) {
  const auto c = q.components();
  return {c.begin(), c.end()};
}

struct PendingRecord {
  StreamRecord record;
  int order = 0;  // tie-break among records of one device at the same instant
};

std::string fmt_tag(const char* a, const std::string& b) { return std::string(a) + " " + b; }

}  // namespace

double min_jerk(double tau) {
  const double t = std::clamp(tau, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

NoiseConfig nominal_noise() { return {0.02, 0.02, 0.02, 0.0}; }

Pose inverse_kinematics(const kinematics::ArmModel& arm, const Vec3& target) {
  arm.validate();
  const Vec3 rel = target - arm.shoulder_offset;
  const double r = rel.norm();
  const double lu = arm.upper_length, lf = arm.forearm_length;
  if (r > lu + lf || r < std::abs(lu - lf) || r == 0.0) throw DomainError("target out of reach");
  const double c = std::clamp((r * r - lu * lu - lf * lf) / (2.0 * lu * lf), -1.0, 1.0);
  Pose p;
  p.elbow = std::acos(c);
  const Vec3 local(lf * std::sin(p.elbow), 0.0, -lu - lf * std::cos(p.elbow));
  p.shoulder = shortest_arc(local, rel);
  return p;
}

std::pair<Vec3, Vec3> task_stations(const TaskSpec& task, const StationLayout& l) {
  const TaskSpec t = sessions::task_by_id(task.id);
  const Vec3 right_top(l.depth, -l.half_width, l.top), left_top(l.depth, l.half_width, l.top);
  const Vec3 right_bottom(l.depth, -l.half_width, l.bottom);
  if (t.delta_d > 0) return {right_top, left_top};
  if (t.delta_d < 0) return {left_top, right_top};
  return {right_top, right_bottom};
}

SynthSession synth_session(const SynthConfig& c) {
  c.arm.validate();
  std::mt19937_64 rng(c.seed);
  const Plan plan = make_plan(c, rng);

  SynthSession out;
  out.trials = plan.trials;
  SessionAssembler as;
  as.set_header(keys::kSubject, c.subject);
  as.set_header(keys::kPhase, std::string(sessions::phase_name(c.phase)));
  as.set_header(keys::kDay, std::to_string(c.day));
  as.set_header(keys::kSystem, std::string(sessions::system_name(c.system)));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", c.arm.upper_length);
  as.set_header(keys::kUpperLength, buf);
  std::snprintf(buf, sizeof buf, "%.4f", c.arm.forearm_length);
  as.set_header(keys::kForearmLength, buf);
  as.set_header(keys::kLimbMass, "2.6");
  as.set_header(keys::kObjectMass, "0.26");
  as.set_header(keys::kMassNote, "object:limb = 1:10");
  as.set_header(keys::kLatency, "500-800");

  std::vector<PendingRecord> pending;
  auto emit = [&](RecordKind kind, const char* device, double t_s, std::vector<double> payload, int order,
                  std::string tag = {}) {
    StreamRecord r;
    r.kind = kind;
    r.device = device;
    r.t_ms = std::round(t_s * 1e6) / 1e3;  // whole microseconds
    r.payload = std::move(payload);
    r.tag = std::move(tag);
    pending.push_back({std::move(r), order});
  };

  if (plan.segments.empty()) {
    out.session = as.finish();
    return out;
  }

  // Markers.
  for (std::size_t k = 0; k < plan.trials.size(); ++k) {
    emit(RecordKind::Marker, devices::kHost, plan.trials[k].start, {}, 0,
         std::string(tags::kTrialStart) + " task=" + std::to_string(plan.trials[k].task.id));
  }
  for (const auto& s : plan.segments) {
    emit(RecordKind::Marker, devices::kHost, s.t0, {}, 1,
         fmt_tag(tags::kPhase, std::string(s.name) + " grip=" + std::string(emg::grip_name(s.grip))));
  }
  for (const auto& tr : plan.trials) emit(RecordKind::Marker, devices::kHost, tr.end, {}, -1, tags::kTrialEnd);

  // Orientation records from each segment sensor.
  const double q_dt = 1.0 / kQuatRateHz;
  const auto n_q = static_cast<std::size_t>(std::floor(plan.end / q_dt + 1e-9));
  for (std::size_t k = 0; k <= n_q; ++k) {
    const double t = static_cast<double>(k) * q_dt;
    const auto o = orientations_at(plan, t);
    const std::array<std::pair<const char*, Quaternion>, 3> sensors{
        {{devices::kChest, o.chest}, {devices::kUpper, o.upper}, {devices::kForearm, o.forearm}}};
    for (const auto& [dev, q] : sensors) {
      Quaternion noisy = q;
      if (c.noise.quat_std > 0.0) noisy = q * Quaternion::from_rotation_vector(gaussian3(rng, c.noise.quat_std));
      emit(RecordKind::Quaternion, dev, t, components(noisy), 0);
    }
  }

  // Raw IMU records; the gyro reports the mean body rate over the preceding interval.
  const double i_dt = 1.0 / kImuRateHz;
  const auto n_i = static_cast<std::size_t>(std::floor(plan.end / i_dt + 1e-9));
  if (c.imu) {
    SegmentOrientations prev = orientations_at(plan, 0.0);
    for (std::size_t k = 0; k <= n_i; ++k) {
      const double t = static_cast<double>(k) * i_dt;
      const auto o = orientations_at(plan, t);
      const std::array<std::tuple<const char*, Quaternion, Quaternion>, 3> sensors{
          {{devices::kChest, prev.chest, o.chest},
           {devices::kUpper, prev.upper, o.upper},
           {devices::kForearm, prev.forearm, o.forearm}}};
      for (const auto& [dev, q0, q1] : sensors) {
        const Vec3 gyro = (k == 0 ? Vec3::Zero() : Vec3(relative(q0, q1).rotation_vector() / i_dt)) +
                          gaussian3(rng, c.noise.gyro_std);
        const Vec3 accel = q1.conjugate().rotate(Vec3::UnitZ()) + gaussian3(rng, c.noise.accel_std);
        const Vec3 mag = q1.conjugate().rotate(kEarthField) + gaussian3(rng, c.noise.mag_std);
        emit(RecordKind::Imu, dev, t,
             {gyro.x(), gyro.y(), gyro.z(), accel.x(), accel.y(), accel.z(), mag.x(), mag.y(), mag.z()}, 1);
      }
      prev = o;
    }
  }
  out.truth.t.reserve(n_i + 1);
  for (std::size_t k = 0; k <= n_i; ++k) {
    const double t = static_cast<double>(k) * i_dt;
    out.truth.t.push_back(t);
    out.truth.states.push_back(joints_at(plan, t));
  }

  if (c.emg) {
    EmgGenerator gen(c.emg_config, rng);
    const double e_dt = 1.0 / emg::kSampleRateHz;
    const auto n_e = static_cast<std::size_t>(std::floor(plan.end / e_dt + 1e-9));
    const auto per_block = static_cast<std::size_t>(std::llround(kEnvelopeBlock / e_dt));
    for (std::size_t k = 0; k <= n_e; ++k) {
      const double t = static_cast<double>(k) * e_dt;
      if (k % per_block == 0) gen.redraw(segment_at(plan, t).grip);
      const auto s = gen.sample();
      emit(RecordKind::Emg, devices::kEmg, t, {s.begin(), s.end()}, 0);
    }
  }

  if (c.impulses) {
    const double j_dt = 1.0 / kImpulseRateHz;
    const auto n_j = static_cast<std::size_t>(std::floor(plan.end / j_dt + 1e-9));
    std::array<double, kFingertips> impulse{};
    for (std::size_t k = 0; k <= n_j; ++k) {
      const double t = static_cast<double>(k) * j_dt;
      const double load = contact_load(plan, t);
      for (std::size_t f = 0; f < kFingertips; ++f) impulse[f] += kFingertipForce[f] * load * j_dt;
      emit(RecordKind::Impulse, devices::kHand, t, {impulse.begin(), impulse.end()}, 0);
    }
  }

  // Sequence numbers follow time per device.
  std::stable_sort(pending.begin(), pending.end(), [](const PendingRecord& a, const PendingRecord& b) {
    return std::tie(a.record.device, a.record.t_ms, a.order) < std::tie(b.record.device, b.record.t_ms, b.order);
  });
  std::string device;
  std::uint64_t seq = 0;
  for (auto& p : pending) {
    if (p.record.device != device) {
      device = p.record.device;
      seq = 0;
    }
    p.record.seq = seq++;
    as.add(std::move(p.record));
  }
  out.session = as.finish();
  return out;
}

std::vector<emg::LabeledFeature> synth_feature_set(std::size_t per_class, const EmgSynthConfig& config,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto window = static_cast<std::size_t>(std::llround(emg::kWindowMs * emg::kSampleRateHz / 1000.0));
  const auto per_block = static_cast<std::size_t>(std::llround(kEnvelopeBlock * emg::kSampleRateHz));
  constexpr std::size_t kBurnIn = 20;
  std::vector<emg::LabeledFeature> out;
  out.reserve(per_class * emg::kGripClassCount);
  for (std::size_t n = 0; n < per_class; ++n) {
    for (GripClass g : emg::kAllGrips) {
      EmgGenerator gen(config, rng);
      gen.redraw(g);
      for (std::size_t k = 0; k < kBurnIn; ++k) gen.sample();
      emg::EmgWindow w;
      w.channels.assign(emg::kChannels, std::vector<double>(window));
      for (std::size_t k = 0; k < window; ++k) {
        if (k % per_block == 0) gen.redraw(g);
        const auto s = gen.sample();
        for (std::size_t ch = 0; ch < emg::kChannels; ++ch) w.channels[ch][k] = s[ch];
      }
      out.push_back({emg::extract_features(w), g});
    }
  }
  return out;
}

emg::LdaModel default_decoder(const EmgSynthConfig& config) {
  constexpr std::uint64_t kDecoderSeed = 0x5eedULL;
  const auto train = synth_feature_set(200, config, kDecoderSeed);
  return emg::lda_train(train, emg::kDefaultShrinkage);
}

std::vector<SessionFile> synth_study(const StudyConfig& cfg) {
  if (cfg.subjects < 1 || cfg.training_days < 1 || cfg.trials_per_task < 1) {
    throw DomainError("study needs at least one subject, training day and trial per task");
  }
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto tasks = sessions::task_table();
  std::vector<SessionFile> out;

  for (int s = 0; s < cfg.subjects; ++s) {
    char subject[16];
    std::snprintf(subject, sizeof subject, "S%02d", s + 1);
    Vec3 axis;
    do {
      axis = Vec3(unit(rng), unit(rng), unit(rng));
    } while (axis.norm() < 0.2 || axis.norm() > 1.0);
    axis.normalize();

    auto session = [&](sessions::Phase phase, sessions::System system, int day, int reps, double amplitude) {
      SynthConfig c;
      c.subject = subject;
      c.phase = phase;
      c.system = system;
      c.day = day;
      c.imu = c.emg = c.impulses = false;
      c.seed = rng();
      for (int r = 0; r < reps; ++r) c.sequence.insert(c.sequence.end(), tasks.begin(), tasks.end());
      std::shuffle(c.sequence.begin(), c.sequence.end(), rng);
      for (std::size_t k = 0; k < c.sequence.size(); ++k) {
        const double a = amplitude * (1.0 + cfg.jitter * unit(rng));
        c.deviations.push_back({a, axis});
      }
      out.push_back(synth_session(c).session);
    };

    session(sessions::Phase::InitialEval, sessions::System::PHAM, 0, 1, 0.0);
    double amplitude = cfg.initial_deviation;
    for (int d = 1; d <= cfg.training_days; ++d) {
      session(sessions::Phase::Training, sessions::System::HoloPHAM, d, cfg.trials_per_task, amplitude);
      if (d < cfg.training_days) amplitude *= cfg.decay;
    }
    const int testing_day = cfg.training_days + 1;
    session(sessions::Phase::Testing, sessions::System::HoloPHAM, testing_day, 1, amplitude);
    session(sessions::Phase::Washout, sessions::System::HoloPHAM, testing_day + 5, cfg.trials_per_task,
            cfg.washout_deviation);
  }
  return out;
}

std::vector<sessions::TrialRecord> outcome_fixture() {
  struct Target {
    sessions::System system;
    double pre, post;
  };
  constexpr std::array<Target, 3> targets{{{sessions::System::CRT, 9.0, 7.0},
                                           {sessions::System::PHAM, 20.0, 15.3},
                                           {sessions::System::HoloPHAM, 20.0, 14.3}}};
  // Per-subject offsets; each set sums to zero so the means are the targets.
  constexpr std::array<double, 4> pre_offset{-0.75, 0.25, 1.0, -0.5};
  constexpr std::array<double, 4> post_offset{-0.5, 0.0, 0.75, -0.25};
  // Per-task offsets, also zero-sum.
  constexpr std::array<double, 4> task_offset{-0.25, 0.25, 0.5, -0.5};
  std::vector<sessions::TrialRecord> out;
  for (const auto& tg : targets) {
    for (std::size_t s = 0; s < pre_offset.size(); ++s) {
      for (const auto& task : sessions::task_table()) {
        const double to = task_offset[static_cast<std::size_t>(task.id - 1)];
        sessions::TrialRecord r;
        char subject[16];
        std::snprintf(subject, sizeof subject, "S%02zu", s + 1);
        r.subject = subject;
        r.task = task;
        r.system = tg.system;
        r.phase = sessions::Phase::InitialEval;
        r.day = 0;
        r.order = task.id - 1;
        r.completion_time = tg.pre + pre_offset[s] + to;
        out.push_back(r);
        r.phase = sessions::Phase::Testing;
        r.day = 6;
        r.completion_time = tg.post + post_offset[s] + to;
        out.push_back(r);
      }
    }
  }
  return out;
}

}  // namespace reachkin::ingest
