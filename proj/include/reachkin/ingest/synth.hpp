#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reachkin/emg.hpp"
#include "reachkin/ingest/format.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/sessions.hpp"

namespace reachkin::ingest {

inline constexpr double kQuatRateHz = 20.0;
inline constexpr double kImuRateHz = 100.0;
inline constexpr double kImpulseRateHz = 60.0;
inline constexpr std::size_t kFingertips = 5;

/// Device ids used in synthesized sessions.
namespace devices {
inline constexpr const char* kChest = "chest";
inline constexpr const char* kUpper = "upper";
inline constexpr const char* kForearm = "forearm";
inline constexpr const char* kEmg = "myo";
inline constexpr const char* kHand = "hand";
inline constexpr const char* kHost = "host";
}  // namespace devices

/// Marker tags: "trial start task=<id>", "phase <name> grip=<class>",
/// "trial end".
namespace tags {
inline constexpr const char* kTrialStart = "trial start";
inline constexpr const char* kTrialEnd = "trial end";
inline constexpr const char* kPhase = "phase";
}  // namespace tags

/// 10 t^3 - 15 t^4 + 6 t^5 on [0, 1], clamped outside.
double min_jerk(double tau);

struct NoiseConfig {
  double gyro_std = 0.0;   // rad/s
  double accel_std = 0.0;  // g
  double mag_std = 0.0;    // normalized field units
  double quat_std = 0.0;   // rad, on emitted Q records
};

/// gyro 0.02 rad/s, accel 0.02 g, mag 0.02.
NoiseConfig nominal_noise();

/// Class envelopes: every channel idles at `base`; a non-rest class raises its
/// own pair of channels by separation * sigma. Envelope levels are redrawn
/// with standard deviation sigma every 50 ms and modulate unit band-limited
/// Gaussian noise.
struct EmgSynthConfig {
  double base = 0.1;
  double sigma = 0.05;
  double separation = 4.0;
  double smoothing = 0.5;  // one-pole low-pass coefficient for the carrier
};

/// Windowpane stations in the chest frame, m.
struct StationLayout {
  double depth = 0.40;
  double half_width = 0.15;
  double top = 0.10;
  double bottom = -0.20;
};

/// A joint-space pose the generator interpolates between.
struct Pose {
  Quaternion shoulder;
  double elbow = 0.0;
  double wrist = 0.0;
  double aperture = 0.0;
};

/// Shoulder and elbow placing the hand at `target`: elbow from the law of
/// cosines, shoulder as the shortest arc onto the target direction. Throws
/// DomainError for an unreachable target.
Pose inverse_kinematics(const kinematics::ArmModel& arm, const Vec3& target);

/// Start (grasp) and goal (release) hand positions for a task.
std::pair<Vec3, Vec3> task_stations(const sessions::TaskSpec& task, const StationLayout& layout = {});

/// Systematic deviation from the nominal movement: during each movement the
/// shoulder gains an extra rotation of amplitude * sin(pi s) about `axis`.
struct Deviation {
  double amplitude = 0.0;  // rad
  Vec3 axis = Vec3::UnitZ();
};

struct SynthConfig {
  sessions::TaskSpec task{1, 1, 0};
  int trials = 1;
  /// When non-empty, one trial per entry instead of `trials` x `task`.
  std::vector<sessions::TaskSpec> sequence;
  /// Per-trial deviations; trials beyond the list use `deviation`.
  std::vector<Deviation> deviations;
  std::uint64_t seed = 0;
  NoiseConfig noise;
  bool imu = true;
  bool emg = true;
  bool impulses = true;
  bool timing_jitter = true;  // phase durations scaled by U(0.9, 1.1) per trial
  kinematics::ArmModel arm;
  StationLayout layout;
  EmgSynthConfig emg_config;
  Deviation deviation;
  std::string subject = "S01";
  sessions::Phase phase = sessions::Phase::Training;
  int day = 1;
  sessions::System system = sessions::System::HoloPHAM;
};

struct TrialTruth {
  sessions::TaskSpec task;
  double start = 0.0;  // s
  double end = 0.0;
  double completion_time = 0.0;
};

struct SynthSession {
  SessionFile session;
  kinematics::JointSeries truth;  // at the IMU rate, on the I-record timestamps
  std::vector<TrialTruth> trials;
};

/// Reach -> grasp -> relocate (rotating the object when delta_theta = 1) ->
/// release -> return, repeated `trials` times from a default pose. Emits Q
/// records at 20 Hz per segment sensor, I records at 100 Hz, EMG at 200 Hz,
/// fingertip impulses at 60 Hz and phase markers. Deterministic per seed.
SynthSession synth_session(const SynthConfig& config);

/// Independent feature vectors, `per_class` for each grip class.
std::vector<emg::LabeledFeature> synth_feature_set(std::size_t per_class, const EmgSynthConfig& config,
                                                   std::uint64_t seed);

/// Decoder trained on synth_feature_set with the given config; what the
/// analysis pipeline uses when no model is supplied.
emg::LdaModel default_decoder(const EmgSynthConfig& config = {});

struct StudyConfig {
  int subjects = 4;
  int training_days = 5;
  int trials_per_task = 2;
  double initial_deviation = 0.35;  // rad, day-1 deviation
  double decay = 0.6;               // per training day
  double washout_deviation = 0.2;   // rad
  double jitter = 0.1;              // relative spread of deviation per trial
  std::uint64_t seed = 0;
};

/// Progression study fixture: day-0 PHAM baselines, training days with
/// deviations shrinking geometrically, testing, and a washout session five
/// days later whose deviation lies between day 1 and the last training day.
/// One session per (subject, day, phase), zero sensor noise, no EMG.
std::vector<SessionFile> synth_study(const StudyConfig& config);

/// Completion-time fixture: four subjects, every task, initial-eval and testing
/// phases on each system, built so the per-system means are exactly
/// CRT 9.0 -> 7.0 s, PHAM 20.0 -> 15.3 s and HoloPHAM 20.0 -> 14.3 s.
std::vector<sessions::TrialRecord> outcome_fixture();

}  // namespace reachkin::ingest
