#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reachkin/emg.hpp"
#include "reachkin/fusion.hpp"
#include "reachkin/ingest/format.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/sessions.hpp"

namespace reachkin::analysis {

/// Records of a session regrouped by kind, timestamps in seconds.
struct SessionStreams {
  std::map<std::string, QuaternionSeries> orientations;        // Q, per device
  std::map<std::string, std::vector<fusion::ImuFrame>> imu;    // I, per device
  emg::EmgStream emg;
  std::vector<double> impulse_t;
  std::vector<std::vector<double>> impulses;  // per fingertip, cumulative
  std::vector<ingest::StreamRecord> markers;
};

/// Throws DataError when one device mixes EMG or impulse widths.
SessionStreams split_streams(const ingest::SessionFile& s);

/// Slerp at time t, clamped to the series ends. Throws DomainError when empty.
Quaternion sample_at(const QuaternionSeries& s, double t);

/// Joint states on the chest timestamps; the other sensors are interpolated.
kinematics::JointSeries joint_series(const QuaternionSeries& chest, const QuaternionSeries& upper,
                                     const QuaternionSeries& forearm);

enum class OrientationSource {
  Quaternion,  // the sensors' own Q records
  Fused,       // I records through the orientation filter
};

struct AnalysisOptions {
  OrientationSource source = OrientationSource::Quaternion;
  fusion::FuseOptions fuse;
  kinematics::ArmModel arm;
  // Decoder for the EMG-driven wrist and aperture; the built-in synthetic
  // decoder when unset. Trials without EMG keep both at zero.
  std::optional<emg::LdaModel> decoder;
};

/// Whole-session joint series from the chest/upper/forearm devices. Throws
/// DataError naming a missing device.
kinematics::JointSeries session_joints(const SessionStreams& streams, const AnalysisOptions& options = {});

std::vector<Vec3> endpoint_trace(const kinematics::ArmModel& arm, const kinematics::JointSeries& js);

struct TrialWindow {
  int task_id = 0;  // from the start marker, 0 when absent
  double start = 0.0;
  double end = 0.0;
};

/// Pairs "trial start" / "trial end" markers. Throws DataError on nesting or
/// an unterminated trial.
std::vector<TrialWindow> trial_windows(const std::vector<ingest::StreamRecord>& markers);

kinematics::JointSeries slice(const kinematics::JointSeries& js, double start, double end);
emg::EmgStream slice(const emg::EmgStream& e, double start, double end);

struct TaskEstimate {
  int delta_d = 0;
  int delta_theta = 0;
  std::optional<sessions::TaskSpec> task;
  Vec3 relocation = Vec3::Zero();  // endpoint displacement of the relocation reach, m
  std::size_t reaches = 0;
  std::size_t rotation_windows = 0;  // longest run of wave-out/wave-in decodes
};

inline constexpr std::size_t kMinRotationRun = 3;

/// Task features from one trial: delta_d from the lateral sign of the second
/// detected reach (or 0 when it is mostly vertical), delta_theta from a run of
/// at least kMinRotationRun consecutive wave-out or wave-in decodes.
TaskEstimate identify_task(const kinematics::JointSeries& joints, const emg::EmgStream& emg,
                           const emg::LdaModel& decoder, const kinematics::ArmModel& arm = {});

/// Fills wrist_rotation and hand_aperture by integrating the decoded grip
/// over each joint-sample interval. A window's decode holds from its end time
/// until the next window ends; before the first window the class is Rest.
/// Both DOF start at zero at the first joint sample.
void apply_decoded_grips(kinematics::JointSeries& joints, const emg::EmgStream& emg, const emg::LdaModel& decoder,
                         const emg::DofMap& map = emg::default_dof_map());

/// One TrialRecord per marked trial, with header metadata and sliced streams.
std::vector<sessions::TrialRecord> session_trials(const ingest::SessionFile& s, const AnalysisOptions& options = {});

/// EMG windows labeled by the grip of the "phase ... grip=<class>" marker
/// interval that fully contains them; windows straddling a phase change are
/// skipped.
std::vector<emg::LabeledFeature> labeled_windows(const SessionStreams& streams);

/// Arm lengths from the session header when present.
kinematics::ArmModel arm_from_header(const ingest::SessionFile& s, kinematics::ArmModel fallback = {});

}  // namespace reachkin::analysis
