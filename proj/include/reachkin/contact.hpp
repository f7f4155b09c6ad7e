#pragma once

#include <optional>
#include <span>
#include <vector>

namespace reachkin::contact {

inline constexpr double kDefaultFrameRate = 60.0;  // Hz
inline constexpr double kDefaultThreshold = 0.1;   // N
inline constexpr std::size_t kDefaultDebounce = 2; // frames

enum class ImpulseMode {
  Cumulative,   // J_k is the running integral of force
  Incremental,  // J_k is the impulse delivered during frame k
};

/// Cumulative: F_k = (J_{k+1} - J_k) / dt, one shorter than the input.
/// Incremental: F_k = J_k / dt, same length. Throws DomainError for dt <= 0
/// and for fewer than two cumulative samples.
std::vector<double> force_from_impulse(std::span<const double> impulse, double dt,
                                       ImpulseMode mode = ImpulseMode::Cumulative);

enum class Feedback { VibrateOn, VibrateOff };

struct FeedbackCommand {
  double time = 0.0;
  std::size_t frame = 0;
  Feedback action = Feedback::VibrateOn;
};

struct ContactEvent {
  std::size_t onset_frame = 0;
  std::size_t release_frame = 0;  // first frame of the confirmed release, exclusive end
  double onset_time = 0.0;
  double release_time = 0.0;
  double peak_force = 0.0;         // N
  double delivered_impulse = 0.0;  // N s, sum of F dt over the event
};

struct DetectorConfig {
  double threshold = kDefaultThreshold;
  std::size_t debounce = kDefaultDebounce;
  double dt = 1.0 / kDefaultFrameRate;
};

/// Streaming detector for one fingertip. Contact is confirmed once the force
/// has stayed at or above threshold for `debounce` consecutive frames, and
/// released once it has stayed below for as many frames. Event times are
/// those of the first frame of each confirming run.
class ContactDetector {
 public:
  explicit ContactDetector(DetectorConfig config);

  /// Feeds one force sample; returns the feedback command it confirms, if any.
  std::optional<FeedbackCommand> push(double force);
  /// Closes an open contact at the end of the stream.
  std::optional<FeedbackCommand> finish();

  const std::vector<ContactEvent>& events() const { return events_; }

 private:
  double time_of(std::size_t frame) const { return static_cast<double>(frame) * config_.dt; }

  DetectorConfig config_;
  std::size_t frame_ = 0;
  bool in_contact_ = false;
  std::size_t run_ = 0;         // length of the current opposite-state run
  std::size_t run_start_ = 0;
  double run_peak_ = 0.0;
  double run_impulse_ = 0.0;
  ContactEvent open_;
  std::vector<ContactEvent> events_;
};

/// Batch form over a whole force series; throws DomainError for threshold <= 0.
std::vector<ContactEvent> detect_contacts(std::span<const double> force, const DetectorConfig& config = {});

/// One vibrate-on per onset and one vibrate-off per release, time-ordered.
std::vector<FeedbackCommand> feedback_commands(std::span<const ContactEvent> events);

}  // namespace reachkin::contact
