#include "reachkin/contact.hpp"

#include <algorithm>

#include "reachkin/error.hpp"
#include "reachkin/simd/kernels.hpp"

namespace reachkin::contact {

std::vector<double> force_from_impulse(std::span<const double> impulse, double dt, ImpulseMode mode) {
  if (!(dt > 0.0)) throw DomainError("frame interval must be positive");
  if (mode == ImpulseMode::Incremental) {
    std::vector<double> f(impulse.size());
    for (std::size_t k = 0; k < impulse.size(); ++k) f[k] = impulse[k] / dt;
    return f;
  }
  if (impulse.size() < 2) throw DomainError("force differentiation needs at least two impulse samples");
  std::vector<double> f(impulse.size() - 1);
  simd::finite_difference(impulse, dt, f);
  return f;
}

ContactDetector::ContactDetector(DetectorConfig config) : config_(config) {
  if (!(config_.threshold > 0.0)) throw DomainError("contact threshold must be positive");
  if (!(config_.dt > 0.0)) throw DomainError("frame interval must be positive");
  config_.debounce = std::max<std::size_t>(1, config_.debounce);
}

std::optional<FeedbackCommand> ContactDetector::push(double force) {
  const std::size_t frame = frame_++;
  const bool above = force >= config_.threshold;
  std::optional<FeedbackCommand> cmd;

  if (!in_contact_) {
    if (!above) {
      run_ = 0;
      return cmd;
    }
    if (run_ == 0) {
      run_start_ = frame;
      run_peak_ = 0.0;
      run_impulse_ = 0.0;
    }
    ++run_;
    run_peak_ = std::max(run_peak_, force);
    run_impulse_ += force * config_.dt;
    if (run_ >= config_.debounce) {
      in_contact_ = true;
      open_ = ContactEvent{};
      open_.onset_frame = run_start_;
      open_.onset_time = time_of(run_start_);
      open_.peak_force = run_peak_;
      open_.delivered_impulse = run_impulse_;
      run_ = 0;
      cmd = FeedbackCommand{open_.onset_time, open_.onset_frame, Feedback::VibrateOn};
    }
    return cmd;
  }

  open_.peak_force = std::max(open_.peak_force, force);
  open_.delivered_impulse += force * config_.dt;
  if (above) {
    run_ = 0;
    return cmd;
  }
  if (run_ == 0) {
    run_start_ = frame;
    run_impulse_ = 0.0;
  }
  ++run_;
  run_impulse_ += force * config_.dt;
  if (run_ >= config_.debounce) {
    open_.release_frame = run_start_;
    open_.release_time = time_of(run_start_);
    open_.delivered_impulse -= run_impulse_;
    events_.push_back(open_);
    in_contact_ = false;
    run_ = 0;
    cmd = FeedbackCommand{open_.release_time, open_.release_frame, Feedback::VibrateOff};
  }
  return cmd;
}

std::optional<FeedbackCommand> ContactDetector::finish() {
  if (!in_contact_) return std::nullopt;
  const std::size_t end = run_ > 0 ? run_start_ : frame_;
  if (run_ > 0) open_.delivered_impulse -= run_impulse_;
  open_.release_frame = end;
  open_.release_time = time_of(end);
  events_.push_back(open_);
  in_contact_ = false;
  run_ = 0;
  return FeedbackCommand{open_.release_time, open_.release_frame, Feedback::VibrateOff};
}

std::vector<ContactEvent> detect_contacts(std::span<const double> force, const DetectorConfig& config) {
  ContactDetector det(config);
  for (double f : force) det.push(f);
  det.finish();
  return det.events();
}

std::vector<FeedbackCommand> feedback_commands(std::span<const ContactEvent> events) {
  std::vector<FeedbackCommand> out;
  out.reserve(2 * events.size());
  for (const auto& e : events) {
    out.push_back({e.onset_time, e.onset_frame, Feedback::VibrateOn});
    out.push_back({e.release_time, e.release_frame, Feedback::VibrateOff});
  }
  return out;
}

}  // namespace reachkin::contact
