#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "reachkin/kinematics.hpp"

namespace reachkin::emg {

inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kFeaturesPerChannel = 4;  // MAV, WL, ZC, SSC
inline constexpr std::size_t kFeatureCount = kChannels * kFeaturesPerChannel;
inline constexpr double kSampleRateHz = 200.0;
inline constexpr double kWindowMs = 200.0;
inline constexpr double kStepMs = 50.0;
inline constexpr double kDefaultDeadzone = 0.01;  // of normalized full scale
inline constexpr double kDefaultShrinkage = 0.01;

enum class GripClass : std::uint8_t {
  Rest = 0,
  HandOpen = 1,
  HandClose = 2,
  WaveOut = 3,  // drives wrist pronation
  WaveIn = 4,   // drives wrist supination
};
inline constexpr std::size_t kGripClassCount = 5;
inline constexpr std::array<GripClass, kGripClassCount> kAllGrips{
    GripClass::Rest, GripClass::HandOpen, GripClass::HandClose, GripClass::WaveOut, GripClass::WaveIn};

std::string_view grip_name(GripClass g);
/// Accepts the names grip_name() produces. Throws DataError otherwise.
GripClass parse_grip(std::string_view name);

struct EmgWindow {
  std::vector<std::vector<double>> channels;  // kChannels equal-length channels
  double length_ms = kWindowMs;
  double timestamp = 0.0;  // s, window end
};

/// Raw multi-channel stream, one row of kChannels amplitudes per sample.
struct EmgStream {
  std::vector<double> t;
  std::vector<std::array<double, kChannels>> samples;
};

/// Sliding windows of `window_ms`, advanced by `step_ms`, assuming a uniform
/// sample rate. Partial windows at the end are dropped.
std::vector<EmgWindow> make_windows(const EmgStream& stream, double rate_hz = kSampleRateHz,
                                    double window_ms = kWindowMs, double step_ms = kStepMs);

using FeatureVector = std::vector<double>;

/// Channel-major layout: [MAV, WL, ZC, SSC] for channel 0, then channel 1...
/// Throws DataError unless there are exactly kChannels non-empty, equal-length
/// channels.
FeatureVector extract_features(const EmgWindow& w, double deadzone = kDefaultDeadzone);

struct LabeledFeature {
  FeatureVector features;
  GripClass label = GripClass::Rest;
};

/// Shared-covariance Gaussian classifier. Coefficients are derived from the
/// Cholesky factor of the shrunk covariance.
class LdaModel {
 public:
  const std::vector<GripClass>& classes() const { return classes_; }
  const Eigen::MatrixXd& means() const { return means_; }  // one row per class
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::MatrixXd& cholesky() const { return cholesky_; }  // lower, L L^T = covariance
  const std::vector<double>& priors() const { return priors_; }
  double shrinkage() const { return shrinkage_; }
  std::size_t dimension() const { return static_cast<std::size_t>(means_.cols()); }

  /// Priors must be positive; they are renormalized to sum to 1.
  void set_priors(std::span<const double> priors);

  /// Linear discriminant score per class, in classes() order.
  std::vector<double> scores(std::span<const double> f) const;

  static LdaModel from_parts(std::vector<GripClass> classes, Eigen::MatrixXd means, Eigen::MatrixXd cholesky,
                             std::vector<double> priors, double shrinkage);

 private:
  void derive();

  std::vector<GripClass> classes_;
  Eigen::MatrixXd means_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd cholesky_;
  std::vector<double> priors_;
  double shrinkage_ = 0.0;
  Eigen::MatrixXd weights_;    // Σ⁻¹ μ_k as columns
  Eigen::VectorXd intercepts_; // -½ μ_kᵀ Σ⁻¹ μ_k + ln π_k
};

/// Pooled maximum-likelihood covariance shrunk as (1-λ)Σ + λ (tr Σ / d) I;
/// priors are class frequencies. Needs >= 2 classes with >= 2 samples each.
/// Throws DomainError for a singular covariance (suggesting λ > 0).
LdaModel lda_train(std::span<const LabeledFeature> samples, double shrinkage = kDefaultShrinkage);

struct Prediction {
  GripClass label = GripClass::Rest;
  std::vector<double> posterior;  // in model.classes() order, sums to 1
};

/// Throws DataError on a dimension mismatch.
Prediction lda_predict(const LdaModel& model, std::span<const double> f);

struct ConfusionMatrix {
  // counts[truth][prediction], indexed by GripClass value
  std::array<std::array<std::size_t, kGripClassCount>, kGripClassCount> counts{};
  std::size_t total = 0;
  double accuracy = 0.0;

  std::size_t row_sum(GripClass truth) const;
};

ConfusionMatrix confusion_eval(const LdaModel& model, std::span<const LabeledFeature> samples);

/// Flat little-endian record; see docs/formats.md.
void write_model(std::ostream& out, const LdaModel& model);
LdaModel read_model(std::istream& in);
void save_model(const std::string& path, const LdaModel& model);
LdaModel load_model(const std::string& path);

/// Velocity command a decoded class applies to the EMG-driven DOF.
struct DofCommand {
  double wrist_velocity = 0.0;    // rad/s, pronation positive
  double aperture_velocity = 0.0; // 1/s
};

using DofMap = std::array<DofCommand, kGripClassCount>;
DofMap default_dof_map();

/// Integrates one decoded class over dt into the wrist and aperture DOF;
/// aperture is clamped to [0, 1].
void apply_grip(kinematics::JointState& js, GripClass g, double dt, const DofMap& map = default_dof_map());

}  // namespace reachkin::emg
