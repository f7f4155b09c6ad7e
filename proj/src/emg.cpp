#include "reachkin/emg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "reachkin/error.hpp"
#include "reachkin/simd/kernels.hpp"

namespace reachkin::emg {

namespace {

constexpr char kMagic[4] = {'R', 'K', 'L', 'D'};
constexpr std::uint16_t kMajor = 1;
constexpr std::uint16_t kMinor = 0;

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw DataError("LDA model record is truncated");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

std::string_view grip_name(GripClass g) {
  switch (g) {
    case GripClass::Rest:
      return "rest";
    case GripClass::HandOpen:
      return "hand_open";
    case GripClass::HandClose:
      return "hand_close";
    case GripClass::WaveOut:
      return "wave_out";
    case GripClass::WaveIn:
      return "wave_in";
  }
  return "unknown";
}

GripClass parse_grip(std::string_view name) {
  for (GripClass g : kAllGrips) {
    if (grip_name(g) == name) return g;
  }
  throw DataError("unknown grip class '" + std::string(name) + "'");
}

std::vector<EmgWindow> make_windows(const EmgStream& stream, double rate_hz, double window_ms, double step_ms) {
  if (!(rate_hz > 0.0) || !(window_ms > 0.0) || !(step_ms > 0.0)) {
    throw DomainError("window parameters must be positive");
  }
  if (stream.t.size() != stream.samples.size()) throw DataError("EMG timestamps and samples differ in length");
  const auto len = static_cast<std::size_t>(std::llround(window_ms * rate_hz / 1000.0));
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(step_ms * rate_hz / 1000.0)));
  std::vector<EmgWindow> out;
  if (len == 0) return out;
  for (std::size_t start = 0; start + len <= stream.samples.size(); start += step) {
    EmgWindow w;
    w.length_ms = window_ms;
    w.timestamp = stream.t[start + len - 1];
    w.channels.assign(kChannels, std::vector<double>(len));
    for (std::size_t k = 0; k < len; ++k) {
      for (std::size_t c = 0; c < kChannels; ++c) w.channels[c][k] = stream.samples[start + k][c];
    }
    out.push_back(std::move(w));
  }
  return out;
}

FeatureVector extract_features(const EmgWindow& w, double deadzone) {
  if (w.channels.size() != kChannels) {
    throw DataError("EMG window has " + std::to_string(w.channels.size()) + " channels, expected " +
                    std::to_string(kChannels));
  }
  const std::size_t n = w.channels.front().size();
  if (n == 0) throw DataError("EMG window is empty");
  FeatureVector f;
  f.reserve(kFeatureCount);
  for (const auto& ch : w.channels) {
    if (ch.size() != n) throw DataError("EMG channels have unequal sample counts");
    const auto cf = simd::emg_channel_features(ch, deadzone);
    f.push_back(cf.mav);
    f.push_back(cf.wl);
    f.push_back(static_cast<double>(cf.zc));
    f.push_back(static_cast<double>(cf.ssc));
  }
  return f;
}

void LdaModel::set_priors(std::span<const double> priors) {
  if (priors.size() != classes_.size()) throw DataError("prior count does not match class count");
  double sum = 0.0;
  for (double p : priors) {
    if (!(p > 0.0)) throw DomainError("class priors must be positive");
    sum += p;
  }
  priors_.assign(priors.begin(), priors.end());
  for (double& p : priors_) p /= sum;
  derive();
}

void LdaModel::derive() {
  covariance_ = cholesky_ * cholesky_.transpose();
  const auto lower = cholesky_.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd y = lower.solve(means_.transpose());
  weights_ = cholesky_.transpose().triangularView<Eigen::Upper>().solve(y);
  intercepts_.resize(static_cast<Eigen::Index>(classes_.size()));
  for (Eigen::Index k = 0; k < intercepts_.size(); ++k) {
    intercepts_(k) = -0.5 * y.col(k).squaredNorm() + std::log(priors_[static_cast<std::size_t>(k)]);
  }
}

std::vector<double> LdaModel::scores(std::span<const double> f) const {
  if (f.size() != dimension()) {
    throw DataError("feature dimension " + std::to_string(f.size()) + " does not match model dimension " +
                    std::to_string(dimension()));
  }
  const Eigen::Map<const Eigen::VectorXd> x(f.data(), static_cast<Eigen::Index>(f.size()));
  const Eigen::VectorXd s = weights_.transpose() * x + intercepts_;
  return {s.data(), s.data() + s.size()};
}

LdaModel LdaModel::from_parts(std::vector<GripClass> classes, Eigen::MatrixXd means, Eigen::MatrixXd cholesky,
                              std::vector<double> priors, double shrinkage) {
  const auto k = static_cast<Eigen::Index>(classes.size());
  if (means.rows() != k || priors.size() != classes.size() || cholesky.rows() != means.cols() ||
      cholesky.cols() != means.cols()) {
    throw DataError("inconsistent LDA model dimensions");
  }
  LdaModel m;
  m.classes_ = std::move(classes);
  m.means_ = std::move(means);
  m.cholesky_ = std::move(cholesky);
  m.cholesky_.triangularView<Eigen::StrictlyUpper>().setZero();
  m.priors_ = std::move(priors);
  m.shrinkage_ = shrinkage;
  m.derive();
  return m;
}

LdaModel lda_train(std::span<const LabeledFeature> samples, double shrinkage) {
  if (shrinkage < 0.0 || shrinkage > 1.0) throw DomainError("shrinkage must lie in [0, 1]");
  std::map<GripClass, std::vector<const FeatureVector*>> groups;
  for (const auto& s : samples) groups[s.label].push_back(&s.features);
  if (groups.size() < 2) throw DomainError("LDA training needs at least two classes");
  const std::size_t d = samples.front().features.size();
  if (d == 0) throw DataError("empty feature vectors");
  for (const auto& [label, fs] : groups) {
    if (fs.size() < 2) {
      throw DomainError("class '" + std::string(grip_name(label)) + "' has fewer than two samples");
    }
    for (const auto* f : fs) {
      if (f->size() != d) throw DataError("feature vectors have inconsistent dimension");
    }
  }

  const auto dim = static_cast<Eigen::Index>(d);
  std::vector<GripClass> classes;
  Eigen::MatrixXd means(static_cast<Eigen::Index>(groups.size()), dim);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<double> priors;
  Eigen::Index row = 0;
  for (const auto& [label, fs] : groups) {
    classes.push_back(label);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
    for (const auto* f : fs) mu += Eigen::Map<const Eigen::VectorXd>(f->data(), dim);
    mu /= static_cast<double>(fs.size());
    means.row(row++) = mu.transpose();
    for (const auto* f : fs) {
      const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(f->data(), dim) - mu;
      scatter.noalias() += c * c.transpose();
    }
    priors.push_back(static_cast<double>(fs.size()) / static_cast<double>(samples.size()));
  }
  Eigen::MatrixXd cov = scatter / static_cast<double>(samples.size());
  const double diag_mean = cov.trace() / static_cast<double>(d);
  cov = (1.0 - shrinkage) * cov + shrinkage * diag_mean * Eigen::MatrixXd::Identity(dim, dim);
  cov = 0.5 * (cov + cov.transpose());

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= 1e-12 * hi) {
    throw DomainError("pooled covariance is singular; retrain with shrinkage > 0");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("pooled covariance is not positive definite; use shrinkage > 0");
  return LdaModel::from_parts(std::move(classes), std::move(means), llt.matrixL(), std::move(priors), shrinkage);
}

Prediction lda_predict(const LdaModel& model, std::span<const double> f) {
  const std::vector<double> s = model.scores(f);
  const auto best = std::max_element(s.begin(), s.end());
  Prediction p;
  p.label = model.classes()[static_cast<std::size_t>(best - s.begin())];
  p.posterior.resize(s.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    p.posterior[k] = std::exp(s[k] - *best);
    sum += p.posterior[k];
  }
  for (double& v : p.posterior) v /= sum;
  return p;
}

std::size_t ConfusionMatrix::row_sum(GripClass truth) const {
  std::size_t s = 0;
  for (std::size_t v : counts[static_cast<std::size_t>(truth)]) s += v;
  return s;
}

ConfusionMatrix confusion_eval(const LdaModel& model, std::span<const LabeledFeature> samples) {
  ConfusionMatrix cm;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const GripClass pred = lda_predict(model, s.features).label;
    ++cm.counts[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)];
    if (pred == s.label) ++correct;
  }
  cm.total = samples.size();
  cm.accuracy = cm.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(cm.total);
  return cm;
}

void write_model(std::ostream& out, const LdaModel& model) {
  const auto d = static_cast<std::uint32_t>(model.dimension());
  const auto k = static_cast<std::uint32_t>(model.classes().size());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint16_t>(out, kMajor);
  put<std::uint16_t>(out, kMinor);
  put<std::uint32_t>(out, d);
  put<std::uint32_t>(out, k);
  put<double>(out, model.shrinkage());
  for (GripClass g : model.classes()) put<std::uint8_t>(out, static_cast<std::uint8_t>(g));
  for (double p : model.priors()) put<double>(out, p);
  for (std::uint32_t c = 0; c < k; ++c)
    for (std::uint32_t i = 0; i < d; ++i) put<double>(out, model.means()(c, i));
  for (std::uint32_t r = 0; r < d; ++r)
    for (std::uint32_t c = 0; c <= r; ++c) put<double>(out, model.cholesky()(r, c));
}

LdaModel read_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not an LDA model record");
  }
  const auto major = get<std::uint16_t>(in);
  get<std::uint16_t>(in);  // minor revisions stay readable
  if (major != kMajor) throw DataError("unsupported LDA model version " + std::to_string(major));
  const auto d = get<std::uint32_t>(in);
  const auto k = get<std::uint32_t>(in);
  if (d == 0 || k < 2 || d > 4096 || k > kGripClassCount) throw DataError("implausible LDA model dimensions");
  const double shrinkage = get<double>(in);
  std::vector<GripClass> classes;
  for (std::uint32_t c = 0; c < k; ++c) {
    const auto id = get<std::uint8_t>(in);
    if (id >= kGripClassCount) throw DataError("unknown grip class id " + std::to_string(id));
    classes.push_back(static_cast<GripClass>(id));
  }
  std::vector<double> priors;
  for (std::uint32_t c = 0; c < k; ++c) priors.push_back(get<double>(in));
  Eigen::MatrixXd means(k, d);
  for (std::uint32_t c = 0; c < k; ++c)
    for (std::uint32_t i = 0; i < d; ++i) means(c, i) = get<double>(in);
  Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(d, d);
  for (std::uint32_t r = 0; r < d; ++r)
    for (std::uint32_t c = 0; c <= r; ++c) chol(r, c) = get<double>(in);
  return LdaModel::from_parts(std::move(classes), std::move(means), std::move(chol), std::move(priors), shrinkage);
}

void save_model(const std::string& path, const LdaModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_model(out, model);
  if (!out) throw IoError("failed writing '" + path + "'");
}

LdaModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_model(in);
}

DofMap default_dof_map() {
  DofMap m{};
  m[static_cast<std::size_t>(GripClass::HandOpen)] = {0.0, 1.0};
  m[static_cast<std::size_t>(GripClass::HandClose)] = {0.0, -1.0};
  m[static_cast<std::size_t>(GripClass::WaveOut)] = {1.5, 0.0};
  m[static_cast<std::size_t>(GripClass::WaveIn)] = {-1.5, 0.0};
  return m;
}

void apply_grip(kinematics::JointState& js, GripClass g, double dt, const DofMap& map) {
  const DofCommand& cmd = map[static_cast<std::size_t>(g)];
  js.wrist_rotation += cmd.wrist_velocity * dt;
  js.hand_aperture = std::clamp(js.hand_aperture + cmd.aperture_velocity * dt, 0.0, 1.0);
}

}  // namespace reachkin::emg
