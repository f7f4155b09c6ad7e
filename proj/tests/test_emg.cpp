#include <algorithm>
#include <set>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "reachkin/emg.hpp"
#include "reachkin/error.hpp"
#include "reachkin/ingest/synth.hpp"

using namespace reachkin;
using namespace reachkin::emg;

namespace {

EmgWindow window_of(const std::vector<double>& ch0, double fill = 0.0) {
  EmgWindow w;
  w.channels.assign(kChannels, std::vector<double>(ch0.size(), fill));
  w.channels[0] = ch0;
  return w;
}

double feature(const FeatureVector& f, std::size_t channel, std::size_t which) {
  return f[channel * kFeaturesPerChannel + which];
}

/// Gaussian clusters around `centers` with unit spread, `n` per class.
std::vector<LabeledFeature> clusters(const std::vector<std::pair<GripClass, std::vector<double>>>& centers,
                                     std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<LabeledFeature> out;
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& [label, c] : centers) {
      LabeledFeature s;
      s.label = label;
      for (double m : c) s.features.push_back(m + g(rng));
      out.push_back(std::move(s));
    }
  }
  return out;
}

/// Two classes at (0,0) and (4,0) with spread +-1 along both axes.
std::vector<LabeledFeature> two_class_cross() {
  std::vector<LabeledFeature> out;
  for (auto [label, cx] : {std::pair{GripClass::Rest, 0.0}, std::pair{GripClass::HandOpen, 4.0}}) {
    for (auto [dx, dy] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}) {
      out.push_back({{cx + dx, dy}, label});
    }
  }
  return out;
}

}  // namespace

TEST_CASE("grip names") {
  CHECK(kAllGrips.size() == 5);
  std::set<std::string_view> names;
  for (auto g : kAllGrips) {
    names.insert(grip_name(g));
    CHECK(parse_grip(grip_name(g)) == g);
  }
  CHECK(names.size() == 5);
  CHECK_THROWS_AS(parse_grip("fist"), DataError);
}

TEST_CASE("time-domain features") {
  SUBCASE("all-zero window") {
    const auto f = extract_features(window_of(std::vector<double>(40, 0.0)));
    REQUIRE(f.size() == kFeatureCount);
    for (double v : f) CHECK(v == 0.0);
  }
  SUBCASE("constant window") {
    const auto f = extract_features(window_of(std::vector<double>(40, -0.3), -0.3));
    for (std::size_t c = 0; c < kChannels; ++c) {
      CHECK(feature(f, c, 0) == doctest::Approx(0.3));
      CHECK(feature(f, c, 1) == 0.0);
      CHECK(feature(f, c, 2) == 0.0);
      CHECK(feature(f, c, 3) == 0.0);
    }
  }
  SUBCASE("unit square wave, 4 periods, zero deadzone") {
    // Period 10 samples, phase-shifted so both ends are partial half-cycles:
    // 9 runs of constant sign, 8 crossings.
    std::vector<double> x(40);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = (k + 3) % 10 < 5 ? 1.0 : -1.0;
    const auto f = extract_features(window_of(x), 0.0);
    CHECK(feature(f, 0, 0) == 1.0);
    CHECK(feature(f, 0, 1) == 16.0);
    CHECK(feature(f, 0, 2) == 8.0);
    CHECK(feature(f, 0, 3) == 0.0);
    CHECK(feature(f, 1, 2) == 0.0);
  }
  SUBCASE("deadzone suppresses small crossings and slope changes") {
    std::vector<double> x(40);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = (k % 2 ? 1.0 : -1.0) * 0.002;
    const auto loose = extract_features(window_of(x), 0.0);
    const auto tight = extract_features(window_of(x), 0.01);
    CHECK(feature(loose, 0, 2) == 39.0);
    CHECK(feature(loose, 0, 3) == 38.0);
    CHECK(feature(tight, 0, 2) == 0.0);
    CHECK(feature(tight, 0, 3) == 0.0);
  }
  SUBCASE("invariants on random windows") {
    std::mt19937_64 rng(51);
    std::normal_distribution<double> g(0.0, 0.3);
    for (int k = 0; k < 50; ++k) {
      EmgWindow w;
      w.channels.assign(kChannels, std::vector<double>(40));
      for (auto& ch : w.channels)
        for (double& v : ch) v = g(rng);
      const auto f = extract_features(w);
      for (std::size_t c = 0; c < kChannels; ++c) {
        CHECK(feature(f, c, 0) >= 0.0);
        CHECK(feature(f, c, 1) >= 0.0);
        for (std::size_t i : {2u, 3u}) {
          CHECK(feature(f, c, i) >= 0.0);
          CHECK(feature(f, c, i) == std::floor(feature(f, c, i)));
        }
      }
      CHECK(extract_features(w) == f);
    }
  }
  SUBCASE("malformed windows") {
    EmgWindow w = window_of(std::vector<double>(40, 0.0));
    w.channels.pop_back();
    CHECK_THROWS_AS(extract_features(w), DataError);
    w = window_of(std::vector<double>(40, 0.0));
    w.channels[3].pop_back();
    CHECK_THROWS_AS(extract_features(w), DataError);
  }
}

TEST_CASE("sliding windows") {
  EmgStream s;
  for (int k = 0; k < 200; ++k) {
    s.t.push_back(k / kSampleRateHz);
    std::array<double, kChannels> row{};
    row[0] = k;
    s.samples.push_back(row);
  }
  const auto ws = make_windows(s);
  // 40-sample windows, 10-sample step over 200 samples.
  REQUIRE(ws.size() == 17);
  CHECK(ws[0].channels[0].front() == 0.0);
  CHECK(ws[0].channels[0].size() == 40);
  CHECK(ws[1].channels[0].front() == 10.0);
  CHECK(ws[0].timestamp == doctest::Approx(39 / kSampleRateHz));
}

TEST_CASE("two-class decision boundary at x = 2") {
  const auto data = two_class_cross();
  const auto m = lda_train(data, 0.0);
  CHECK(m.classes() == std::vector<GripClass>{GripClass::Rest, GripClass::HandOpen});
  CHECK((m.covariance() - 0.5 * Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-15);
  for (double y : {-3.0, 0.0, 2.5}) {
    CHECK(lda_predict(m, std::vector<double>{1.999, y}).label == GripClass::Rest);
    CHECK(lda_predict(m, std::vector<double>{2.001, y}).label == GripClass::HandOpen);
    const auto mid = lda_predict(m, std::vector<double>{2.0, y});
    CHECK(std::fabs(mid.posterior[0] - 0.5) <= 1e-9);
    CHECK(std::fabs(mid.posterior[1] - 0.5) <= 1e-9);
  }
  CHECK(lda_predict(m, std::vector<double>{0.0, 0.0}).label == GripClass::Rest);
  CHECK(lda_predict(m, std::vector<double>{4.0, 0.0}).label == GripClass::HandOpen);
  CHECK_THROWS_AS(lda_predict(m, std::vector<double>{1.0}), DataError);
}

TEST_CASE("duplicating every sample leaves the model unchanged") {
  const auto data = ingest::synth_feature_set(30, {}, 7);
  auto twice = data;
  twice.insert(twice.end(), data.begin(), data.end());
  const auto a = lda_train(data), b = lda_train(twice);
  CHECK(a.classes() == b.classes());
  CHECK((a.means() - b.means()).norm() <= 1e-12 * a.means().norm());
  CHECK((a.covariance() - b.covariance()).norm() <= 1e-12 * a.covariance().norm());
  for (std::size_t k = 0; k < a.priors().size(); ++k) CHECK(a.priors()[k] == doctest::Approx(b.priors()[k]));
}

TEST_CASE("trained model properties") {
  const auto train = ingest::synth_feature_set(200, {}, 53);
  const auto m = lda_train(train);

  SUBCASE("covariance symmetric positive definite, priors sum to 1") {
    CHECK((m.covariance() - m.covariance().transpose()).norm() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.covariance());
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    double s = 0;
    for (double p : m.priors()) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.classes().size() == 5);
  }
  SUBCASE("each class mean decodes to its class") {
    std::vector<LabeledFeature> means;
    for (std::size_t k = 0; k < m.classes().size(); ++k) {
      const Eigen::VectorXd mu = m.means().row(static_cast<Eigen::Index>(k)).transpose();
      means.push_back({FeatureVector(mu.data(), mu.data() + mu.size()), m.classes()[k]});
    }
    const auto cm = confusion_eval(m, means);
    CHECK(cm.accuracy == 1.0);
    for (auto g : kAllGrips) {
      CHECK(cm.counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(g)] == 1);
      CHECK(cm.row_sum(g) == 1);
    }
  }
  SUBCASE("posteriors sum to 1 and match the likelihood oracle") {
    const auto test = ingest::synth_feature_set(40, {}, 54);
    for (const auto& s : test) {
      const auto p = lda_predict(m, s.features);
      double sum = 0;
      for (double v : p.posterior) sum += v;
      CHECK(std::fabs(sum - 1.0) <= 1e-9);
      const Eigen::Map<const Eigen::VectorXd> x(s.features.data(), static_cast<Eigen::Index>(s.features.size()));
      CHECK(m.classes()[oracle::gaussian_argmax(x, m.means(), m.covariance(), m.priors())] == p.label);
    }
  }
  SUBCASE("held-out accuracy") {
    const auto test = ingest::synth_feature_set(200, {}, 55);
    const auto cm = confusion_eval(m, test);
    CHECK(cm.accuracy >= 0.95);
    CHECK(cm.total == test.size());
    for (auto g : kAllGrips) CHECK(cm.row_sum(g) == 200);
  }
  SUBCASE("model round trip") {
    std::stringstream a;
    write_model(a, m);
    const auto back = read_model(a);
    std::stringstream b;
    write_model(b, back);
    CHECK(a.str() == b.str());
    const auto test = ingest::synth_feature_set(10, {}, 56);
    for (const auto& s : test) CHECK(lda_predict(back, s.features).posterior == lda_predict(m, s.features).posterior);

    std::string bytes = a.str();
    std::istringstream trunc(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(read_model(trunc), DataError);
    std::istringstream junk("not a model at all, really not");
    CHECK_THROWS_AS(read_model(junk), DataError);
    CHECK_THROWS_AS(load_model("/nonexistent/dir/model.bin"), IoError);
  }
}

TEST_CASE("scale invariance of the decision") {
  std::mt19937_64 rng(57);
  const auto base = clusters({{GripClass::Rest, {0, 0, 0}},
                              {GripClass::HandOpen, {2, 0, 1}},
                              {GripClass::WaveOut, {0, 2, -1}}},
                             100, rng);
  const auto probe = clusters({{GripClass::Rest, {1, 1, 0}}}, 300, rng);
  for (double c : {0.01, 3.0, 1000.0}) {
    auto scaled = base;
    for (auto& s : scaled)
      for (double& v : s.features) v *= c;
    const auto m1 = lda_train(base), mc = lda_train(scaled);
    for (const auto& s : probe) {
      auto x = s.features;
      for (double& v : x) v *= c;
      CHECK(lda_predict(mc, x).label == lda_predict(m1, s.features).label);
    }
  }
}

TEST_CASE("raising a prior never lowers that class's posterior") {
  std::mt19937_64 rng(58);
  const auto data = clusters({{GripClass::Rest, {0, 0}}, {GripClass::HandClose, {1.5, 0}}, {GripClass::WaveIn, {0, 1.5}}},
                             50, rng);
  auto m = lda_train(data);
  const auto probe = clusters({{GripClass::Rest, {0.7, 0.7}}}, 100, rng);
  for (const auto& s : probe) {
    double prev = 0.0;
    for (double p1 : {0.05, 0.2, 0.33, 0.6, 0.9}) {
      const double rest = (1.0 - p1) / 2;
      const std::vector<double> pri{rest, p1, rest};
      m.set_priors(pri);
      const double post = lda_predict(m, s.features).posterior[1];
      CHECK(post >= prev);
      prev = post;
    }
  }
  CHECK_THROWS_AS(m.set_priors(std::vector<double>{1, 0, 1}), DomainError);
  CHECK_THROWS_AS(m.set_priors(std::vector<double>{1, 1}), DataError);
}

TEST_CASE("full shrinkage is nearest-mean classification") {
  std::mt19937_64 rng(59);
  // Strongly anisotropic clusters: the shrunk model ignores the shape.
  std::vector<LabeledFeature> data;
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    data.push_back({{g(rng) * 5, g(rng) * 0.1}, GripClass::Rest});
    data.push_back({{3 + g(rng) * 5, 0.8 + g(rng) * 0.1}, GripClass::WaveOut});
  }
  const auto m = lda_train(data, 1.0);
  const Eigen::MatrixXd& mu = m.means();
  std::uniform_real_distribution<double> u(-5, 8);
  for (int k = 0; k < 500; ++k) {
    const Eigen::Vector2d x(u(rng), u(rng) / 5);
    const std::size_t nearest = (x - mu.row(0).transpose()).norm() <= (x - mu.row(1).transpose()).norm() ? 0 : 1;
    CHECK(lda_predict(m, std::vector<double>{x[0], x[1]}).label == m.classes()[nearest]);
  }
}

TEST_CASE("chance level with random labels") {
  std::mt19937_64 rng(60);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 4);
  auto noise = [&](std::size_t n) {
    std::vector<LabeledFeature> out;
    for (std::size_t k = 0; k < n; ++k) {
      LabeledFeature s;
      for (int d = 0; d < 6; ++d) s.features.push_back(g(rng));
      s.label = kAllGrips[static_cast<std::size_t>(pick(rng))];
      out.push_back(std::move(s));
    }
    return out;
  };
  const auto m = lda_train(noise(5000));
  const auto cm = confusion_eval(m, noise(5000));
  CHECK(cm.total == 5000);
  CHECK(std::fabs(cm.accuracy - 0.2) <= 0.05);
}

TEST_CASE("overlapping wave-out and wave-in clusters") {
  std::mt19937_64 rng(61);
  const std::vector<std::pair<GripClass, std::vector<double>>> centers{
      {GripClass::Rest, {0, 0, 0}},       {GripClass::HandOpen, {8, 0, 0}}, {GripClass::HandClose, {0, 8, 0}},
      {GripClass::WaveOut, {0, 0, 8}},    {GripClass::WaveIn, {0, 0, 8.6}}};
  const auto m = lda_train(clusters(centers, 300, rng));
  const auto cm = confusion_eval(m, clusters(centers, 300, rng));
  const auto wo = static_cast<std::size_t>(GripClass::WaveOut), wi = static_cast<std::size_t>(GripClass::WaveIn);
  const std::size_t block = cm.counts[wo][wi] + cm.counts[wi][wo];
  std::size_t off = 0;
  for (std::size_t i = 0; i < kGripClassCount; ++i)
    for (std::size_t j = 0; j < kGripClassCount; ++j)
      if (i != j) off += cm.counts[i][j];
  CHECK(block > 100);
  CHECK(static_cast<double>(block) >= 0.95 * static_cast<double>(off));
}

TEST_CASE("training errors") {
  std::vector<LabeledFeature> one_class{{{0.0, 1.0}, GripClass::Rest}, {{1.0, 0.0}, GripClass::Rest}};
  CHECK_THROWS_AS(lda_train(one_class), DomainError);

  std::vector<LabeledFeature> thin{{{0.0}, GripClass::Rest}, {{1.0}, GripClass::Rest}, {{3.0}, GripClass::HandOpen}};
  CHECK_THROWS_AS(lda_train(thin), DomainError);

  // Second feature constant: singular without shrinkage.
  std::vector<LabeledFeature> flat;
  for (double x : {0.0, 1.0, 2.0}) {
    flat.push_back({{x, 5.0}, GripClass::Rest});
    flat.push_back({{x + 4, 5.0}, GripClass::WaveIn});
  }
  try {
    lda_train(flat, 0.0);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("shrinkage") != std::string::npos);
  }
  CHECK_NOTHROW(lda_train(flat, 0.01));
  CHECK_THROWS_AS(lda_train(flat, 1.5), DomainError);
}

TEST_CASE("grip commands drive the wrist and aperture") {
  kinematics::JointState js;
  apply_grip(js, GripClass::WaveOut, 0.5);
  CHECK(js.wrist_rotation == doctest::Approx(0.75));
  apply_grip(js, GripClass::WaveIn, 0.25);
  CHECK(js.wrist_rotation == doctest::Approx(0.375));
  apply_grip(js, GripClass::HandOpen, 0.4);
  CHECK(js.hand_aperture == doctest::Approx(0.4));
  apply_grip(js, GripClass::HandOpen, 5.0);
  CHECK(js.hand_aperture == 1.0);
  apply_grip(js, GripClass::HandClose, 5.0);
  CHECK(js.hand_aperture == 0.0);
  const auto before = js;
  apply_grip(js, GripClass::Rest, 3.0);
  CHECK(js.wrist_rotation == before.wrist_rotation);
  CHECK(js.hand_aperture == before.hand_aperture);
}
