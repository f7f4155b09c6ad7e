#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reachkin/kinematics.hpp"
#include "reachkin/series.hpp"

namespace reachkin::alignment {

enum class Metric {
  Chordal,   // min(|a - b|, |a + b|), the default pointwise cost
  Geodesic,  // rotation angle between a and b
};

double point_cost(const Quaternion& a, const Quaternion& b, Metric metric);

/// Monotone alignment. Pairs are 0-based, running from (0, 0) to
/// (|Q| - 1, |Q̂| - 1) with unit steps.
struct WarpPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double cost = 0.0;  // sum of the pointwise cost over pairs

  std::size_t length() const { return pairs.size(); }
  /// cost / K, for comparing series of different lengths.
  double normalized_cost() const { return pairs.empty() ? 0.0 : cost / static_cast<double>(pairs.size()); }
};

/// True iff the path starts and ends at the corners and every step advances
/// i, j, or both by exactly one.
bool is_valid_path(const WarpPath& w, std::size_t n, std::size_t m);

/// Sum of the pointwise cost along the given pairs, in path order.
double path_cost(const QuaternionSeries& a, const QuaternionSeries& b, const WarpPath& w,
                 Metric metric = Metric::Chordal);

/// Exact DTW with a full cost matrix. Ties in the backtrack prefer the
/// diagonal, then the step that advanced i. Throws DomainError on empty input.
WarpPath dtw(const QuaternionSeries& a, const QuaternionSeries& b, Metric metric = Metric::Chordal);

/// Exact DTW cost only, with two rolling rows (O(|Q̂|) memory).
double dtw_cost(const QuaternionSeries& a, const QuaternionSeries& b, Metric metric = Metric::Chordal);

inline constexpr std::size_t kDefaultRadius = 1;

/// Multiresolution approximation: coarsen by pairwise averaging, align the
/// coarse series recursively, project the path up and refine inside a window
/// widened by `radius` cells.
WarpPath fastdtw(const QuaternionSeries& a, const QuaternionSeries& b,
                 std::size_t radius = kDefaultRadius, Metric metric = Metric::Chordal);

struct AlignOptions {
  Metric metric = Metric::Chordal;
  bool exact = false;
  std::size_t radius = kDefaultRadius;
  bool resample = true;  // to a common grid first; false aligns raw samples
  double rate_hz = 20.0;
  bool normalize = false;  // report cost / K instead of the plain sum
};

/// Per-joint warp-path costs and their sum C.
struct SimilarityCost {
  std::map<std::string, double> per_joint;
  double total = 0.0;
};

/// Joint channels are matched by label; the label sets must agree exactly
/// (DataError otherwise). Each channel needs at least one sample.
SimilarityCost similarity_cost(const std::vector<QuaternionSeries>& trial,
                               const std::vector<QuaternionSeries>& baseline,
                               const AlignOptions& options = {});

/// Joint channels compared by similarity_cost: "shoulder" (the shoulder
/// quaternion), "elbow" (flexion lifted to a rotation about the hinge axis)
/// and "wrist" (wrist rotation about the forearm axis; identity throughout
/// when no EMG drove it, so it adds nothing to the cost).
std::vector<QuaternionSeries> joint_channels(const kinematics::JointSeries& js);

SimilarityCost similarity_cost(const kinematics::JointSeries& trial, const kinematics::JointSeries& baseline,
                               const AlignOptions& options = {});

/// One trial = its joint channels.
using TrialChannels = std::vector<QuaternionSeries>;
using TaskTrials = std::map<int, std::vector<TrialChannels>>;

struct TaskConfusion {
  std::vector<int> tasks;                  // row/column labels, ascending
  std::vector<std::vector<double>> cost;   // cost[i][j]: A task i vs B task j
};

/// C_ij = mean similarity cost over all (A task i, B task j) trial pairs.
/// Throws DataError listing every task id that either side lacks.
TaskConfusion task_confusion(const TaskTrials& a, const TaskTrials& b, const AlignOptions& options = {});

}  // namespace reachkin::alignment
