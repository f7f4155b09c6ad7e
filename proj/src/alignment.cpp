#include "reachkin/alignment.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "reachkin/error.hpp"
#include "reachkin/simd/kernels.hpp"

namespace reachkin::alignment {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Columns {
  std::vector<double> w, x, y, z;

  explicit Columns(const std::vector<Quaternion>& qs) {
    w.reserve(qs.size());
    x.reserve(qs.size());
    y.reserve(qs.size());
    z.reserve(qs.size());
    for (const auto& q : qs) {
      w.push_back(q.w());
      x.push_back(q.x());
      y.push_back(q.y());
      z.push_back(q.z());
    }
  }

  simd::QuatColumns view() const { return {w.data(), x.data(), y.data(), z.data(), w.size()}; }
};

/// out[k] = cost(a, b[lo + k]) for k < out.size().
void cost_row(const Quaternion& a, const std::vector<Quaternion>& b, const Columns& cols,
              std::size_t lo, std::span<double> out, Metric metric) {
  if (metric == Metric::Chordal) {
    const auto qa = a.components();
    simd::chordal_distance_row(qa.data(), cols.view().subspan(lo, out.size()), out);
  } else {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = geodesic_dist(a, b[lo + k]);
  }
}

/// Inclusive column range per row.
using Window = std::vector<std::pair<std::size_t, std::size_t>>;

void require_nonempty(const QuaternionSeries& a, const QuaternionSeries& b) {
  if (a.empty() || b.empty()) throw DomainError("cannot align an empty series");
}

WarpPath align_in_window(const std::vector<Quaternion>& a, const std::vector<Quaternion>& b,
                         const Window& window, Metric metric) {
  const std::size_t n = a.size(), m = b.size();
  const Columns cols(b);
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offset[i + 1] = offset[i] + (window[i].second - window[i].first + 1);
  std::vector<double> acc(offset[n], kInf);

  auto at = [&](std::size_t i, std::size_t j) {
    const auto [lo, hi] = window[i];
    return (j < lo || j > hi) ? kInf : acc[offset[i] + (j - lo)];
  };

  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = window[i];
    d.resize(hi - lo + 1);
    cost_row(a[i], b, cols, lo, d, metric);
    double* row = acc.data() + offset[i];
    for (std::size_t j = lo; j <= hi; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0) {
          if (j > 0) best = std::min(best, at(i - 1, j - 1));
          best = std::min(best, at(i - 1, j));
        }
        if (j > lo) best = std::min(best, row[j - 1 - lo]);
      }
      row[j - lo] = d[j - lo] + best;
    }
  }

  WarpPath path;
  path.cost = at(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    double best = kInf;
    std::size_t ni = i, nj = j;
    if (i > 0 && j > 0) {
      best = at(i - 1, j - 1);
      ni = i - 1;
      nj = j - 1;
    }
    if (i > 0 && at(i - 1, j) < best) {
      best = at(i - 1, j);
      ni = i - 1;
      nj = j;
    }
    if (j > 0 && at(i, j - 1) < best) {
      best = at(i, j - 1);
      ni = i;
      nj = j - 1;
    }
    if (best == kInf) throw DomainError("alignment window does not connect the corners");
    i = ni;
    j = nj;
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  return path;
}

Window full_window(std::size_t n, std::size_t m) { return Window(n, {0, m - 1}); }

std::vector<Quaternion> coarsen(const std::vector<Quaternion>& q) {
  std::vector<Quaternion> out;
  out.reserve((q.size() + 1) / 2);
  for (std::size_t k = 0; k < q.size(); k += 2) {
    if (k + 1 == q.size()) {
      out.push_back(q[k]);
      continue;
    }
    const auto a = q[k].components();
    auto b = q[k + 1].components();
    if (dot(q[k], q[k + 1]) < 0.0) {
      for (auto& c : b) c = -c;
    }
    out.push_back(Quaternion::from_components(a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]));
  }
  return out;
}

/// Projects a coarse path onto the fine grid (each coarse cell covers a 2x2
/// block) and widens it by `radius` rows and columns.
Window expand_window(const WarpPath& coarse, std::size_t n, std::size_t m, std::size_t radius) {
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  Window rows(n, {kUnset, 0});
  for (const auto& [ci, cj] : coarse.pairs) {
    for (std::size_t i = 2 * ci; i <= std::min(2 * ci + 1, n - 1); ++i) {
      const std::size_t j0 = std::min(2 * cj, m - 1);
      const std::size_t j1 = std::min(2 * cj + 1, m - 1);
      rows[i].first = std::min(rows[i].first, j0);
      rows[i].second = std::max(rows[i].second, j1);
    }
  }
  Window out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r0 = i >= radius ? i - radius : 0;
    const std::size_t r1 = std::min(n - 1, i + radius);
    std::size_t lo = kUnset, hi = 0;
    for (std::size_t r = r0; r <= r1; ++r) {
      if (rows[r].first == kUnset) continue;
      lo = std::min(lo, rows[r].first);
      hi = std::max(hi, rows[r].second);
    }
    lo = lo >= radius ? lo - radius : 0;
    hi = std::min(m - 1, hi + radius);
    out[i] = {lo, hi};
  }
  return out;
}

WarpPath fastdtw_impl(const std::vector<Quaternion>& a, const std::vector<Quaternion>& b,
                      std::size_t radius, Metric metric) {
  const std::size_t min_size = radius + 2;
  if (a.size() < min_size || b.size() < min_size) {
    return align_in_window(a, b, full_window(a.size(), b.size()), metric);
  }
  const WarpPath coarse = fastdtw_impl(coarsen(a), coarsen(b), radius, metric);
  return align_in_window(a, b, expand_window(coarse, a.size(), b.size(), radius), metric);
}

}  // namespace

double point_cost(const Quaternion& a, const Quaternion& b, Metric metric) {
  return metric == Metric::Chordal ? quat_dist(a, b) : geodesic_dist(a, b);
}

bool is_valid_path(const WarpPath& w, std::size_t n, std::size_t m) {
  if (w.pairs.empty() || n == 0 || m == 0) return false;
  if (w.pairs.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
  if (w.pairs.back() != std::pair<std::size_t, std::size_t>{n - 1, m - 1}) return false;
  for (std::size_t k = 1; k < w.pairs.size(); ++k) {
    const auto [pi, pj] = w.pairs[k - 1];
    const auto [ci, cj] = w.pairs[k];
    const std::size_t di = ci - pi, dj = cj - pj;
    if (ci < pi || cj < pj || di > 1 || dj > 1 || di + dj == 0) return false;
  }
  return true;
}

double path_cost(const QuaternionSeries& a, const QuaternionSeries& b, const WarpPath& w, Metric metric) {
  double sum = 0.0;
  for (const auto& [i, j] : w.pairs) sum += point_cost(a.q.at(i), b.q.at(j), metric);
  return sum;
}

WarpPath dtw(const QuaternionSeries& a, const QuaternionSeries& b, Metric metric) {
  require_nonempty(a, b);
  return align_in_window(a.q, b.q, full_window(a.size(), b.size()), metric);
}

double dtw_cost(const QuaternionSeries& a, const QuaternionSeries& b, Metric metric) {
  require_nonempty(a, b);
  const std::size_t m = b.size();
  const Columns cols(b.q);
  std::vector<double> prev(m, kInf), cur(m, kInf), d(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    cost_row(a.q[i], b.q, cols, 0, d, metric);
    for (std::size_t j = 0; j < m; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else {
        best = kInf;
        if (i > 0) {
          if (j > 0) best = std::min(best, prev[j - 1]);
          best = std::min(best, prev[j]);
        }
        if (j > 0) best = std::min(best, cur[j - 1]);
      }
      cur[j] = d[j] + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

WarpPath fastdtw(const QuaternionSeries& a, const QuaternionSeries& b, std::size_t radius, Metric metric) {
  require_nonempty(a, b);
  return fastdtw_impl(a.q, b.q, radius, metric);
}

SimilarityCost similarity_cost(const std::vector<QuaternionSeries>& trial,
                               const std::vector<QuaternionSeries>& baseline, const AlignOptions& options) {
  std::map<std::string, const QuaternionSeries*> lhs, rhs;
  for (const auto& s : trial) lhs[s.label] = &s;
  for (const auto& s : baseline) rhs[s.label] = &s;
  std::set<std::string> left_labels, right_labels;
  for (const auto& [k, v] : lhs) left_labels.insert(k);
  for (const auto& [k, v] : rhs) right_labels.insert(k);
  if (left_labels != right_labels || lhs.size() != trial.size() || rhs.size() != baseline.size()) {
    std::string msg = "joint sets differ: trial {";
    for (const auto& l : left_labels) msg += " " + l;
    msg += " } vs baseline {";
    for (const auto& l : right_labels) msg += " " + l;
    throw DataError(msg + " }");
  }

  SimilarityCost out;
  for (const auto& [label, s] : lhs) {
    QuaternionSeries x = *s;
    QuaternionSeries y = *rhs.at(label);
    if (x.empty() || y.empty()) throw DomainError("joint '" + label + "' has an empty series");
    if (options.resample) {
      x = resample(x, options.rate_hz);
      y = resample(y, options.rate_hz);
    }
    double cost;
    if (options.exact) {
      cost = options.normalize ? dtw(x, y, options.metric).normalized_cost() : dtw_cost(x, y, options.metric);
    } else {
      const WarpPath w = fastdtw(x, y, options.radius, options.metric);
      cost = options.normalize ? w.normalized_cost() : w.cost;
    }
    out.per_joint[label] = cost;
    out.total += cost;
  }
  return out;
}

std::vector<QuaternionSeries> joint_channels(const kinematics::JointSeries& js) {
  if (js.t.size() != js.states.size()) throw DataError("joint series timestamps and states differ in length");
  QuaternionSeries shoulder, elbow, wrist;
  shoulder.label = "shoulder";
  elbow.label = "elbow";
  wrist.label = "wrist";
  for (std::size_t k = 0; k < js.size(); ++k) {
    shoulder.push_back(js.t[k], js.states[k].shoulder);
    elbow.push_back(js.t[k], kinematics::rot_flexion(js.states[k].elbow_flexion));
    // Forearm long axis is z in the segment frame.
    wrist.push_back(js.t[k], rot_z(js.states[k].wrist_rotation));
  }
  return {shoulder, elbow, wrist};
}

SimilarityCost similarity_cost(const kinematics::JointSeries& trial, const kinematics::JointSeries& baseline,
                               const AlignOptions& options) {
  return similarity_cost(joint_channels(trial), joint_channels(baseline), options);
}

TaskConfusion task_confusion(const TaskTrials& a, const TaskTrials& b, const AlignOptions& options) {
  std::set<int> tasks;
  for (const auto& [id, trials] : a) tasks.insert(id);
  for (const auto& [id, trials] : b) tasks.insert(id);
  std::vector<int> missing;
  for (int id : tasks) {
    const auto ia = a.find(id);
    const auto ib = b.find(id);
    if (ia == a.end() || ia->second.empty() || ib == b.end() || ib->second.empty()) missing.push_back(id);
  }
  if (!missing.empty() || tasks.empty()) {
    std::string msg = "task confusion needs trials for every task on both systems; missing:";
    for (int id : missing) msg += " " + std::to_string(id);
    throw DataError(tasks.empty() ? "task confusion needs at least one task" : msg);
  }

  TaskConfusion out;
  out.tasks.assign(tasks.begin(), tasks.end());
  out.cost.assign(out.tasks.size(), std::vector<double>(out.tasks.size(), 0.0));
  for (std::size_t i = 0; i < out.tasks.size(); ++i) {
    const auto& ta = a.at(out.tasks[i]);
    for (std::size_t j = 0; j < out.tasks.size(); ++j) {
      const auto& tb = b.at(out.tasks[j]);
      double sum = 0.0;
      for (const auto& x : ta)
        for (const auto& y : tb) sum += similarity_cost(x, y, options).total;
      out.cost[i][j] = sum / static_cast<double>(ta.size() * tb.size());
    }
  }
  return out;
}

}  // namespace reachkin::alignment
