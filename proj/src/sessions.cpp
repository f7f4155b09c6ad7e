#include "reachkin/sessions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <tuple>

#include "reachkin/error.hpp"

namespace reachkin::sessions {

namespace {

constexpr int kMaxTrainingSpan = 10;
constexpr int kMaxTrainingGap = 2;
constexpr int kMinWashoutDelay = 5;
constexpr std::size_t kMinSignedRankPairs = 6;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_opt(const char* spec, const std::optional<double>& v) { return v ? fmt(spec, *v) : "NA"; }

// Sorted before summing so the result does not depend on input order.
double stable_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return stats::mean(v);
}

std::optional<double> stable_sem(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return stats::sem(v);
}

using CellKey = std::pair<std::string, int>;

std::map<CellKey, double> cell_means(const std::vector<const TrialRecord*>& ts) {
  std::map<CellKey, std::vector<double>> cells;
  for (const auto* t : ts) cells[{t->subject, t->task.id}].push_back(t->completion_time);
  std::map<CellKey, double> out;
  for (auto& [k, v] : cells) out[k] = stable_mean(std::move(v));
  return out;
}

}  // namespace

std::array<TaskSpec, 4> task_table() { return {{{1, 1, 0}, {2, 1, 1}, {3, -1, 0}, {4, 0, 0}}}; }

TaskSpec task_by_id(int id) {
  for (const auto& t : task_table()) {
    if (t.id == id) return t;
  }
  throw DomainError("unknown task id " + std::to_string(id));
}

std::optional<TaskSpec> task_from_features(int delta_d, int delta_theta) {
  for (const auto& t : task_table()) {
    if (t.delta_d == delta_d && t.delta_theta == delta_theta) return t;
  }
  return std::nullopt;
}

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::InitialEval: return "initial-eval";
    case Phase::Training: return "training";
    case Phase::Testing: return "testing";
    case Phase::Washout: return "washout";
  }
  return "?";
}

std::string_view system_name(System s) {
  switch (s) {
    case System::CRT: return "CRT";
    case System::PHAM: return "PHAM";
    case System::HoloPHAM: return "HoloPHAM";
  }
  return "?";
}

Phase parse_phase(std::string_view s) {
  for (Phase p : {Phase::InitialEval, Phase::Training, Phase::Testing, Phase::Washout}) {
    if (phase_name(p) == s) return p;
  }
  throw DataError("unknown phase '" + std::string(s) + "'");
}

System parse_system(std::string_view s) {
  for (System x : kAllSystems) {
    if (system_name(x) == s) return x;
  }
  throw DataError("unknown system '" + std::string(s) + "'");
}

void validate_trial(const TrialRecord& t) {
  if (!(t.completion_time > 0.0)) throw DomainError("completion time must be positive");
  if (task_by_id(t.task.id) != t.task) throw DomainError("task features disagree with the task table");
}

std::vector<ScheduleIssue> schedule_issues(const std::vector<TrialRecord>& trials) {
  struct Days {
    std::set<int> training;
    std::optional<int> last_testing;
    std::optional<int> first_washout;
  };
  std::map<std::string, Days> by_subject;
  for (const auto& t : trials) {
    auto& d = by_subject[t.subject];
    if (t.phase == Phase::Training) d.training.insert(t.day);
    if (t.phase == Phase::Testing) d.last_testing = std::max(d.last_testing.value_or(t.day), t.day);
    if (t.phase == Phase::Washout) d.first_washout = std::min(d.first_washout.value_or(t.day), t.day);
  }
  std::vector<ScheduleIssue> out;
  for (const auto& [subject, d] : by_subject) {
    if (!d.training.empty()) {
      const int span = *d.training.rbegin() - *d.training.begin() + 1;
      if (span > kMaxTrainingSpan) {
        out.push_back({subject, "training spans " + std::to_string(span) + " days (limit " +
                                    std::to_string(kMaxTrainingSpan) + ")"});
      }
      int prev = *d.training.begin();
      for (int day : d.training) {
        const int gap = day - prev - 1;
        if (gap > kMaxTrainingGap) {
          out.push_back({subject, "gap of " + std::to_string(gap) + " days before training day " +
                                      std::to_string(day)});
        }
        prev = day;
      }
    }
    if (d.first_washout && d.last_testing && *d.first_washout - *d.last_testing < kMinWashoutDelay) {
      out.push_back({subject, "washout on day " + std::to_string(*d.first_washout) + " is less than " +
                                  std::to_string(kMinWashoutDelay) + " days after testing"});
    }
  }
  return out;
}

double percent_reduction(double pre_mean, double post_mean) {
  if (!(pre_mean > 0.0)) throw DomainError("pre-phase mean must be positive");
  return 100.0 * (pre_mean - post_mean) / pre_mean;
}

std::vector<OutcomeStats> score_outcomes(const std::vector<TrialRecord>& trials) {
  std::vector<OutcomeStats> out;
  for (System sys : kAllSystems) {
    std::vector<const TrialRecord*> pre, post;
    for (const auto& t : trials) {
      if (t.system != sys) continue;
      if (t.phase == Phase::InitialEval) pre.push_back(&t);
      if (t.phase == Phase::Testing) post.push_back(&t);
    }
    if (pre.empty() && post.empty()) continue;
    const std::string name(system_name(sys));
    if (pre.empty()) throw DataError(name + " has no initial-eval trials");
    if (post.empty()) throw DataError(name + " has no testing trials");
    for (const auto* t : pre) validate_trial(*t);
    for (const auto* t : post) validate_trial(*t);

    OutcomeStats s;
    s.system = sys;
    s.n_pre = pre.size();
    s.n_post = post.size();
    std::vector<double> pre_t, post_t;
    for (const auto* t : pre) pre_t.push_back(t->completion_time);
    for (const auto* t : post) post_t.push_back(t->completion_time);
    s.pre_mean = stable_mean(pre_t);
    s.post_mean = stable_mean(post_t);
    s.pre_sem = stable_sem(pre_t);
    s.post_sem = stable_sem(post_t);
    s.reduction = percent_reduction(s.pre_mean, s.post_mean);

    const auto pre_cells = cell_means(pre);
    const auto post_cells = cell_means(post);
    std::vector<double> a, b;
    for (const auto& [k, v] : pre_cells) {
      const auto it = post_cells.find(k);
      if (it == post_cells.end()) continue;
      a.push_back(v);
      b.push_back(it->second);
    }
    s.pairs = a.size();
    if (s.pairs >= 2) s.ttest = stats::paired_ttest(a, b);
    if (s.pairs >= kMinSignedRankPairs) s.signed_rank = stats::signed_rank_test(a, b);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw DataError("no initial-eval or testing trials to score");
  return out;
}

Baselines baselines_from_trials(const std::vector<TrialRecord>& trials) {
  std::map<CellKey, const TrialRecord*> pick;
  for (const auto& t : trials) {
    if (t.phase != Phase::InitialEval || t.day != 0 || t.system != System::PHAM || t.joints.empty()) continue;
    auto& slot = pick[{t.subject, t.task.id}];
    if (!slot || t.order < slot->order) slot = &t;
  }
  Baselines out;
  for (const auto& [k, t] : pick) out[k] = t->joints;
  return out;
}

bool retention(const Trajectory& t, double washout_mean) {
  if (t.days.empty()) return false;
  double best = t.days.front().mean;
  for (const auto& d : t.days) best = std::min(best, d.mean);
  return washout_mean > best && washout_mean < t.days.front().mean;
}

namespace {

struct ScoredTrial {
  const TrialRecord* trial;
  double cost;
};

/// subject -> costs, aggregated into one point.
DayPoint aggregate(int day, const std::map<std::string, std::vector<double>>& by_subject) {
  DayPoint p;
  p.day = day;
  std::vector<double> means;
  for (const auto& [subject, costs] : by_subject) {
    means.push_back(stable_mean(costs));
    p.trials += costs.size();
  }
  p.subjects = means.size();
  p.mean = stats::mean(means);
  p.variance = stats::sample_variance(means);
  return p;
}

Trajectory build_trajectory(int task, const std::vector<ScoredTrial>& scored, int first_day) {
  Trajectory tr;
  tr.task = task;
  std::map<int, std::map<std::string, std::vector<double>>> days;
  std::map<std::string, std::vector<double>> washout;
  std::optional<int> washout_day;
  for (const auto& s : scored) {
    if (task != 0 && s.trial->task.id != task) continue;
    const int day = s.trial->day - first_day + 1;
    if (s.trial->phase == Phase::Training) {
      days[day][s.trial->subject].push_back(s.cost);
    } else {
      washout[s.trial->subject].push_back(s.cost);
      washout_day = std::min(washout_day.value_or(day), day);
    }
  }
  for (const auto& [day, subjects] : days) tr.days.push_back(aggregate(day, subjects));
  if (washout_day) {
    tr.washout = aggregate(*washout_day, washout);
    if (!tr.days.empty()) tr.retained = retention(tr, tr.washout->mean);
  }
  return tr;
}

}  // namespace

Progression progression_report(const std::vector<TrialRecord>& trials, const Baselines& baselines,
                               const alignment::AlignOptions& options) {
  std::vector<const TrialRecord*> used;
  std::optional<int> first_day;
  for (const auto& t : trials) {
    if (t.phase != Phase::Training && t.phase != Phase::Washout) continue;
    used.push_back(&t);
    if (t.phase == Phase::Training) first_day = std::min(first_day.value_or(t.day), t.day);
  }
  if (!first_day) throw DomainError("progression needs at least one training day");

  std::vector<ScoredTrial> scored;
  std::set<int> tasks;
  for (const auto* t : used) {
    const auto it = baselines.find({t->subject, t->task.id});
    if (it == baselines.end()) {
      throw DataError("no baseline for subject " + t->subject + " task T" + std::to_string(t->task.id));
    }
    scored.push_back({t, alignment::similarity_cost(t->joints, it->second, options).total});
    tasks.insert(t->task.id);
  }

  Progression p;
  for (int task : tasks) p.tasks.push_back(build_trajectory(task, scored, *first_day));
  p.overall = build_trajectory(0, scored, *first_day);
  return p;
}

namespace {

void write_trajectory(std::ostringstream& o, const Trajectory& t) {
  o << "\n[progression " << (t.task == 0 ? std::string("all") : "T" + std::to_string(t.task)) << "]\n";
  o << "day\tmean_cost\tvariance\tsubjects\ttrials\n";
  auto row = [&](const std::string& label, const DayPoint& d) {
    o << label << '\t' << fmt("%.6f", d.mean) << '\t' << fmt("%.6f", d.variance) << '\t' << d.subjects << '\t'
      << d.trials << '\n';
  };
  for (const auto& d : t.days) row(std::to_string(d.day), d);
  if (t.washout) row("washout:" + std::to_string(t.washout->day), *t.washout);
  o << "retention\t" << (t.retained ? (*t.retained ? "true" : "false") : "NA") << '\n';
}

}  // namespace

std::string format_report(const SessionReport& r) {
  std::ostringstream o;
  o << "# reachkin-report/1\n";
  if (!r.outcomes.empty()) {
    o << "\n[outcomes]\n";
    o << "system\tn_pre\tpre_mean_s\tpre_sem_s\tn_post\tpost_mean_s\tpost_sem_s\treduction_pct\tpairs\tt\tdf\tp\t"
         "sig\tsigned_rank_p\n";
    for (const auto& s : r.outcomes) {
      o << system_name(s.system) << '\t' << s.n_pre << '\t' << fmt("%.4f", s.pre_mean) << '\t'
        << fmt_opt("%.4f", s.pre_sem) << '\t' << s.n_post << '\t' << fmt("%.4f", s.post_mean) << '\t'
        << fmt_opt("%.4f", s.post_sem) << '\t' << fmt("%.2f", s.reduction) << '\t' << s.pairs << '\t';
      if (s.ttest) {
        o << fmt("%.4f", s.ttest->t) << '\t' << fmt("%.0f", s.ttest->df) << '\t' << fmt("%.6f", s.ttest->p) << '\t'
          << stats::significance_stars(s.ttest->p);
      } else {
        o << "NA\tNA\tNA\t";
      }
      o << '\t' << (s.signed_rank ? fmt("%.6f", s.signed_rank->p) : "NA") << '\n';
    }
  }
  if (r.progression) {
    for (const auto& t : r.progression->tasks) write_trajectory(o, t);
    write_trajectory(o, r.progression->overall);
  }
  if (!r.schedule.empty()) {
    o << "\n[schedule]\nsubject\tissue\n";
    for (const auto& s : r.schedule) o << s.subject << '\t' << s.message << '\n';
  }
  return o.str();
}

std::string format_report_text(const SessionReport& r) {
  std::ostringstream o;
  if (!r.outcomes.empty()) {
    o << "Completion times (initial evaluation -> testing)\n";
    for (const auto& s : r.outcomes) {
      o << "  " << system_name(s.system) << ": " << fmt("%.2f", s.pre_mean) << " s";
      if (s.pre_sem) o << " +/- " << fmt("%.2f", *s.pre_sem);
      o << " (n=" << s.n_pre << ") -> " << fmt("%.2f", s.post_mean) << " s";
      if (s.post_sem) o << " +/- " << fmt("%.2f", *s.post_sem);
      o << " (n=" << s.n_post << "), reduction " << fmt("%.2f", s.reduction) << "%";
      if (s.ttest) {
        o << ", t(" << fmt("%.0f", s.ttest->df) << ") = " << fmt("%.3f", s.ttest->t) << ", p = "
          << fmt("%.4f", s.ttest->p) << ' ' << stats::significance_stars(s.ttest->p);
      } else {
        o << ", no test (fewer than 2 pairs)";
      }
      o << '\n';
      if (s.signed_rank) o << "    signed-rank (advisory): p = " << fmt("%.4f", s.signed_rank->p) << '\n';
    }
  }
  if (r.progression) {
    o << "Similarity cost by training day\n";
    auto line = [&](const Trajectory& t) {
      o << "  " << (t.task == 0 ? std::string("all") : "T" + std::to_string(t.task)) << ':';
      for (const auto& d : t.days) o << " d" << d.day << '=' << fmt("%.3f", d.mean);
      if (t.washout) o << " washout=" << fmt("%.3f", t.washout->mean);
      if (t.retained) o << (*t.retained ? " (retained)" : " (not retained)");
      o << '\n';
    };
    for (const auto& t : r.progression->tasks) line(t);
    line(r.progression->overall);
  }
  for (const auto& s : r.schedule) o << "Schedule: " << s.subject << ": " << s.message << '\n';
  return o.str();
}

std::string day_cost_table(const Progression& p) {
  std::ostringstream o;
  o << "task\tday\tmean_cost\tvariance\tsubjects\n";
  auto rows = [&](const Trajectory& t) {
    const std::string task = t.task == 0 ? "all" : "T" + std::to_string(t.task);
    for (const auto& d : t.days) {
      o << task << '\t' << d.day << '\t' << fmt("%.6f", d.mean) << '\t' << fmt("%.6f", d.variance) << '\t'
        << d.subjects << '\n';
    }
    if (t.washout) {
      o << task << "\twashout\t" << fmt("%.6f", t.washout->mean) << '\t' << fmt("%.6f", t.washout->variance)
        << '\t' << t.washout->subjects << '\n';
    }
  };
  for (const auto& t : p.tasks) rows(t);
  rows(p.overall);
  return o.str();
}

std::string task_time_table(const std::vector<TrialRecord>& trials) {
  std::map<std::tuple<int, int, int>, std::vector<double>> cells;  // system, phase, task
  for (const auto& t : trials) {
    cells[{static_cast<int>(t.system), static_cast<int>(t.phase), t.task.id}].push_back(t.completion_time);
  }
  std::ostringstream o;
  o << "system\tphase\ttask\tmean_s\tsem_s\tn\n";
  for (auto& [k, v] : cells) {
    const auto [sys, phase, task] = k;
    o << system_name(static_cast<System>(sys)) << '\t' << phase_name(static_cast<Phase>(phase)) << "\tT" << task
      << '\t' << fmt("%.4f", stable_mean(v)) << '\t' << fmt_opt("%.4f", stable_sem(v)) << '\t' << v.size() << '\n';
  }
  return o.str();
}

std::string format_trial_table(const std::vector<TrialRecord>& trials) {
  std::ostringstream o;
  o << "subject\tphase\tday\tsystem\ttask\tcompletion_s\torder\n";
  for (const auto& t : trials) {
    o << t.subject << '\t' << phase_name(t.phase) << '\t' << t.day << '\t' << system_name(t.system) << '\t'
      << t.task.id << '\t' << fmt("%.17g", t.completion_time) << '\t' << t.order << '\n';
  }
  return o.str();
}

std::vector<TrialRecord> parse_trial_table(std::istream& in) {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line.rfind("subject\t", 0) == 0) continue;
    std::istringstream row(line);
    TrialRecord t;
    std::string phase, system;
    int task = 0;
    if (!(row >> t.subject >> phase >> t.day >> system >> task >> t.completion_time)) {
      throw DataError("line " + std::to_string(lineno) + ": expected subject phase day system task completion_s");
    }
    row >> t.order;
    try {
      t.phase = parse_phase(phase);
      t.system = parse_system(system);
      t.task = task_by_id(task);
      validate_trial(t);
    } catch (const Error& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << content;
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace reachkin::sessions
