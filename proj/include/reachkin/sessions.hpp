#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reachkin/alignment.hpp"
#include "reachkin/emg.hpp"
#include "reachkin/kinematics.hpp"
#include "reachkin/stats.hpp"

namespace reachkin::sessions {

/// Relocation task: delta_d is the relative 2-D relocation direction, delta_theta
/// whether the object must be rotated on the way.
struct TaskSpec {
  int id = 0;
  int delta_d = 0;      // -1, 0, 1
  int delta_theta = 0;  // 0, 1

  bool operator==(const TaskSpec&) const = default;
};

std::array<TaskSpec, 4> task_table();
/// Throws DomainError for ids outside 1..4.
TaskSpec task_by_id(int id);
/// Inverse of the table; nullopt for a feature pair no task uses.
std::optional<TaskSpec> task_from_features(int delta_d, int delta_theta);

enum class Phase { InitialEval, Training, Testing, Washout };
enum class System { CRT, PHAM, HoloPHAM };

inline constexpr std::array<System, 3> kAllSystems{System::CRT, System::PHAM, System::HoloPHAM};

std::string_view phase_name(Phase p);  // initial-eval, training, testing, washout
std::string_view system_name(System s);  // CRT, PHAM, HoloPHAM
/// Throw DataError on unknown names.
Phase parse_phase(std::string_view s);
System parse_system(std::string_view s);

struct TrialRecord {
  std::string subject;
  TaskSpec task;
  Phase phase = Phase::Training;
  int day = 0;  // calendar day, 0 = initial evaluation
  System system = System::HoloPHAM;
  double completion_time = 0.0;  // s
  int order = 0;                 // position in the randomized task sequence; metadata only
  kinematics::JointSeries joints;
  std::optional<emg::EmgStream> emg;
  std::vector<std::vector<double>> impulses;  // one cumulative trace per fingertip
};

/// Throws DomainError for a non-positive completion time or an unknown task.
void validate_trial(const TrialRecord& t);

struct ScheduleIssue {
  std::string subject;
  std::string message;
};

/// Per subject: training days must span at most 10 days, gaps longer than 2
/// days are flagged, and washout must come at least 5 days after the last
/// testing day.
std::vector<ScheduleIssue> schedule_issues(const std::vector<TrialRecord>& trials);

/// 100 (pre - post) / pre. Throws DomainError for pre <= 0.
double percent_reduction(double pre_mean, double post_mean);

struct OutcomeStats {
  System system = System::CRT;
  std::size_t n_pre = 0;
  std::size_t n_post = 0;
  double pre_mean = 0.0;
  double post_mean = 0.0;
  std::optional<double> pre_sem;  // nullopt below two trials
  std::optional<double> post_sem;
  double reduction = 0.0;  // percent
  std::size_t pairs = 0;   // (subject, task) cells present in both phases
  std::optional<stats::TTestResult> ttest;
  std::optional<stats::SignedRankResult> signed_rank;  // advisory, pairs >= 6
};

/// Pre = initial-eval, post = testing. Tests pair the per-(subject, task) mean
/// completion times. Systems with no trials in either phase are skipped; a
/// system with only one of the two phases is a DataError.
std::vector<OutcomeStats> score_outcomes(const std::vector<TrialRecord>& trials);

struct DayPoint {
  int day = 0;
  double mean = 0.0;      // mean over subjects of each subject's daily mean cost
  double variance = 0.0;  // between-subject sample variance of those means
  std::size_t subjects = 0;
  std::size_t trials = 0;
};

struct Trajectory {
  int task = 0;  // 0 for the across-task curve
  std::vector<DayPoint> days;
  std::optional<DayPoint> washout;
  /// washout cost above the best training day and below the first; nullopt
  /// without a washout point.
  std::optional<bool> retained;
};

struct Progression {
  std::vector<Trajectory> tasks;
  Trajectory overall;
};

/// Baselines are keyed by (subject, task id).
using Baselines = std::map<std::pair<std::string, int>, kinematics::JointSeries>;

/// Day-0 initial-eval PHAM trials, the lowest `order` per (subject, task).
Baselines baselines_from_trials(const std::vector<TrialRecord>& trials);

/// Whether a washout point counts as retention.
bool retention(const Trajectory& t, double washout_mean);

/// Similarity cost of every training and washout trial against its baseline,
/// aggregated per calendar day. Throws DataError naming the subject and task
/// of a missing baseline, DomainError without training trials.
Progression progression_report(const std::vector<TrialRecord>& trials, const Baselines& baselines,
                               const alignment::AlignOptions& options = {});

struct SessionReport {
  std::vector<OutcomeStats> outcomes;
  std::optional<Progression> progression;
  std::vector<ScheduleIssue> schedule;
};

/// Structured report: `# reachkin-report/1`, then `[section]` blocks of
/// tab-delimited tables. Deterministic for a given report.
std::string format_report(const SessionReport& r);
std::string format_report_text(const SessionReport& r);
/// Plot tables: task day mean variance subjects, and system phase mean sem n.
std::string day_cost_table(const Progression& p);
std::string task_time_table(const std::vector<TrialRecord>& trials);

/// Completion-time table, one trial per line:
/// `subject phase day system task completion_s [order]`, tab-delimited with a
/// header line. Trials read back carry no joint series.
std::string format_trial_table(const std::vector<TrialRecord>& trials);
/// Throws DataError with the line number on a malformed row.
std::vector<TrialRecord> parse_trial_table(std::istream& in);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace reachkin::sessions
