#pragma once

#include <map>
#include <variant>
#include <vector>

#include "swsim/rng.hpp"
#include "swsim/trial.hpp"

namespace swsim {

enum class PatternKind {
  Uniform,
  NormalRescaled,
  ExponentialRescaled,
  ClusterMixed,
  ClusterPeriodMixed,
};

inline bool is_basic_pattern(PatternKind kind) {
  return kind == PatternKind::Uniform || kind == PatternKind::NormalRescaled ||
         kind == PatternKind::ExponentialRescaled;
}

struct RecruitmentPattern {
  PatternKind kind = PatternKind::Uniform;
  double rate = 1.5;  // exponential pattern only
};

// Cluster-period sizes: a fixed control size plus either one treated size or
// a size per exposure time s = 1..J-1.
struct SizeRule {
  int control_size = 0;
  std::variant<int, std::map<int, int>> treated_size;

  static SizeRule balanced(int size) { return {size, size}; }
  static SizeRule by_condition(int control, int treated) { return {control, treated}; }
  static SizeRule by_exposure(int control, std::map<int, int> treated) {
    return {control, std::move(treated)};
  }
};

// Recruitment-time draws for one cluster-period cell, sorted ascending and
// all inside (j-1, j]. The rescaled kinds map the realized sample min/max
// onto the period endpoints, so they need n >= 2.
std::vector<double> sample_cell_times(const RecruitmentPattern& pattern, int period,
                                      int n, Rng& rng);

// Resolution of a mixed pattern to one basic pattern per cluster
// (ClusterMixed: constant across periods) or per cell (ClusterPeriodMixed).
// Stored as an I x J grid of basic kinds either way.
struct PatternAssignment {
  int n_clusters = 0;
  int n_periods = 0;
  std::vector<PatternKind> cell;  // row-major I x J

  PatternKind at(int cluster, int period) const {
    return cell[static_cast<std::size_t>(cluster) * n_periods + (period - 1)];
  }
};

PatternAssignment assign_patterns(const TrialDesign& design, PatternKind mixture,
                                  Rng& rng);

// Concrete K_ij map under a size rule: control cells get control_size,
// treated cells the constant treated size or the entry for their exposure.
Eigen::MatrixXi resolve_sizes(const TrialDesign& design, const SizeRule& rule);

// Enrollment process for a whole trial: a pattern for control cells, a
// pattern for treated cells (equal in most settings), and the size rule.
struct RecruitmentPlan {
  RecruitmentPattern control_pattern;
  RecruitmentPattern treated_pattern;
  SizeRule sizes;

  static RecruitmentPlan uniform_everywhere(int size) {
    return {{PatternKind::Uniform}, {PatternKind::Uniform}, SizeRule::balanced(size)};
  }
  static RecruitmentPlan same_pattern(RecruitmentPattern p, SizeRule sizes) {
    return {p, p, std::move(sizes)};
  }
};

}  // namespace swsim
