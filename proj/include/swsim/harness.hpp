#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "swsim/datagen.hpp"
#include "swsim/estimator.hpp"
#include "swsim/inference.hpp"

namespace swsim {

// One simulation scenario: a true-model configuration plus the working
// structure used for analysis. The catalog ids 1-24 cycle the working
// structure (EXCH/NE/DTD) within each true-model block; every field can be
// overridden through the key-value config format.
struct Scenario {
  int id = 0;
  int n_clusters = 32;
  int n_periods = 5;
  bool continuous_period = true;
  bool exposure_dependent = false;
  bool random_intervention = true;
  WorkingStructure working = WorkingStructure::EXCH;
  DesignCorrelationParams params{0.01, 0.1, 0.5, 1.0};
  double delta = 0.0;
  std::vector<double> delta_s;  // exposure-dependent truth, size J-1
  RecruitmentPlan plan = RecruitmentPlan::same_pattern(
      {PatternKind::ClusterPeriodMixed}, SizeRule::balanced(50));

  TrialDesign design() const;
  GenerativeSpec generative() const;
  WorkingModel working_model() const;
  // Estimand names with their true values: {"delta"} or
  // {"delta_s1", ..., "Delta"}.
  std::vector<std::pair<std::string, double>> estimands() const;
};

// The exposure-time effect curve used by the exposure-dependent scenarios
// (averages to zero).
std::vector<double> default_exposure_effects();

Scenario scenario_from_catalog(int id);

// Plain-text key-value scenario description (keys mirror the design
// parameter names: I, J, K, rho0, rho1, CAC, sigma_eps_sq, delta, delta_s,
// period_effect, random_intervention, pattern, pattern_control,
// pattern_treated, exp_rate, K_control, K_treated, K_exposure, working,
// scenario). Unknown keys are errors.
Scenario scenario_from_config_text(const std::string& text);
Scenario scenario_from_config_file(const std::string& path);

struct ReplicateRow {
  int replicate = 0;
  std::string estimand;
  VcovKind vcov = VcovKind::ModelBased;
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool covered = false;
  double truth = 0.0;
  bool converged = false;
};

struct ScenarioResult {
  Scenario scenario;
  int n_reps = 0;
  std::vector<ReplicateRow> rows;
  std::vector<std::pair<int, std::string>> failures;  // replicate, message
};

// Seeded Monte Carlo sweep. Replicate p draws its stream from
// (base_seed, p), so the result table is identical for every thread count.
// Replicate-level fit failures are recorded; a failure rate above 5% aborts.
ScenarioResult run_scenario(const Scenario& scenario, int n_reps,
                            std::uint64_t base_seed, int n_threads = 0);

struct MetricsSummary {
  std::string estimand;
  VcovKind vcov = VcovKind::ModelBased;
  int n_reps = 0;
  int n_converged = 0;
  double truth = 0.0;
  double bias = 0.0;
  double empirical_sd = 0.0;  // 1/n divisor
  double avg_se = 0.0;
  double coverage = 0.0;
  double coverage_mc_se = 0.0;
};

MetricsSummary summarize_rows(const std::vector<ReplicateRow>& rows, double truth);
std::vector<MetricsSummary> summarize(const ScenarioResult& result);

// File emission (deterministic byte-for-byte given the same rows).
void write_replicates_csv(const ScenarioResult& result, const std::string& path);
void write_summary_csv(const std::vector<MetricsSummary>& summary,
                       const std::string& path);
void write_summary_markdown(const std::vector<MetricsSummary>& summary,
                            const std::string& path);
std::string format_summary_table(const std::vector<MetricsSummary>& summary);

// Round-trip: read a replicates.csv written by write_replicates_csv.
ScenarioResult read_replicates_csv(const std::string& path);

}  // namespace swsim
