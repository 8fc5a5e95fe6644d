#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "swsim/trial.hpp"

namespace swsim {

enum class WorkingStructure { EXCH, NE, DTD };
enum class CovStructure { EXCH, NE, DTD, CTD };

inline CovStructure to_cov_structure(WorkingStructure s) {
  switch (s) {
    case WorkingStructure::EXCH: return CovStructure::EXCH;
    case WorkingStructure::NE: return CovStructure::NE;
    default: return CovStructure::DTD;
  }
}

std::string structure_name(WorkingStructure s);

// Variance components of the random-effect decomposition. Which fields are
// active depends on the structure: EXCH uses tau_alpha_sq; NE adds
// tau_gamma_sq; DTD/CTD use tau_gamma_sq with decay r per unit of period
// (DTD) or recruitment-time (CTD) separation; tau_v_sq is the random
// intervention effect variance.
struct VarianceComponents {
  double tau_alpha_sq = 0.0;
  double tau_gamma_sq = 0.0;
  double tau_v_sq = 0.0;
  double sigma_eps_sq = 1.0;
  double decay_r = 1.0;
};

void validate_components(const VarianceComponents& vc, bool require_noise = true);

// Design-level correlation parameters: within-period ICC under control and
// intervention, and the cluster autocorrelation (equals the per-period decay
// rate under the decay structures).
struct DesignCorrelationParams {
  double rho0 = 0.0;
  double rho1 = 0.0;
  double cac = 1.0;
  double sigma_eps_sq = 1.0;
};

// Inversion of the ICC formulas: recover variance components from
// (rho0, rho1, CAC, sigma_eps^2) for the given structure. rho1 is used only
// when a random intervention effect is requested.
VarianceComponents components_from_design_params(CovStructure structure,
                                                 const DesignCorrelationParams& p,
                                                 bool with_random_intervention);

// Forward direction, used for round-trip checks.
DesignCorrelationParams design_params_from_components(CovStructure structure,
                                                      const VarianceComponents& vc,
                                                      bool with_random_intervention);

// J x J covariance of the cell-level random effects under a working
// structure: EXCH tau_alpha^2 * 11', NE adds tau_gamma^2 * I, DTD
// tau_gamma^2 * M(1, r) with M_jk = r^|j-k|.
Eigen::MatrixXd cell_covariance(WorkingStructure structure,
                                const VarianceComponents& vc, int n_periods);

// Dense K_i. x K_i. covariance of a cluster's stacked outcome vector
// (ordered by period, then individual) under a working structure.
Eigen::MatrixXd build_working_cov(WorkingStructure structure,
                                  const VarianceComponents& vc,
                                  const TrialDesign& design, int cluster);

// Recruitment times of one cluster with their period indices, ordered
// chronologically (period-major ordering is chronological since every time
// lies inside its own period).
struct ClusterTimes {
  std::vector<double> time;
  std::vector<int> period;  // 1-based
};

// Continuous-time decay covariance for one cluster: off-diagonal
// tau_gamma^2 * r^|t - t'| (plus tau_v^2 when both individuals sit in
// treated cells and a random intervention effect is active); diagonal
// tau_gamma^2 + tau_v^2 * Z + sigma_eps^2. `treated_by_period` holds Z_ij
// per period. `within_period_decay` keeps the decay factor for same-period
// pairs (the default); switching it off gives those pairs the full
// tau_gamma^2.
Eigen::MatrixXd build_ctd_cov(const VarianceComponents& vc, const ClusterTimes& times,
                              bool with_random_intervention,
                              const std::vector<int>& treated_by_period,
                              bool within_period_decay = true);

struct FactorizationError : std::runtime_error {
  FactorizationError(int pivot, double value)
      : std::runtime_error("matrix is not positive definite: pivot " +
                           std::to_string(pivot) + " fell to " + std::to_string(value)),
        pivot_index(pivot),
        pivot_value(value) {}
  int pivot_index;
  double pivot_value;
};

// Lower-triangular Cholesky factor; throws FactorizationError with the
// failing pivot index when a pivot drops below 1e-12 times the largest
// diagonal entry.
Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov);

}  // namespace swsim
