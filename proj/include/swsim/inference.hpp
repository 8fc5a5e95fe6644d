#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "swsim/estimator.hpp"

namespace swsim {

enum class VcovKind { ModelBased, CR0, MD };

std::string vcov_name(VcovKind kind);

// Liang-Zeger cluster-robust sandwich, no small-sample correction:
// B^-1 (sum_i g_i g_i') B^-1 with g_i = D_i' W_i^-1 r_i.
Eigen::MatrixXd sandwich_cr0(const FitResult& fit);

// Mancl-DeRouen corrected sandwich. The leverage-adjusted residual
// (I - H_i)^-1 r_i collapses to p-dimensional algebra through
// (I - H_i)^-1 = I + D_i (B - F_i)^-1 D_i' W_i^-1, so the adjusted score is
// (I + F_i (B - F_i)^-1) g_i. `inverse_leverage = false` selects the
// uninverted (I - H_i) variant instead.
Eigen::MatrixXd sandwich_md(const FitResult& fit, bool inverse_leverage = true);

Eigen::MatrixXd sandwich(const FitResult& fit, VcovKind kind);

struct EffectInference {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

// Wald inference for a linear contrast of the fixed effects, with t critical
// values on I - 2 degrees of freedom.
EffectInference effect_inference(double estimate, const Eigen::MatrixXd& vcov,
                                 const Eigen::VectorXd& contrast, int n_clusters,
                                 double level = 0.95);

// Convenience wrappers around effect_inference.
EffectInference infer_constant_effect(const FitResult& fit, const Eigen::MatrixXd& vcov,
                                      double level = 0.95);
EffectInference infer_exposure_effect(const FitResult& fit, const Eigen::MatrixXd& vcov,
                                      int exposure, double level = 0.95);

// Exposure-time-averaged effect: mean of the exposure coefficients.
EffectInference average_effect(const FitResult& fit, const Eigen::MatrixXd& vcov,
                               double level = 0.95);

// Likelihood ratio test of a constant against an exposure-dependent
// intervention effect, on J - 2 degrees of freedom.
struct LrtResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  double loglik_constant = 0.0;
  double loglik_exposure = 0.0;
  bool converged = false;
};

LrtResult lrt_exposure_heterogeneity(const Dataset& data, WorkingStructure structure,
                                     const FitOptions& options = {});

// Ordinary least squares regressions of cluster-period size on period
// indicators plus treatment status (model 1) or exposure indicators
// (model 2), screening for intervention-dependent recruitment.
struct RegressionTerm {
  std::string name;
  double coef = 0.0;
  double se = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct RegressionReport {
  std::vector<RegressionTerm> terms;
  int dof = 0;
};

struct RecruitmentCheck {
  RegressionReport treatment_model;
  RegressionReport exposure_model;
};

RecruitmentCheck recruitment_dependence_check(const Dataset& data);

}  // namespace swsim
