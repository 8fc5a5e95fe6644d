#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "swsim/covariance.hpp"
#include "swsim/datagen.hpp"

namespace swsim {

enum class EffectKind { Constant, ExposureDependent };

// Discrete-time working model: a saturated discrete period effect (always),
// a constant or exposure-dependent fixed intervention effect, and one of the
// three discrete correlation structures. Working models never carry a random
// intervention term.
struct WorkingModel {
  WorkingStructure structure = WorkingStructure::EXCH;
  EffectKind effect = EffectKind::Constant;
};

struct RankDeficiencyError : std::runtime_error {
  RankDeficiencyError(int column, std::string name)
      : std::runtime_error("design matrix is rank deficient; dependent column " +
                           std::to_string(column) + " (" + name + ")"),
        column_index(column),
        column_name(std::move(name)) {}
  int column_index;
  std::string column_name;
};

// Per-cluster sufficient statistics. Every fixed-effect column is constant
// within a cluster-period cell, so a cluster contributes only its cell
// sizes, cell-level covariate rows, per-cell outcome sums and the total sum
// of squares; all working-model algebra then happens on J x J matrices.
struct ClusterBlocks {
  int cluster = 0;
  Eigen::VectorXd cell_n;       // J
  Eigen::MatrixXd cell_design;  // J x p, zero rows for empty cells
  Eigen::VectorXd cell_ysum;    // J
  double yy = 0.0;
  double n_obs = 0.0;
  // Products reused across optimizer iterations.
  Eigen::MatrixXd scaled_design;  // N * C, J x p
  Eigen::MatrixXd ctnc;           // C' N C, p x p
  Eigen::VectorXd ctm;            // C' m, p
};

struct DesignMatrices {
  int n_periods = 0;
  int n_clusters = 0;
  int n_params = 0;
  long n_total = 0;
  std::vector<std::string> column_names;
  std::vector<int> dropped_periods;    // periods with no observations anywhere
  std::vector<int> dropped_exposures;  // exposure levels with no observations
  int effect_col_begin = 0;
  int effect_col_count = 0;
  std::vector<int> exposure_of_effect_col;  // parallel to effect columns
  std::vector<ClusterBlocks> clusters;
};

// Columns: intercept, period dummies for observed periods j = 2..J, then the
// treatment column (constant effect) or one dummy per observed exposure time
// (exposure-dependent). Rows are ordered by (period, individual) inside each
// cluster, matching the covariance blocks.
DesignMatrices build_design_matrices(const Dataset& data, const WorkingModel& model);

// Weighted least squares at fixed variance components, using the structured
// J x J reduction of each cluster's working covariance.
struct GlsFit {
  Eigen::VectorXd zeta;
  Eigen::MatrixXd normal_matrix;  // B = sum_i D_i' W_i^-1 D_i
  Eigen::MatrixXd vcov_model;     // B^-1
  double loglik = 0.0;
  std::vector<Eigen::MatrixXd> cluster_information;  // F_i = D_i' W_i^-1 D_i
  std::vector<Eigen::VectorXd> cluster_score;        // g_i = D_i' W_i^-1 r_i
};

GlsFit gls_at_components(const DesignMatrices& dm, WorkingStructure structure,
                         const VarianceComponents& vc, bool reml = false,
                         bool keep_cluster_terms = false);

// Profiled Gaussian log-likelihood at the given variance components (fixed
// effects solved out). The value matches a dense-matrix evaluation.
double profiled_loglik(const DesignMatrices& dm, WorkingStructure structure,
                       const VarianceComponents& vc, bool reml = false);

struct FitOptions {
  int max_iter = 500;
  double loglik_rtol = 1e-9;
  double param_tol = 1e-7;
  bool reml = false;
  bool record_trace = false;
};

struct FitResult {
  WorkingModel model;
  Eigen::VectorXd zeta;
  VarianceComponents vc;
  double loglik = 0.0;
  Eigen::MatrixXd vcov_model;
  bool converged = false;
  bool at_boundary = false;
  int n_iter = 0;
  std::vector<double> trace;  // best profiled loglik per accepted step
  DesignMatrices design;
  Eigen::MatrixXd normal_matrix;
  std::vector<Eigen::MatrixXd> cluster_information;
  std::vector<Eigen::VectorXd> cluster_score;

  int n_clusters() const { return design.n_clusters; }
  int effect_column(int s = 0) const;  // s = 0: constant delta; else exposure s
};

// Maximum likelihood over the structure's variance components with profiled
// fixed effects: Nelder-Mead over unconstrained transforms (log variances,
// logit decay), three deterministic starts, best log-likelihood wins.
FitResult fit_ml(const Dataset& data, const WorkingModel& model,
                 const FitOptions& options = {});

// GLS at known variance components, packaged as a FitResult (no
// optimization). Used when the weights are fixed a priori and by oracles.
FitResult fit_at_components(const Dataset& data, const WorkingModel& model,
                            const VarianceComponents& vc, bool reml = false);

}  // namespace swsim
