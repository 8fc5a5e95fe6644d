#include "swsim/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "swsim/nelder_mead.hpp"

namespace swsim {

namespace {

constexpr double kVarFloor = 1e-10;
constexpr double kLog2Pi = 1.8378770664093454836;

double floored_exp(double x) { return kVarFloor + std::exp(x); }
double floored_log(double v) { return std::log(std::max(v - kVarFloor, 1e-12)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Optimizer coordinates <-> variance components. Variances run through a
// floored log transform (the floor keeps W positive definite at the
// boundary); the decay rate runs through a logit.
struct ThetaMap {
  WorkingStructure structure;

  int dim() const { return structure == WorkingStructure::EXCH ? 2 : 3; }

  VarianceComponents to_components(const Eigen::VectorXd& x) const {
    VarianceComponents vc;
    switch (structure) {
      case WorkingStructure::EXCH:
        vc.tau_alpha_sq = floored_exp(x[0]);
        vc.sigma_eps_sq = floored_exp(x[1]);
        break;
      case WorkingStructure::NE:
        vc.tau_alpha_sq = floored_exp(x[0]);
        vc.tau_gamma_sq = floored_exp(x[1]);
        vc.sigma_eps_sq = floored_exp(x[2]);
        break;
      case WorkingStructure::DTD:
        vc.tau_gamma_sq = floored_exp(x[0]);
        vc.decay_r = std::clamp(sigmoid(x[1]), 1e-8, 1.0);  // sigmoid underflow
        vc.sigma_eps_sq = floored_exp(x[2]);
        break;
    }
    return vc;
  }

  Eigen::VectorXd from_components(const VarianceComponents& vc) const {
    Eigen::VectorXd x(dim());
    switch (structure) {
      case WorkingStructure::EXCH:
        x << floored_log(vc.tau_alpha_sq), floored_log(vc.sigma_eps_sq);
        break;
      case WorkingStructure::NE:
        x << floored_log(vc.tau_alpha_sq), floored_log(vc.tau_gamma_sq),
            floored_log(vc.sigma_eps_sq);
        break;
      case WorkingStructure::DTD:
        x << floored_log(vc.tau_gamma_sq), logit(std::clamp(vc.decay_r, 1e-6, 1.0 - 1e-9)),
            floored_log(vc.sigma_eps_sq);
        break;
    }
    return x;
  }

  bool at_boundary(const VarianceComponents& vc) const {
    const double lo = 2.0 * kVarFloor;
    switch (structure) {
      case WorkingStructure::EXCH:
        return vc.tau_alpha_sq <= lo;
      case WorkingStructure::NE:
        return vc.tau_alpha_sq <= lo || vc.tau_gamma_sq <= lo;
      case WorkingStructure::DTD:
        return vc.tau_gamma_sq <= lo || vc.decay_r >= 1.0 - 1e-6;
    }
    return false;
  }
};

struct Accumulated {
  Eigen::MatrixXd normal_matrix;  // B
  Eigen::VectorXd rhs;            // sum D' W^-1 Y
  double quad_yy = 0.0;           // sum Y' W^-1 Y
  double logdet = 0.0;            // sum log |W_i|
  double n_total = 0.0;
  bool ok = true;
  std::vector<Eigen::MatrixXd> cluster_information;
  std::vector<Eigen::VectorXd> cluster_rhs;
};

// One pass over the clusters at fixed (Sigma_cell, sigma_eps^2). Uses the
// identity W^-1 = s^-2 (I - U Sigma S^-1 U') with S = s^2 I_J + N Sigma,
// which holds for any cell sizes (including empty cells) and rank-deficient
// Sigma, so every quantity below is J x J or p-sized.
Accumulated accumulate(const DesignMatrices& dm, const Eigen::MatrixXd& sigma_cell,
                       double sigma_eps_sq, bool keep_cluster_terms) {
  const int p = dm.n_params;
  const int J = dm.n_periods;
  Accumulated acc;
  acc.normal_matrix = Eigen::MatrixXd::Zero(p, p);
  acc.rhs = Eigen::VectorXd::Zero(p);
  if (keep_cluster_terms) {
    acc.cluster_information.reserve(dm.clusters.size());
    acc.cluster_rhs.reserve(dm.clusters.size());
  }

  const double inv_sigma = 1.0 / sigma_eps_sq;
  const double log_sigma = std::log(sigma_eps_sq);
  Eigen::MatrixXd S(J, J), X(J, p);
  for (const ClusterBlocks& cb : dm.clusters) {
    S.noalias() = cb.cell_n.asDiagonal() * sigma_cell;
    S.diagonal().array() += sigma_eps_sq;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(S);
    const double logdet_s = lu.matrixLU().diagonal().array().abs().log().sum();

    X.noalias() = lu.solve(cb.scaled_design);                  // S^-1 N C
    const Eigen::VectorXd sm = lu.solve(cb.cell_ysum);         // S^-1 m
    const Eigen::MatrixXd gt_sigma = cb.scaled_design.transpose() * sigma_cell;

    Eigen::MatrixXd info = inv_sigma * (cb.ctnc - gt_sigma * X);
    info = 0.5 * (info + info.transpose()).eval();  // symmetrize rounding
    const Eigen::VectorXd rhs = inv_sigma * (cb.ctm - gt_sigma * sm);
    acc.quad_yy += inv_sigma * (cb.yy - cb.cell_ysum.dot(sigma_cell * sm));
    acc.logdet += (cb.n_obs - J) * log_sigma + logdet_s;
    acc.normal_matrix += info;
    acc.rhs += rhs;
    acc.n_total += cb.n_obs;
    if (keep_cluster_terms) {
      acc.cluster_information.push_back(std::move(info));
      acc.cluster_rhs.push_back(rhs);
    }
  }
  acc.ok = acc.normal_matrix.allFinite() && acc.rhs.allFinite() &&
           std::isfinite(acc.quad_yy) && std::isfinite(acc.logdet);
  return acc;
}

double loglik_from(const Accumulated& acc, const Eigen::VectorXd& zeta, int n_params,
                   bool reml, const Eigen::LDLT<Eigen::MatrixXd>& solver) {
  const double quad = acc.quad_yy - zeta.dot(acc.rhs);
  double ll = -0.5 * (acc.n_total * kLog2Pi + acc.logdet + quad);
  if (reml) {
    const double logdet_b = solver.vectorD().array().abs().log().sum();
    ll = -0.5 * ((acc.n_total - n_params) * kLog2Pi + acc.logdet + logdet_b + quad);
  }
  return ll;
}

}  // namespace

DesignMatrices build_design_matrices(const Dataset& data, const WorkingModel& model) {
  if (data.records.empty()) throw std::invalid_argument("dataset is empty");
  const int I = data.n_clusters;
  const int J = data.n_periods;

  // Cell census with (Z, s) consistency checks.
  std::vector<int> cell_z(static_cast<std::size_t>(I) * J, -1);
  std::vector<int> cell_s(static_cast<std::size_t>(I) * J, -1);
  std::vector<char> period_seen(static_cast<std::size_t>(J) + 1, 0);
  std::vector<char> exposure_seen(static_cast<std::size_t>(J), 0);
  for (const Record& r : data.records) {
    if (r.cluster < 0 || r.cluster >= I || r.period < 1 || r.period > J)
      throw std::invalid_argument("record indices outside the dataset dimensions");
    if ((r.treatment == 0) != (r.exposure == 0))
      throw std::invalid_argument("exposure must be positive exactly for treated records");
    const std::size_t cell = static_cast<std::size_t>(r.cluster) * J + (r.period - 1);
    if (cell_z[cell] < 0) {
      cell_z[cell] = r.treatment;
      cell_s[cell] = r.exposure;
    } else if (cell_z[cell] != r.treatment || cell_s[cell] != r.exposure) {
      throw std::invalid_argument("treatment/exposure differ within cluster " +
                                  std::to_string(r.cluster + 1) + ", period " +
                                  std::to_string(r.period));
    }
    period_seen[r.period] = 1;
    if (r.treatment) exposure_seen[r.exposure] = 1;
  }

  DesignMatrices dm;
  dm.n_periods = J;
  dm.n_clusters = I;
  dm.n_total = static_cast<long>(data.records.size());

  int baseline_period = 0;
  for (int j = 1; j <= J; ++j) {
    if (period_seen[j] && baseline_period == 0) baseline_period = j;
    if (!period_seen[j]) dm.dropped_periods.push_back(j);
  }

  std::vector<int> period_col(static_cast<std::size_t>(J) + 1, -1);
  dm.column_names.push_back("(intercept)");
  for (int j = 1; j <= J; ++j) {
    if (!period_seen[j] || j == baseline_period) continue;
    period_col[j] = static_cast<int>(dm.column_names.size());
    dm.column_names.push_back("period" + std::to_string(j));
  }

  std::vector<int> exposure_col(static_cast<std::size_t>(J), -1);
  dm.effect_col_begin = static_cast<int>(dm.column_names.size());
  if (model.effect == EffectKind::Constant) {
    dm.column_names.push_back("delta");
    dm.effect_col_count = 1;
  } else {
    for (int s = 1; s <= J - 1; ++s) {
      if (!exposure_seen[s]) {
        dm.dropped_exposures.push_back(s);
        continue;
      }
      exposure_col[s] = static_cast<int>(dm.column_names.size());
      dm.column_names.push_back("delta_s" + std::to_string(s));
      dm.exposure_of_effect_col.push_back(s);
    }
    dm.effect_col_count = static_cast<int>(dm.exposure_of_effect_col.size());
    if (dm.effect_col_count == 0)
      throw std::invalid_argument("no treated observations: exposure effect unidentifiable");
  }
  dm.n_params = static_cast<int>(dm.column_names.size());

  const int p = dm.n_params;
  dm.clusters.resize(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    ClusterBlocks& cb = dm.clusters[i];
    cb.cluster = i;
    cb.cell_n = Eigen::VectorXd::Zero(J);
    cb.cell_design = Eigen::MatrixXd::Zero(J, p);
    cb.cell_ysum = Eigen::VectorXd::Zero(J);
  }
  for (const Record& r : data.records) {
    ClusterBlocks& cb = dm.clusters[r.cluster];
    cb.cell_n[r.period - 1] += 1.0;
    cb.cell_ysum[r.period - 1] += r.outcome;
    cb.yy += r.outcome * r.outcome;
    cb.n_obs += 1.0;
  }
  for (int i = 0; i < I; ++i) {
    ClusterBlocks& cb = dm.clusters[i];
    for (int j = 1; j <= J; ++j) {
      const std::size_t cell = static_cast<std::size_t>(i) * J + (j - 1);
      if (cb.cell_n[j - 1] == 0.0 || cell_z[cell] < 0) continue;
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p);
      row[0] = 1.0;
      if (period_col[j] >= 0) row[period_col[j]] = 1.0;
      if (model.effect == EffectKind::Constant) {
        row[dm.effect_col_begin] = cell_z[cell];
      } else if (cell_z[cell]) {
        row[exposure_col[cell_s[cell]]] = 1.0;
      }
      cb.cell_design.row(j - 1) = row;
    }
    cb.scaled_design = cb.cell_n.asDiagonal() * cb.cell_design;
    cb.ctnc = cb.cell_design.transpose() * cb.scaled_design;
    cb.ctm = cb.cell_design.transpose() * cb.cell_ysum;
  }
  return dm;
}

GlsFit gls_at_components(const DesignMatrices& dm, WorkingStructure structure,
                         const VarianceComponents& vc, bool reml,
                         bool keep_cluster_terms) {
  validate_components(vc);
  const Eigen::MatrixXd sigma_cell = cell_covariance(structure, vc, dm.n_periods);
  Accumulated acc = accumulate(dm, sigma_cell, vc.sigma_eps_sq, keep_cluster_terms);
  if (!acc.ok) throw std::runtime_error("working covariance evaluation is not finite");

  Eigen::LDLT<Eigen::MatrixXd> solver(acc.normal_matrix);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("normal matrix factorization failed");

  GlsFit fit;
  fit.zeta = solver.solve(acc.rhs);
  fit.normal_matrix = acc.normal_matrix;
  fit.vcov_model = solver.solve(Eigen::MatrixXd::Identity(dm.n_params, dm.n_params));
  fit.loglik = loglik_from(acc, fit.zeta, dm.n_params, reml, solver);
  if (keep_cluster_terms) {
    fit.cluster_information = std::move(acc.cluster_information);
    fit.cluster_score.reserve(acc.cluster_rhs.size());
    for (std::size_t i = 0; i < acc.cluster_rhs.size(); ++i)
      fit.cluster_score.push_back(acc.cluster_rhs[i] -
                                  fit.cluster_information[i] * fit.zeta);
  }
  return fit;
}

double profiled_loglik(const DesignMatrices& dm, WorkingStructure structure,
                       const VarianceComponents& vc, bool reml) {
  validate_components(vc);
  const Eigen::MatrixXd sigma_cell = cell_covariance(structure, vc, dm.n_periods);
  const Accumulated acc = accumulate(dm, sigma_cell, vc.sigma_eps_sq, false);
  if (!acc.ok) return -std::numeric_limits<double>::infinity();
  Eigen::LDLT<Eigen::MatrixXd> solver(acc.normal_matrix);
  if (solver.info() != Eigen::Success)
    return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd zeta = solver.solve(acc.rhs);
  return loglik_from(acc, zeta, dm.n_params, reml, solver);
}

int FitResult::effect_column(int s) const {
  if (model.effect == EffectKind::Constant) {
    if (s != 0) throw std::invalid_argument("constant-effect fit has no exposure columns");
    return design.effect_col_begin;
  }
  if (s == 0) throw std::invalid_argument("exposure-dependent fit needs an exposure level");
  for (int k = 0; k < design.effect_col_count; ++k)
    if (design.exposure_of_effect_col[k] == s) return design.effect_col_begin + k;
  throw std::invalid_argument("exposure level " + std::to_string(s) +
                              " absent from the fitted model");
}

FitResult fit_at_components(const Dataset& data, const WorkingModel& model,
                            const VarianceComponents& vc, bool reml) {
  FitResult result;
  result.model = model;
  result.vc = vc;
  result.converged = true;
  result.design = build_design_matrices(data, model);
  GlsFit gls = gls_at_components(result.design, model.structure, vc, reml,
                                 /*keep_cluster_terms=*/true);
  result.zeta = std::move(gls.zeta);
  result.loglik = gls.loglik;
  result.vcov_model = std::move(gls.vcov_model);
  result.normal_matrix = std::move(gls.normal_matrix);
  result.cluster_information = std::move(gls.cluster_information);
  result.cluster_score = std::move(gls.cluster_score);
  return result;
}

FitResult fit_ml(const Dataset& data, const WorkingModel& model,
                 const FitOptions& options) {
  DesignMatrices dm = build_design_matrices(data, model);
  if (dm.n_clusters < 2)
    throw std::invalid_argument("maximum likelihood fit needs at least two clusters");

  // Rank check on D'D; names the first dependent column.
  Eigen::MatrixXd dtd = Eigen::MatrixXd::Zero(dm.n_params, dm.n_params);
  for (const ClusterBlocks& cb : dm.clusters) dtd += cb.ctnc;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dtd);
  if (qr.rank() < dm.n_params) {
    const auto perm = qr.colsPermutation().indices();
    const int column = perm[qr.rank()];
    throw RankDeficiencyError(column, dm.column_names[column]);
  }

  // OLS pass for deterministic starting values.
  const Eigen::VectorXd zeta_ols = qr.solve([&] {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dm.n_params);
    for (const ClusterBlocks& cb : dm.clusters) b += cb.ctm;
    return b;
  }());
  double rss = 0.0, ssw = 0.0, n_cells = 0.0;
  for (const ClusterBlocks& cb : dm.clusters) {
    rss += cb.yy - 2.0 * zeta_ols.dot(cb.ctm) + zeta_ols.dot(cb.ctnc * zeta_ols);
    for (int j = 0; j < dm.n_periods; ++j)
      if (cb.cell_n[j] > 0) {
        ssw -= cb.cell_ysum[j] * cb.cell_ysum[j] / cb.cell_n[j];
        n_cells += 1.0;
      }
    ssw += cb.yy;
  }
  const double total_n = static_cast<double>(dm.n_total);
  const double s2 = std::max(rss / total_n, 1e-8);
  const double w2 = std::max(ssw / std::max(total_n - n_cells, 1.0), 0.5 * s2 * 1e-3);
  const double between = std::max(s2 - w2, 1e-3 * s2);

  const ThetaMap theta{model.structure};
  auto make_vc = [&](double tau_a, double tau_g, double sigma2, double r) {
    VarianceComponents vc;
    vc.tau_alpha_sq = tau_a;
    vc.tau_gamma_sq = tau_g;
    vc.sigma_eps_sq = sigma2;
    vc.decay_r = r;
    return vc;
  };
  std::vector<VarianceComponents> starts;
  switch (model.structure) {
    case WorkingStructure::EXCH:
      starts = {make_vc(between, 0, w2, 1), make_vc(1e-6 * s2, 0, s2, 1),
                make_vc(0.5 * s2, 0, 0.5 * s2, 1)};
      break;
    case WorkingStructure::NE:
      starts = {make_vc(0.5 * between, 0.5 * between, w2, 1),
                make_vc(1e-6 * s2, 1e-6 * s2, s2, 1),
                make_vc(0.25 * s2, 0.25 * s2, 0.5 * s2, 1)};
      break;
    case WorkingStructure::DTD:
      starts = {make_vc(0, between, w2, 0.5), make_vc(0, 1e-6 * s2, s2, 0.9),
                make_vc(0, 0.5 * s2, 0.5 * s2, 0.2)};
      break;
  }

  const auto objective = [&](const Eigen::VectorXd& x) {
    try {
      return -profiled_loglik(dm, model.structure, theta.to_components(x),
                              options.reml);
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  NelderMeadOptions nm;
  nm.max_iter = options.max_iter;
  nm.f_rtol = options.loglik_rtol;
  nm.x_tol = options.param_tol;
  nm.record_trace = options.record_trace;

  NelderMeadResult best;
  for (const VarianceComponents& start : starts) {
    NelderMeadResult run = nelder_mead(objective, theta.from_components(start), nm);
    if (run.f < best.f) best = std::move(run);
  }
  if (!std::isfinite(best.f))
    throw std::runtime_error("likelihood optimization failed from every start");

  FitResult result;
  result.model = model;
  result.vc = theta.to_components(best.x);
  result.converged = best.converged;
  result.at_boundary = theta.at_boundary(result.vc);
  result.n_iter = best.n_iter;
  if (options.record_trace) {
    result.trace.reserve(best.trace.size());
    for (double f : best.trace) result.trace.push_back(-f);
  }

  GlsFit gls = gls_at_components(dm, model.structure, result.vc, options.reml,
                                 /*keep_cluster_terms=*/true);
  result.zeta = std::move(gls.zeta);
  result.loglik = gls.loglik;
  result.vcov_model = std::move(gls.vcov_model);
  result.normal_matrix = std::move(gls.normal_matrix);
  result.cluster_information = std::move(gls.cluster_information);
  result.cluster_score = std::move(gls.cluster_score);
  result.design = std::move(dm);
  return result;
}

}  // namespace swsim
