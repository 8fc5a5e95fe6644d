#include "swsim/inference.hpp"

#include <cmath>
#include <map>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace swsim {

std::string vcov_name(VcovKind kind) {
  switch (kind) {
    case VcovKind::ModelBased: return "model";
    case VcovKind::CR0: return "cr0";
    default: return "md";
  }
}

namespace {

Eigen::MatrixXd bread(const FitResult& fit) {
  const int p = static_cast<int>(fit.zeta.size());
  return fit.normal_matrix.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
}

}  // namespace

Eigen::MatrixXd sandwich_cr0(const FitResult& fit) {
  const int p = static_cast<int>(fit.zeta.size());
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const Eigen::VectorXd& score : fit.cluster_score)
    meat += score * score.transpose();
  const Eigen::MatrixXd b = bread(fit);
  Eigen::MatrixXd v = b * meat * b;
  return 0.5 * (v + v.transpose()).eval();
}

Eigen::MatrixXd sandwich_md(const FitResult& fit, bool inverse_leverage) {
  const int p = static_cast<int>(fit.zeta.size());
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  const Eigen::MatrixXd b = bread(fit);
  for (std::size_t i = 0; i < fit.cluster_score.size(); ++i) {
    const Eigen::MatrixXd& info = fit.cluster_information[i];
    const Eigen::VectorXd& score = fit.cluster_score[i];
    Eigen::VectorXd adjusted;
    if (inverse_leverage) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(fit.normal_matrix - info);
      if (!lu.isInvertible())
        throw std::runtime_error(
            "leverage adjustment singular for cluster " +
            std::to_string(fit.design.clusters[i].cluster + 1));
      adjusted = score + info * lu.solve(score);
    } else {
      adjusted = score - info * (b * score);
    }
    meat += adjusted * adjusted.transpose();
  }
  Eigen::MatrixXd v = b * meat * b;
  return 0.5 * (v + v.transpose()).eval();
}

Eigen::MatrixXd sandwich(const FitResult& fit, VcovKind kind) {
  switch (kind) {
    case VcovKind::ModelBased: return fit.vcov_model;
    case VcovKind::CR0: return sandwich_cr0(fit);
    default: return sandwich_md(fit);
  }
}

EffectInference effect_inference(double estimate, const Eigen::MatrixXd& vcov,
                                 const Eigen::VectorXd& contrast, int n_clusters,
                                 double level) {
  if (n_clusters < 3)
    throw std::invalid_argument("t inference needs at least three clusters (I - 2 > 0)");
  if (contrast.size() != vcov.rows())
    throw std::invalid_argument("contrast does not conform to the covariance matrix");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence level must lie in (0, 1)");

  EffectInference out;
  out.estimate = estimate;
  out.dof = static_cast<double>(n_clusters - 2);
  out.se = std::sqrt(std::max(contrast.dot(vcov * contrast), 0.0));
  if (out.se == 0.0) {
    out.ci_low = out.ci_high = estimate;
    out.p_value = estimate == 0.0 ? 1.0 : 0.0;
    return out;
  }
  const boost::math::students_t dist(out.dof);
  const double t_crit = boost::math::quantile(dist, 0.5 + level / 2.0);
  out.ci_low = estimate - t_crit * out.se;
  out.ci_high = estimate + t_crit * out.se;
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(estimate / out.se)));
  return out;
}

EffectInference infer_constant_effect(const FitResult& fit, const Eigen::MatrixXd& vcov,
                                      double level) {
  const int col = fit.effect_column();
  Eigen::VectorXd contrast = Eigen::VectorXd::Zero(fit.zeta.size());
  contrast[col] = 1.0;
  return effect_inference(fit.zeta[col], vcov, contrast, fit.n_clusters(), level);
}

EffectInference infer_exposure_effect(const FitResult& fit, const Eigen::MatrixXd& vcov,
                                      int exposure, double level) {
  const int col = fit.effect_column(exposure);
  Eigen::VectorXd contrast = Eigen::VectorXd::Zero(fit.zeta.size());
  contrast[col] = 1.0;
  return effect_inference(fit.zeta[col], vcov, contrast, fit.n_clusters(), level);
}

EffectInference average_effect(const FitResult& fit, const Eigen::MatrixXd& vcov,
                               double level) {
  if (fit.model.effect != EffectKind::ExposureDependent)
    throw std::invalid_argument("time-averaged effect requires an exposure-dependent fit");
  const int count = fit.design.effect_col_count;
  Eigen::VectorXd contrast = Eigen::VectorXd::Zero(fit.zeta.size());
  for (int k = 0; k < count; ++k)
    contrast[fit.design.effect_col_begin + k] = 1.0 / count;
  return effect_inference(contrast.dot(fit.zeta), vcov, contrast, fit.n_clusters(),
                          level);
}

LrtResult lrt_exposure_heterogeneity(const Dataset& data, WorkingStructure structure,
                                     const FitOptions& options) {
  const FitResult constant =
      fit_ml(data, WorkingModel{structure, EffectKind::Constant}, options);
  const FitResult exposure =
      fit_ml(data, WorkingModel{structure, EffectKind::ExposureDependent}, options);

  LrtResult out;
  out.loglik_constant = constant.loglik;
  out.loglik_exposure = exposure.loglik;
  out.converged = constant.converged && exposure.converged;
  out.dof = exposure.design.effect_col_count - 1;
  double stat = 2.0 * (exposure.loglik - constant.loglik);
  if (stat < -1e-6)
    throw std::runtime_error(
        "likelihood ratio statistic is negative: optimizer failure (" +
        std::to_string(stat) + ")");
  out.statistic = std::max(stat, 0.0);
  if (out.dof == 0) {
    out.p_value = 1.0;
  } else {
    const boost::math::chi_squared dist(out.dof);
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  }
  return out;
}

namespace {

RegressionReport ols_report(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<std::string>& names) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p)
    throw std::invalid_argument("collinear regression design in recruitment check");
  if (n <= p) throw std::invalid_argument("not enough cluster-period cells");

  const Eigen::VectorXd coef = qr.solve(y);
  const Eigen::VectorXd resid = y - x * coef;
  const int dof = n - p;
  const double scale_sq = y.squaredNorm() / n + 1.0;
  double sigma2 = resid.squaredNorm() / dof;
  if (sigma2 < 1e-20 * scale_sq) sigma2 = 0.0;  // saturated fit
  const Eigen::MatrixXd xtx_inv =
      (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  RegressionReport report;
  report.dof = dof;
  const boost::math::students_t dist(dof);
  for (int k = 0; k < p; ++k) {
    RegressionTerm term;
    term.name = names[k];
    term.coef = coef[k];
    term.se = std::sqrt(std::max(sigma2 * xtx_inv(k, k), 0.0));
    if (term.se > 0.0) {
      term.t_stat = term.coef / term.se;
      term.p_value =
          2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(term.t_stat)));
    } else {
      term.t_stat = 0.0;
      term.p_value = term.coef * term.coef < 1e-16 * scale_sq ? 1.0 : 0.0;
    }
    report.terms.push_back(std::move(term));
  }
  return report;
}

}  // namespace

RecruitmentCheck recruitment_dependence_check(const Dataset& data) {
  if (data.n_periods < 2)
    throw std::invalid_argument("recruitment check needs at least two periods");

  // Cluster-period census.
  struct Cell {
    int size = 0;
    int treatment = 0;
    int exposure = 0;
  };
  std::map<std::pair<int, int>, Cell> cells;
  for (const Record& r : data.records) {
    Cell& c = cells[{r.cluster, r.period}];
    ++c.size;
    c.treatment = r.treatment;
    c.exposure = r.exposure;
  }
  const int n = static_cast<int>(cells.size());

  std::vector<char> period_seen(static_cast<std::size_t>(data.n_periods) + 1, 0);
  std::vector<char> exposure_seen(static_cast<std::size_t>(data.n_periods), 0);
  for (const auto& [key, cell] : cells) {
    period_seen[key.second] = 1;
    if (cell.treatment) exposure_seen[cell.exposure] = 1;
  }
  int baseline = 0;
  for (int j = 1; j <= data.n_periods; ++j)
    if (period_seen[j]) {
      baseline = j;
      break;
    }

  std::vector<std::string> names{"(intercept)"};
  std::vector<int> period_col(static_cast<std::size_t>(data.n_periods) + 1, -1);
  int p = 1;
  for (int j = 1; j <= data.n_periods; ++j) {
    if (!period_seen[j] || j == baseline) continue;
    period_col[j] = p++;
    names.push_back("period" + std::to_string(j));
  }
  const int base_p = p;

  Eigen::VectorXd y(n);
  Eigen::MatrixXd x1 = Eigen::MatrixXd::Zero(n, base_p + 1);
  std::vector<int> exposure_cols(static_cast<std::size_t>(data.n_periods), -1);
  int p2 = base_p;
  std::vector<std::string> names2 = names;
  for (int s = 1; s <= data.n_periods - 1; ++s)
    if (exposure_seen[s]) {
      exposure_cols[s] = p2++;
      names2.push_back("exposure" + std::to_string(s));
    }
  Eigen::MatrixXd x2 = Eigen::MatrixXd::Zero(n, p2);

  int row = 0;
  for (const auto& [key, cell] : cells) {
    y[row] = cell.size;
    x1(row, 0) = 1.0;
    x2(row, 0) = 1.0;
    if (period_col[key.second] >= 0) {
      x1(row, period_col[key.second]) = 1.0;
      x2(row, period_col[key.second]) = 1.0;
    }
    x1(row, base_p) = cell.treatment;
    if (cell.treatment) x2(row, exposure_cols[cell.exposure]) = 1.0;
    ++row;
  }
  names.push_back("treatment");

  RecruitmentCheck check;
  check.treatment_model = ols_report(x1, y, names);
  check.exposure_model = ols_report(x2, y, names2);
  return check;
}

}  // namespace swsim
