#include "swsim/covariance.hpp"

#include <cmath>

#include <Eigen/Cholesky>

namespace swsim {

namespace {

double icc_to_variance(double rho, double sigma_eps_sq) {
  return rho * sigma_eps_sq / (1.0 - rho);
}

void check_rho(double rho, const char* name) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
}

bool uses_cac(CovStructure s) { return s != CovStructure::EXCH; }

}  // namespace

std::string structure_name(WorkingStructure s) {
  switch (s) {
    case WorkingStructure::EXCH: return "exch";
    case WorkingStructure::NE: return "ne";
    default: return "dtd";
  }
}

void validate_components(const VarianceComponents& vc, bool require_noise) {
  if (vc.tau_alpha_sq < 0.0 || vc.tau_gamma_sq < 0.0 || vc.tau_v_sq < 0.0)
    throw std::invalid_argument("variance components must be non-negative");
  if (require_noise ? !(vc.sigma_eps_sq > 0.0) : vc.sigma_eps_sq < 0.0)
    throw std::invalid_argument("residual variance must be positive");
  if (!(vc.decay_r > 0.0 && vc.decay_r <= 1.0))
    throw std::invalid_argument("decay rate must lie in (0, 1]");
}

VarianceComponents components_from_design_params(CovStructure structure,
                                                 const DesignCorrelationParams& p,
                                                 bool with_random_intervention) {
  check_rho(p.rho0, "rho0");
  if (!(p.sigma_eps_sq > 0.0))
    throw std::invalid_argument("residual variance must be positive");
  if (uses_cac(structure) && !(p.cac > 0.0 && p.cac <= 1.0))
    throw std::invalid_argument("CAC must lie in (0, 1]");

  VarianceComponents vc;
  vc.sigma_eps_sq = p.sigma_eps_sq;
  const double within = icc_to_variance(p.rho0, p.sigma_eps_sq);
  switch (structure) {
    case CovStructure::EXCH:
      vc.tau_alpha_sq = within;
      break;
    case CovStructure::NE:
      vc.tau_alpha_sq = p.cac * within;
      vc.tau_gamma_sq = (1.0 - p.cac) * within;
      break;
    case CovStructure::DTD:
    case CovStructure::CTD:
      vc.tau_gamma_sq = within;
      vc.decay_r = p.cac;
      break;
  }
  if (with_random_intervention) {
    check_rho(p.rho1, "rho1");
    if (p.rho1 < p.rho0)
      throw std::invalid_argument(
          "rho1 < rho0 implies a negative random intervention variance");
    vc.tau_v_sq = icc_to_variance(p.rho1, p.sigma_eps_sq) - within;
    if (vc.tau_v_sq < 0.0) vc.tau_v_sq = 0.0;  // rho1 == rho0 up to rounding
  }
  return vc;
}

DesignCorrelationParams design_params_from_components(CovStructure structure,
                                                      const VarianceComponents& vc,
                                                      bool with_random_intervention) {
  validate_components(vc);
  DesignCorrelationParams p;
  p.sigma_eps_sq = vc.sigma_eps_sq;
  double within = 0.0;
  switch (structure) {
    case CovStructure::EXCH:
      within = vc.tau_alpha_sq;
      p.cac = 1.0;
      break;
    case CovStructure::NE:
      within = vc.tau_alpha_sq + vc.tau_gamma_sq;
      p.cac = within > 0.0 ? vc.tau_alpha_sq / within : 1.0;
      break;
    case CovStructure::DTD:
    case CovStructure::CTD:
      within = vc.tau_gamma_sq;
      p.cac = vc.decay_r;
      break;
  }
  p.rho0 = within / (within + vc.sigma_eps_sq);
  if (with_random_intervention) {
    const double treated = within + vc.tau_v_sq;
    p.rho1 = treated / (treated + vc.sigma_eps_sq);
  } else {
    p.rho1 = p.rho0;
  }
  return p;
}

Eigen::MatrixXd cell_covariance(WorkingStructure structure,
                                const VarianceComponents& vc, int n_periods) {
  validate_components(vc, /*require_noise=*/false);
  Eigen::MatrixXd sigma(n_periods, n_periods);
  switch (structure) {
    case WorkingStructure::EXCH:
      sigma.setConstant(vc.tau_alpha_sq);
      break;
    case WorkingStructure::NE:
      sigma.setConstant(vc.tau_alpha_sq);
      sigma.diagonal().array() += vc.tau_gamma_sq;
      break;
    case WorkingStructure::DTD: {
      const double log_r = std::log(vc.decay_r);
      for (int j = 0; j < n_periods; ++j)
        for (int k = 0; k < n_periods; ++k)
          sigma(j, k) = vc.tau_gamma_sq * std::exp(log_r * std::abs(j - k));
      break;
    }
  }
  return sigma;
}

Eigen::MatrixXd build_working_cov(WorkingStructure structure,
                                  const VarianceComponents& vc,
                                  const TrialDesign& design, int cluster) {
  design.check_indices(cluster, 1);
  const Eigen::MatrixXd sigma = cell_covariance(structure, vc, design.n_periods);
  const int total = design.cell_size.row(cluster).sum();

  Eigen::MatrixXd cov(total, total);
  int row = 0;
  for (int j = 1; j <= design.n_periods; ++j) {
    const int nj = design.cell_size(cluster, j - 1);
    int col = 0;
    for (int k = 1; k <= design.n_periods; ++k) {
      const int nk = design.cell_size(cluster, k - 1);
      cov.block(row, col, nj, nk).setConstant(sigma(j - 1, k - 1));
      col += nk;
    }
    row += nj;
  }
  cov.diagonal().array() += vc.sigma_eps_sq;
  return cov;
}

Eigen::MatrixXd build_ctd_cov(const VarianceComponents& vc, const ClusterTimes& times,
                              bool with_random_intervention,
                              const std::vector<int>& treated_by_period,
                              bool within_period_decay) {
  validate_components(vc, /*require_noise=*/false);
  const std::size_t n = times.time.size();
  if (times.period.size() != n)
    throw std::invalid_argument("time and period vectors must have equal length");
  for (std::size_t k = 1; k < n; ++k)
    if (times.time[k] < times.time[k - 1])
      throw std::invalid_argument("recruitment times must be sorted chronologically");

  const double tau_v = with_random_intervention ? vc.tau_v_sq : 0.0;
  const double log_r = std::log(vc.decay_r);
  auto treated = [&](std::size_t k) {
    const int j = times.period[k];
    if (j < 1 || j > static_cast<int>(treated_by_period.size()))
      throw std::invalid_argument("period index outside the treatment vector");
    return treated_by_period[j - 1] != 0;
  };

  Eigen::MatrixXd cov(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    cov(a, a) = vc.tau_gamma_sq + (treated(a) ? tau_v : 0.0) + vc.sigma_eps_sq;
    for (std::size_t b = 0; b < a; ++b) {
      const bool same_period = times.period[a] == times.period[b];
      double decay = 1.0;
      if (within_period_decay || !same_period)
        decay = std::exp(log_r * (times.time[a] - times.time[b]));
      double value = vc.tau_gamma_sq * decay;
      if (treated(a) && treated(b)) value += tau_v;
      cov(a, b) = cov(b, a) = value;
    }
  }
  return cov;
}

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("matrix must be square");
  const int n = static_cast<int>(cov.rows());
  const double tol = 1e-12 * cov.diagonal().maxCoeff();

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd lower = llt.matrixL();
    for (int k = 0; k < n; ++k) {
      const double pivot = lower(k, k) * lower(k, k);
      if (!(pivot >= tol)) throw FactorizationError(k, pivot);
    }
    return lower;
  }

  // Slow scalar pass only to name the failing pivot.
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double d = cov(k, k) - lower.row(k).head(k).squaredNorm();
    if (!(d >= tol)) throw FactorizationError(k, d);
    lower(k, k) = std::sqrt(d);
    for (int i = k + 1; i < n; ++i) {
      const double off =
          cov(i, k) - (lower.row(i).head(k).array() * lower.row(k).head(k).array()).sum();
      lower(i, k) = off / lower(k, k);
    }
  }
  return lower;
}

}  // namespace swsim
