#include "swsim/reference.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace swsim::reference {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

std::vector<DenseCluster> build_dense_clusters(const Dataset& data,
                                               const WorkingModel& model) {
  const int J = data.n_periods;

  std::vector<char> period_seen(static_cast<std::size_t>(J) + 1, 0);
  std::vector<char> exposure_seen(static_cast<std::size_t>(J), 0);
  for (const Record& r : data.records) {
    period_seen[r.period] = 1;
    if (r.treatment) exposure_seen[r.exposure] = 1;
  }
  int baseline = 0;
  for (int j = 1; j <= J; ++j)
    if (period_seen[j]) {
      baseline = j;
      break;
    }

  std::vector<int> period_col(static_cast<std::size_t>(J) + 1, -1);
  int p = 1;
  for (int j = 1; j <= J; ++j)
    if (period_seen[j] && j != baseline) period_col[j] = p++;
  std::vector<int> exposure_col(static_cast<std::size_t>(J), -1);
  int effect_begin = p;
  if (model.effect == EffectKind::Constant) {
    ++p;
  } else {
    for (int s = 1; s <= J - 1; ++s)
      if (exposure_seen[s]) exposure_col[s] = p++;
  }

  std::vector<DenseCluster> clusters(static_cast<std::size_t>(data.n_clusters));
  std::vector<int> counts(static_cast<std::size_t>(data.n_clusters), 0);
  for (const Record& r : data.records) ++counts[r.cluster];
  for (int i = 0; i < data.n_clusters; ++i) {
    clusters[i].cluster = i;
    clusters[i].design = Eigen::MatrixXd::Zero(counts[i], p);
    clusters[i].outcome.resize(counts[i]);
    clusters[i].period.reserve(counts[i]);
  }
  std::vector<int> row(static_cast<std::size_t>(data.n_clusters), 0);
  for (const Record& r : data.records) {
    DenseCluster& c = clusters[r.cluster];
    const int k = row[r.cluster]++;
    c.design(k, 0) = 1.0;
    if (period_col[r.period] >= 0) c.design(k, period_col[r.period]) = 1.0;
    if (model.effect == EffectKind::Constant) {
      c.design(k, effect_begin) = r.treatment;
    } else if (r.treatment) {
      c.design(k, exposure_col[r.exposure]) = 1.0;
    }
    c.outcome[k] = r.outcome;
    c.period.push_back(r.period);
  }
  return clusters;
}

Eigen::MatrixXd dense_working_cov(const DenseCluster& cluster,
                                  WorkingStructure structure,
                                  const VarianceComponents& vc) {
  const int n = static_cast<int>(cluster.outcome.size());
  Eigen::MatrixXd cov(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const int ja = cluster.period[a];
      const int jb = cluster.period[b];
      double value = 0.0;
      switch (structure) {
        case WorkingStructure::EXCH:
          value = vc.tau_alpha_sq;
          break;
        case WorkingStructure::NE:
          value = vc.tau_alpha_sq + (ja == jb ? vc.tau_gamma_sq : 0.0);
          break;
        case WorkingStructure::DTD:
          value = vc.tau_gamma_sq * std::pow(vc.decay_r, std::abs(ja - jb));
          break;
      }
      cov(a, b) = value;
    }
  }
  cov.diagonal().array() += vc.sigma_eps_sq;
  return cov;
}

DenseFit dense_gls(const std::vector<DenseCluster>& clusters,
                   WorkingStructure structure, const VarianceComponents& vc) {
  if (clusters.empty()) throw std::invalid_argument("no clusters");
  const int p = static_cast<int>(clusters.front().design.cols());

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  double quad_yy = 0.0, logdet = 0.0, n_total = 0.0;
  for (const DenseCluster& c : clusters) {
    const Eigen::MatrixXd cov = dense_working_cov(c, structure, vc);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("dense working covariance is not positive definite");
    const Eigen::MatrixXd wi_d = llt.solve(c.design);
    const Eigen::VectorXd wi_y = llt.solve(c.outcome);
    normal += c.design.transpose() * wi_d;
    rhs += c.design.transpose() * wi_y;
    quad_yy += c.outcome.dot(wi_y);
    logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    n_total += static_cast<double>(c.outcome.size());
  }

  DenseFit fit;
  fit.normal_matrix = normal;
  Eigen::LDLT<Eigen::MatrixXd> solver(normal);
  fit.zeta = solver.solve(rhs);
  fit.vcov_model = solver.solve(Eigen::MatrixXd::Identity(p, p));
  const double quad = quad_yy - fit.zeta.dot(rhs);
  fit.loglik = -0.5 * (n_total * kLog2Pi + logdet + quad);
  return fit;
}

Eigen::MatrixXd dense_cr0(const std::vector<DenseCluster>& clusters,
                          WorkingStructure structure, const VarianceComponents& vc,
                          const Eigen::VectorXd& zeta) {
  const int p = static_cast<int>(zeta.size());
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const DenseCluster& c : clusters) {
    const Eigen::MatrixXd cov = dense_working_cov(c, structure, vc);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::VectorXd resid = c.outcome - c.design * zeta;
    const Eigen::VectorXd score = c.design.transpose() * llt.solve(resid);
    normal += c.design.transpose() * llt.solve(c.design);
    meat += score * score.transpose();
  }
  const Eigen::MatrixXd bread = normal.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return bread * meat * bread;
}

Eigen::MatrixXd dense_md(const std::vector<DenseCluster>& clusters,
                         WorkingStructure structure, const VarianceComponents& vc,
                         const Eigen::VectorXd& zeta, bool inverse_leverage) {
  const int p = static_cast<int>(zeta.size());
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
  for (const DenseCluster& c : clusters) {
    const Eigen::MatrixXd cov = dense_working_cov(c, structure, vc);
    normal += c.design.transpose() * Eigen::LLT<Eigen::MatrixXd>(cov).solve(c.design);
  }
  const Eigen::MatrixXd bread = normal.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
  for (const DenseCluster& c : clusters) {
    const int n = static_cast<int>(c.outcome.size());
    const Eigen::MatrixXd cov = dense_working_cov(c, structure, vc);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd leverage =
        c.design * bread * (llt.solve(c.design)).transpose();
    const Eigen::MatrixXd adjust = Eigen::MatrixXd::Identity(n, n) - leverage;
    const Eigen::VectorXd resid = c.outcome - c.design * zeta;
    Eigen::VectorXd adjusted;
    if (inverse_leverage) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(adjust);
      if (!lu.isInvertible())
        throw std::runtime_error("leverage adjustment singular for cluster " +
                                 std::to_string(c.cluster + 1));
      adjusted = lu.solve(resid);
    } else {
      adjusted = adjust * resid;
    }
    const Eigen::VectorXd score = c.design.transpose() * llt.solve(adjusted);
    meat += score * score.transpose();
  }
  return bread * meat * bread;
}

}  // namespace swsim::reference
