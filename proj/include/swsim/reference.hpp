#pragma once

#include <vector>

#include <Eigen/Core>

#include "swsim/estimator.hpp"

namespace swsim::reference {

// Serial dense-matrix evaluation of the working-model algebra, built row by
// row straight from the dataset. Kept deliberately independent of the
// structured kernel: tests compare the two paths and the benchmark measures
// the gap.
struct DenseCluster {
  int cluster = 0;
  Eigen::MatrixXd design;   // K_i x p
  Eigen::VectorXd outcome;  // K_i
  std::vector<int> period;  // 1-based, per row
};

std::vector<DenseCluster> build_dense_clusters(const Dataset& data,
                                               const WorkingModel& model);

// Dense working covariance of one cluster's stacked outcome vector.
Eigen::MatrixXd dense_working_cov(const DenseCluster& cluster,
                                  WorkingStructure structure,
                                  const VarianceComponents& vc);

struct DenseFit {
  Eigen::VectorXd zeta;
  Eigen::MatrixXd normal_matrix;
  Eigen::MatrixXd vcov_model;
  double loglik = 0.0;
};

DenseFit dense_gls(const std::vector<DenseCluster>& clusters,
                   WorkingStructure structure, const VarianceComponents& vc);

Eigen::MatrixXd dense_cr0(const std::vector<DenseCluster>& clusters,
                          WorkingStructure structure, const VarianceComponents& vc,
                          const Eigen::VectorXd& zeta);

Eigen::MatrixXd dense_md(const std::vector<DenseCluster>& clusters,
                         WorkingStructure structure, const VarianceComponents& vc,
                         const Eigen::VectorXd& zeta, bool inverse_leverage = true);

}  // namespace swsim::reference
