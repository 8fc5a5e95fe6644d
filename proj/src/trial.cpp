#include "swsim/trial.hpp"

#include <numeric>

namespace swsim {

void TrialDesign::validate(bool require_positive_cells) const {
  if (n_clusters < 1) throw DesignError("design needs at least one cluster");
  if (n_periods < 2) throw DesignError("design needs at least two periods");
  if (n_sequences < 1 || n_sequences > n_periods - 1)
    throw DesignError("sequence count must lie in 1..J-1");
  if (static_cast<int>(sequence_of_cluster.size()) != n_clusters)
    throw DesignError("sequence assignment size does not match cluster count");
  for (int i = 0; i < n_clusters; ++i) {
    const int q = sequence_of_cluster[i];
    if (q < 1 || q > n_sequences)
      throw DesignError("cluster " + std::to_string(i) + " assigned to sequence " +
                        std::to_string(q) + " outside 1.." + std::to_string(n_sequences));
  }
  if (cell_size.rows() != n_clusters || cell_size.cols() != n_periods)
    throw DesignError("cell size map does not match design dimensions");
  if (require_positive_cells && (cell_size.array() < 1).any())
    throw DesignError("every cluster-period cell needs at least one individual");
}

TrialDesign build_standard_design(int n_clusters, int n_periods, int cell_size) {
  std::vector<int> order(static_cast<std::size_t>(std::max(n_clusters, 0)));
  std::iota(order.begin(), order.end(), 0);
  return build_standard_design(n_clusters, n_periods, cell_size, order);
}

TrialDesign build_standard_design(int n_clusters, int n_periods, int cell_size,
                                  std::span<const int> cluster_order) {
  if (n_periods < 2) throw DesignError("standard design needs J >= 2");
  if (n_clusters < 1) throw DesignError("standard design needs I >= 1");
  if (cell_size < 1) throw DesignError("cell size must be positive");
  const int n_sequences = n_periods - 1;
  if (n_clusters % n_sequences != 0)
    throw DesignError("cluster count " + std::to_string(n_clusters) +
                      " is not divisible by sequence count " +
                      std::to_string(n_sequences));
  if (static_cast<int>(cluster_order.size()) != n_clusters)
    throw DesignError("cluster order must be a permutation of all clusters");

  const int per_sequence = n_clusters / n_sequences;
  TrialDesign design;
  design.n_clusters = n_clusters;
  design.n_periods = n_periods;
  design.n_sequences = n_sequences;
  design.sequence_of_cluster.assign(n_clusters, 0);
  std::vector<char> seen(n_clusters, 0);
  for (int k = 0; k < n_clusters; ++k) {
    const int cluster = cluster_order[k];
    if (cluster < 0 || cluster >= n_clusters || seen[cluster])
      throw DesignError("cluster order must be a permutation of all clusters");
    seen[cluster] = 1;
    design.sequence_of_cluster[cluster] = k / per_sequence + 1;
  }
  design.cell_size = Eigen::MatrixXi::Constant(n_clusters, n_periods, cell_size);
  design.validate();
  return design;
}

}  // namespace swsim
