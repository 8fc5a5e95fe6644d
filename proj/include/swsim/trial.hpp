#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace swsim {

struct DesignError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Stepped wedge layout: I clusters observed over J periods, assigned to
// sequences q = 1..Q with Q = J-1 for a standard complete design. A cluster
// in sequence q is under control for periods j <= q and under intervention
// afterwards; it never reverts.
struct TrialDesign {
  int n_clusters = 0;
  int n_periods = 0;
  int n_sequences = 0;
  std::vector<int> sequence_of_cluster;  // q in 1..Q, indexed by cluster 0..I-1
  Eigen::MatrixXi cell_size;             // I x J, K_ij

  // Treatment indicator Z_ij for cluster i (0-based) in period j (1-based).
  int treatment(int cluster, int period) const {
    check_indices(cluster, period);
    return period > sequence_of_cluster[cluster] ? 1 : 0;
  }

  // Exposure time s = max(0, j - q): 0 while under control, then the number
  // of periods since crossover.
  int exposure(int cluster, int period) const {
    check_indices(cluster, period);
    const int s = period - sequence_of_cluster[cluster];
    return s > 0 ? s : 0;
  }

  long total_size() const { return cell_size.cast<long>().sum(); }

  void check_indices(int cluster, int period) const {
    if (cluster < 0 || cluster >= n_clusters)
      throw DesignError("cluster index out of range: " + std::to_string(cluster));
    if (period < 1 || period > n_periods)
      throw DesignError("period index out of range: " + std::to_string(period));
  }

  void validate(bool require_positive_cells = true) const;
};

// Balanced standard design: Q = J-1 sequences, I/Q clusters per sequence in
// cluster-index order, constant cell size K.
TrialDesign build_standard_design(int n_clusters, int n_periods, int cell_size);

// Permutation hook: same layout but clusters are assigned to sequences in the
// given order (a permutation of 0..I-1); position k in the permutation takes
// the sequence that cluster k would receive under the deterministic layout.
TrialDesign build_standard_design(int n_clusters, int n_periods, int cell_size,
                                  std::span<const int> cluster_order);

}  // namespace swsim
