#include <doctest.h>

#include <numeric>
#include <vector>

#include "swsim/trial.hpp"

using namespace swsim;

TEST_CASE("standard balanced design layout") {
  const TrialDesign d = build_standard_design(32, 5, 50);
  CHECK(d.n_sequences == 4);
  CHECK(d.n_clusters == 32);
  std::vector<int> per_sequence(d.n_sequences + 1, 0);
  for (int q : d.sequence_of_cluster) ++per_sequence[q];
  for (int q = 1; q <= 4; ++q) CHECK(per_sequence[q] == 8);
  CHECK((d.cell_size.array() == 50).all());
  CHECK(d.total_size() == 32l * 5 * 50);
}

TEST_CASE("three clusters over four periods, one per sequence") {
  const TrialDesign d = build_standard_design(3, 4, 4);
  CHECK(d.n_sequences == 3);
  CHECK(d.sequence_of_cluster == std::vector<int>{1, 2, 3});
}

TEST_CASE("non-divisible cluster count is a design error") {
  CHECK_THROWS_AS(build_standard_design(5, 5, 10), DesignError);
  CHECK_THROWS_AS(build_standard_design(4, 1, 10), DesignError);
  CHECK_THROWS_AS(build_standard_design(4, 5, 0), DesignError);
}

TEST_CASE("treatment and exposure indicators") {
  const TrialDesign d = build_standard_design(8, 5, 10);
  // First period is always control.
  for (int i = 0; i < d.n_clusters; ++i) {
    CHECK(d.treatment(i, 1) == 0);
    CHECK(d.exposure(i, 1) == 0);
  }
  // Last period is always treated with s = J - q.
  for (int i = 0; i < d.n_clusters; ++i) {
    CHECK(d.treatment(i, d.n_periods) == 1);
    CHECK(d.exposure(i, d.n_periods) == d.n_periods - d.sequence_of_cluster[i]);
  }
  // Hand evaluation: sequence 2, period 4, J = 5 -> (1, 2).
  int cluster_in_seq2 = -1;
  for (int i = 0; i < d.n_clusters; ++i)
    if (d.sequence_of_cluster[i] == 2) cluster_in_seq2 = i;
  REQUIRE(cluster_in_seq2 >= 0);
  CHECK(d.treatment(cluster_in_seq2, 4) == 1);
  CHECK(d.exposure(cluster_in_seq2, 4) == 2);
}

TEST_CASE("indicator vector is monotone and consistent with exposure") {
  for (int J : {2, 3, 5, 9}) {
    const TrialDesign d = build_standard_design(2 * (J - 1), J, 3);
    for (int i = 0; i < d.n_clusters; ++i) {
      int prev = 0;
      for (int j = 1; j <= J; ++j) {
        const int z = d.treatment(i, j);
        CHECK(z >= prev);  // never reverts to control
        CHECK((z == 0) == (d.exposure(i, j) == 0));
        if (z == 1) CHECK(d.exposure(i, j) >= 1);
        prev = z;
      }
    }
  }
}

TEST_CASE("out-of-range indices throw") {
  const TrialDesign d = build_standard_design(4, 5, 10);
  CHECK_THROWS_AS(d.treatment(-1, 1), DesignError);
  CHECK_THROWS_AS(d.treatment(4, 1), DesignError);
  CHECK_THROWS_AS(d.exposure(0, 0), DesignError);
  CHECK_THROWS_AS(d.exposure(0, 6), DesignError);
}

TEST_CASE("permutation hook reorders sequence assignment") {
  const std::vector<int> order{3, 2, 1, 0};
  const TrialDesign d = build_standard_design(4, 5, 10, order);
  // Position k in the order gets the deterministic layout's sequence for
  // slot k: slots 0..3 map to sequences 1..4.
  CHECK(d.sequence_of_cluster == std::vector<int>{4, 3, 2, 1});

  const std::vector<int> bad{0, 0, 1, 2};
  CHECK_THROWS_AS(build_standard_design(4, 5, 10, bad), DesignError);
}
