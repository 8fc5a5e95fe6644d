#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "swsim/estimator.hpp"
#include "swsim/harness.hpp"
#include "swsim/reference.hpp"

using namespace swsim;

namespace {

Dataset small_dataset(std::uint64_t seed, int n_clusters = 4, int n_periods = 3,
                      int cell = 5, bool exposure = false) {
  Scenario sc = scenario_from_catalog(exposure ? 16 : 4);
  sc.n_clusters = n_clusters;
  sc.n_periods = n_periods;
  sc.plan.sizes = SizeRule::balanced(cell);
  if (exposure) {
    sc.delta_s.assign(n_periods - 1, 0.0);
    for (int s = 0; s < n_periods - 1; ++s) sc.delta_s[s] = 0.3 * (s - 1);
  }
  return simulate_dataset(sc.design(), sc.plan, sc.generative(), seed);
}

VarianceComponents random_components(WorkingStructure structure, Rng& rng) {
  VarianceComponents vc;
  vc.sigma_eps_sq = 0.4 + rng.uniform01();
  if (structure == WorkingStructure::EXCH) {
    vc.tau_alpha_sq = 0.3 * rng.uniform01();
  } else if (structure == WorkingStructure::NE) {
    vc.tau_alpha_sq = 0.3 * rng.uniform01();
    vc.tau_gamma_sq = 0.3 * rng.uniform01();
  } else {
    vc.tau_gamma_sq = 0.3 * rng.uniform01();
    vc.decay_r = 0.1 + 0.85 * rng.uniform01();
  }
  return vc;
}

}  // namespace

TEST_CASE("design matrix columns") {
  const Dataset data = small_dataset(1, 4, 5);
  SUBCASE("constant effect: intercept, J-1 period dummies, one treatment column") {
    const DesignMatrices dm =
        build_design_matrices(data, {WorkingStructure::EXCH, EffectKind::Constant});
    CHECK(dm.n_params == 6);
    CHECK(dm.column_names.front() == "(intercept)");
    CHECK(dm.column_names.back() == "delta");
    // Control cells have a zero treatment column.
    for (const ClusterBlocks& cb : dm.clusters)
      for (int j = 1; j <= 5; ++j)
        if (cb.cell_n[j - 1] > 0 && cb.cell_design(j - 1, dm.effect_col_begin) == 0.0)
          CHECK(cb.cell_design.row(j - 1).tail(1)[0] == 0.0);
  }
  SUBCASE("exposure effect: one dummy per exposure time") {
    const DesignMatrices dm = build_design_matrices(
        data, {WorkingStructure::EXCH, EffectKind::ExposureDependent});
    CHECK(dm.n_params == 9);
    CHECK(dm.effect_col_count == 4);
    CHECK(dm.exposure_of_effect_col == std::vector<int>{1, 2, 3, 4});
  }
}

TEST_CASE("weighted least squares reduces to ordinary least squares") {
  const Dataset data = small_dataset(2);
  const WorkingModel model{WorkingStructure::EXCH, EffectKind::Constant};
  const DesignMatrices dm = build_design_matrices(data, model);
  VarianceComponents white;
  white.sigma_eps_sq = 1.7;  // W = sigma^2 I: GLS must equal OLS
  const GlsFit gls = gls_at_components(dm, model.structure, white);

  Eigen::MatrixXd x(data.records.size(), dm.n_params);
  Eigen::VectorXd y(data.records.size());
  const auto dense = reference::build_dense_clusters(data, model);
  int row = 0;
  for (const auto& cluster : dense) {
    x.middleRows(row, cluster.design.rows()) = cluster.design;
    y.segment(row, cluster.design.rows()) = cluster.outcome;
    row += static_cast<int>(cluster.design.rows());
  }
  const Eigen::VectorXd ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((gls.zeta - ols).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("structured likelihood equals the dense reference") {
  Rng rng(91);
  for (int k = 0; k < 12; ++k) {
    const bool exposure = k % 3 == 0;
    const int n_periods = 3 + k % 2;
    const int n_clusters = (1 + k % 3) * (n_periods - 1);
    const Dataset data = small_dataset(100 + k, n_clusters, n_periods, 4, exposure);
    const WorkingStructure structure = static_cast<WorkingStructure>(k % 3);
    const WorkingModel model{structure, exposure ? EffectKind::ExposureDependent
                                                 : EffectKind::Constant};
    const DesignMatrices dm = build_design_matrices(data, model);
    const VarianceComponents vc = random_components(structure, rng);

    const double fast = profiled_loglik(dm, structure, vc);
    const auto dense = reference::build_dense_clusters(data, model);
    const auto ref = reference::dense_gls(dense, structure, vc);
    CHECK(fast == doctest::Approx(ref.loglik).epsilon(1e-10));

    const GlsFit gls = gls_at_components(dm, structure, vc);
    CHECK((gls.zeta - ref.zeta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((gls.vcov_model - ref.vcov_model).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("duplicate column raises a rank deficiency error") {
  // J = 2 with every cluster in the single sequence: the treatment column
  // duplicates the period-2 dummy.
  Scenario sc = scenario_from_catalog(4);
  sc.n_clusters = 2;
  sc.n_periods = 2;
  sc.plan.sizes = SizeRule::balanced(4);
  const Dataset data = simulate_dataset(sc.design(), sc.plan, sc.generative(), 9);
  CHECK_THROWS_AS(fit_ml(data, {WorkingStructure::EXCH, EffectKind::Constant}),
                  RankDeficiencyError);
}

TEST_CASE("degenerate truth pushes variance estimates to the boundary") {
  Scenario sc = scenario_from_catalog(4);
  sc.n_clusters = 6;
  sc.n_periods = 4;
  sc.plan.sizes = SizeRule::balanced(8);
  GenerativeSpec gen = sc.generative();
  gen.vc.tau_gamma_sq = 0.0;
  gen.vc.tau_v_sq = 0.0;
  gen.random_intervention = false;
  const Dataset data = simulate_dataset(sc.design(), sc.plan, gen, 13);

  const WorkingModel model{WorkingStructure::EXCH, EffectKind::Constant};
  const FitResult fit = fit_ml(data, model);
  CHECK(fit.vc.tau_alpha_sq < 1e-4);

  const DesignMatrices dm = build_design_matrices(data, model);
  VarianceComponents white;
  white.sigma_eps_sq = fit.vc.sigma_eps_sq;
  const GlsFit ols = gls_at_components(dm, model.structure, white);
  const int col = fit.effect_column();
  CHECK(std::abs(fit.zeta[col] - ols.zeta[col]) < 1e-6);
}

TEST_CASE("optimum dominates the truth and the trace is monotone") {
  const Dataset data = small_dataset(21, 4, 3, 3);
  const WorkingModel model{WorkingStructure::DTD, EffectKind::Constant};
  FitOptions options;
  options.record_trace = true;
  const FitResult fit = fit_ml(data, model, options);
  REQUIRE(fit.converged);
  for (std::size_t k = 1; k < fit.trace.size(); ++k)
    CHECK(fit.trace[k] >= fit.trace[k - 1] - 1e-12);

  // Evaluate the truth and the optimum through the dense oracle.
  Scenario sc = scenario_from_catalog(4);
  const VarianceComponents truth = sc.generative().vc;
  VarianceComponents truth_dtd;
  truth_dtd.tau_gamma_sq = truth.tau_gamma_sq;
  truth_dtd.decay_r = truth.decay_r;
  truth_dtd.sigma_eps_sq = truth.sigma_eps_sq;
  const auto dense = reference::build_dense_clusters(data, model);
  const double at_truth = reference::dense_gls(dense, model.structure, truth_dtd).loglik;
  const double at_optimum = reference::dense_gls(dense, model.structure, fit.vc).loglik;
  CHECK(at_optimum >= at_truth - 1e-8);
  CHECK(fit.loglik == doctest::Approx(at_optimum).epsilon(1e-10));
}

TEST_CASE("fit is invariant to within-cell permutation") {
  Dataset data = small_dataset(31, 4, 3, 6);
  const WorkingModel model{WorkingStructure::NE, EffectKind::Constant};
  const FitResult base = fit_ml(data, model);

  // Reverse record order inside every cell (cluster and period unchanged).
  Dataset shuffled = data;
  std::stable_sort(shuffled.records.begin(), shuffled.records.end(),
                   [](const Record& a, const Record& b) {
                     if (a.cluster != b.cluster) return a.cluster < b.cluster;
                     if (a.period != b.period) return a.period < b.period;
                     return a.time > b.time;
                   });
  const FitResult permuted = fit_ml(shuffled, model);
  CHECK(std::abs(base.loglik - permuted.loglik) < 1e-10);
  CHECK((base.zeta - permuted.zeta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("flat between-period correlation sends the nested fit to the boundary") {
  // CTD with r = 1 has a constant within-cluster correlation, so the nested
  // exchangeable fit collapses onto the exchangeable one.
  Scenario sc = scenario_from_catalog(10);
  sc.n_clusters = 8;
  sc.plan.sizes = SizeRule::balanced(10);
  sc.params.cac = 1.0;
  sc.params.rho0 = 0.05;
  const Dataset data = simulate_dataset(sc.design(), sc.plan, sc.generative(), 17);
  const FitResult exch = fit_ml(data, {WorkingStructure::EXCH, EffectKind::Constant});
  const FitResult ne = fit_ml(data, {WorkingStructure::NE, EffectKind::Constant});
  CHECK(std::abs(exch.loglik - ne.loglik) < 1e-6);
}

TEST_CASE("restricted likelihood differs from the profiled one by the information log-determinant") {
  const Dataset data = small_dataset(51, 4, 3, 6);
  const WorkingModel model{WorkingStructure::NE, EffectKind::Constant};
  const DesignMatrices dm = build_design_matrices(data, model);
  VarianceComponents vc;
  vc.tau_alpha_sq = 0.04;
  vc.tau_gamma_sq = 0.02;
  vc.sigma_eps_sq = 0.9;
  const GlsFit ml = gls_at_components(dm, model.structure, vc, false);
  const GlsFit reml = gls_at_components(dm, model.structure, vc, true);
  const double logdet_b =
      2.0 * Eigen::MatrixXd(ml.normal_matrix.llt().matrixL())
                .diagonal()
                .array()
                .log()
                .sum();
  const double expected = ml.loglik - 0.5 * logdet_b +
                          0.5 * dm.n_params * std::log(2.0 * 3.14159265358979323846);
  CHECK(reml.loglik == doctest::Approx(expected).epsilon(1e-10));

  FitOptions options;
  options.reml = true;
  const FitResult fit = fit_ml(data, model, options);
  CHECK(fit.converged);
  CHECK(std::isfinite(fit.loglik));
}

TEST_CASE("known-components fit carries cluster terms for the sandwich") {
  const Dataset data = small_dataset(41);
  const WorkingModel model{WorkingStructure::EXCH, EffectKind::Constant};
  VarianceComponents vc;
  vc.tau_alpha_sq = 0.05;
  vc.sigma_eps_sq = 1.0;
  const FitResult fit = fit_at_components(data, model, vc);
  CHECK(fit.cluster_score.size() == 4);
  // Scores sum to zero at the GLS solution.
  Eigen::VectorXd total = Eigen::VectorXd::Zero(fit.zeta.size());
  for (const auto& g : fit.cluster_score) total += g;
  CHECK(total.cwiseAbs().maxCoeff() < 1e-8);
}
