#include <doctest.h>

#include <cmath>

#include "swsim/datagen.hpp"
#include "swsim/harness.hpp"

using namespace swsim;

TEST_CASE("period effect evaluation") {
  const PeriodEffectSpec discrete = PeriodEffectSpec::discrete_quadratic(5);
  CHECK(eval_period_effect(discrete, 5, 0.0, 2, 1.5) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(eval_period_effect(discrete, 5, 0.0, 1, 0.5) == 0.0);  // beta_1 = 0
  CHECK(eval_period_effect(discrete, 5, 2.0, 1, 0.5) == 2.0);

  const PeriodEffectSpec continuous = PeriodEffectSpec::continuous_default();
  // {0.5 * 1 + sin(6 pi)} / 5 = 0.1
  CHECK(eval_period_effect(continuous, 5, 0.0, 1, 1.0) ==
        doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS(eval_period_effect(continuous, 5, 0.0, 2, 0.5));  // t outside period
}

TEST_CASE("intervention effect spec") {
  const auto curve = InterventionEffectSpec::exposure_dependent(
      {-1.3768, 0.3831, 0.9785, 0.0152});
  CHECK(std::abs(curve.average()) < 1e-12);  // the four values sum to zero
  CHECK(curve.at_exposure(3) == doctest::Approx(0.9785));
  CHECK_THROWS(curve.at_exposure(5));
  CHECK(InterventionEffectSpec::constant(1.5).average() == 1.5);
}

TEST_CASE("degenerate generation is the deterministic mean") {
  const TrialDesign design = build_standard_design(4, 5, 4);
  GenerativeSpec gen;
  gen.period_effect = PeriodEffectSpec::discrete_quadratic(5);
  gen.intervention = InterventionEffectSpec::constant(0.0);
  gen.vc.tau_gamma_sq = 0.0;
  gen.vc.sigma_eps_sq = 0.0;
  gen.vc.decay_r = 0.5;
  const Dataset data =
      simulate_dataset(design, RecruitmentPlan::uniform_everywhere(4), gen, 11);
  REQUIRE(data.records.size() == 4u * 5u * 4u);
  for (const Record& r : data.records)
    CHECK(r.outcome == eval_period_effect(gen.period_effect, 5, 0.0, r.period, r.time));
}

TEST_CASE("treated cell means carry the exposure effect exactly when noiseless") {
  const TrialDesign design = build_standard_design(4, 5, 6);
  GenerativeSpec gen;
  gen.period_effect = PeriodEffectSpec::discrete_quadratic(5);
  gen.intervention = InterventionEffectSpec::exposure_dependent(
      {-1.3768, 0.3831, 0.9785, 0.0152});
  gen.vc.tau_gamma_sq = 0.0;
  gen.vc.sigma_eps_sq = 0.0;
  const Dataset data =
      simulate_dataset(design, RecruitmentPlan::uniform_everywhere(6), gen, 5);
  for (const Record& r : data.records) {
    const double base = eval_period_effect(gen.period_effect, 5, 0.0, r.period, r.time);
    if (r.treatment)
      CHECK(r.outcome - base ==
            doctest::Approx(gen.intervention.at_exposure(r.exposure)).epsilon(1e-14));
    else
      CHECK(r.outcome == base);
  }
}

TEST_CASE("records are consistent with the design and the plan") {
  Scenario sc = scenario_from_catalog(4);
  sc.n_clusters = 8;
  sc.plan.sizes = SizeRule::balanced(7);
  const TrialDesign design = sc.design();
  const Dataset data = simulate_dataset(design, sc.plan, sc.generative(), 33);
  CHECK(static_cast<long>(data.records.size()) == design.total_size());
  for (const Record& r : data.records) {
    CHECK(r.time >= r.period - 1);
    CHECK(r.time <= r.period);
    CHECK(r.treatment == design.treatment(r.cluster, r.period));
    CHECK(r.exposure == design.exposure(r.cluster, r.period));
  }
}

TEST_CASE("identical seeds give identical datasets") {
  Scenario sc = scenario_from_catalog(6);
  sc.n_clusters = 4;
  sc.plan.sizes = SizeRule::balanced(5);
  const TrialDesign design = sc.design();
  const Dataset a = simulate_dataset(design, sc.plan, sc.generative(), 77);
  const Dataset b = simulate_dataset(design, sc.plan, sc.generative(), 77);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    CHECK(a.records[k].time == b.records[k].time);
    CHECK(a.records[k].outcome == b.records[k].outcome);
  }
  const Dataset c = simulate_dataset(design, sc.plan, sc.generative(), 78);
  bool differs = false;
  for (std::size_t k = 0; k < a.records.size(); ++k)
    differs |= a.records[k].outcome != c.records[k].outcome;
  CHECK(differs);
}

TEST_CASE("within-period pair correlation recovers the design ICC") {
  // Monte Carlo moment oracle on control cells: pooled pair correlation
  // approximates rho0 * E[r^|u - v|] with u, v uniform on the period. With
  // CAC r = 0.8 the gap factor (Simpson quadrature below) is ~0.927, inside
  // the rho0 +/- 0.01 acceptance band around 0.05.
  const double rho0 = 0.05, r = 0.8;
  const double a = -std::log(r);
  const int quad_n = 2000;
  double gap_factor = 0.0;  // 2 * int_0^1 (1 - g) e^{-a g} dg
  for (int k = 0; k <= quad_n; ++k) {
    const double g = static_cast<double>(k) / quad_n;
    const double w = (k == 0 || k == quad_n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    gap_factor += w * 2.0 * (1.0 - g) * std::exp(-a * g);
  }
  gap_factor /= 3.0 * quad_n;

  GenerativeSpec gen;
  gen.period_effect = PeriodEffectSpec::discrete_quadratic(2);
  gen.intervention = InterventionEffectSpec::constant(0.0);
  gen.vc = components_from_design_params(CovStructure::CTD,
                                         {rho0, rho0, r, 1.0}, false);
  const TrialDesign design = build_standard_design(1, 2, 100);
  const RecruitmentPlan plan = RecruitmentPlan::uniform_everywhere(100);

  double sum_cross = 0.0, sum_sq = 0.0;
  long n_pairs = 0, n_obs = 0;
  for (int rep = 0; rep < 600; ++rep) {
    const Dataset data = simulate_dataset(design, plan, gen, 5000 + rep);
    double cell_sum = 0.0, cell_sq = 0.0;
    int count = 0;
    for (const Record& rec : data.records) {
      if (rec.period != 1) continue;  // control cell only
      cell_sum += rec.outcome;
      cell_sq += rec.outcome * rec.outcome;
      ++count;
    }
    sum_cross += cell_sum * cell_sum - cell_sq;
    n_pairs += static_cast<long>(count) * (count - 1);
    sum_sq += cell_sq;
    n_obs += count;
  }
  const double pair_cov = sum_cross / n_pairs;
  const double variance = sum_sq / n_obs;
  const double corr = pair_cov / variance;
  CHECK(corr == doctest::Approx(rho0 * gap_factor).epsilon(0.12));
  CHECK(corr > 0.04);
  CHECK(corr < 0.06);
}
