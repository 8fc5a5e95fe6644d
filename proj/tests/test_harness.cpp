#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "swsim/harness.hpp"

using namespace swsim;

namespace {

Scenario desk_scale(int id) {
  Scenario sc = scenario_from_catalog(id);
  sc.n_clusters = 8;
  sc.plan.sizes = SizeRule::balanced(6);
  return sc;
}

bool rows_equal(const ReplicateRow& a, const ReplicateRow& b) {
  return a.replicate == b.replicate && a.estimand == b.estimand &&
         a.vcov == b.vcov && a.estimate == b.estimate && a.se == b.se &&
         a.ci_low == b.ci_low && a.ci_high == b.ci_high &&
         a.covered == b.covered && a.converged == b.converged;
}

}  // namespace

TEST_CASE("catalog holds 24 distinct scenario configurations") {
  std::set<std::tuple<bool, bool, bool, int>> flags;
  for (int id = 1; id <= 24; ++id) {
    const Scenario sc = scenario_from_catalog(id);
    flags.insert({sc.continuous_period, sc.exposure_dependent,
                  sc.random_intervention, static_cast<int>(sc.working)});
  }
  CHECK(flags.size() == 24);

  const Scenario sc4 = scenario_from_catalog(4);
  CHECK(sc4.continuous_period);
  CHECK_FALSE(sc4.exposure_dependent);
  CHECK(sc4.random_intervention);
  CHECK(sc4.working == WorkingStructure::EXCH);

  const Scenario sc18 = scenario_from_catalog(18);
  CHECK(sc18.exposure_dependent);
  CHECK(sc18.working == WorkingStructure::DTD);
  CHECK(sc18.delta_s.size() == 4);

  const Scenario sc9 = scenario_from_catalog(9);
  CHECK_FALSE(sc9.continuous_period);
  CHECK_FALSE(sc9.random_intervention);
  CHECK(sc9.working == WorkingStructure::DTD);

  CHECK_THROWS(scenario_from_catalog(0));
  CHECK_THROWS(scenario_from_catalog(25));
}

TEST_CASE("replicate rows per estimand and variance kind") {
  const ScenarioResult res = run_scenario(desk_scale(4), 2, 99, 1);
  CHECK(res.rows.size() == 2u * 3u);  // one estimand, three vcov kinds
  int md_rows = 0;
  for (const ReplicateRow& r : res.rows)
    if (r.vcov == VcovKind::MD) ++md_rows;
  CHECK(md_rows == 2);

  const ScenarioResult exp_res = run_scenario(desk_scale(16), 2, 99, 1);
  CHECK(exp_res.rows.size() == 2u * 3u * 5u);  // delta_s1..4 and Delta
}

TEST_CASE("results are identical for any worker count") {
  const Scenario sc = desk_scale(5);
  const ScenarioResult serial = run_scenario(sc, 6, 2024, 1);
  const ScenarioResult parallel = run_scenario(sc, 6, 2024, 4);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t k = 0; k < serial.rows.size(); ++k)
    CHECK(rows_equal(serial.rows[k], parallel.rows[k]));

  write_replicates_csv(serial, "harness_serial.csv");
  write_replicates_csv(parallel, "harness_parallel.csv");
  std::ifstream a("harness_serial.csv"), b("harness_parallel.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("summary metrics") {
  auto row = [](double est, double lo, double hi, bool covered) {
    ReplicateRow r;
    r.estimand = "delta";
    r.vcov = VcovKind::MD;
    r.estimate = est;
    r.se = 0.5;
    r.ci_low = lo;
    r.ci_high = hi;
    r.covered = covered;
    r.converged = true;
    return r;
  };
  SUBCASE("bias of a symmetric pair is zero") {
    const MetricsSummary m = summarize_rows({row(0.1, 0, 1, true), row(-0.1, 0, 1, true)}, 0.0);
    CHECK(m.bias == doctest::Approx(0.0));
  }
  SUBCASE("empirical sd uses the 1/n divisor") {
    const MetricsSummary m = summarize_rows({row(1, 0, 2, true), row(3, 0, 2, true)}, 0.0);
    CHECK(m.empirical_sd == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("coverage counts containing intervals") {
    const MetricsSummary m =
        summarize_rows({row(0.0, -1, 1, true), row(0.0, 2, 3, false)}, 0.0);
    CHECK(m.coverage == doctest::Approx(0.5));
    CHECK(m.coverage_mc_se == doctest::Approx(std::sqrt(0.25 / 2.0)));
  }
  SUBCASE("non-converged replicates are excluded but counted") {
    auto bad = row(100.0, 99, 101, true);
    bad.converged = false;
    const MetricsSummary m = summarize_rows({row(1, 0, 2, true), bad}, 0.0);
    CHECK(m.n_reps == 2);
    CHECK(m.n_converged == 1);
    CHECK(m.bias == doctest::Approx(1.0));
  }
  SUBCASE("empty input is an error") {
    CHECK_THROWS(summarize_rows({}, 0.0));
  }
}

TEST_CASE("scenario config files") {
  SUBCASE("key-value parsing with catalog base") {
    const Scenario sc = scenario_from_config_text(
        "scenario = 4\n"
        "I = 16\n"
        "rho0 = 0.05\n"
        "CAC = 0.8\n"
        "pattern = uniform\n"
        "# comment line\n"
        "K = 25\n");
    CHECK(sc.n_clusters == 16);
    CHECK(sc.params.rho0 == 0.05);
    CHECK(sc.params.cac == 0.8);
    CHECK(sc.plan.control_pattern.kind == PatternKind::Uniform);
    CHECK(std::get<int>(sc.plan.sizes.treated_size) == 25);
    CHECK(sc.working == WorkingStructure::EXCH);  // inherited from scenario 4
  }
  SUBCASE("exposure-dependent sizes and split patterns") {
    const Scenario sc = scenario_from_config_text(
        "I = 32\nJ = 5\nworking = ne\n"
        "pattern_control = uniform\npattern_treated = cluster_period_mixed\n"
        "K_control = 25\nK_exposure = 50, 75, 100, 125\n"
        "delta = 0\n");
    CHECK(sc.working == WorkingStructure::NE);
    CHECK(sc.plan.control_pattern.kind == PatternKind::Uniform);
    CHECK(sc.plan.treated_pattern.kind == PatternKind::ClusterPeriodMixed);
    const auto& sizes = std::get<std::map<int, int>>(sc.plan.sizes.treated_size);
    CHECK(sizes.at(1) == 50);
    CHECK(sizes.at(4) == 125);
    CHECK(sc.plan.sizes.control_size == 25);
  }
  SUBCASE("unknown keys are rejected") {
    CHECK_THROWS(scenario_from_config_text("bogus = 1\n"));
    CHECK_THROWS(scenario_from_config_text("K_control = 10\n"));
  }
  SUBCASE("delta_s switches the effect kind") {
    const Scenario sc = scenario_from_config_text(
        "delta_s = -1.3768, 0.3831, 0.9785, 0.0152\n");
    CHECK(sc.exposure_dependent);
    const auto estimands = sc.estimands();
    CHECK(estimands.back().first == "Delta");
    CHECK(std::abs(estimands.back().second) < 1e-12);
  }
}

TEST_CASE("summary table renders one wide row per estimand") {
  const ScenarioResult res = run_scenario(desk_scale(4), 3, 7, 1);
  const std::string table = format_summary_table(summarize(res));
  CHECK(table.find("| delta |") != std::string::npos);
  CHECK(table.find("C.RVE.MD") != std::string::npos);
}
