// Timing comparison between the structured per-cluster kernels and the dense
// serial reference, plus replicate throughput at several worker counts.

#include <chrono>
#include <cstdio>

#include "swsim/harness.hpp"
#include "swsim/reference.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace swsim;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(const clock_type::time_point& t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

void bench_likelihood() {
  Scenario sc = scenario_from_catalog(5);
  sc.n_clusters = 8;
  const Dataset data = simulate_dataset(sc.design(), sc.plan, sc.generative(), 1);
  const WorkingModel model{WorkingStructure::NE, EffectKind::Constant};
  const DesignMatrices dm = build_design_matrices(data, model);
  const auto dense = reference::build_dense_clusters(data, model);
  VarianceComponents vc;
  vc.tau_alpha_sq = 0.02;
  vc.tau_gamma_sq = 0.01;
  vc.sigma_eps_sq = 1.0;

  std::printf("profiled log-likelihood, I=8 J=5 K=50 (K_i. = 250)\n");
  double sink = 0.0;
  const int n_fast = 2000;
  auto t0 = clock_type::now();
  for (int k = 0; k < n_fast; ++k) {
    vc.tau_alpha_sq = 0.02 + 1e-9 * k;  // defeat caching
    sink += profiled_loglik(dm, model.structure, vc);
  }
  const double fast = seconds_since(t0) / n_fast;

  const int n_dense = 20;
  t0 = clock_type::now();
  for (int k = 0; k < n_dense; ++k) {
    vc.tau_alpha_sq = 0.02 + 1e-9 * k;
    sink += reference::dense_gls(dense, model.structure, vc).loglik;
  }
  const double slow = seconds_since(t0) / n_dense;
  std::printf("  structured kernel: %8.1f us/eval\n", 1e6 * fast);
  std::printf("  dense reference:   %8.1f us/eval  (%.0fx)\n", 1e6 * slow,
              slow / fast);
  std::printf("  (checksum %.3f)\n", sink);
}

void bench_replicates() {
  const Scenario sc = scenario_from_catalog(4);
  const int reps = 24;
  std::printf("scenario 4 replicates (simulate + fit + all sandwiches), n=%d\n",
              reps);
  int max_threads = 1;
#ifdef _OPENMP
  max_threads = omp_get_max_threads();
#endif
  for (int threads = 1; threads <= max_threads; threads *= 2) {
    const auto t0 = clock_type::now();
    const ScenarioResult res = run_scenario(sc, reps, 99, threads);
    const double total = seconds_since(t0);
    std::printf("  threads=%d: %6.2fs total, %6.1f ms/replicate (%zu rows)\n",
                threads, total, 1e3 * total / reps, res.rows.size());
  }
}

}  // namespace

int main() {
  bench_likelihood();
  bench_replicates();
  return 0;
}
