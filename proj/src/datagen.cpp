#include "swsim/datagen.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace swsim {

PeriodEffectSpec PeriodEffectSpec::discrete_quadratic(int n_periods) {
  PeriodEffectSpec spec;
  spec.kind = Kind::Discrete;
  spec.beta.assign(static_cast<std::size_t>(n_periods), 0.0);
  for (int j = 2; j <= n_periods; ++j)
    spec.beta[j - 1] = 0.5 * j * j / n_periods;
  return spec;
}

PeriodEffectSpec PeriodEffectSpec::continuous_default() {
  PeriodEffectSpec spec;
  spec.kind = Kind::Continuous;
  return spec;
}

double eval_period_effect(const PeriodEffectSpec& spec, int n_periods, double mu,
                          int period, double t) {
  if (period < 1 || period > n_periods)
    throw std::invalid_argument("period out of range");
  // Closed lower endpoint: max-min rescaled patterns place their sample
  // minimum exactly on j-1.
  if (!(t >= period - 1 && t <= period))
    throw std::invalid_argument("recruitment time lies outside its period");
  if (spec.kind == PeriodEffectSpec::Kind::Discrete) {
    if (static_cast<int>(spec.beta.size()) != n_periods)
      throw std::invalid_argument("discrete period effect needs one value per period");
    if (spec.beta.front() != 0.0)
      throw std::invalid_argument("beta_1 must be zero for identifiability");
    return mu + spec.beta[period - 1];
  }
  return mu + (spec.quad_coef * t * t + spec.sin_amp * std::sin(spec.sin_freq * t)) /
                  n_periods;
}

double InterventionEffectSpec::average() const {
  if (kind == Kind::Constant) return delta;
  if (delta_by_exposure.empty())
    throw std::invalid_argument("exposure-dependent effect has no values");
  const double sum =
      std::accumulate(delta_by_exposure.begin(), delta_by_exposure.end(), 0.0);
  return sum / static_cast<double>(delta_by_exposure.size());
}

double InterventionEffectSpec::at_exposure(int s) const {
  if (kind == Kind::Constant) return delta;
  if (s < 1 || s > static_cast<int>(delta_by_exposure.size()))
    throw std::invalid_argument("exposure level " + std::to_string(s) +
                                " outside the configured effect curve");
  return delta_by_exposure[s - 1];
}

namespace {

// Basic pattern for each cell: the configured pattern of the cell's
// condition, with mixed kinds resolved through dedicated streams (one
// assignment pass per condition so a cluster-mixed choice is constant over
// the cluster's periods within that condition).
PatternAssignment resolve_cell_patterns(const TrialDesign& design,
                                        const RecruitmentPlan& plan,
                                        std::uint64_t seed) {
  PatternAssignment out;
  out.n_clusters = design.n_clusters;
  out.n_periods = design.n_periods;
  out.cell.resize(static_cast<std::size_t>(design.n_clusters) * design.n_periods);

  auto condition_patterns = [&](const RecruitmentPattern& pattern, std::uint64_t tag) {
    if (is_basic_pattern(pattern.kind)) {
      PatternAssignment a;
      a.n_clusters = design.n_clusters;
      a.n_periods = design.n_periods;
      a.cell.assign(out.cell.size(), pattern.kind);
      return a;
    }
    Rng rng(derive_stream(seed, tag));
    return assign_patterns(design, pattern.kind, rng);
  };

  const PatternAssignment control =
      condition_patterns(plan.control_pattern, stream_tag::pattern_control);
  const PatternAssignment treated =
      condition_patterns(plan.treated_pattern, stream_tag::pattern_treated);
  for (int i = 0; i < design.n_clusters; ++i)
    for (int j = 1; j <= design.n_periods; ++j)
      out.cell[static_cast<std::size_t>(i) * design.n_periods + (j - 1)] =
          design.treatment(i, j) ? treated.at(i, j) : control.at(i, j);
  return out;
}

}  // namespace

Dataset simulate_dataset(const TrialDesign& design, const RecruitmentPlan& plan,
                         const GenerativeSpec& gen, std::uint64_t seed) {
  design.validate();
  validate_components(gen.vc, /*require_noise=*/false);
  if (gen.intervention.kind == InterventionEffectSpec::Kind::ExposureDependent &&
      static_cast<int>(gen.intervention.delta_by_exposure.size()) != design.n_periods - 1)
    throw std::invalid_argument("exposure-dependent effect needs J-1 values");

  const Eigen::MatrixXi sizes = resolve_sizes(design, plan.sizes);
  const PatternAssignment cell_pattern = resolve_cell_patterns(design, plan, seed);

  Dataset data;
  data.n_clusters = design.n_clusters;
  data.n_periods = design.n_periods;
  data.records.reserve(static_cast<std::size_t>(sizes.cast<long>().sum()));
  data.cluster_labels.resize(static_cast<std::size_t>(design.n_clusters));
  for (int i = 0; i < design.n_clusters; ++i)
    data.cluster_labels[i] = std::to_string(i + 1);

  const bool with_ri = gen.random_intervention && gen.vc.tau_v_sq > 0.0;
  const double sigma_eps = std::sqrt(gen.vc.sigma_eps_sq);
  const double tau_v = std::sqrt(gen.vc.tau_v_sq);

  for (int i = 0; i < design.n_clusters; ++i) {
    // Recruitment times, period-major so the stacked vector is chronological.
    ClusterTimes times;
    std::vector<int> treated_by_period(static_cast<std::size_t>(design.n_periods));
    const int cluster_total = sizes.row(i).sum();
    times.time.reserve(cluster_total);
    times.period.reserve(cluster_total);
    for (int j = 1; j <= design.n_periods; ++j) {
      treated_by_period[j - 1] = design.treatment(i, j);
      Rng rng(derive_stream(seed, stream_tag::times, static_cast<std::uint64_t>(i),
                            static_cast<std::uint64_t>(j)));
      const RecruitmentPattern basic{cell_pattern.at(i, j),
                                     design.treatment(i, j) ? plan.treated_pattern.rate
                                                            : plan.control_pattern.rate};
      for (double t : sample_cell_times(basic, j, sizes(i, j - 1), rng)) {
        times.time.push_back(t);
        times.period.push_back(j);
      }
    }

    // Cluster-time random effects: correlated draw through the Cholesky
    // factor of the continuous-time decay correlation, scaled by tau_gamma.
    // Individuals recruited at the same instant have correlation exactly one
    // (zero time gap), so the draw runs on the distinct recruitment times
    // and tied individuals share a value; the rescaled patterns produce such
    // ties at every period boundary between two rescaled cells.
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(cluster_total);
    if (gen.vc.tau_gamma_sq > 0.0 && gen.vc.decay_r == 1.0) {
      // No decay: every pair correlates at one, a single value per cluster.
      Rng rng(derive_stream(seed, stream_tag::gamma, static_cast<std::uint64_t>(i)));
      gamma.setConstant(std::sqrt(gen.vc.tau_gamma_sq) * rng.normal());
    } else if (gen.vc.tau_gamma_sq > 0.0) {
      ClusterTimes unique;
      std::vector<int> unique_of_obs(static_cast<std::size_t>(cluster_total));
      for (int k = 0; k < cluster_total; ++k) {
        if (unique.time.empty() || times.time[k] != unique.time.back()) {
          unique.time.push_back(times.time[k]);
          unique.period.push_back(times.period[k]);
        }
        unique_of_obs[k] = static_cast<int>(unique.time.size()) - 1;
      }
      VarianceComponents corr;
      corr.tau_gamma_sq = 1.0;
      corr.sigma_eps_sq = 0.0;
      corr.decay_r = gen.vc.decay_r;
      const Eigen::MatrixXd correlation = build_ctd_cov(
          corr, unique, /*with_random_intervention=*/false, treated_by_period);
      const Eigen::MatrixXd lower = cholesky_factor(correlation);
      Rng rng(derive_stream(seed, stream_tag::gamma, static_cast<std::uint64_t>(i)));
      Eigen::VectorXd z(static_cast<int>(unique.time.size()));
      for (int k = 0; k < z.size(); ++k) z[k] = rng.normal();
      const Eigen::VectorXd gamma_unique =
          std::sqrt(gen.vc.tau_gamma_sq) * (lower * z);
      for (int k = 0; k < cluster_total; ++k) gamma[k] = gamma_unique[unique_of_obs[k]];
    }

    double v_i = 0.0;
    if (with_ri) {
      Rng rng(derive_stream(seed, stream_tag::random_intervention,
                            static_cast<std::uint64_t>(i)));
      v_i = tau_v * rng.normal();
    }

    int obs = 0;
    for (int j = 1; j <= design.n_periods; ++j) {
      Rng noise(derive_stream(seed, stream_tag::noise, static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(j)));
      const int z = design.treatment(i, j);
      const int s = design.exposure(i, j);
      const double effect = z ? gen.intervention.at_exposure(s) + v_i : 0.0;
      for (int k = 0; k < sizes(i, j - 1); ++k, ++obs) {
        Record rec;
        rec.cluster = i;
        rec.period = j;
        rec.time = times.time[obs];
        rec.treatment = z;
        rec.exposure = s;
        rec.outcome = eval_period_effect(gen.period_effect, design.n_periods, gen.mu,
                                         j, rec.time) +
                      effect + gamma[obs] +
                      (gen.vc.sigma_eps_sq > 0.0 ? sigma_eps * noise.normal() : 0.0);
        data.records.push_back(rec);
      }
    }
  }
  return data;
}

}  // namespace swsim
