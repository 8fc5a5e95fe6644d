#pragma once

#include <string>
#include <vector>

#include "swsim/covariance.hpp"
#include "swsim/recruitment.hpp"
#include "swsim/trial.hpp"

namespace swsim {

// Secular trend: either saturated discrete period values beta_j (beta_1 = 0
// for identifiability) or a smooth function of the recruitment time,
// (quad_coef * t^2 + sin_amp * sin(sin_freq * t)) / J.
struct PeriodEffectSpec {
  enum class Kind { Discrete, Continuous };
  Kind kind = Kind::Discrete;
  std::vector<double> beta;  // size J, beta[0] == 0
  double quad_coef = 0.5;
  double sin_amp = 1.0;
  double sin_freq = 6.0 * 3.14159265358979323846;

  // beta_j = 0.5 j^2 / J for j >= 2, beta_1 = 0.
  static PeriodEffectSpec discrete_quadratic(int n_periods);
  static PeriodEffectSpec continuous_default();
};

double eval_period_effect(const PeriodEffectSpec& spec, int n_periods, double mu,
                          int period, double t);

// Intervention effect: one constant delta, or a value per exposure time
// s = 1..J-1 whose mean is the time-averaged effect.
struct InterventionEffectSpec {
  enum class Kind { Constant, ExposureDependent };
  Kind kind = Kind::Constant;
  double delta = 0.0;
  std::vector<double> delta_by_exposure;  // size J-1, index s-1

  double average() const;
  double at_exposure(int s) const;

  static InterventionEffectSpec constant(double delta) {
    return {Kind::Constant, delta, {}};
  }
  static InterventionEffectSpec exposure_dependent(std::vector<double> values) {
    return {Kind::ExposureDependent, 0.0, std::move(values)};
  }
};

// True-model configuration for one simulation scenario.
struct GenerativeSpec {
  PeriodEffectSpec period_effect;
  InterventionEffectSpec intervention;
  VarianceComponents vc;  // tau_gamma_sq, tau_v_sq, sigma_eps_sq, decay_r
  double mu = 0.0;
  bool random_intervention = false;
};

struct Record {
  int cluster = 0;   // 0-based
  int period = 0;    // 1-based
  double time = 0.0;
  int treatment = 0;
  int exposure = 0;
  double outcome = 0.0;
};

struct Dataset {
  int n_clusters = 0;
  int n_periods = 0;
  std::vector<Record> records;  // sorted by (cluster, period, time)
  std::vector<std::string> cluster_labels;
};

// One full trial draw under the continuous-time-decay true model:
// Y = mu + period effect + (delta(s) + v_i) Z + gamma_{i,t} + eps.
// All randomness flows through streams derived from `seed`, so a replicate
// is reproducible in isolation and independent of scheduling.
Dataset simulate_dataset(const TrialDesign& design, const RecruitmentPlan& plan,
                         const GenerativeSpec& gen, std::uint64_t seed);

}  // namespace swsim
