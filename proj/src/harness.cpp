#include "swsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace swsim {

std::vector<double> default_exposure_effects() {
  return {-1.3768, 0.3831, 0.9785, 0.0152};
}

TrialDesign Scenario::design() const {
  // Cell sizes are resolved from the plan's size rule; the design skeleton
  // only needs a positive placeholder.
  TrialDesign d = build_standard_design(n_clusters, n_periods, 1);
  d.cell_size = resolve_sizes(d, plan.sizes);
  return d;
}

GenerativeSpec Scenario::generative() const {
  GenerativeSpec gen;
  gen.period_effect = continuous_period
                          ? PeriodEffectSpec::continuous_default()
                          : PeriodEffectSpec::discrete_quadratic(n_periods);
  if (exposure_dependent) {
    std::vector<double> values = delta_s.empty() ? default_exposure_effects() : delta_s;
    if (static_cast<int>(values.size()) != n_periods - 1)
      throw std::invalid_argument("delta_s needs J-1 values");
    gen.intervention = InterventionEffectSpec::exposure_dependent(std::move(values));
  } else {
    gen.intervention = InterventionEffectSpec::constant(delta);
  }
  gen.vc = components_from_design_params(CovStructure::CTD, params, random_intervention);
  gen.random_intervention = random_intervention;
  return gen;
}

WorkingModel Scenario::working_model() const {
  return {working, exposure_dependent ? EffectKind::ExposureDependent
                                      : EffectKind::Constant};
}

std::vector<std::pair<std::string, double>> Scenario::estimands() const {
  std::vector<std::pair<std::string, double>> out;
  if (!exposure_dependent) {
    out.emplace_back("delta", delta);
    return out;
  }
  const std::vector<double> values = delta_s.empty() ? default_exposure_effects() : delta_s;
  double sum = 0.0;
  for (std::size_t s = 0; s < values.size(); ++s) {
    out.emplace_back("delta_s" + std::to_string(s + 1), values[s]);
    sum += values[s];
  }
  out.emplace_back("Delta", sum / static_cast<double>(values.size()));
  return out;
}

Scenario scenario_from_catalog(int id) {
  if (id < 1 || id > 24) throw std::invalid_argument("scenario id must lie in 1..24");
  Scenario sc;
  sc.id = id;
  const int block = (id - 1) / 3;  // 8 true-model blocks of 3 working structures
  sc.continuous_period = (block % 2) == 1;
  sc.exposure_dependent = block >= 4;
  sc.random_intervention = (block % 4) < 2;
  switch ((id - 1) % 3) {
    case 0: sc.working = WorkingStructure::EXCH; break;
    case 1: sc.working = WorkingStructure::NE; break;
    default: sc.working = WorkingStructure::DTD; break;
  }
  if (sc.exposure_dependent) sc.delta_s = default_exposure_effects();
  return sc;
}

namespace {

PatternKind pattern_from_name(const std::string& name) {
  if (name == "uniform") return PatternKind::Uniform;
  if (name == "normal") return PatternKind::NormalRescaled;
  if (name == "exponential") return PatternKind::ExponentialRescaled;
  if (name == "cluster_mixed") return PatternKind::ClusterMixed;
  if (name == "cluster_period_mixed") return PatternKind::ClusterPeriodMixed;
  throw std::invalid_argument("unknown recruitment pattern: " + name);
}

WorkingStructure structure_from_name(const std::string& name) {
  if (name == "exch") return WorkingStructure::EXCH;
  if (name == "ne") return WorkingStructure::NE;
  if (name == "dtd") return WorkingStructure::DTD;
  throw std::invalid_argument("unknown working structure: " + name);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(trim(item)));
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected a boolean, got: " + s);
}

}  // namespace

Scenario scenario_from_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line is not key = value: " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  Scenario sc;
  if (auto it = kv.find("scenario"); it != kv.end()) {
    sc = scenario_from_catalog(std::stoi(it->second));
    kv.erase(it);
  }

  int size_control = -1;
  std::string size_treated, size_exposure;
  for (const auto& [key, value] : kv) {
    if (key == "I") sc.n_clusters = std::stoi(value);
    else if (key == "J") sc.n_periods = std::stoi(value);
    else if (key == "K") sc.plan.sizes = SizeRule::balanced(std::stoi(value));
    else if (key == "K_control") size_control = std::stoi(value);
    else if (key == "K_treated") size_treated = value;
    else if (key == "K_exposure") size_exposure = value;
    else if (key == "rho0") sc.params.rho0 = std::stod(value);
    else if (key == "rho1") sc.params.rho1 = std::stod(value);
    else if (key == "CAC") sc.params.cac = std::stod(value);
    else if (key == "sigma_eps_sq") sc.params.sigma_eps_sq = std::stod(value);
    else if (key == "delta") sc.delta = std::stod(value);
    else if (key == "delta_s") {
      sc.delta_s = parse_list(value);
      sc.exposure_dependent = true;
    } else if (key == "period_effect") {
      if (value == "continuous") sc.continuous_period = true;
      else if (value == "discrete") sc.continuous_period = false;
      else throw std::invalid_argument("period_effect must be continuous or discrete");
    } else if (key == "random_intervention") sc.random_intervention = parse_bool(value);
    else if (key == "pattern")
      sc.plan.control_pattern.kind = sc.plan.treated_pattern.kind =
          pattern_from_name(value);
    else if (key == "pattern_control") sc.plan.control_pattern.kind = pattern_from_name(value);
    else if (key == "pattern_treated") sc.plan.treated_pattern.kind = pattern_from_name(value);
    else if (key == "exp_rate")
      sc.plan.control_pattern.rate = sc.plan.treated_pattern.rate = std::stod(value);
    else if (key == "working") sc.working = structure_from_name(value);
    else if (key == "effect") {
      if (value == "constant") sc.exposure_dependent = false;
      else if (value == "exposure") sc.exposure_dependent = true;
      else throw std::invalid_argument("effect must be constant or exposure");
    } else throw std::invalid_argument("unknown config key: " + key);
  }
  if (size_control >= 0) {
    if (!size_exposure.empty()) {
      std::map<int, int> by_exposure;
      const std::vector<double> values = parse_list(size_exposure);
      for (std::size_t s = 0; s < values.size(); ++s)
        by_exposure[static_cast<int>(s) + 1] = static_cast<int>(values[s]);
      sc.plan.sizes = SizeRule::by_exposure(size_control, std::move(by_exposure));
    } else if (!size_treated.empty()) {
      sc.plan.sizes = SizeRule::by_condition(size_control, std::stoi(size_treated));
    } else {
      throw std::invalid_argument("K_control needs K_treated or K_exposure");
    }
  } else if (!size_treated.empty() || !size_exposure.empty()) {
    throw std::invalid_argument("K_treated/K_exposure need K_control");
  }
  return sc;
}

Scenario scenario_from_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return scenario_from_config_text(buffer.str());
}

namespace {

std::vector<ReplicateRow> run_replicate(const Scenario& scenario,
                                        const TrialDesign& design,
                                        const GenerativeSpec& gen, int replicate,
                                        std::uint64_t base_seed) {
  const std::uint64_t seed = derive_stream(base_seed, stream_tag::replicate,
                                           static_cast<std::uint64_t>(replicate));
  const Dataset data = simulate_dataset(design, scenario.plan, gen, seed);
  const FitResult fit = fit_ml(data, scenario.working_model());

  const Eigen::MatrixXd v_model = fit.vcov_model;
  const Eigen::MatrixXd v_cr0 = sandwich_cr0(fit);
  const Eigen::MatrixXd v_md = sandwich_md(fit);

  std::vector<ReplicateRow> rows;
  for (const auto& [name, truth] : scenario.estimands()) {
    for (VcovKind kind : {VcovKind::ModelBased, VcovKind::CR0, VcovKind::MD}) {
      const Eigen::MatrixXd& vcov = kind == VcovKind::ModelBased ? v_model
                                    : kind == VcovKind::CR0      ? v_cr0
                                                                 : v_md;
      EffectInference inf;
      if (name == "Delta") {
        inf = average_effect(fit, vcov);
      } else if (name == "delta") {
        inf = infer_constant_effect(fit, vcov);
      } else {
        const int s = std::stoi(name.substr(std::string("delta_s").size()));
        inf = infer_exposure_effect(fit, vcov, s);
      }
      ReplicateRow row;
      row.replicate = replicate;
      row.estimand = name;
      row.vcov = kind;
      row.estimate = inf.estimate;
      row.se = inf.se;
      row.ci_low = inf.ci_low;
      row.ci_high = inf.ci_high;
      row.truth = truth;
      row.covered = inf.ci_low < truth && truth < inf.ci_high;
      row.converged = fit.converged;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace

ScenarioResult run_scenario(const Scenario& scenario, int n_reps,
                            std::uint64_t base_seed, int n_threads) {
  if (n_reps < 1) throw std::invalid_argument("need at least one replicate");
  const TrialDesign design = scenario.design();
  const GenerativeSpec gen = scenario.generative();

  std::vector<std::vector<ReplicateRow>> slots(static_cast<std::size_t>(n_reps));
  std::vector<std::string> errors(static_cast<std::size_t>(n_reps));

#ifdef _OPENMP
  const int threads = n_threads > 0 ? n_threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
  for (int p = 0; p < n_reps; ++p) {
    try {
      slots[p] = run_replicate(scenario, design, gen, p, base_seed);
    } catch (const std::exception& e) {
      errors[p] = e.what();
    }
  }

  ScenarioResult result;
  result.scenario = scenario;
  result.n_reps = n_reps;
  for (int p = 0; p < n_reps; ++p) {
    if (!errors[p].empty()) {
      result.failures.emplace_back(p, errors[p]);
      continue;
    }
    result.rows.insert(result.rows.end(), slots[p].begin(), slots[p].end());
  }
  if (static_cast<double>(result.failures.size()) > 0.05 * n_reps) {
    std::string msg = "replicate failure rate above 5%:";
    for (std::size_t k = 0; k < std::min<std::size_t>(result.failures.size(), 5); ++k)
      msg += "\n  replicate " + std::to_string(result.failures[k].first) + ": " +
             result.failures[k].second;
    throw std::runtime_error(msg);
  }
  return result;
}

MetricsSummary summarize_rows(const std::vector<ReplicateRow>& rows, double truth) {
  if (rows.empty()) throw std::invalid_argument("cannot summarize an empty row set");
  MetricsSummary m;
  m.estimand = rows.front().estimand;
  m.vcov = rows.front().vcov;
  m.truth = truth;
  m.n_reps = static_cast<int>(rows.size());

  double sum = 0.0, sum_se = 0.0;
  int covered = 0, used = 0;
  for (const ReplicateRow& r : rows) {
    if (!r.converged) continue;
    ++used;
    sum += r.estimate;
    sum_se += r.se;
    covered += r.covered ? 1 : 0;
  }
  m.n_converged = used;
  if (used == 0) return m;
  const double mean = sum / used;
  double ss = 0.0;
  for (const ReplicateRow& r : rows)
    if (r.converged) ss += (r.estimate - mean) * (r.estimate - mean);
  m.bias = mean - truth;
  m.empirical_sd = std::sqrt(ss / used);
  m.avg_se = sum_se / used;
  m.coverage = static_cast<double>(covered) / used;
  m.coverage_mc_se = std::sqrt(m.coverage * (1.0 - m.coverage) / used);
  return m;
}

std::vector<MetricsSummary> summarize(const ScenarioResult& result) {
  std::vector<MetricsSummary> out;
  for (const auto& [name, truth] : result.scenario.estimands()) {
    for (VcovKind kind : {VcovKind::ModelBased, VcovKind::CR0, VcovKind::MD}) {
      std::vector<ReplicateRow> rows;
      for (const ReplicateRow& r : result.rows)
        if (r.estimand == name && r.vcov == kind) rows.push_back(r);
      if (!rows.empty()) out.push_back(summarize_rows(rows, truth));
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

void write_replicates_csv(const ScenarioResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "replicate,estimand,vcov,estimate,se,ci_low,ci_high,covered,truth,converged\n";
  for (const ReplicateRow& r : result.rows)
    out << r.replicate << ',' << r.estimand << ',' << vcov_name(r.vcov) << ','
        << fmt(r.estimate) << ',' << fmt(r.se) << ',' << fmt(r.ci_low) << ','
        << fmt(r.ci_high) << ',' << (r.covered ? 1 : 0) << ',' << fmt(r.truth) << ','
        << (r.converged ? 1 : 0) << '\n';
}

ScenarioResult read_replicates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty replicates file: " + path);

  ScenarioResult result;
  std::map<std::string, double> truths;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    ReplicateRow r;
    std::getline(ss, field, ','); r.replicate = std::stoi(field);
    std::getline(ss, r.estimand, ',');
    std::getline(ss, field, ',');
    r.vcov = field == "model" ? VcovKind::ModelBased
             : field == "cr0" ? VcovKind::CR0
                              : VcovKind::MD;
    std::getline(ss, field, ','); r.estimate = std::stod(field);
    std::getline(ss, field, ','); r.se = std::stod(field);
    std::getline(ss, field, ','); r.ci_low = std::stod(field);
    std::getline(ss, field, ','); r.ci_high = std::stod(field);
    std::getline(ss, field, ','); r.covered = field == "1";
    std::getline(ss, field, ','); r.truth = std::stod(field);
    std::getline(ss, field, ','); r.converged = field == "1";
    result.n_reps = std::max(result.n_reps, r.replicate + 1);
    truths[r.estimand] = r.truth;
    result.rows.push_back(std::move(r));
  }
  // Reconstruct just enough of the scenario for summarize():
  Scenario sc;
  if (truths.count("Delta")) {
    sc.exposure_dependent = true;
    sc.delta_s.clear();
    for (int s = 1; truths.count("delta_s" + std::to_string(s)); ++s)
      sc.delta_s.push_back(truths["delta_s" + std::to_string(s)]);
    sc.n_periods = static_cast<int>(sc.delta_s.size()) + 1;
  } else {
    sc.exposure_dependent = false;
    sc.delta = truths.count("delta") ? truths["delta"] : 0.0;
  }
  result.scenario = sc;
  return result;
}

void write_summary_csv(const std::vector<MetricsSummary>& summary,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "estimand,vcov,n_reps,n_converged,truth,bias,empirical_sd,avg_se,"
         "coverage,coverage_mc_se\n";
  for (const MetricsSummary& m : summary)
    out << m.estimand << ',' << vcov_name(m.vcov) << ',' << m.n_reps << ','
        << m.n_converged << ',' << fmt(m.truth) << ',' << fmt(m.bias) << ','
        << fmt(m.empirical_sd) << ',' << fmt(m.avg_se) << ',' << fmt(m.coverage)
        << ',' << fmt(m.coverage_mc_se) << '\n';
}

std::string format_summary_table(const std::vector<MetricsSummary>& summary) {
  // Wide layout matching the reporting convention: one row per estimand,
  // (avg SE, coverage %) per variance estimator.
  std::map<std::string, std::map<VcovKind, MetricsSummary>> grid;
  std::vector<std::string> order;
  for (const MetricsSummary& m : summary) {
    if (!grid.count(m.estimand)) order.push_back(m.estimand);
    grid[m.estimand][m.vcov] = m;
  }
  std::ostringstream out;
  out << "| Estimand | n | Bias | sd | V.Naive | C.Naive (%) | V.RVE | C.RVE (%) "
         "| V.RVE.MD | C.RVE.MD (%) | MC SE (%) |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const std::string& name : order) {
    const auto& per_kind = grid[name];
    const MetricsSummary& base = per_kind.begin()->second;
    out << "| " << name << " | " << base.n_converged << " | " << fmt4(base.bias)
        << " | " << fmt4(base.empirical_sd) << " | ";
    for (VcovKind kind : {VcovKind::ModelBased, VcovKind::CR0, VcovKind::MD}) {
      const auto it = per_kind.find(kind);
      if (it == per_kind.end()) {
        out << "- | - | ";
      } else {
        out << fmt4(it->second.avg_se) << " | " << fmt4(100.0 * it->second.coverage)
            << " | ";
      }
    }
    const auto md = per_kind.find(VcovKind::MD);
    out << fmt4(100.0 * (md != per_kind.end() ? md->second.coverage_mc_se
                                              : base.coverage_mc_se))
        << " |\n";
  }
  return out.str();
}

void write_summary_markdown(const std::vector<MetricsSummary>& summary,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << format_summary_table(summary);
}

}  // namespace swsim
