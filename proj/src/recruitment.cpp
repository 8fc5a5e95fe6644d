#include "swsim/recruitment.hpp"

#include <algorithm>
#include <stdexcept>

namespace swsim {

namespace {

// Affine map taking the realized sample min to lo and max to hi.
void rescale_min_max(std::vector<double>& values, double lo, double hi) {
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double span = *max_it - *min_it;
  if (!(span > 0.0))
    throw std::runtime_error("degenerate sample: min equals max, cannot rescale");
  const double lo_val = *min_it;
  for (double& v : values) v = lo + (hi - lo) * (v - lo_val) / span;
}

}  // namespace

std::vector<double> sample_cell_times(const RecruitmentPattern& pattern, int period,
                                      int n, Rng& rng) {
  if (!is_basic_pattern(pattern.kind))
    throw std::invalid_argument("sample_cell_times needs a basic pattern; resolve mixtures first");
  if (n < 1) throw std::invalid_argument("cell needs at least one individual");
  const double lo = static_cast<double>(period - 1);
  const double hi = static_cast<double>(period);

  std::vector<double> times(static_cast<std::size_t>(n));
  switch (pattern.kind) {
    case PatternKind::Uniform:
      for (double& t : times) t = rng.uniform_open_closed(lo, hi);
      break;
    case PatternKind::NormalRescaled:
      if (n < 2) throw std::invalid_argument("rescaled patterns need n >= 2");
      for (double& t : times) t = rng.normal();
      rescale_min_max(times, lo, hi);
      break;
    case PatternKind::ExponentialRescaled:
      if (n < 2) throw std::invalid_argument("rescaled patterns need n >= 2");
      if (!(pattern.rate > 0.0)) throw std::invalid_argument("exponential rate must be positive");
      for (double& t : times) t = rng.exponential(pattern.rate);
      rescale_min_max(times, lo, hi);
      break;
    default:
      break;
  }
  std::sort(times.begin(), times.end());
  return times;
}

PatternAssignment assign_patterns(const TrialDesign& design, PatternKind mixture,
                                  Rng& rng) {
  if (is_basic_pattern(mixture))
    throw std::invalid_argument("assign_patterns expects a mixed pattern kind");
  static constexpr PatternKind basics[3] = {
      PatternKind::Uniform, PatternKind::NormalRescaled, PatternKind::ExponentialRescaled};

  PatternAssignment out;
  out.n_clusters = design.n_clusters;
  out.n_periods = design.n_periods;
  out.cell.resize(static_cast<std::size_t>(design.n_clusters) * design.n_periods);
  for (int i = 0; i < design.n_clusters; ++i) {
    if (mixture == PatternKind::ClusterMixed) {
      const PatternKind pick = basics[rng.uniform_index(3)];
      for (int j = 1; j <= design.n_periods; ++j)
        out.cell[static_cast<std::size_t>(i) * design.n_periods + (j - 1)] = pick;
    } else {
      for (int j = 1; j <= design.n_periods; ++j)
        out.cell[static_cast<std::size_t>(i) * design.n_periods + (j - 1)] =
            basics[rng.uniform_index(3)];
    }
  }
  return out;
}

Eigen::MatrixXi resolve_sizes(const TrialDesign& design, const SizeRule& rule) {
  if (rule.control_size < 2)
    throw std::invalid_argument("control cell size must be >= 2");
  Eigen::MatrixXi sizes(design.n_clusters, design.n_periods);
  for (int i = 0; i < design.n_clusters; ++i) {
    for (int j = 1; j <= design.n_periods; ++j) {
      int k;
      if (design.treatment(i, j) == 0) {
        k = rule.control_size;
      } else if (const int* constant = std::get_if<int>(&rule.treated_size)) {
        k = *constant;
      } else {
        const auto& by_exposure = std::get<std::map<int, int>>(rule.treated_size);
        const auto it = by_exposure.find(design.exposure(i, j));
        if (it == by_exposure.end())
          throw std::invalid_argument("size rule is missing exposure level " +
                                      std::to_string(design.exposure(i, j)));
        k = it->second;
      }
      if (k < 2) throw std::invalid_argument("cell sizes must be >= 2");
      sizes(i, j - 1) = k;
    }
  }
  return sizes;
}

}  // namespace swsim
