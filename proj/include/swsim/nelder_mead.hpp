#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace swsim {

struct NelderMeadOptions {
  int max_iter = 500;
  double f_rtol = 1e-9;    // relative spread of function values over the simplex
  double x_tol = 1e-7;     // max vertex distance from the best, sup norm
  double init_step = 0.7;  // initial simplex edge length per coordinate
  bool record_trace = false;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = std::numeric_limits<double>::infinity();
  int n_iter = 0;
  bool converged = false;
  std::vector<double> trace;  // best value after each iteration
};

// Downhill simplex minimizer with standard reflection/expansion/contraction
// coefficients. Objective values that are NaN are treated as +inf so the
// simplex backs away from invalid regions.
template <typename F>
NelderMeadResult nelder_mead(F&& objective, const Eigen::VectorXd& start,
                             const NelderMeadOptions& opt = {}) {
  const int dim = static_cast<int>(start.size());
  const auto eval = [&](const Eigen::VectorXd& x) {
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Eigen::VectorXd> vertex(dim + 1, start);
  std::vector<double> value(dim + 1);
  for (int k = 1; k <= dim; ++k) vertex[k][k - 1] += opt.init_step;
  for (int k = 0; k <= dim; ++k) value[k] = eval(vertex[k]);

  std::vector<int> order(dim + 1);
  NelderMeadResult result;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return value[a] < value[b]; });
    const int best = order.front();
    const int worst = order.back();
    const int second_worst = order[dim > 0 ? dim - 1 : 0];

    if (opt.record_trace) result.trace.push_back(value[best]);

    const double spread = value[worst] - value[best];
    double max_dist = 0.0;
    for (int k = 0; k <= dim; ++k)
      max_dist = std::max(max_dist,
                          (vertex[k] - vertex[best]).cwiseAbs().maxCoeff());
    if (spread <= opt.f_rtol * (std::abs(value[best]) + 1.0) &&
        max_dist <= opt.x_tol) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k <= dim; ++k)
      if (k != worst) centroid += vertex[k];
    centroid /= dim;

    const Eigen::VectorXd reflected = centroid + (centroid - vertex[worst]);
    const double f_reflected = eval(reflected);
    if (f_reflected < value[order[0]]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - vertex[worst]);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        vertex[worst] = expanded;
        value[worst] = f_expanded;
      } else {
        vertex[worst] = reflected;
        value[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < value[second_worst]) {
      vertex[worst] = reflected;
      value[worst] = f_reflected;
      continue;
    }
    const bool outside = f_reflected < value[worst];
    const Eigen::VectorXd contracted =
        outside ? centroid + 0.5 * (reflected - centroid)
                : centroid + 0.5 * (vertex[worst] - centroid);
    const double f_contracted = eval(contracted);
    if (f_contracted < std::min(f_reflected, value[worst])) {
      vertex[worst] = contracted;
      value[worst] = f_contracted;
      continue;
    }
    // Shrink toward the best vertex.
    for (int k = 0; k <= dim; ++k) {
      if (k == best) continue;
      vertex[k] = vertex[best] + 0.5 * (vertex[k] - vertex[best]);
      value[k] = eval(vertex[k]);
    }
  }

  const auto best_it = std::min_element(value.begin(), value.end());
  result.x = vertex[static_cast<std::size_t>(best_it - value.begin())];
  result.f = *best_it;
  result.n_iter = iter;
  if (opt.record_trace) result.trace.push_back(result.f);
  return result;
}

}  // namespace swsim
