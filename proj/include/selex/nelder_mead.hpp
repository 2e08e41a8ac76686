#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace selex {

// Downhill-simplex settings. Convergence requires either the spread of
// vertex values to fall below f_tol or every vertex to sit within x_tol
// (infinity norm) of the best one.
struct SimplexOptions {
  double f_tol = 1e-8;
  double x_tol = 1e-6;
  std::size_t max_iterations = 50000;
  double initial_step = 1.0;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;  // objective value at x (maximization scale)
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Maximizes `objective` by the downhill simplex method applied to its
// negation. Fully deterministic: vertex ordering ties are broken by index,
// and no randomness enters the updates. Non-finite objective values are
// treated as -infinity (worst possible), so the simplex backs away from
// invalid regions instead of aborting.
template <class F>
SimplexResult nelder_mead_maximize(F&& objective, std::vector<double> start,
                                   const SimplexOptions& opt = {}) {
  const std::size_t n = start.size();
  if (n == 0) throw std::invalid_argument("simplex needs at least one dimension");

  std::size_t evaluations = 0;
  auto g = [&](const std::vector<double>& x) {
    ++evaluations;
    const double v = objective(x);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
  };

  std::vector<std::vector<double>> xs(n + 1, start);
  for (std::size_t i = 0; i < n; ++i) xs[i + 1][i] += opt.initial_step;
  std::vector<double> gs(n + 1);
  for (std::size_t i = 0; i <= n; ++i) gs[i] = g(xs[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);

  auto sort_order = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return gs[a] < gs[b]; });
  };

  std::size_t iter = 0;
  bool converged = false;
  for (; iter < opt.max_iterations; ++iter) {
    sort_order();
    const std::size_t best = order[0], worst = order[n];
    const std::size_t second_worst = order[n - 1];

    const double spread = gs[worst] - gs[best];
    double extent = 0.0;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t d = 0; d < n; ++d)
        extent = std::max(extent, std::abs(xs[order[i]][d] - xs[best][d]));
    if ((std::isfinite(spread) && spread <= opt.f_tol) || extent <= opt.x_tol) {
      converged = true;
      break;
    }

    for (std::size_t d = 0; d < n; ++d) {
      double s = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        if (i != worst) s += xs[i][d];
      centroid[d] = s / static_cast<double>(n);
    }

    for (std::size_t d = 0; d < n; ++d)
      xr[d] = centroid[d] + opt.reflection * (centroid[d] - xs[worst][d]);
    const double gr = g(xr);

    if (gr < gs[best]) {
      for (std::size_t d = 0; d < n; ++d)
        xe[d] = centroid[d] + opt.expansion * (xr[d] - centroid[d]);
      const double ge = g(xe);
      if (ge < gr) {
        xs[worst] = xe;
        gs[worst] = ge;
      } else {
        xs[worst] = xr;
        gs[worst] = gr;
      }
      continue;
    }
    if (gr < gs[second_worst]) {
      xs[worst] = xr;
      gs[worst] = gr;
      continue;
    }

    if (gr < gs[worst]) {
      // Outside contraction between centroid and reflected point.
      for (std::size_t d = 0; d < n; ++d)
        xc[d] = centroid[d] + opt.contraction * (xr[d] - centroid[d]);
      const double gc = g(xc);
      if (gc <= gr) {
        xs[worst] = xc;
        gs[worst] = gc;
        continue;
      }
    } else {
      // Inside contraction toward the worst vertex.
      for (std::size_t d = 0; d < n; ++d)
        xc[d] = centroid[d] - opt.contraction * (centroid[d] - xs[worst][d]);
      const double gc = g(xc);
      if (gc < gs[worst]) {
        xs[worst] = xc;
        gs[worst] = gc;
        continue;
      }
    }

    // Shrink every vertex toward the best.
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t d = 0; d < n; ++d)
        xs[i][d] = xs[best][d] + opt.shrink * (xs[i][d] - xs[best][d]);
      gs[i] = g(xs[i]);
    }
  }

  sort_order();
  SimplexResult res;
  res.x = xs[order[0]];
  res.value = -gs[order[0]];
  res.iterations = iter;
  res.evaluations = evaluations;
  res.converged = converged;
  return res;
}

}
