#pragma once

// Nelder-Mead maximizer on a fixed-dimension parameter vector.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace coa {

template <std::size_t N>
struct SimplexResult {
  std::array<double, N> x{};
  double value = 0.0;
  int evaluations = 0;
};

struct SimplexOptions {
  double initial_step = 0.1;
  double x_tol = 1e-9;     // stop when every vertex is within x_tol of the best one
  double f_tol = 1e-15;    // and the value spread is below f_tol
  int max_evaluations = 4000;
};

template <std::size_t N, class F>
SimplexResult<N> maximize_simplex(F&& f, const std::array<double, N>& start,
                                  const SimplexOptions& opt = {}) {
  using Point = std::array<double, N>;
  std::array<Point, N + 1> pts;
  std::array<double, N + 1> val;
  int evals = 0;
  auto eval = [&](const Point& p) {
    ++evals;
    return f(p);
  };
  pts[0] = start;
  val[0] = eval(start);
  for (std::size_t i = 0; i < N; ++i) {
    pts[i + 1] = start;
    pts[i + 1][i] += opt.initial_step;
    val[i + 1] = eval(pts[i + 1]);
  }

  std::array<std::size_t, N + 1> order;
  auto sort_vertices = [&] {
    for (std::size_t i = 0; i <= N; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] > val[b]; });
    std::array<Point, N + 1> p2;
    std::array<double, N + 1> v2;
    for (std::size_t i = 0; i <= N; ++i) {
      p2[i] = pts[order[i]];
      v2[i] = val[order[i]];
    }
    pts = p2;
    val = v2;
  };

  auto along = [](const Point& c, const Point& w, double t) {
    Point r;
    for (std::size_t i = 0; i < N; ++i) r[i] = c[i] + t * (w[i] - c[i]);
    return r;
  };

  while (evals < opt.max_evaluations) {
    sort_vertices();
    double spread = 0.0;
    for (std::size_t k = 1; k <= N; ++k)
      for (std::size_t i = 0; i < N; ++i) spread = std::max(spread, std::abs(pts[k][i] - pts[0][i]));
    if (spread < opt.x_tol && val[0] - val[N] <= opt.f_tol) break;
    if (spread < opt.x_tol * 1e-3) break;

    Point centroid{};
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t i = 0; i < N; ++i) centroid[i] += pts[k][i] / static_cast<double>(N);

    const Point refl = along(centroid, pts[N], -1.0);
    const double fr = eval(refl);
    if (fr > val[0]) {
      const Point exp = along(centroid, pts[N], -2.0);
      const double fe = eval(exp);
      if (fe > fr) {
        pts[N] = exp;
        val[N] = fe;
      } else {
        pts[N] = refl;
        val[N] = fr;
      }
      continue;
    }
    if (fr > val[N - 1]) {
      pts[N] = refl;
      val[N] = fr;
      continue;
    }
    const bool outside = fr > val[N];
    const Point con = outside ? along(centroid, pts[N], -0.5) : along(centroid, pts[N], 0.5);
    const double fc = eval(con);
    if (fc > std::max(fr, val[N]) || (!outside && fc > val[N])) {
      pts[N] = con;
      val[N] = fc;
      continue;
    }
    for (std::size_t k = 1; k <= N; ++k) {
      pts[k] = along(pts[0], pts[k], 0.5);
      val[k] = eval(pts[k]);
    }
  }
  sort_vertices();
  return {pts[0], val[0], evals};
}

}  // namespace coa
