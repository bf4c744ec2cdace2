#pragma once

// Reference implementations used only by tests. They avoid the library's
// algorithms: brute-force enumeration, closed forms, plain loops.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "roughflow/paths.hpp"

namespace oracle {

inline roughflow::GroupElement random_element(std::mt19937_64& rng, int d, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> lv;
  std::size_t size = 1;
  for (int k = 1; k <= n; ++k) {
    size *= static_cast<std::size_t>(d);
    std::vector<double> v(size);
    for (auto& c : v) c = u(rng);
    lv.push_back(std::move(v));
  }
  return roughflow::GroupElement(d, n, std::move(lv));
}

// Multi-index product written out with explicit index arithmetic.
inline std::vector<std::vector<double>> naive_product(const roughflow::GroupElement& g, const roughflow::GroupElement& h) {
  const int d = g.dim();
  const int n = g.level();
  auto coeff = [&](const roughflow::GroupElement& e, int k, std::size_t idx) { return k == 0 ? 1.0 : e[k][idx]; };
  std::vector<std::vector<double>> out;
  std::size_t size = 1;
  for (int k = 1; k <= n; ++k) {
    size *= static_cast<std::size_t>(d);
    std::vector<double> lv(size, 0.0);
    for (std::size_t idx = 0; idx < size; ++idx) {
      // split the multi-index into a prefix of length k - i and a suffix of length i
      std::size_t suffix_size = 1;
      for (int i = 0; i <= k; ++i) {
        const std::size_t prefix = idx / suffix_size;
        const std::size_t suffix = idx % suffix_size;
        lv[idx] += coeff(g, k - i, prefix) * coeff(h, i, suffix);
        suffix_size *= static_cast<std::size_t>(d);
      }
    }
    out.push_back(std::move(lv));
  }
  return out;
}

// Level-2 iterated integrals of a piecewise-linear path over [t0, t1] by the
// per-segment closed form sum (x^i_a - x^i_s) dx^j + 1/2 dx^i dx^j.
inline Eigen::MatrixXd level_two(const roughflow::PiecewiseLinearPath& x, double t0, double t1) {
  const int d = x.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  const Eigen::VectorXd base = x.at(t0);
  std::vector<double> pts{t0};
  for (double t : x.times())
    if (t > t0 && t < t1) pts.push_back(t);
  pts.push_back(t1);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Eigen::VectorXd xa = x.at(pts[k]) - base;
    const Eigen::VectorXd dx = x.at(pts[k + 1]) - x.at(pts[k]);
    a += xa * dx.transpose() + 0.5 * dx * dx.transpose();
  }
  return a;
}

// Exhaustive p-variation over all breakpoint subsets containing both ends.
inline double brute_force_pvar(const roughflow::PiecewiseLinearPath& x, double p) {
  const std::size_t n = x.size();
  const std::size_t inner = n - 2;
  double best = 0.0;
  for (unsigned long mask = 0; mask < (1ul << inner); ++mask) {
    std::vector<std::size_t> idx{0};
    for (std::size_t i = 0; i < inner; ++i)
      if (mask & (1ul << i)) idx.push_back(i + 1);
    idx.push_back(n - 1);
    // partitions that skip an end are dominated by the same partition with the end added
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) s += std::pow((x.value(idx[k + 1]) - x.value(idx[k])).norm(), p);
    best = std::max(best, s);
  }
  return std::pow(best, 1.0 / p);
}

inline roughflow::PiecewiseLinearPath random_path(std::mt19937_64& rng, int d, std::size_t nodes, double t0 = 0.0,
                                                  double t1 = 1.0) {
  std::normal_distribution<double> g;
  std::vector<double> t(nodes);
  for (std::size_t i = 0; i < nodes; ++i) t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(nodes - 1);
  Eigen::MatrixXd v(d, static_cast<Eigen::Index>(nodes));
  for (Eigen::Index i = 0; i < v.cols(); ++i)
    for (int a = 0; a < d; ++a) v(a, i) = i == 0 ? 0.0 : v(a, i - 1) + g(rng) / std::sqrt(static_cast<double>(nodes));
  return roughflow::PiecewiseLinearPath(std::move(t), std::move(v));
}

// Path through f sampled on n + 1 equidistant nodes of [a, b].
inline roughflow::PiecewiseLinearPath sampled(const std::function<Eigen::VectorXd(double)>& f, double a, double b,
                                              std::size_t n) {
  std::vector<double> t(n + 1);
  Eigen::MatrixXd v(f(a).size(), static_cast<Eigen::Index>(n + 1));
  for (std::size_t i = 0; i <= n; ++i) {
    t[i] = i == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
    v.col(static_cast<Eigen::Index>(i)) = f(t[i]);
  }
  return roughflow::PiecewiseLinearPath(std::move(t), std::move(v));
}

// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracle
