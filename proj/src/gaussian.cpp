#include "roughflow/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "roughflow/errors.hpp"

namespace roughflow {

CovarianceKernel fbm_covariance(double hurst) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw ArgumentError("fbm_covariance: Hurst parameter must lie in (0, 1)");
  const double two_h = 2.0 * hurst;
  return CovarianceKernel{
      [two_h](double s, double t) {
        return 0.5 * (std::pow(std::abs(s), two_h) + std::pow(std::abs(t), two_h) - std::pow(std::abs(t - s), two_h));
      },
      "fbm",
      {{"hurst", hurst}}};
}

CovarianceKernel bm_covariance() {
  // Two-sided: R(s,t) = min(|s|,|t|) when s,t share a sign, 0 otherwise.
  return CovarianceKernel{[](double s, double t) {
                            if (s * t <= 0.0) return 0.0;
                            return std::min(std::abs(s), std::abs(t));
                          },
                          "bm",
                          {}};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(seed ^ mix(stream));
}

GaussianSampler::GaussianSampler(const CovarianceKernel& kernel, const EquidistantGrid& grid) : times_(grid.times()) {
  if (times_.size() < 2) throw ArgumentError("GaussianSampler: grid needs at least 2 nodes");
  auto zero = std::find_if(times_.begin(), times_.end(), [](double t) { return same_time(t, 0.0); });
  if (zero == times_.end()) throw ArgumentError("GaussianSampler: grid must contain 0");
  *zero = 0.0;
  zero_index_ = static_cast<std::size_t>(zero - times_.begin());

  std::vector<double> active;
  for (std::size_t i = 0; i < times_.size(); ++i)
    if (i != zero_index_) active.push_back(times_[i]);
  const auto n = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      cov(i, j) = kernel(active[static_cast<std::size_t>(i)], active[static_cast<std::size_t>(j)]);
  asymmetry_ = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  cov = 0.5 * (cov + cov.transpose());

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const double smallest = eig.eigenvalues().minCoeff();
  if (smallest < -1e-8)
    throw NumericalError("GaussianSampler: covariance of kernel '" + kernel.name +
                         "' is not positive semidefinite, smallest eigenvalue " + format_number(smallest));
  factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

PiecewiseLinearPath GaussianSampler::sample(std::uint64_t seed, int dim) const {
  if (dim < 1) throw ArgumentError("GaussianSampler: dim must be positive");
  const Eigen::Index n = factor_.rows();
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(times_.size()));
  Eigen::VectorXd z(n);
  for (int a = 0; a < dim; ++a) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(a)));
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    const Eigen::VectorXd y = factor_ * z;
    Eigen::Index src = 0;
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (i == zero_index_) continue;
      values(a, static_cast<Eigen::Index>(i)) = y(src++);
    }
  }
  return PiecewiseLinearPath(times_, std::move(values));
}

PiecewiseLinearPath sample_gaussian_path(const CovarianceKernel& kernel, const GaussianSampleConfig& config) {
  return GaussianSampler(kernel, config.grid).sample(config.seed, config.dim);
}

double rectangle_increment(const CovarianceKernel& kernel, double a, double b, double c, double d) {
  return kernel(b, d) - kernel(a, d) - kernel(b, c) + kernel(a, c);
}

namespace {

std::vector<int> members(unsigned mask, int n) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (mask & (1u << i)) out.push_back(i);
  return out;
}

}  // namespace

RhoVariationResult rho_variation_2d(const CovarianceKernel& kernel, Interval square, double rho, int grid_n) {
  if (!(rho >= 1.0)) throw ArgumentError("rho_variation_2d: rho must be >= 1");
  if (grid_n < 2) throw ArgumentError("rho_variation_2d: grid_n must be >= 2");
  if (grid_n > 64) throw ArgumentError("rho_variation_2d: cost guard exceeded, grid_n must be <= 64");
  if (!(square.end > square.start)) throw ArgumentError("rho_variation_2d: empty square");
  const int n = grid_n;
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = square.start + square.length() * i / (n - 1);
  g.back() = square.end;

  auto cell = [&](int a, int b, int c, int e) {
    return std::pow(std::abs(rectangle_increment(kernel, g[static_cast<std::size_t>(a)], g[static_cast<std::size_t>(b)],
                                                 g[static_cast<std::size_t>(c)], g[static_cast<std::size_t>(e)])),
                    rho);
  };

  if (n <= 10) {
    const auto nn = static_cast<std::size_t>(n);
    std::vector<double> table(nn * nn * nn * nn, 0.0);
    auto idx = [nn](int a, int b, int c, int e) {
      return ((static_cast<std::size_t>(a) * nn + static_cast<std::size_t>(b)) * nn + static_cast<std::size_t>(c)) * nn +
             static_cast<std::size_t>(e);
    };
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int e = c + 1; e < n; ++e) table[idx(a, b, c, e)] = cell(a, b, c, e);
    std::vector<std::vector<int>> parts;
    for (unsigned mask = 0; mask < (1u << n); ++mask)
      if (__builtin_popcount(mask) >= 2) parts.push_back(members(mask, n));
    double best = 0.0;
    for (const auto& d1 : parts)
      for (const auto& d2 : parts) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < d1.size(); ++i)
          for (std::size_t j = 0; j + 1 < d2.size(); ++j) s += table[idx(d1[i], d1[i + 1], d2[j], d2[j + 1])];
        best = std::max(best, s);
      }
    return {std::pow(best, 1.0 / rho), true};
  }

  // Alternating ascent: optimize one partition by DP with the other fixed.
  std::vector<int> d1(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) d1[static_cast<std::size_t>(i)] = i;
  std::vector<int> d2 = d1;
  auto total = [&](const std::vector<int>& p1, const std::vector<int>& p2) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < p1.size(); ++i)
      for (std::size_t j = 0; j + 1 < p2.size(); ++j) s += cell(p1[i], p1[i + 1], p2[j], p2[j + 1]);
    return s;
  };
  auto optimize = [&](const std::vector<int>& fixed, bool fixed_is_second) {
    std::vector<double> best(static_cast<std::size_t>(n), 0.0);
    std::vector<int> prev(static_cast<std::size_t>(n), -1);
    for (int b = 1; b < n; ++b)
      for (int a = 0; a < b; ++a) {
        double c = 0.0;
        for (std::size_t j = 0; j + 1 < fixed.size(); ++j)
          c += fixed_is_second ? cell(a, b, fixed[j], fixed[j + 1]) : cell(fixed[j], fixed[j + 1], a, b);
        const double v = best[static_cast<std::size_t>(a)] + c;
        if (v > best[static_cast<std::size_t>(b)]) {
          best[static_cast<std::size_t>(b)] = v;
          prev[static_cast<std::size_t>(b)] = a;
        }
      }
    int end = static_cast<int>(std::max_element(best.begin(), best.end()) - best.begin());
    std::vector<int> part;
    for (int v = end; v >= 0; v = prev[static_cast<std::size_t>(v)]) part.push_back(v);
    std::reverse(part.begin(), part.end());
    if (part.size() < 2) part = {0, n - 1};
    return part;
  };
  double current = total(d1, d2);
  for (int iter = 0; iter < 50; ++iter) {
    auto n1 = optimize(d2, true);
    auto n2 = optimize(n1, false);
    const double next = total(n1, n2);
    if (!(next > current * (1.0 + 1e-14))) break;
    d1 = std::move(n1);
    d2 = std::move(n2);
    current = next;
  }
  return {std::pow(current, 1.0 / rho), false};
}

double rho_variation_constant(const CovarianceKernel& kernel, const std::vector<Interval>& squares, double rho,
                              int grid_n) {
  double m = 0.0;
  for (const Interval& sq : squares) {
    if (!(sq.length() > 0.0)) throw ArgumentError("rho_variation_constant: empty square");
    m = std::max(m, rho_variation_2d(kernel, sq, rho, grid_n).value / std::pow(sq.length(), 1.0 / rho));
  }
  return m;
}

std::vector<SampledRoughPath> dyadic_lift_sequence(const PiecewiseLinearPath& x, const std::vector<int>& levels,
                                                   int tensor_level, double p) {
  double coarsest_gap = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) coarsest_gap = std::max(coarsest_gap, x.times()[i] - x.times()[i - 1]);
  std::vector<SampledRoughPath> out;
  out.reserve(levels.size());
  for (int n : levels) {
    if (coarsest_gap > std::ldexp(1.0, -n) * (1.0 + 1e-9))
      throw ArgumentError("dyadic_lift_sequence: requested level " + std::to_string(n) + " is finer than the data");
    const EquidistantGrid grid = EquidistantGrid::dyadic(n, x.start(), x.end());
    out.push_back(signature_lift(piecewise_linear_projection(x, grid), tensor_level, p));
  }
  return out;
}

double levy_area(const GroupElement& g, int i, int j) {
  if (g.level() < 2) throw ArgumentError("levy_area: level must be at least 2");
  return 0.5 * (g.at2(i, j) - g.at2(j, i));
}

}  // namespace roughflow
