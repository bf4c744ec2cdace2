#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughflow/paths.hpp"

namespace roughflow {

/// Covariance R(s, t) of a centered scalar Gaussian process.
struct CovarianceKernel {
  std::function<double(double, double)> eval;
  std::string name;
  std::map<std::string, double> params;

  double operator()(double s, double t) const { return eval(s, t); }
};

/// R(s,t) = 1/2 (|s|^{2H} + |t|^{2H} - |t-s|^{2H}), two-sided fBm with B_0 = 0.
CovarianceKernel fbm_covariance(double hurst);

/// Two-sided Brownian motion; equals fbm_covariance(0.5).
CovarianceKernel bm_covariance();

/// splitmix64 finalizer applied to seed ^ mix(stream): independent replications
/// and components use derive_seed(seed, counter) with counters 0, 1, 2, ...
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct GaussianSampleConfig {
  enum class Method { cholesky };
  EquidistantGrid grid;  ///< must contain 0
  int dim = 1;
  std::uint64_t seed = 0;
  Method method = Method::cholesky;
};

/// Factorizes the grid covariance once and draws exact-in-law samples.
///
/// The node at time 0 is excluded from the factorization (its variance is 0)
/// and pinned to 0 in every sample. If the Cholesky factorization fails, the
/// symmetric eigendecomposition is used provided the smallest eigenvalue is
/// >= -1e-8; otherwise a NumericalError naming that eigenvalue is thrown.
class GaussianSampler {
 public:
  GaussianSampler(const CovarianceKernel& kernel, const EquidistantGrid& grid);

  /// Component a of the sample uses the normal stream derive_seed(seed, a).
  PiecewiseLinearPath sample(std::uint64_t seed, int dim) const;

  const std::vector<double>& times() const noexcept { return times_; }
  /// Largest |C - C^T| entry before symmetrization.
  double asymmetry() const noexcept { return asymmetry_; }

 private:
  std::vector<double> times_;
  std::size_t zero_index_;
  Eigen::MatrixXd factor_;  // lower-triangular (or eigen) factor of the covariance without the 0 node
  double asymmetry_ = 0.0;
};

PiecewiseLinearPath sample_gaussian_path(const CovarianceKernel& kernel, const GaussianSampleConfig& config);

/// Rectangle increment R(b,d) - R(a,d) - R(b,c) + R(a,c) of [a,b]x[c,d].
double rectangle_increment(const CovarianceKernel& kernel, double a, double b, double c, double d);

struct RhoVariationResult {
  double value;     ///< lower bound of the true 2-D rho-variation
  bool exhaustive;  ///< true when every partition pair of the grid was enumerated
};

/// Two-dimensional rho-variation of the kernel on square^2, with partitions
/// drawn from the uniform grid of `grid_n` points. Exhaustive for
/// grid_n <= 10, alternating dynamic-programming ascent otherwise.
RhoVariationResult rho_variation_2d(const CovarianceKernel& kernel, Interval square, double rho, int grid_n);

/// Empirical M in V_rho(R, [s,t]^2) <= M |t-s|^{1/rho}: the largest ratio over
/// the given squares.
double rho_variation_constant(const CovarianceKernel& kernel, const std::vector<Interval>& squares, double rho,
                              int grid_n);

/// Lifts of the piecewise-linear projections of x onto D_n = {k 2^{-n}} for
/// every requested n.
std::vector<SampledRoughPath> dyadic_lift_sequence(const PiecewiseLinearPath& x, const std::vector<int>& levels,
                                                   int tensor_level, double p = 2.0);

/// Antisymmetric part of pi_2: 1/2 (X^{ij} - X^{ji}).
double levy_area(const GroupElement& g, int i, int j);

}  // namespace roughflow
