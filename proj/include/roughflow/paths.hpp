#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "roughflow/tensor_algebra.hpp"

namespace roughflow {

struct Interval {
  double start;
  double end;
  double length() const { return end - start; }
};

/// Relative tolerance used when matching a time against grid nodes.
inline constexpr double kTimeTolerance = 1e-12;

bool same_time(double a, double b);

/// Uniform grid start, start + spacing, ..., start + (count - 1) spacing.
struct EquidistantGrid {
  double start = 0.0;
  double spacing = 1.0;
  std::size_t count = 0;

  double at(std::size_t i) const { return start + spacing * static_cast<double>(i); }
  double end() const { return at(count - 1); }
  std::vector<double> times() const;

  /// Nodes k 2^{-n} inside [a, b].
  static EquidistantGrid dyadic(int n, double a, double b);
  /// Nodes k * spacing inside [a, b] (k integer).
  static EquidistantGrid aligned(double spacing, double a, double b);
};

/// Continuous path in R^d, linear between breakpoints.
class PiecewiseLinearPath {
 public:
  /// `values` holds one column per breakpoint.
  PiecewiseLinearPath(std::vector<double> times, Eigen::MatrixXd values);

  int dim() const noexcept { return static_cast<int>(values_.rows()); }
  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  Eigen::VectorXd value(std::size_t i) const { return values_.col(static_cast<Eigen::Index>(i)); }
  double start() const { return times_.front(); }
  double end() const { return times_.back(); }
  Interval span() const { return {start(), end()}; }

  /// Linear interpolation; throws ArgumentError outside the span.
  Eigen::VectorXd at(double t) const;

  /// Same path with an extra breakpoint at t (no-op when t already is one).
  PiecewiseLinearPath with_breakpoint(double t) const;

  std::optional<std::size_t> find_breakpoint(double t) const;

 private:
  std::vector<double> times_;
  Eigen::MatrixXd values_;
};

/// A rough path sampled on a time grid: one group element per node.
/// Increments follow Chen: x_{s,t} = x_s^{-1} (x) x_t.
class SampledRoughPath {
 public:
  SampledRoughPath(std::vector<double> times, std::vector<GroupElement> points, double p = 2.0);

  int dim() const noexcept { return points_.front().dim(); }
  int level() const noexcept { return points_.front().level(); }
  double p() const noexcept { return p_; }
  std::size_t size() const noexcept { return times_.size(); }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<GroupElement>& points() const noexcept { return points_; }
  const GroupElement& point(std::size_t i) const { return points_[i]; }
  Interval span() const { return {times_.front(), times_.back()}; }

  GroupElement increment(std::size_t i, std::size_t j) const;

  /// Value at an arbitrary time: exact at nodes, geodesic completion between
  /// nodes (x_{t_i} (x) exp(lambda log x_{t_i,t_{i+1}})). Throws outside the span.
  GroupElement at(double t) const;
  GroupElement increment(double s, double t) const;

  std::optional<std::size_t> find_node(double t) const;

  /// Level-1 component as a piecewise-linear path through the nodes.
  PiecewiseLinearPath level_one() const;

 private:
  std::vector<double> times_;
  std::vector<GroupElement> points_;
  double p_;
};

/// Probability density with compact support [-r, r] plus the composite
/// Simpson rule used to integrate against it.
class Mollifier {
 public:
  /// Validates that the Simpson mass is 1 within 1e-8.
  Mollifier(std::function<double(double)> density, double support_radius, int quadrature_intervals = 64);

  /// Smooth bump c exp(-1/(1-(u/r)^2)), c fixed so the quadrature mass is 1.
  static Mollifier bump(double support_radius, int quadrature_intervals = 64);

  double operator()(double u) const { return density_(u); }
  double support_radius() const noexcept { return radius_; }
  int quadrature_intervals() const noexcept { return intervals_; }
  double mass() const;

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  /// Simpson weight times density at each node.
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::function<double(double)> density_;
  double radius_;
  int intervals_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Canonical lift S_N(x) evaluated at every breakpoint, anchored at time 0
/// with value 1 (a node is inserted at 0 when needed). When 0 lies outside
/// the span the lift is anchored at the first breakpoint.
SampledRoughPath signature_lift(const PiecewiseLinearPath& x, int level, double p = 2.0);

/// Exact p-variation of a piecewise-linear path over `interval` (whole span by
/// default), by dynamic programming over breakpoints plus the endpoints.
double p_variation(const PiecewiseLinearPath& x, double p, std::optional<Interval> interval = std::nullopt);

/// Homogeneous p-variation distance restricted to the common grid:
/// max_k (sup_D sum |pi_k(x_{t_i,t_{i+1}} - y_{t_i,t_{i+1}})|^{p/k})^{1/p}.
/// `y` is resampled onto the grid of `x` by geodesic completion if the grids differ.
double homogeneous_pvar_distance(const SampledRoughPath& x, const SampledRoughPath& y, double p,
                                 std::optional<Interval> interval = std::nullopt);

/// Distance to the constant path 1, i.e. the homogeneous p-variation of x.
double homogeneous_pvar_norm(const SampledRoughPath& x, double p, std::optional<Interval> interval = std::nullopt);

/// sum_{m=1}^{max_m} 2^{-m} min(d_{[-m,m]}(x, y), 1), with each window clipped
/// to the common span.
double glued_pvar_distance(const SampledRoughPath& x, const SampledRoughPath& y, double p, int max_m);

/// (shift_h x)_t = x_{t+h} - x_h; a breakpoint is inserted at h if absent.
PiecewiseLinearPath shift_path(const PiecewiseLinearPath& x, double h);

struct MollifyOptions {
  /// Output node spacing; 0 uses the smallest breakpoint spacing of the input.
  double spacing = 0.0;
  /// Output range; defaults to the span shrunk by the support radius.
  std::optional<Interval> range;
};

/// X^mu_t = int (X_{t-u} - X_{-u}) mu(du), evaluated on the nodes k*spacing in
/// range and interpolated piecewise-linearly.
PiecewiseLinearPath mollify(const PiecewiseLinearPath& x, const Mollifier& mu, MollifyOptions options = {});

/// Linear interpolation of x through its values at the grid nodes.
PiecewiseLinearPath piecewise_linear_projection(const PiecewiseLinearPath& x, const EquidistantGrid& grid);
PiecewiseLinearPath piecewise_linear_projection(const std::function<Eigen::VectorXd(double)>& f,
                                                const EquidistantGrid& grid);

void to_json(nlohmann::json& j, const PiecewiseLinearPath& x);
PiecewiseLinearPath path_from_json(const nlohmann::json& j);
nlohmann::json lift_to_json(const SampledRoughPath& x);

/// Shortest-round-trip-safe number formatting (17 significant digits).
std::string format_number(double v);

/// CSV: header "t,x1,..,xd" then one row per breakpoint.
void write_csv(std::ostream& os, const PiecewiseLinearPath& x);
/// CSV: header "t,L1_1,..,L2_11,.." then one row per node with every level flattened.
void write_csv(std::ostream& os, const SampledRoughPath& x);

}  // namespace roughflow
