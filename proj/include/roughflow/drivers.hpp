#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roughflow/paths.hpp"

namespace roughflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Smooth vector field on R^m. `hessian(x)[a]` is the Hessian of component a;
/// it may be left empty for fields that never need second derivatives.
struct VectorField {
  int dim = 0;
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;
  std::function<std::vector<Mat>(const Vec&)> hessian;

  Vec operator()(const Vec& x) const { return value(x); }
};

/// Row a of the result is (H_a g)^T, so D(Df . g) = hessian_apply(f, x, g) + Df Dg.
Mat hessian_apply(const std::vector<Mat>& hessian, const Vec& g);

/// [f, g](x) = Dg(x) f(x) - Df(x) g(x). The result carries a Jacobian (which
/// needs both Hessians) but no Hessian.
VectorField lie_bracket(const VectorField& f, const VectorField& g);

VectorField linear_field(Mat a);
VectorField constant_field(Vec v);

struct VectorFieldFamily {
  std::string name;
  std::vector<VectorField> fields;
  double kappa = 1.0;
  double eta = 1.0;
  double gamma = 1.0;

  int dim() const { return fields.empty() ? 0 : fields.front().dim; }
  std::size_t size() const { return fields.size(); }
  /// Leading k fields.
  VectorFieldFamily truncated(std::size_t k) const;
  /// Multiplies every field by c.
  VectorFieldFamily scaled(double c) const;
};

/// sup over the box [-radius, radius]^m (sampled at `nodes` per axis) of
/// |sigma| + |D sigma| + |D^2 sigma|.
double sup_box_c2(const VectorField& f, double radius = 4.0, int nodes = 9);

/// Largest ratio of consecutive sup-box C^2 sizes over the second half of the
/// family; < 1 is the summability proxy. Zero for families of one field.
double tail_ratio(const VectorFieldFamily& family, double radius = 4.0, int nodes = 9);

/// sigma_i(x) = A_i x.
VectorFieldFamily linear_fields(const std::vector<Mat>& matrices);
/// m = 2: rotation, hyperbolic and swap generators (the first `count`).
VectorFieldFamily rotation_fields(int count = 3);
/// sigma_i = e_i on R^m, i < count.
VectorFieldFamily constant_fields(int dim, int count);
/// sigma_n(x) = ratio^{n-1} exp(-|x - c_n|^2 / (2 width^2)) a_n with fixed
/// centers c_n and unit directions a_n.
VectorFieldFamily bump_fields(int dim, int count, double ratio = 0.5, double width = 1.0);

using DriverField = std::function<Vec(double, double, const Vec&)>;
using DriverJacobian = std::function<Mat(double, double, const Vec&)>;
using DriverHessian = std::function<std::vector<Mat>(double, double, const Vec&)>;

/// Raw second-order data: V2_{s,t} f = sum_{jk} C^{jk}_{s,t} sigma_j . grad(sigma_k . grad f).
struct SecondOrderData {
  std::vector<VectorField> fields;
  std::function<Mat(double, double)> coefficients;
};

/// Rough driver (V, V2) with V2 = W + 1/2 V V stored through the vector field W.
struct RoughDriver {
  std::vector<double> grid;
  int state_dim = 0;
  double p = 2.0;
  double rho = 1.0;
  DriverField V;
  DriverField W;
  DriverJacobian DV;
  DriverJacobian DW;
  /// Hessians of the components of V_{s,t}; used by flow Jacobians.
  DriverHessian D2V;
  std::optional<SecondOrderData> raw;

  Interval span() const { return {grid.front(), grid.back()}; }
};

/// Driver with V == W == 0 on the given grid.
RoughDriver zero_driver(std::vector<double> grid, int state_dim, double p = 2.0, double rho = 1.0);

/// V_{s,t} = sum_i sigma_i X^i_{s,t}; W_{s,t} = 1/2 sum_{i<j} [sigma_i, sigma_j] (A^{ij} - A^{ji}),
/// A = pi_2(X_{s,t}). Rejects X whose increments fail the geometricity check (1e-8).
RoughDriver driver_from_rough_path(const VectorFieldFamily& sigma, const SampledRoughPath& x, double rho = 1.0);

/// Truncated series driver over the first `truncation` fields and the
/// components of the joint lift of (beta^1, .., beta^K). Throws ConfigError
/// when the family's tail ratio exceeds `max_tail_ratio`.
RoughDriver gaussian_driver(const VectorFieldFamily& sigma, const SampledRoughPath& joint_lift, std::size_t truncation,
                            double rho = 1.0, double max_tail_ratio = 1.0);

/// Adds `offset` to W on the single cell (s, t) == (a, b); used to probe the
/// sensitivity of the axiom checks.
RoughDriver corrupt_cell(const RoughDriver& d, double a, double b, Vec offset);

struct BoxSpec {
  double radius = 4.0;
  int nodes = 17;
};

struct DriverNormEstimate {
  double value;
  double v_part;
  double w_part;
  int sample_times;
  BoxSpec box;
};

/// max over sampled s < t of ||V_{s,t}||_{C^{2+rho}} / |t-s|^{1/p} and
/// sqrt(||W_{s,t}||_{C^{1+rho}} / |t-s|^{2/p}), spatial norms estimated on the box.
DriverNormEstimate driver_norm(const RoughDriver& d, Interval interval, int sample_times, BoxSpec box = {});

/// max_x |V_{s,t} - V_{s,u} - V_{u,t}|.
double driver_additivity_residual(const RoughDriver& d, double s, double u, double t, const std::vector<Vec>& points);

/// max over f in {x_a, x_a x_b} and x of |(V2_{s,t} - V2_{u,t} - V_{s,u} V_{u,t} - V2_{s,u}) f (x)|.
double driver_chen_residual(const RoughDriver& d, double s, double u, double t, const std::vector<Vec>& points);

/// First-order Leibniz defect of V2 - 1/2 VV on products of test functions,
/// derivatives by central differences. Uses the raw second-order data when present.
double driver_leibniz_residual(const RoughDriver& d, double s, double t, const std::vector<Vec>& points);

/// max_x of |V_{s+h,s+h+t}(omega) - V_{s,s+t}(theta_h omega)| and the same for W.
double driver_cocycle_residual(const RoughDriver& original, const RoughDriver& shifted, double h, double s, double t,
                               const std::vector<Vec>& points);

/// Deterministic test points in [-radius, radius]^m.
std::vector<Vec> probe_points(int dim, std::size_t count, std::uint64_t seed, double radius = 2.0);

}  // namespace roughflow
