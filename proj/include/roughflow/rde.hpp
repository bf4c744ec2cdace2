#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <json.hpp>

#include "roughflow/drivers.hpp"

namespace roughflow {

inline constexpr double kBlowUpThreshold = 1e8;

struct FlowValue {
  Vec state;
  Mat jacobian;  ///< empty unless requested
};

/// Two-parameter flow (s, t, x) -> psi(s, t, x) with optional Jacobian in x.
class FlowMap {
 public:
  using Evaluator = std::function<FlowValue(double, double, const Vec&, bool)>;

  FlowMap(std::vector<double> nodes, int dim, Evaluator evaluator);

  const std::vector<double>& nodes() const noexcept { return nodes_; }
  int dim() const noexcept { return dim_; }
  Interval span() const { return {nodes_.front(), nodes_.back()}; }

  /// Requires span.start <= s <= t <= span.end.
  FlowValue evaluate(double s, double t, const Vec& x, bool with_jacobian = false) const;
  Vec operator()(double s, double t, const Vec& x) const { return evaluate(s, t, x).state; }

 private:
  std::vector<double> nodes_;
  int dim_;
  Evaluator evaluator_;
};

/// max_x |psi(u, t, psi(s, u, x)) - psi(s, t, x)|.
double flow_composition_residual(const FlowMap& flow, double s, double u, double t, const std::vector<Vec>& points);

struct RDEProblem {
  VectorFieldFamily sigma;
  SampledRoughPath driver;
  Vec y0;
  Interval interval;
};

struct SolveOptions {
  double step = 1e-3;
  /// Cells whose increment has homogeneous size above this are bisected.
  double split_threshold = 0.5;
  bool jacobian = true;
};

struct RDESolution {
  std::vector<double> times;
  Mat states;         ///< one column per time
  Mat jacobian;       ///< D_{y0} y_T
  FlowMap flow;
};

/// Second-order increment scheme y + sum_i sigma_i X^i + sum_{ij} (D sigma_j sigma_i) X^{ij}
/// on cells of size `step`, with the Jacobian propagated through the
/// derivative of the same update.
RDESolution solve_rde(const RDEProblem& problem, SolveOptions options = {});

/// Flow of the driver: x + V + W + 1/2 DV V per cell. Throws ConfigError when
/// rho <= p / 3.
FlowMap solve_driver_flow(const RoughDriver& driver, Interval interval, SolveOptions options = {});

struct DriftSpec {
  std::function<Vec(const Vec&)> b;
  std::optional<std::array<double, 4>> bounds;  ///< analytic C1..C4 when known
};

struct GrowthConstants {
  double radius;
  double c1, c2, c3, c4;
};

struct GrowthReport {
  GrowthConstants at_r;
  GrowthConstants at_2r;
  double growth_limit;
  bool pass;
};

/// Empirical growth constants on B(0, R) and B(0, 2R); passes when all are
/// finite and C1, C2 grow by at most `growth_limit` when R doubles.
GrowthReport drift_growth_check(const DriftSpec& drift, int dim, double radius, std::size_t samples,
                                std::uint64_t seed = 0, double growth_limit = 2.0);

struct DriftOptions {
  SolveOptions solve;
  /// Sub-interval budget: ||X||^p_{p-var} + length <= delta.
  double delta = 0.1;
  double p = 2.2;
  int ode_substeps = 16;
};

/// Semiflow of dz = b(z) dt + sigma(z) dX by the flow transformation
/// phi(s, t, x) = psi(s, t, y_t) with y' = J(s, u, y)^{-1} b(psi(s, u, y)).
/// The Jacobian of phi is by central differences.
FlowMap drift_transform_solve(const RDEProblem& problem, const DriftSpec& drift, DriftOptions options = {});

/// Sub-interval boundaries chosen greedily from s over the cell grid
/// origin + k step (exposed for diagnostics).
std::vector<double> drift_subintervals(const SampledRoughPath& x, double origin, double s, double t, double step,
                                       double p, double delta);

/// Increment scheme on the time-augmented path (t, x) with fields (b, sigma);
/// x must be the canonical lift of its level-one path. Returns y_T.
Vec joint_scheme_solve(const RDEProblem& problem, const DriftSpec& drift, double step);

/// Plain drift-Euler: increment scheme plus b(y) dt per cell. Returns y_T.
Vec joint_euler_solve(const RDEProblem& problem, const DriftSpec& drift, double step);

struct RdsCocycleResidual {
  double two_parameter;
  double one_parameter;
};

/// max_x |phi(s+h, t+h, omega, x) - phi(s, t, theta_h omega, x)| and
/// max_x |phi(0, h+t, omega, x) - phi(0, t, theta_h omega, phi(0, h, omega, x))|.
RdsCocycleResidual rds_cocycle_residual(const FlowMap& phi_omega, const FlowMap& phi_shifted, double h, double s,
                                        double t, const std::vector<Vec>& points);

struct LyapunovEstimate {
  double value;
  double standard_error;
  std::size_t samples;
};

/// Mean over flows of (1/T) log of the growth of the leading direction, with
/// QR renormalization every `renormalize_every` time units from 0.
LyapunovEstimate top_lyapunov_estimate(const std::vector<FlowMap>& flows, const Vec& x0, double horizon,
                                       double renormalize_every = 1.0);

nlohmann::json to_json(const GrowthReport& report);

}  // namespace roughflow
