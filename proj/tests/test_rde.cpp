#include <doctest.h>

#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "oracles.hpp"
#include "roughflow/cocycle.hpp"
#include "roughflow/errors.hpp"
#include "roughflow/gaussian.hpp"
#include "roughflow/rde.hpp"

using namespace roughflow;

namespace {

const auto kSmooth = [](double t) { return Vec::Constant(1, 0.8 * std::sin(t) + 0.3 * t * t); };

SampledRoughPath smooth_lift(double a = 0.0, double b = 1.0, std::size_t n = 4096) {
  return signature_lift(oracle::sampled(kSmooth, a, b, n), 2);
}

VectorFieldFamily scalar_linear() { return linear_fields({Mat::Identity(1, 1)}); }

double exp_solution_error(double step) {
  const RDEProblem prob{scalar_linear(), smooth_lift(), Vec::Constant(1, 1.3), {0.0, 1.0}};
  const auto sol = solve_rde(prob, {step});
  const double exact = 1.3 * std::exp(kSmooth(1.0)(0) - kSmooth(0.0)(0));
  return std::abs(sol.states(0, sol.states.cols() - 1) - exact);
}

}  // namespace

TEST_CASE("exponential solution") {
  CHECK(exp_solution_error(1e-3) < 1e-6);
}

TEST_CASE("additive noise is exact in one step") {
  std::mt19937_64 rng(3);
  const auto x = signature_lift(oracle::random_path(rng, 2, 9), 2);
  const RDEProblem prob{constant_fields(2, 2), x, Vec::Constant(2, 0.5), {0.0, 1.0}};
  const auto sol = solve_rde(prob, {1.0});
  const GroupElement inc = x.increment(0.0, 1.0);
  CHECK(std::abs(sol.states(0, 1) - 0.5 - inc[1][0]) < 1e-14);
  CHECK(std::abs(sol.states(1, 1) - 0.5 - inc[1][1]) < 1e-14);
}

TEST_CASE("matrix exponential oracle") {
  Mat a(2, 2);
  a << -0.3, 0.9, -0.6, 0.2;
  const auto x = smooth_lift();
  const RDEProblem prob{linear_fields({a}), x, Vec::Ones(2), {0.0, 1.0}};
  const auto sol = solve_rde(prob, {1e-3});
  const double dx = x.increment(0.0, 1.0)[1][0];
  const Mat e = (a * dx).exp();
  const Vec exact = e * Vec::Ones(2);
  CHECK((sol.states.col(sol.states.cols() - 1) - exact).norm() < 1e-6);
  CHECK((sol.jacobian - e).norm() < 1e-6);
}

TEST_CASE("convergence order") {
  std::vector<double> h, err;
  for (int k = 4; k <= 9; ++k) {
    h.push_back(std::ldexp(1.0, -k));
    err.push_back(exp_solution_error(h.back()));
  }
  CHECK(oracle::loglog_slope(h, err) >= 1.9);
}

TEST_CASE("Jacobian matches finite differences") {
  std::mt19937_64 rng(2);
  const auto x = signature_lift(oracle::random_path(rng, 3, 17), 2);
  const auto fam = bump_fields(2, 3);
  const RDEProblem prob{fam, x, Vec::Constant(2, 0.2), {0.0, 1.0}};
  const auto sol = solve_rde(prob, {1.0 / 64});
  const Vec y0 = prob.y0;
  Mat fd(2, 2);
  for (int a = 0; a < 2; ++a) {
    Vec p = y0, m = y0;
    p(a) += 1e-6;
    m(a) -= 1e-6;
    fd.col(a) = (sol.flow(0.0, 1.0, p) - sol.flow(0.0, 1.0, m)) / 2e-6;
  }
  CHECK((sol.jacobian - fd).norm() < 1e-7);
  const auto pts = probe_points(2, 5, 1);
  CHECK(flow_composition_residual(sol.flow, 0.25, 0.5, 1.0, pts) < 1e-12);
  CHECK(flow_composition_residual(sol.flow, 0.0, 0.3, 0.9, pts) < 1e-3);
  CHECK((sol.flow(0.5, 0.5, y0) - y0).norm() == 0.0);
}

TEST_CASE("solver errors") {
  const auto x = smooth_lift();
  CHECK_THROWS_AS(solve_rde({scalar_linear(), x, Vec::Ones(1), {0.0, 1.0}}, {0.3}), ArgumentError);
  CHECK_THROWS_AS(solve_rde({rotation_fields(2), x, Vec::Ones(2), {0.0, 1.0}}, {0.1}), ArgumentError);
  VectorField quad{1, [](const Vec& y) -> Vec { return y.array().square(); },
                   [](const Vec& y) -> Mat { return Mat::Constant(1, 1, 2 * y(0)); },
                   [](const Vec&) { return std::vector<Mat>{Mat::Constant(1, 1, 2.0)}; }};
  VectorFieldFamily fam;
  fam.fields.push_back(quad);
  const auto ramp = signature_lift(oracle::sampled([](double t) { return Vec::Constant(1, 4 * t); }, 0, 1, 16), 2);
  try {
    solve_rde({fam, ramp, Vec::Ones(1), {0.0, 1.0}}, {1.0 / 64});
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    // exact blow-up at x = 1, i.e. t = 0.25
    CHECK(e.time() == doctest::Approx(0.25).epsilon(0.05));
  }
}

TEST_CASE("driver flow") {
  const auto x = smooth_lift();
  const auto d = driver_from_rough_path(scalar_linear(), x);
  const auto flow = solve_driver_flow(d, {0.0, 1.0}, {1e-3});
  const auto sol = solve_rde({scalar_linear(), x, Vec::Constant(1, 0.7), {0.0, 1.0}}, {1e-3});
  CHECK(std::abs(flow(0.0, 1.0, Vec::Constant(1, 0.7))(0) - sol.states(0, sol.states.cols() - 1)) < 1e-6);

  const auto zero = solve_driver_flow(zero_driver(x.times(), 2), {0.0, 1.0}, {0.125});
  CHECK((zero(0.0, 1.0, Vec::Ones(2)) - Vec::Ones(2)).norm() == 0.0);

  auto bad = d;
  bad.p = 2.2;
  bad.rho = 0.7;
  CHECK_THROWS_AS(solve_driver_flow(bad, {0.0, 1.0}), ConfigError);

  // Jacobian against finite differences
  std::mt19937_64 rng(4);
  const auto rx = signature_lift(oracle::random_path(rng, 3, 17), 2);
  const auto rd = driver_from_rough_path(bump_fields(2, 3), rx);
  const auto rf = solve_driver_flow(rd, {0.0, 1.0}, {1.0 / 32});
  const Vec y0 = Vec::Constant(2, 0.1);
  const auto v = rf.evaluate(0.0, 1.0, y0, true);
  Mat fd(2, 2);
  for (int a = 0; a < 2; ++a) {
    Vec p = y0, m = y0;
    p(a) += 1e-6;
    m(a) -= 1e-6;
    fd.col(a) = (rf(0.0, 1.0, p) - rf(0.0, 1.0, m)) / 2e-6;
  }
  CHECK((v.jacobian - fd).norm() < 1e-7);
}

TEST_CASE("driver flow Taylor remainder") {
  const double p = 2.2;
  Mat a(2, 2), b(2, 2);
  a << 0, -1, 1, 0;
  b << 0.3, 0, 0, -0.2;
  const auto path = oracle::sampled(
      [](double t) {
        Vec v(2);
        v << std::sin(3 * t), std::cos(2 * t);
        return v;
      },
      0.0, 1.0, 4096);
  auto d = driver_from_rough_path(linear_fields({a, b}), signature_lift(path, 2, p));
  d.rho = 1.0;
  const auto fine = solve_driver_flow(d, {0.0, 1.0}, {std::ldexp(1.0, -12)});
  const Vec x0 = Vec::Constant(2, 0.4);
  std::vector<double> len, rem;
  for (int k = 4; k <= 9; ++k) {
    const double h = std::ldexp(1.0, -k);
    double worst = 0.0;
    for (double s : {0.0, 0.25, 0.5}) {
      const double t = s + h;
      const Vec taylor = x0 + d.V(s, t, x0) + d.W(s, t, x0) + 0.5 * d.DV(s, t, x0) * d.V(s, t, x0);
      worst = std::max(worst, (fine(s, t, x0) - taylor).cwiseAbs().maxCoeff());
    }
    len.push_back(h);
    rem.push_back(worst);
  }
  CHECK(oracle::loglog_slope(len, rem) >= 3 / p - 0.1);
}

TEST_CASE("growth checks") {
  auto cube = [](double sign) {
    return DriftSpec{[sign](const Vec& x) -> Vec { return sign * x.array().cube().matrix(); }, {}};
  };
  const auto stable = drift_growth_check(cube(-1), 1, 2.0, 2000, 1);
  CHECK(stable.pass);
  CHECK(stable.at_r.c1 == 0.0);
  CHECK(stable.at_r.c2 < 1e-12);
  CHECK_FALSE(drift_growth_check(cube(1), 1, 2.0, 2000, 1).pass);
  const auto zero = drift_growth_check({[](const Vec& x) -> Vec { return Vec::Zero(x.size()); }, {}}, 2, 1.0, 1000);
  CHECK(zero.pass);
  CHECK(zero.at_2r.c4 == 0.0);
  CHECK_THROWS_AS(drift_growth_check(cube(1), 1, 1.0, 10), ArgumentError);
}

TEST_CASE("drift transformation") {
  const auto x = smooth_lift(0.0, 1.0, 1024);
  const DriftSpec decay{[](const Vec& y) -> Vec { return -y; }, {}};

  // no noise: pure ODE
  const RDEProblem still{linear_fields({Mat::Zero(1, 1)}), x, Vec::Constant(1, 2.0), {0.0, 1.0}};
  const auto ode = drift_transform_solve(still, {[](const Vec& y) -> Vec { return -1.5 * y; }, {}}, {{1.0 / 64}});
  CHECK(std::abs(ode(0.0, 1.0, Vec::Constant(1, 2.0))(0) - 2.0 * std::exp(-1.5)) < 1e-8);

  const RDEProblem prob{scalar_linear(), x, Vec::Constant(1, 0.9), {0.0, 1.0}};
  const auto phi = drift_transform_solve(prob, decay, {{1.0 / 128}});
  const double dx = x.increment(0.0, 1.0)[1][0];
  CHECK(std::abs(phi(0.0, 1.0, Vec::Constant(1, 0.9))(0) - 0.9 * std::exp(dx - 1.0)) < 1e-5);

  const auto pts = probe_points(1, 5, 3, 1.5);
  CHECK(flow_composition_residual(phi, 0.0, 0.375, 1.0, pts) < 1e-6);
  CHECK(flow_composition_residual(phi, 0.125, 0.5, 0.875, pts) < 1e-6);

  const auto bounds = drift_subintervals(x, 0.0, 0.0, 1.0, 1.0 / 128, 2.2, 0.1);
  CHECK(bounds.size() > 10);
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) CHECK(bounds[i + 1] - bounds[i] <= 0.1 + 1e-12);
}

TEST_CASE("joint schemes") {
  const auto x = smooth_lift();
  const DriftSpec drift{[](const Vec& y) -> Vec { return -y + 0.2 * y.array().sin().matrix(); }, {}};
  const RDEProblem prob{scalar_linear(), x, Vec::Constant(1, 0.9), {0.0, 1.0}};
  const auto phi = drift_transform_solve(prob, drift, {{1.0 / 128}});
  const double transformed = phi(0.0, 1.0, prob.y0)(0);
  const double joint = joint_scheme_solve(prob, drift, 1e-3)(0);
  const double euler = joint_euler_solve(prob, drift, 1e-3)(0);
  MESSAGE("drift transform vs joint increment scheme: " << std::abs(transformed - joint));
  MESSAGE("drift transform vs plain drift-Euler: " << std::abs(transformed - euler));
  CHECK(std::abs(transformed - joint) < 1e-4);
}

TEST_CASE("RDS cocycle on piecewise-linear noise") {
  std::mt19937_64 rng(19);
  const auto src = oracle::random_path(rng, 1, 97, -2.0, 4.0);
  const NoiseRealization w = make_realization(src, 2);
  const double step = 1.0 / 16;
  const double h = 0.5;
  const NoiseRealization th = shift_noise(w, h);
  const RDEProblem p0{scalar_linear(), w.omega, Vec::Ones(1), {-2.0, 4.0}};
  const RDEProblem p1{scalar_linear(), th.omega, Vec::Ones(1), {-2.5, 3.5}};
  const auto pts = probe_points(1, 10, 4, 1.0);

  const auto psi0 = solve_rde(p0, {step}).flow;
  const auto psi1 = solve_rde(p1, {step}).flow;
  const auto r = rds_cocycle_residual(psi0, psi1, h, 0.25, 1.5, pts);
  CHECK(r.two_parameter < 1e-12);
  CHECK(r.one_parameter < 1e-12);
  const auto r0 = rds_cocycle_residual(psi0, psi0, 0.0, 0.25, 1.5, pts);
  CHECK(r0.two_parameter == 0.0);

  const DriftSpec decay{[](const Vec& y) -> Vec { return -y; }, {}};
  const auto phi0 = drift_transform_solve(p0, decay, {{step}});
  const auto phi1 = drift_transform_solve(p1, decay, {{step}});
  const auto rd = rds_cocycle_residual(phi0, phi1, h, 0.25, 1.5, pts);
  CHECK(rd.two_parameter < 1e-5);
  CHECK(rd.one_parameter < 1e-5);
}

TEST_CASE("Lyapunov exponents of deterministic flows") {
  // x0 e^{T} must stay inside the blow-up ball
  const auto x = signature_lift(oracle::sampled([](double t) { return Vec::Constant(1, std::sin(t)); }, 0, 16, 64), 2);
  const RDEProblem prob{linear_fields({Mat::Zero(1, 1)}), x, Vec::Ones(1), {0.0, 16.0}};
  for (double rate : {-1.0, 1.0}) {
    const auto phi = drift_transform_solve(prob, {[rate](const Vec& y) -> Vec { return rate * y; }, {}}, {{0.25}});
    const auto est = top_lyapunov_estimate({phi}, Vec::Constant(1, 1e-3), 16.0);
    CHECK(std::abs(est.value - rate) < 0.01);
  }
}
