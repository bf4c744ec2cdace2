#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "roughflow/drivers.hpp"
#include "roughflow/errors.hpp"
#include "roughflow/gaussian.hpp"

using namespace roughflow;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h) {
  const Vec fx = f(x);
  Mat j(fx.size(), x.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Vec xp = x, xm = x;
    xp(a) += h;
    xm(a) -= h;
    j.col(a) = (f(xp) - f(xm)) / (2 * h);
  }
  return j;
}

PiecewiseLinearPath l_path() {
  Eigen::MatrixXd v(2, 3);
  v << 0, 1, 1, 0, 0, 1;
  return PiecewiseLinearPath({0.0, 0.5, 1.0}, v);
}

}  // namespace

TEST_CASE("Lie brackets") {
  const auto zero = lie_bracket(constant_field(Vec::Unit(2, 0)), constant_field(Vec::Unit(2, 1)));
  CHECK(zero(Vec::Ones(2)).norm() == 0.0);

  const Mat a = mat2(0, 1, 0, 0), b = mat2(0, 0, 1, 0);
  const auto br = lie_bracket(linear_field(a), linear_field(b));
  const auto pts = probe_points(2, 10, 1);
  for (const auto& x : pts) {
    CHECK((br(x) - mat2(-1, 0, 0, 1) * x).norm() < 1e-14);
    // finite-difference bracket oracle
    const Vec fd = fd_jacobian(linear_field(b).value, x, 1e-5) * (a * x) - fd_jacobian(linear_field(a).value, x, 1e-5) * (b * x);
    CHECK((br(x) - fd).norm() < 1e-6);
  }
  const auto fam = bump_fields(2, 3);
  const auto self = lie_bracket(fam.fields[1], fam.fields[1]);
  const auto cross = lie_bracket(fam.fields[0], fam.fields[2]);
  for (const auto& x : pts) {
    CHECK(self(x).norm() < 1e-15);
    CHECK((cross.jacobian(x) - fd_jacobian(cross.value, x, 1e-5)).norm() < 1e-8);
  }
}

TEST_CASE("bump field derivatives") {
  const auto fam = bump_fields(3, 2, 0.5, 0.8);
  for (const auto& x : probe_points(3, 5, 2)) {
    const auto& f = fam.fields[1];
    CHECK((f.jacobian(x) - fd_jacobian(f.value, x, 1e-6)).norm() < 1e-8);
    const auto h = f.hessian(x);
    for (int c = 0; c < 3; ++c) {
      const auto row = [&](const Vec& y) -> Vec { return f.jacobian(y).row(c).transpose(); };
      CHECK((h[static_cast<std::size_t>(c)] - fd_jacobian(row, x, 1e-6)).norm() < 1e-8);
    }
  }
  CHECK(tail_ratio(bump_fields(2, 8, 0.5)) < 1.0);
  CHECK(tail_ratio(bump_fields(2, 8, 2.0)) > 1.0);
}

TEST_CASE("driver from a rough path") {
  // d = 1: no area
  const auto x1 = signature_lift(oracle::sampled([](double t) { return Vec::Constant(1, std::sin(4 * t)); }, 0, 1, 64), 2);
  const auto d1 = driver_from_rough_path(linear_fields({mat2(0, 1, -1, 0)}), x1);
  for (const auto& p : probe_points(2, 5, 3)) CHECK(d1.W(0.1, 0.9, p).norm() == 0.0);

  // commuting fields
  std::mt19937_64 rng(6);
  const auto x2 = signature_lift(oracle::random_path(rng, 2, 20), 2);
  const auto dc = driver_from_rough_path(constant_fields(2, 2), x2);
  for (const auto& p : probe_points(2, 5, 3)) CHECK(dc.W(0.0, 1.0, p).norm() == 0.0);

  // L-path against 1/2 [s1, s2](x) (A^12 - A^21) with A^12 = 1, A^21 = 0
  const Mat a = mat2(0, 1, 0, 0), b = mat2(0, 0, 1, 0);
  const auto dl = driver_from_rough_path(linear_fields({a, b}), signature_lift(l_path(), 2));
  for (const auto& p : probe_points(2, 5, 4)) {
    const Vec expected = 0.5 * (b * a - a * b) * p * (1.0 - 0.0);
    CHECK((dl.W(0.0, 1.0, p) - expected).norm() < 1e-14);
    CHECK((dl.V(0.0, 1.0, p) - (a * p + b * p)).norm() < 1e-14);
  }

  CHECK_THROWS_AS(driver_from_rough_path(rotation_fields(3), x2), ArgumentError);
  // non-geometric increments
  std::vector<GroupElement> pts{GroupElement::identity(2, 2), GroupElement(2, 2, {{1, 0}, {5, 0, 0, 0}})};
  CHECK_THROWS_AS(driver_from_rough_path(rotation_fields(2), SampledRoughPath({0.0, 1.0}, pts)), ArgumentError);
}

TEST_CASE("driver axioms and fault injection") {
  std::mt19937_64 rng(10);
  const auto x = signature_lift(oracle::random_path(rng, 3, 33), 2);
  const auto fam = bump_fields(2, 3);
  for (const auto& d : {driver_from_rough_path(rotation_fields(3), x), driver_from_rough_path(fam, x)}) {
    const auto pts = probe_points(2, 10, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
      double s = u(rng), m = u(rng), t = u(rng);
      if (s > t) std::swap(s, t);
      m = s + (t - s) * m;
      CHECK(driver_additivity_residual(d, s, m, t, pts) < 1e-10);
      CHECK(driver_chen_residual(d, s, m, t, pts) < 1e-8);
      CHECK(driver_leibniz_residual(d, s, t, pts) < 1e-6);
    }
    CHECK(driver_chen_residual(d, 0.2, 0.2, 0.7, pts) < 1e-12);
    const double a = x.times()[4], b = x.times()[5];
    const auto bad = corrupt_cell(d, a, b, Vec::Constant(2, 1e-2));
    CHECK(driver_chen_residual(bad, a, 0.5 * (a + b), b, pts) > 1e-3);
  }
}

TEST_CASE("Gaussian series driver") {
  const GaussianSampler sampler(fbm_covariance(0.5), EquidistantGrid::dyadic(6, -1.0, 1.0));
  const int k = 4;
  Mat vals(k, 129);
  for (int n = 0; n < k; ++n) vals.row(n) = sampler.sample(derive_seed(4, static_cast<std::uint64_t>(n)), 1).values();
  const PiecewiseLinearPath betas(sampler.times(), vals);
  const auto lift = signature_lift(betas, 2);
  const auto fam = bump_fields(2, k);
  const auto g = gaussian_driver(fam, lift, k);
  const auto r = driver_from_rough_path(fam, lift);
  const auto pts = probe_points(2, 10, 9);
  for (const auto& p : pts) {
    CHECK((g.V(-0.5, 0.75, p) - r.V(-0.5, 0.75, p)).norm() < 1e-10);
    CHECK((g.W(-0.5, 0.75, p) - r.W(-0.5, 0.75, p)).norm() < 1e-10);
  }
  const auto one = gaussian_driver(fam, lift, 1);
  for (const auto& p : pts) CHECK(one.W(-1.0, 1.0, p).norm() == 0.0);

  // scaling beta -> c beta
  const double c = 1.7;
  const auto scaled = gaussian_driver(fam, signature_lift(PiecewiseLinearPath(sampler.times(), c * vals), 2), k);
  for (const auto& p : pts) {
    CHECK((scaled.V(-0.5, 0.5, p) - c * g.V(-0.5, 0.5, p)).norm() < 1e-12);
    CHECK((scaled.W(-0.5, 0.5, p) - c * c * g.W(-0.5, 0.5, p)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(gaussian_driver(bump_fields(2, k, 2.0), lift, k), ConfigError);
  CHECK_THROWS_AS(gaussian_driver(fam, lift, k + 1), ArgumentError);

  // decay in |x|
  double ref = 0.0;
  for (double radius : {1.0, 2.0, 4.0, 8.0}) {
    double sup = 0.0;
    for (int i = 0; i < 32; ++i) {
      Vec p(2);
      p << radius * std::cos(i * M_PI / 16), radius * std::sin(i * M_PI / 16);
      sup = std::max(sup, g.W(-1.0, 1.0, p).norm() * (1 + std::pow(radius, 2 * fam.eta)));
    }
    if (ref == 0.0) ref = sup;
    CHECK(sup <= 10 * ref);
  }
}

TEST_CASE("driver norm estimator") {
  const auto lin = signature_lift(oracle::sampled([](double t) { return Vec::Constant(1, t); }, 0, 1, 8), 2);
  Vec v(2);
  v << 0.6, 0.8;
  VectorFieldFamily fam;
  fam.fields.push_back(constant_field(v));
  const auto d = driver_from_rough_path(fam, lin);
  const auto est = driver_norm(d, {0.0, 1.0}, 5, {2.0, 5});
  CHECK(est.v_part == doctest::Approx(1.0 * std::pow(1.0, 0.5)));
  CHECK(est.w_part == 0.0);
  CHECK(driver_norm(zero_driver({0.0, 1.0}, 2), {0.0, 1.0}, 3, {1.0, 3}).value == 0.0);

  std::mt19937_64 rng(1);
  const auto x = signature_lift(oracle::random_path(rng, 2, 9), 2);
  const auto base = driver_norm(driver_from_rough_path(rotation_fields(2), x), {0.0, 1.0}, 4, {1.0, 5});
  const auto twice = driver_norm(driver_from_rough_path(rotation_fields(2).scaled(2.0), x), {0.0, 1.0}, 4, {1.0, 5});
  CHECK(twice.v_part == doctest::Approx(2 * base.v_part));
  CHECK(twice.w_part == doctest::Approx(2 * base.w_part));
  CHECK_THROWS_AS(driver_norm(d, {0.5, 0.5}, 3), ArgumentError);
}

TEST_CASE("driver cocycle under shifts of the noise") {
  const GaussianSampler sampler(bm_covariance(), EquidistantGrid::dyadic(5, -2.0, 2.0));
  const auto beta = sampler.sample(12, 3);
  const auto fam = bump_fields(2, 3);
  const auto base = gaussian_driver(fam, signature_lift(beta, 2), 3);
  const auto pts = probe_points(2, 10, 2);
  for (double h : {0.0, 0.25, -0.5, 1.0}) {
    const auto shifted = gaussian_driver(fam, signature_lift(shift_path(beta, h), 2), 3);
    CHECK(driver_cocycle_residual(base, shifted, h, -0.5, 0.75, pts) < 1e-10);
  }
  // off-grid shift of the dyadic projection; decreases with refinement
  std::vector<double> r;
  const GaussianSampler fine(bm_covariance(), EquidistantGrid::dyadic(9, -2.0, 2.0));
  const auto bf = fine.sample(12, 3);
  for (int n = 4; n <= 8; ++n) {
    const EquidistantGrid gn = EquidistantGrid::dyadic(n, -2.0, 2.0);
    const double h = 0.3;
    const auto dn = gaussian_driver(fam, signature_lift(piecewise_linear_projection(bf, gn), 2), 3);
    const auto sn = gaussian_driver(
        fam, signature_lift(piecewise_linear_projection(shift_path(bf, h), EquidistantGrid::dyadic(n, -2.0 - h, 2.0 - h)), 2),
        3);
    r.push_back(driver_cocycle_residual(dn, sn, h, -0.5, 0.5, pts));
  }
  CHECK(r.front() > 1e-6);
  CHECK(r.back() < r.front());
}
