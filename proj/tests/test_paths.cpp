#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "roughflow/errors.hpp"
#include "roughflow/paths.hpp"

using namespace roughflow;

namespace {

PiecewiseLinearPath path1(std::vector<double> t, std::vector<double> v) {
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return PiecewiseLinearPath(std::move(t), std::move(m));
}

PiecewiseLinearPath l_path() {
  Eigen::MatrixXd v(2, 3);
  v << 0, 1, 1, 0, 0, 1;
  return PiecewiseLinearPath({0.0, 0.5, 1.0}, v);
}

}  // namespace

TEST_CASE("lift of the unit linear path") {
  const auto lift = signature_lift(path1({0, 1}, {0, 1}), 2);
  const GroupElement end = lift.point(lift.size() - 1);
  CHECK(end[1][0] == doctest::Approx(1.0));
  CHECK(end[2][0] == doctest::Approx(0.5));
}

TEST_CASE("lift of the L-path") {
  const auto lift = signature_lift(l_path(), 2);
  const GroupElement g = lift.increment(0.0, 1.0);
  CHECK(g[1][0] == doctest::Approx(1.0));
  CHECK(g[1][1] == doctest::Approx(1.0));
  CHECK(g.at2(0, 0) == doctest::Approx(0.5));
  CHECK(g.at2(0, 1) == doctest::Approx(1.0));
  CHECK(std::abs(g.at2(1, 0)) < 1e-15);
  CHECK(g.at2(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("lift matches closed-form iterated integrals, Chen and geometricity") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = oracle::random_path(rng, 3, 12, -1.0, 2.0);
    const auto lift = signature_lift(x, 3);
    for (std::size_t i = 0; i < lift.size(); i += 3)
      for (std::size_t j = i + 1; j < lift.size(); j += 2) {
        const GroupElement inc = lift.increment(i, j);
        const Eigen::MatrixXd a = oracle::level_two(x, lift.times()[i], lift.times()[j]);
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) CHECK(std::abs(inc.at2(p, q) - a(p, q)) < 1e-12);
        CHECK(geometricity_residual(inc) < 1e-10);
        for (std::size_t k = i; k <= j; ++k)
          CHECK(flat_distance(tensor_mul(lift.increment(i, k), lift.increment(k, j)), inc) < 1e-12);
      }
  }
}

TEST_CASE("lift is anchored at zero") {
  const auto lift = signature_lift(path1({-1.0, 0.5, 2.0}, {3.0, 1.0, 0.0}), 2);
  const auto zero = lift.find_node(0.0);
  REQUIRE(zero.has_value());
  CHECK(flat_distance(lift.point(*zero), GroupElement::identity(1, 2)) == 0.0);
  CHECK_THROWS_AS(signature_lift(path1({0, 1}, {0, 1}), 0), ArgumentError);
}

TEST_CASE("p-variation examples") {
  CHECK(p_variation(path1({0, 1}, {0, 1}), 1.0) == doctest::Approx(1.0));
  const auto zig = path1({0, 0.5, 1}, {0, 1, 0});
  CHECK(p_variation(zig, 2.0) == doctest::Approx(std::sqrt(2.0)));
  CHECK(p_variation(zig, 1.0) == doctest::Approx(2.0));
  CHECK(p_variation(zig, 2.0, Interval{0.2, 0.2}) == 0.0);
  CHECK_THROWS_AS(p_variation(zig, 0.5), ArgumentError);
}

TEST_CASE("p-variation DP equals brute force and is monotone in p") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 30; ++rep) {
    const auto x = oracle::random_path(rng, 2, 10);
    double prev = INFINITY;
    for (double p : {1.0, 1.5, 2.0, 2.5, 3.0}) {
      const double v = p_variation(x, p);
      CHECK(v == oracle::brute_force_pvar(x, p));
      CHECK(v <= prev * (1 + 1e-15));
      prev = v;
    }
  }
}

TEST_CASE("homogeneous distances") {
  const auto lin = signature_lift(path1({0, 1}, {0, 1}), 2);
  const SampledRoughPath one({0.0, 1.0}, {GroupElement::identity(1, 2), GroupElement::identity(1, 2)});
  CHECK(homogeneous_pvar_distance(lin, lin, 2.0) == 0.0);
  // level 1 gives 1, level 2 gives (0.5^{2/2})^{1/2} < 1
  CHECK(homogeneous_pvar_distance(lin, one, 2.0) == doctest::Approx(1.0));
  CHECK(homogeneous_pvar_norm(lin, 2.0) == doctest::Approx(1.0));

  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = signature_lift(oracle::random_path(rng, 2, 9), 2);
    const auto b = signature_lift(oracle::random_path(rng, 2, 9), 2);
    const auto c = signature_lift(oracle::random_path(rng, 2, 9), 2);
    CHECK(homogeneous_pvar_distance(a, c, 2.5) <=
          homogeneous_pvar_distance(a, b, 2.5) + homogeneous_pvar_distance(b, c, 2.5) + 1e-12);
  }
  const auto shorter = signature_lift(path1({0, 0.5}, {0, 1}), 2);
  CHECK_THROWS_AS(homogeneous_pvar_distance(lin, shorter, 2.0), ArgumentError);
  CHECK(glued_pvar_distance(lin, lin, 2.0, 3) == 0.0);
}

TEST_CASE("shift_path") {
  const auto lin = path1({-2, 3}, {-4, 6});
  const auto shifted = shift_path(lin, 0.7);
  CHECK(shifted.at(0.0)(0) == 0.0);
  CHECK(shifted.at(1.0)(0) == doctest::Approx(2.0));
  const auto same = shift_path(lin, 0.0);
  CHECK(same.values().isApprox(lin.values()));

  std::mt19937_64 rng(12);
  const auto x = oracle::random_path(rng, 2, 17, -1.0, 1.0);
  const auto lx = signature_lift(x, 3);
  const double h = x.times()[10];
  const auto ly = signature_lift(shift_path(x, h), 3);
  for (std::size_t i = 10; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      CHECK(flat_distance(lx.increment(x.times()[i], x.times()[j]), ly.increment(x.times()[i] - h, x.times()[j] - h)) <
            1e-12);
}

TEST_CASE("mollification") {
  const Mollifier mu = Mollifier::bump(0.25);
  CHECK(std::abs(mu.mass() - 1.0) < 1e-12);
  CHECK_THROWS_AS(Mollifier([](double) { return 1.0; }, 1.0), ArgumentError);

  const auto lin = path1({-2, 2}, {-3, 3});
  const auto m = mollify(lin, mu, {0.125, Interval{-1.0, 1.0}});
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m.value(i)(0) == doctest::Approx(1.5 * m.times()[i]).epsilon(1e-12));
  CHECK_THROWS_AS(mollify(lin, Mollifier::bump(3.0)), ArgumentError);

  // decay towards the path as the support shrinks
  const auto x = oracle::sampled([](double t) { return Eigen::VectorXd::Constant(1, std::sin(3 * t)); }, -2, 2, 512);
  double prev = INFINITY;
  for (int j = 2; j <= 6; ++j) {
    const auto mx = mollify(x, Mollifier::bump(std::ldexp(1.0, -j)), {1.0 / 64, Interval{-1.0, 1.0}});
    double err = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) err = std::max(err, std::abs(mx.value(i)(0) - x.at(mx.times()[i])(0)));
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("projection") {
  const auto sq = piecewise_linear_projection(
      [](double t) { return Eigen::VectorXd::Constant(1, t * t); }, EquidistantGrid{0.0, 0.5, 3});
  CHECK(sq.value(1)(0) == 0.25);
  CHECK(sq.value(2)(0) == 1.0);
  const auto zig = path1({0, 0.5, 1}, {0, 1, 0});
  const auto same = piecewise_linear_projection(zig, EquidistantGrid{0.0, 0.25, 5});
  for (double t : {0.1, 0.3, 0.8}) CHECK(same.at(t)(0) == doctest::Approx(zig.at(t)(0)));
  CHECK_THROWS_AS(piecewise_linear_projection(zig, EquidistantGrid{0.0, 0.5, 4}), ArgumentError);

  // weak cocycle identity on the projected path
  std::mt19937_64 rng(2);
  const auto x = oracle::random_path(rng, 1, 41, -2.0, 2.0);
  const double delta = 0.25;
  const auto px = piecewise_linear_projection(x, EquidistantGrid::aligned(delta, -2.0, 2.0));
  const double h = 0.5;
  const auto ps = piecewise_linear_projection(shift_path(x, h), EquidistantGrid::aligned(delta, -2.5, 1.5));
  for (double s : {-1.0, -0.3, 0.1})
    for (double t : {0.2, 0.9})
      CHECK(std::abs((ps.at(t) - ps.at(s) - (px.at(t + h) - px.at(s + h)))(0)) < 1e-14);
}

TEST_CASE("csv and json output") {
  std::ostringstream os;
  write_csv(os, l_path());
  CHECK(os.str().rfind("t,x1,x2\n", 0) == 0);
  std::ostringstream ls;
  write_csv(ls, signature_lift(l_path(), 2));
  CHECK(ls.str().rfind("t,L1_1,L1_2,L2_1_1,L2_1_2,L2_2_1,L2_2_2\n", 0) == 0);
  nlohmann::json j;
  to_json(j, l_path());
  CHECK(path_from_json(j).values().isApprox(l_path().values()));
  CHECK(format_number(0.1) == "0.10000000000000001");
}
