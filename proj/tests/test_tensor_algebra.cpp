#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "roughflow/errors.hpp"
#include "roughflow/tensor_algebra.hpp"

using namespace roughflow;

namespace {

GroupElement g1(double a, double b) { return GroupElement(1, 2, {{a}, {b}}); }

double max_abs_diff(const GroupElement& g, const std::vector<std::vector<double>>& lv) {
  double m = 0.0;
  for (int k = 1; k <= g.level(); ++k)
    for (std::size_t i = 0; i < lv[static_cast<std::size_t>(k - 1)].size(); ++i)
      m = std::max(m, std::abs(g[k][i] - lv[static_cast<std::size_t>(k - 1)][i]));
  return m;
}

}  // namespace

TEST_CASE("product of two one-dimensional segments") {
  const GroupElement r = tensor_mul(g1(1.0, 0.5), g1(2.0, 2.0));
  CHECK(r.scalar() == 1.0);
  CHECK(r[1][0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(r[2][0] == doctest::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("L-shaped path from segment signatures") {
  const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
  const GroupElement r = tensor_mul(segment_signature(e1, 2), segment_signature(e2, 2));
  CHECK(r[1][0] == 1.0);
  CHECK(r[1][1] == 1.0);
  CHECK(r.at2(0, 0) == doctest::Approx(0.5));
  CHECK(r.at2(0, 1) == doctest::Approx(1.0));
  CHECK(r.at2(1, 0) == doctest::Approx(0.0));
  CHECK(r.at2(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("inverse") {
  const GroupElement inv = tensor_inv(g1(1.0, 0.5));
  CHECK(inv[1][0] == doctest::Approx(-1.0));
  CHECK(inv[2][0] == doctest::Approx(0.5));
  const GroupElement one = GroupElement::identity(3, 3);
  CHECK(flat_distance(tensor_inv(one), one) == 0.0);

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const GroupElement g = oracle::random_element(rng, 2, 2);
    CHECK(flat_distance(tensor_mul(tensor_inv(g), g), GroupElement::identity(2, 2)) < 1e-12);
  }
}

TEST_CASE("product agrees with the multi-index oracle") {
  std::mt19937_64 rng(11);
  for (int d = 1; d <= 4; ++d)
    for (int n = 1; n <= 4; ++n) {
      const GroupElement g = oracle::random_element(rng, d, n);
      const GroupElement h = oracle::random_element(rng, d, n);
      CHECK(max_abs_diff(tensor_mul(g, h), oracle::naive_product(g, h)) < 1e-13);
    }
}

TEST_CASE("identity, norms and mismatches") {
  std::mt19937_64 rng(3);
  const GroupElement g = oracle::random_element(rng, 3, 3);
  CHECK(flat_distance(tensor_mul(g, GroupElement::identity(3, 3)), g) == 0.0);
  CHECK(flat_norm(GroupElement::identity(2, 3)) == 1.0);
  CHECK(flat_norm(g1(3.0, 0.5)) == 3.0);
  CHECK(flat_norm(GroupElement(2, 2, {{0, 0}, {0, 0, 0, 0}})) == 1.0);
  CHECK_THROWS_AS(tensor_mul(GroupElement(2, 2), GroupElement(3, 2)), ArgumentError);
  CHECK_THROWS_AS(tensor_mul(GroupElement(2, 2), GroupElement(2, 3)), ArgumentError);
  CHECK_THROWS_AS(GroupElement(2, 2, {{0, 0}, {0, 0, 0}}), ArgumentError);
  CHECK_THROWS_AS(GroupElement(1, 1, {{NAN}}), ArgumentError);
  CHECK_THROWS_AS(GroupElement(2, kMaxTensorLevel + 1), ArgumentError);
}

TEST_CASE("outer product norm is multiplicative") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> v(3), w(4);
    for (auto& c : v) c = n(rng);
    for (auto& c : w) c = n(rng);
    const double lhs = level_norm(outer(v, w));
    const double rhs = level_norm(v) * level_norm(w);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
    CHECK(lhs == doctest::Approx(level_norm(outer(w, v))).epsilon(1e-14));
  }
}

TEST_CASE("segment signature levels are v^k / k!") {
  const std::vector<double> v{0.3, -1.2};
  const GroupElement s = segment_signature(v, 3);
  CHECK(s.at2(0, 1) == doctest::Approx(0.3 * -1.2 / 2));
  // (1,1,0) -> index 1*4 + 1*2 + 0
  CHECK(s[3][6] == doctest::Approx(-1.2 * -1.2 * 0.3 / 6));
  CHECK(geometricity_residual(s) < 1e-15);
}

TEST_CASE("geodesic powers") {
  std::mt19937_64 rng(9);
  const std::vector<double> v{0.4, 0.1, -0.7};
  const std::vector<double> w{-0.2, 0.5, 0.3};
  const GroupElement g = tensor_mul(segment_signature(v, 3), segment_signature(w, 3));
  CHECK(flat_distance(tensor_pow(g, 1.0), g) < 1e-14);
  CHECK(flat_distance(tensor_pow(g, 0.0), GroupElement::identity(3, 3)) < 1e-15);
  const GroupElement half = tensor_pow(g, 0.5);
  CHECK(flat_distance(tensor_mul(half, half), g) < 1e-13);
  const GroupElement seg = segment_signature(v, 3);
  const std::vector<double> v3{0.4 / 3, 0.1 / 3, -0.7 / 3};
  CHECK(flat_distance(tensor_pow(seg, 1.0 / 3), segment_signature(v3, 3)) < 1e-15);
}

TEST_CASE("json round trip") {
  std::mt19937_64 rng(1);
  const GroupElement g = oracle::random_element(rng, 2, 3);
  nlohmann::json j;
  to_json(j, g);
  CHECK(flat_distance(group_element_from_json(j), g) == 0.0);
}
