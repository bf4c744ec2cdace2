#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "roughflow/paths.hpp"

namespace roughflow {

/// How a realization was produced. When `source` is present the lift is a
/// deterministic function of it: signature_lift(source), or of its projection
/// onto D_n when `dyadic_level` is set.
struct Lineage {
  std::uint64_t seed = 0;
  std::string description;
  std::optional<PiecewiseLinearPath> source;
  std::optional<int> dyadic_level;
};

/// A point omega of the canonical noise space: a sampled rough path anchored
/// at 1 at time 0.
struct NoiseRealization {
  SampledRoughPath omega;
  Lineage lineage;
  /// Set when a shift required geodesic interpolation off the sampling grid.
  bool degraded = false;

  int tensor_level() const { return omega.level(); }
};

/// Builds the realization lift(source) or lift(projection of source onto D_n).
NoiseRealization make_realization(PiecewiseLinearPath source, int tensor_level, std::optional<int> dyadic_level = {},
                                  std::uint64_t seed = 0, std::string description = {});

struct ShiftMap {
  double h = 0.0;
  bool grid_aligned = true;
};

/// Classifies h against a realization's sampling grid.
ShiftMap make_shift(const NoiseRealization& omega, double h);

/// (theta_h omega)(s) = omega(h)^{-1} (x) omega(h + s), on the grid of omega
/// translated by -h. Off-grid h interpolates omega(h) along the geodesic and
/// sets `degraded`.
NoiseRealization shift_omega(const NoiseRealization& omega, double h);

/// Shift of the underlying noise: the source path is shifted and the lift is
/// rebuilt through the same lineage (projection onto D_n, then lift). Falls
/// back to shift_omega for realizations without a source.
NoiseRealization shift_noise(const NoiseRealization& omega, double h);

/// flat distance between X_{s,s+t}(omega) and X_t(theta_s omega), where theta
/// acts on the underlying noise (shift_noise).
double cocycle_residual(const NoiseRealization& omega, double s, double t);

/// Largest cocycle residual over shifts s and windows t that fit inside the
/// realization's span.
double max_cocycle_residual(const NoiseRealization& omega, const std::vector<double>& shifts,
                            const std::vector<double>& windows);

struct StationarityTest {
  double anchor_a;
  double anchor_b;
  std::string functional;
  double statistic;
  double threshold;
  bool pass;
};

struct StationarityReport {
  std::vector<double> anchors;
  double window;
  double significance;
  std::vector<StationarityTest> tests;
  bool pass;
};

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic two-sample KS critical value c(alpha) sqrt((n + m) / (n m)).
double ks_threshold(double alpha, std::size_t n, std::size_t m);

/// Compares the laws of X_{t0, t0 + window} across anchors through scalar
/// functionals (each level-1 component and each Levy area entry i < j),
/// using two-sample KS tests at overall significance 0.01 split across the
/// tests (Bonferroni).
StationarityReport stationarity_diagnostic(const std::vector<NoiseRealization>& samples,
                                           const std::vector<double>& anchors, double window,
                                           double significance = 0.01);

nlohmann::json to_json(const StationarityReport& report);

}  // namespace roughflow
