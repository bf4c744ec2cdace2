#include "roughflow/cocycle.hpp"

#include <algorithm>
#include <cmath>

#include "roughflow/errors.hpp"
#include "roughflow/gaussian.hpp"

namespace roughflow {

namespace {

SampledRoughPath lift_through_lineage(const PiecewiseLinearPath& source, int tensor_level,
                                      std::optional<int> dyadic_level, double p) {
  if (!dyadic_level) return signature_lift(source, tensor_level, p);
  const EquidistantGrid grid = EquidistantGrid::dyadic(*dyadic_level, source.start(), source.end());
  return signature_lift(piecewise_linear_projection(source, grid), tensor_level, p);
}

}  // namespace

NoiseRealization make_realization(PiecewiseLinearPath source, int tensor_level, std::optional<int> dyadic_level,
                                  std::uint64_t seed, std::string description) {
  SampledRoughPath omega = lift_through_lineage(source, tensor_level, dyadic_level, 2.0);
  return NoiseRealization{std::move(omega), Lineage{seed, std::move(description), std::move(source), dyadic_level},
                          false};
}

ShiftMap make_shift(const NoiseRealization& omega, double h) {
  return ShiftMap{h, omega.omega.find_node(h).has_value()};
}

NoiseRealization shift_omega(const NoiseRealization& realization, double h) {
  const SampledRoughPath& omega = realization.omega;
  if (h < omega.span().start - kTimeTolerance || h > omega.span().end + kTimeTolerance)
    throw ArgumentError("shift_omega: shift " + format_number(h) + " outside the realization span");
  if (h == 0.0) return realization;
  const auto node = omega.find_node(h);
  const GroupElement base_inv = tensor_inv(omega.at(h));
  std::vector<double> times;
  std::vector<GroupElement> points;
  times.reserve(omega.size() + 1);
  points.reserve(omega.size() + 1);
  bool zero_done = false;
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double t = omega.times()[i];
    if (!node && !zero_done && t > h) {
      times.push_back(0.0);
      points.push_back(GroupElement::identity(omega.dim(), omega.level()));
      zero_done = true;
    }
    if (node && i == *node) {
      times.push_back(0.0);
      points.push_back(GroupElement::identity(omega.dim(), omega.level()));
      continue;
    }
    times.push_back(t - h);
    points.push_back(tensor_mul(base_inv, omega.point(i)));
  }
  NoiseRealization out{SampledRoughPath(std::move(times), std::move(points), omega.p()), realization.lineage,
                       realization.degraded || !node};
  if (out.lineage.source) out.lineage.source = shift_path(*out.lineage.source, h);
  return out;
}

NoiseRealization shift_noise(const NoiseRealization& realization, double h) {
  if (!realization.lineage.source) return shift_omega(realization, h);
  const auto& src = *realization.lineage.source;
  if (h < src.start() - kTimeTolerance || h > src.end() + kTimeTolerance)
    throw ArgumentError("shift_noise: shift " + format_number(h) + " outside the noise span");
  PiecewiseLinearPath shifted = shift_path(src, h);
  SampledRoughPath omega =
      lift_through_lineage(shifted, realization.omega.level(), realization.lineage.dyadic_level, realization.omega.p());
  Lineage lineage = realization.lineage;
  lineage.source = std::move(shifted);
  return NoiseRealization{std::move(omega), std::move(lineage), realization.degraded};
}

double cocycle_residual(const NoiseRealization& omega, double s, double t) {
  const Interval span = omega.omega.span();
  const double lo = std::min(s, s + t);
  const double hi = std::max(s, s + t);
  if (lo < span.start - kTimeTolerance || hi > span.end + kTimeTolerance)
    throw ArgumentError("cocycle_residual: [s, s+t] outside the realization span");
  if (s == 0.0) return 0.0;
  const GroupElement lhs = omega.omega.increment(s, s + t);
  const NoiseRealization shifted = shift_noise(omega, s);
  const GroupElement rhs = shifted.omega.at(t);
  return flat_distance(lhs, rhs);
}

double max_cocycle_residual(const NoiseRealization& omega, const std::vector<double>& shifts,
                            const std::vector<double>& windows) {
  const Interval span = omega.omega.span();
  double worst = 0.0;
  for (double s : shifts) {
    std::optional<NoiseRealization> shifted;
    for (double t : windows) {
      const double a = std::min(s, s + t);
      const double b = std::max(s, s + t);
      if (a < span.start - kTimeTolerance || b > span.end + kTimeTolerance) continue;
      if (s == 0.0) continue;
      if (!shifted) shifted = shift_noise(omega, s);
      const Interval sspan = shifted->omega.span();
      if (t < sspan.start - kTimeTolerance || t > sspan.end + kTimeTolerance) continue;
      worst = std::max(worst, flat_distance(omega.omega.increment(s, s + t), shifted->omega.at(t)));
    }
  }
  return worst;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ArgumentError("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_threshold(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

StationarityReport stationarity_diagnostic(const std::vector<NoiseRealization>& samples,
                                           const std::vector<double>& anchors, double window, double significance) {
  if (samples.size() < 100)
    throw ArgumentError("stationarity_diagnostic: insufficient samples (" + std::to_string(samples.size()) +
                        " < 100)");
  if (anchors.size() < 2) throw ArgumentError("stationarity_diagnostic: at least two anchors required");
  const int d = samples.front().omega.dim();
  const int level = samples.front().omega.level();

  struct Functional {
    std::string name;
    int kind;  // 0: level-1 component, 1: area
    int i, j;
  };
  std::vector<Functional> functionals;
  for (int i = 0; i < d; ++i) functionals.push_back({"level1_" + std::to_string(i + 1), 0, i, i});
  if (level >= 2)
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        functionals.push_back({"area_" + std::to_string(i + 1) + std::to_string(j + 1), 1, i, j});

  // values[anchor][functional][sample]
  std::vector<std::vector<std::vector<double>>> values(
      anchors.size(), std::vector<std::vector<double>>(functionals.size(), std::vector<double>(samples.size())));
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const GroupElement inc = samples[s].omega.increment(anchors[a], anchors[a] + window);
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        const auto& fn = functionals[f];
        values[a][f][s] = fn.kind == 0 ? inc[1][static_cast<std::size_t>(fn.i)] : levy_area(inc, fn.i, fn.j);
      }
    }

  const std::size_t pairs = anchors.size() * (anchors.size() - 1) / 2;
  const double per_test_alpha = significance / static_cast<double>(pairs * functionals.size());
  StationarityReport report{anchors, window, significance, {}, true};
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (std::size_t b = a + 1; b < anchors.size(); ++b)
      for (std::size_t f = 0; f < functionals.size(); ++f) {
        const double stat = ks_statistic(values[a][f], values[b][f]);
        const double thr = ks_threshold(per_test_alpha, samples.size(), samples.size());
        const bool ok = stat <= thr;
        report.tests.push_back({anchors[a], anchors[b], functionals[f].name, stat, thr, ok});
        report.pass = report.pass && ok;
      }
  return report;
}

nlohmann::json to_json(const StationarityReport& report) {
  nlohmann::json tests = nlohmann::json::array();
  double worst = 0.0;
  double threshold = 0.0;
  for (const auto& t : report.tests) {
    tests.push_back({{"anchors", {t.anchor_a, t.anchor_b}},
                     {"functional", t.functional},
                     {"statistic", t.statistic},
                     {"threshold", t.threshold},
                     {"pass", t.pass}});
    worst = std::max(worst, t.statistic);
    threshold = t.threshold;
  }
  return nlohmann::json{{"anchors", report.anchors}, {"window", report.window}, {"statistic", worst},
                        {"threshold", threshold},   {"pass", report.pass},     {"tests", std::move(tests)}};
}

}  // namespace roughflow
