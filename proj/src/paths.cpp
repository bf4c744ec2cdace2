#include "roughflow/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "roughflow/errors.hpp"

namespace roughflow {

bool same_time(double a, double b) {
  return std::abs(a - b) <= kTimeTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<double> EquidistantGrid::times() const {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = at(i);
  return out;
}

EquidistantGrid EquidistantGrid::aligned(double spacing, double a, double b) {
  if (!(spacing > 0.0)) throw ArgumentError("EquidistantGrid: spacing must be positive");
  const double k0 = std::ceil(a / spacing - 1e-9);
  const double k1 = std::floor(b / spacing + 1e-9);
  if (k1 < k0) throw ArgumentError("EquidistantGrid: no grid node inside the interval");
  return EquidistantGrid{k0 * spacing, spacing, static_cast<std::size_t>(k1 - k0) + 1};
}

EquidistantGrid EquidistantGrid::dyadic(int n, double a, double b) {
  return aligned(std::ldexp(1.0, -n), a, b);
}

// ---------------------------------------------------------------------------

PiecewiseLinearPath::PiecewiseLinearPath(std::vector<double> times, Eigen::MatrixXd values)
    : times_(std::move(times)), values_(std::move(values)) {
  if (times_.size() < 2) throw ArgumentError("PiecewiseLinearPath: at least 2 breakpoints required");
  if (static_cast<std::size_t>(values_.cols()) != times_.size())
    throw ArgumentError("PiecewiseLinearPath: values must have one column per breakpoint");
  if (values_.rows() < 1) throw ArgumentError("PiecewiseLinearPath: dimension must be positive");
  for (std::size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1])) throw ArgumentError("PiecewiseLinearPath: times must be strictly increasing");
  if (!values_.allFinite()) throw ArgumentError("PiecewiseLinearPath: non-finite value");
}

std::optional<std::size_t> PiecewiseLinearPath::find_breakpoint(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const auto idx = static_cast<std::size_t>(it - times_.begin());
  if (idx < times_.size() && same_time(times_[idx], t)) return idx;
  if (idx > 0 && same_time(times_[idx - 1], t)) return idx - 1;
  return std::nullopt;
}

Eigen::VectorXd PiecewiseLinearPath::at(double t) const {
  if (auto i = find_breakpoint(t)) return value(*i);
  if (t < start() || t > end())
    throw ArgumentError("PiecewiseLinearPath: time " + format_number(t) + " outside span [" + format_number(start()) +
                        ", " + format_number(end()) + "]");
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto j = static_cast<std::size_t>(it - times_.begin());
  const std::size_t i = j - 1;
  const double lambda = (t - times_[i]) / (times_[j] - times_[i]);
  return (1.0 - lambda) * value(i) + lambda * value(j);
}

PiecewiseLinearPath PiecewiseLinearPath::with_breakpoint(double t) const {
  if (find_breakpoint(t)) return *this;
  const Eigen::VectorXd v = at(t);
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto pos = static_cast<Eigen::Index>(it - times_.begin());
  std::vector<double> times = times_;
  times.insert(times.begin() + pos, t);
  Eigen::MatrixXd values(values_.rows(), values_.cols() + 1);
  values.leftCols(pos) = values_.leftCols(pos);
  values.col(pos) = v;
  values.rightCols(values_.cols() - pos) = values_.rightCols(values_.cols() - pos);
  return PiecewiseLinearPath(std::move(times), std::move(values));
}

// ---------------------------------------------------------------------------

SampledRoughPath::SampledRoughPath(std::vector<double> times, std::vector<GroupElement> points, double p)
    : times_(std::move(times)), points_(std::move(points)), p_(p) {
  if (times_.size() < 2) throw ArgumentError("SampledRoughPath: at least 2 nodes required");
  if (points_.size() != times_.size()) throw ArgumentError("SampledRoughPath: one point per node required");
  for (std::size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1])) throw ArgumentError("SampledRoughPath: times must be strictly increasing");
  for (const auto& g : points_)
    if (g.dim() != points_.front().dim() || g.level() != points_.front().level())
      throw ArgumentError("SampledRoughPath: all points must share dim and level");
  if (!(p_ >= 1.0)) throw ArgumentError("SampledRoughPath: p must be >= 1");
}

GroupElement SampledRoughPath::increment(std::size_t i, std::size_t j) const {
  return tensor_mul(tensor_inv(points_[i]), points_[j]);
}

std::optional<std::size_t> SampledRoughPath::find_node(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  const auto idx = static_cast<std::size_t>(it - times_.begin());
  if (idx < times_.size() && same_time(times_[idx], t)) return idx;
  if (idx > 0 && same_time(times_[idx - 1], t)) return idx - 1;
  return std::nullopt;
}

GroupElement SampledRoughPath::at(double t) const {
  if (auto i = find_node(t)) return points_[*i];
  if (t < times_.front() || t > times_.back())
    throw ArgumentError("SampledRoughPath: time " + format_number(t) + " outside span [" +
                        format_number(times_.front()) + ", " + format_number(times_.back()) + "]");
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto j = static_cast<std::size_t>(it - times_.begin());
  const std::size_t i = j - 1;
  const double lambda = (t - times_[i]) / (times_[j] - times_[i]);
  return tensor_mul(points_[i], tensor_pow(increment(i, j), lambda));
}

GroupElement SampledRoughPath::increment(double s, double t) const {
  return tensor_mul(tensor_inv(at(s)), at(t));
}

PiecewiseLinearPath SampledRoughPath::level_one() const {
  Eigen::MatrixXd values(dim(), static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) {
    const auto lv = points_[i][1];
    for (int a = 0; a < dim(); ++a) values(a, static_cast<Eigen::Index>(i)) = lv[static_cast<std::size_t>(a)];
  }
  return PiecewiseLinearPath(times_, std::move(values));
}

// ---------------------------------------------------------------------------

namespace {

double simpson_weight(int q, int intervals, double h) {
  if (q == 0 || q == intervals) return h / 3.0;
  return (q % 2 ? 4.0 : 2.0) * h / 3.0;
}

}  // namespace

Mollifier::Mollifier(std::function<double(double)> density, double support_radius, int quadrature_intervals)
    : density_(std::move(density)), radius_(support_radius), intervals_(quadrature_intervals) {
  if (!(radius_ > 0.0)) throw ArgumentError("Mollifier: support radius must be positive");
  if (intervals_ < 2 || intervals_ % 2) throw ArgumentError("Mollifier: Simpson rule needs an even interval count >= 2");
  const double h = 2.0 * radius_ / intervals_;
  nodes_.resize(static_cast<std::size_t>(intervals_) + 1);
  weights_.resize(nodes_.size());
  for (int q = 0; q <= intervals_; ++q) {
    const double u = -radius_ + h * q;
    const double rho = density_(u);
    if (!std::isfinite(rho) || rho < 0.0) throw ArgumentError("Mollifier: density must be finite and nonnegative");
    nodes_[static_cast<std::size_t>(q)] = u;
    weights_[static_cast<std::size_t>(q)] = simpson_weight(q, intervals_, h) * rho;
  }
  if (std::abs(mass() - 1.0) > 1e-8)
    throw ArgumentError("Mollifier: density mass " + format_number(mass()) + " differs from 1 by more than 1e-8");
}

double Mollifier::mass() const {
  double m = 0.0;
  for (double w : weights_) m += w;
  return m;
}

Mollifier Mollifier::bump(double support_radius, int quadrature_intervals) {
  if (!(support_radius > 0.0)) throw ArgumentError("Mollifier: support radius must be positive");
  auto shape = [support_radius](double u) {
    const double z = u / support_radius;
    return std::abs(z) < 1.0 ? std::exp(-1.0 / (1.0 - z * z)) : 0.0;
  };
  const double h = 2.0 * support_radius / quadrature_intervals;
  double mass = 0.0;
  for (int q = 0; q <= quadrature_intervals; ++q)
    mass += simpson_weight(q, quadrature_intervals, h) * shape(-support_radius + h * q);
  const double c = 1.0 / mass;
  return Mollifier([shape, c](double u) { return c * shape(u); }, support_radius, quadrature_intervals);
}

// ---------------------------------------------------------------------------

SampledRoughPath signature_lift(const PiecewiseLinearPath& path, int level, double p) {
  if (level < 1 || level > kMaxTensorLevel)
    throw ArgumentError("signature_lift: level must be in [1, " + std::to_string(kMaxTensorLevel) + "]");
  const bool zero_inside = path.start() <= 0.0 && 0.0 <= path.end();
  const PiecewiseLinearPath x = zero_inside ? path.with_breakpoint(0.0) : path;
  const std::size_t anchor = zero_inside ? *x.find_breakpoint(0.0) : 0;
  const int d = x.dim();
  std::vector<GroupElement> points(x.size(), GroupElement::identity(d, level));
  std::vector<double> inc(static_cast<std::size_t>(d));
  for (std::size_t i = anchor; i + 1 < x.size(); ++i) {
    for (int a = 0; a < d; ++a)
      inc[static_cast<std::size_t>(a)] = x.values()(a, static_cast<Eigen::Index>(i + 1)) -
                                         x.values()(a, static_cast<Eigen::Index>(i));
    points[i + 1] = tensor_mul(points[i], segment_signature(inc, level));
  }
  for (std::size_t i = anchor; i > 0; --i) {
    for (int a = 0; a < d; ++a)
      inc[static_cast<std::size_t>(a)] = x.values()(a, static_cast<Eigen::Index>(i - 1)) -
                                         x.values()(a, static_cast<Eigen::Index>(i));
    points[i - 1] = tensor_mul(points[i], segment_signature(inc, level));
  }
  return SampledRoughPath(x.times(), std::move(points), p);
}

double p_variation(const PiecewiseLinearPath& x, double p, std::optional<Interval> interval) {
  if (!(p >= 1.0)) throw ArgumentError("p_variation: p must be >= 1");
  const Interval iv = interval.value_or(x.span());
  if (!(iv.end > iv.start)) return 0.0;
  if (iv.start < x.start() - kTimeTolerance || iv.end > x.end() + kTimeTolerance)
    throw ArgumentError("p_variation: interval outside the path span");
  std::vector<Eigen::VectorXd> pts;
  pts.push_back(x.at(iv.start));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x.times()[i];
    if (t > iv.start && t < iv.end && !same_time(t, iv.start) && !same_time(t, iv.end)) pts.push_back(x.value(i));
  }
  pts.push_back(x.at(iv.end));
  std::vector<double> best(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < i; ++j) m = std::max(m, best[j] + std::pow((pts[i] - pts[j]).norm(), p));
    best[i] = m;
  }
  return std::pow(best.back(), 1.0 / p);
}

namespace {

SampledRoughPath resample_onto(const SampledRoughPath& y, const std::vector<double>& times) {
  if (y.size() == times.size()) {
    bool same = true;
    for (std::size_t i = 0; i < times.size() && same; ++i) same = same_time(y.times()[i], times[i]);
    if (same) return y;
  }
  std::vector<GroupElement> pts;
  pts.reserve(times.size());
  try {
    for (double t : times) pts.push_back(y.at(t));
  } catch (const ArgumentError&) {
    throw ArgumentError("homogeneous_pvar_distance: grid mismatch, second path does not cover the first path's grid");
  }
  return SampledRoughPath(times, std::move(pts), y.p());
}

std::vector<std::size_t> nodes_in(const SampledRoughPath& x, const Interval& iv) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x.times()[i];
    if ((t >= iv.start || same_time(t, iv.start)) && (t <= iv.end || same_time(t, iv.end))) idx.push_back(i);
  }
  return idx;
}

}  // namespace

double homogeneous_pvar_distance(const SampledRoughPath& x, const SampledRoughPath& y_in, double p,
                                 std::optional<Interval> interval) {
  if (!(p >= 1.0)) throw ArgumentError("homogeneous_pvar_distance: p must be >= 1");
  if (x.dim() != y_in.dim() || x.level() != y_in.level())
    throw ArgumentError("homogeneous_pvar_distance: dim/level mismatch");
  const SampledRoughPath y = resample_onto(y_in, x.times());
  const auto idx = nodes_in(x, interval.value_or(x.span()));
  if (idx.size() < 2) return 0.0;
  const std::size_t n = idx.size();
  const int levels = x.level();
  // cost[k][i*n + j] for i < j
  std::vector<std::vector<double>> cost(static_cast<std::size_t>(levels), std::vector<double>(n * n, 0.0));
  std::vector<double> diff;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const GroupElement dx = x.increment(idx[i], idx[j]);
      const GroupElement dy = y.increment(idx[i], idx[j]);
      for (int k = 1; k <= levels; ++k) {
        const auto a = dx[k];
        const auto b = dy[k];
        diff.resize(a.size());
        for (std::size_t q = 0; q < a.size(); ++q) diff[q] = a[q] - b[q];
        cost[static_cast<std::size_t>(k - 1)][i * n + j] = std::pow(level_norm(diff), p / k);
      }
    }
  double result = 0.0;
  std::vector<double> best(n);
  for (int k = 1; k <= levels; ++k) {
    const auto& c = cost[static_cast<std::size_t>(k - 1)];
    best.assign(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < j; ++i) m = std::max(m, best[i] + c[i * n + j]);
      best[j] = m;
    }
    result = std::max(result, std::pow(best.back(), 1.0 / p));
  }
  return result;
}

double homogeneous_pvar_norm(const SampledRoughPath& x, double p, std::optional<Interval> interval) {
  std::vector<GroupElement> ones(x.size(), GroupElement::identity(x.dim(), x.level()));
  return homogeneous_pvar_distance(x, SampledRoughPath(x.times(), std::move(ones), x.p()), p, interval);
}

double glued_pvar_distance(const SampledRoughPath& x, const SampledRoughPath& y, double p, int max_m) {
  double total = 0.0;
  const double lo = std::max(x.span().start, y.span().start);
  const double hi = std::min(x.span().end, y.span().end);
  for (int m = 1; m <= max_m; ++m) {
    const Interval window{std::max(-static_cast<double>(m), lo), std::min(static_cast<double>(m), hi)};
    if (!(window.end > window.start)) continue;
    total += std::ldexp(1.0, -m) * std::min(homogeneous_pvar_distance(x, y, p, window), 1.0);
  }
  return total;
}

PiecewiseLinearPath shift_path(const PiecewiseLinearPath& x, double h) {
  if (h == 0.0) return x;
  const PiecewiseLinearPath y = x.with_breakpoint(h);
  const std::size_t anchor = *y.find_breakpoint(h);
  std::vector<double> times = y.times();
  for (double& t : times) t -= h;
  times[anchor] = 0.0;
  Eigen::MatrixXd values = y.values().colwise() - y.value(anchor);
  return PiecewiseLinearPath(std::move(times), std::move(values));
}

PiecewiseLinearPath mollify(const PiecewiseLinearPath& x, const Mollifier& mu, MollifyOptions options) {
  const double r = mu.support_radius();
  const Interval valid{x.start() + r, x.end() - r};
  if (!(valid.end > valid.start) || -r < x.start() - kTimeTolerance || r > x.end() + kTimeTolerance)
    throw ArgumentError("mollify: insufficient path span for support radius " + format_number(r));
  const Interval range = options.range.value_or(valid);
  if (range.start < valid.start - kTimeTolerance || range.end > valid.end + kTimeTolerance)
    throw ArgumentError("mollify: insufficient path span, requested range needs support radius margin");
  double spacing = options.spacing;
  if (spacing <= 0.0) {
    spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < x.size(); ++i) spacing = std::min(spacing, x.times()[i] - x.times()[i - 1]);
  }
  const EquidistantGrid grid = EquidistantGrid::aligned(spacing, range.start, range.end);
  if (grid.count < 2) throw ArgumentError("mollify: output range holds fewer than 2 grid nodes");

  const auto& nodes = mu.nodes();
  const auto& weights = mu.weights();
  std::vector<Eigen::VectorXd> base(nodes.size());
  for (std::size_t q = 0; q < nodes.size(); ++q) base[q] = x.at(-nodes[q]);

  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(x.dim(), static_cast<Eigen::Index>(grid.count));
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double t = grid.at(i);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.dim());
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      if (weights[q] == 0.0) continue;
      acc += weights[q] * (x.at(t - nodes[q]) - base[q]);
    }
    values.col(static_cast<Eigen::Index>(i)) = acc;
  }
  return PiecewiseLinearPath(grid.times(), std::move(values));
}

PiecewiseLinearPath piecewise_linear_projection(const PiecewiseLinearPath& x, const EquidistantGrid& grid) {
  if (grid.count < 2) throw ArgumentError("piecewise_linear_projection: grid needs at least 2 nodes");
  if (grid.start < x.start() - kTimeTolerance || grid.end() > x.end() + kTimeTolerance)
    throw ArgumentError("piecewise_linear_projection: grid outside the path span");
  return piecewise_linear_projection([&x](double t) { return x.at(t); }, grid);
}

PiecewiseLinearPath piecewise_linear_projection(const std::function<Eigen::VectorXd(double)>& f,
                                                const EquidistantGrid& grid) {
  if (grid.count < 2) throw ArgumentError("piecewise_linear_projection: grid needs at least 2 nodes");
  const Eigen::VectorXd first = f(grid.at(0));
  Eigen::MatrixXd values(first.size(), static_cast<Eigen::Index>(grid.count));
  values.col(0) = first;
  for (std::size_t i = 1; i < grid.count; ++i) values.col(static_cast<Eigen::Index>(i)) = f(grid.at(i));
  return PiecewiseLinearPath(grid.times(), std::move(values));
}

// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const PiecewiseLinearPath& x) {
  nlohmann::json values = nlohmann::json::array();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Eigen::VectorXd v = x.value(i);
    values.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  }
  j = nlohmann::json{{"times", x.times()}, {"values", std::move(values)}};
}

PiecewiseLinearPath path_from_json(const nlohmann::json& j) {
  const auto times = j.at("times").get<std::vector<double>>();
  const auto rows = j.at("values").get<std::vector<std::vector<double>>>();
  if (rows.size() != times.size()) throw ArgumentError("path_from_json: times/values length mismatch");
  if (rows.empty()) throw ArgumentError("path_from_json: empty path");
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd values(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d) throw ArgumentError("path_from_json: ragged values");
    for (Eigen::Index a = 0; a < d; ++a) values(a, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(a)];
  }
  return PiecewiseLinearPath(times, std::move(values));
}

nlohmann::json lift_to_json(const SampledRoughPath& x) {
  return nlohmann::json{{"times", x.times()}, {"p", x.p()}, {"points", x.points()}};
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& os, const PiecewiseLinearPath& x) {
  os << "t";
  for (int a = 0; a < x.dim(); ++a) os << ",x" << (a + 1);
  os << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << format_number(x.times()[i]);
    for (int a = 0; a < x.dim(); ++a) os << ',' << format_number(x.values()(a, static_cast<Eigen::Index>(i)));
    os << '\n';
  }
}

void write_csv(std::ostream& os, const SampledRoughPath& x) {
  const int d = x.dim();
  os << "t";
  for (int k = 1; k <= x.level(); ++k) {
    const std::size_t n = level_size(d, k);
    for (std::size_t q = 0; q < n; ++q) {
      os << ",L" << k;
      std::size_t rem = q;
      std::vector<std::size_t> digits(static_cast<std::size_t>(k));
      for (int i = k - 1; i >= 0; --i) {
        digits[static_cast<std::size_t>(i)] = rem % static_cast<std::size_t>(d);
        rem /= static_cast<std::size_t>(d);
      }
      for (auto dgt : digits) os << '_' << (dgt + 1);
    }
  }
  os << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) {
    os << format_number(x.times()[i]);
    for (int k = 1; k <= x.level(); ++k)
      for (double c : x.point(i)[k]) os << ',' << format_number(c);
    os << '\n';
  }
}

}  // namespace roughflow
