#include "roughflow/rde.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "roughflow/errors.hpp"
#include "roughflow/gaussian.hpp"

namespace roughflow {

FlowMap::FlowMap(std::vector<double> nodes, int dim, Evaluator evaluator)
    : nodes_(std::move(nodes)), dim_(dim), evaluator_(std::move(evaluator)) {
  if (nodes_.size() < 2) throw ArgumentError("FlowMap: need at least two nodes");
}

FlowValue FlowMap::evaluate(double s, double t, const Vec& x, bool with_jacobian) const {
  const Interval sp = span();
  const double tol = kTimeTolerance * std::max(1.0, std::abs(sp.end) + std::abs(sp.start));
  if (s < sp.start - tol || t > sp.end + tol || s > t + tol)
    throw ArgumentError("FlowMap: (s, t) = (" + format_number(s) + ", " + format_number(t) + ") outside [" +
                        format_number(sp.start) + ", " + format_number(sp.end) + "] or reversed");
  if (x.size() != dim_) throw ArgumentError("FlowMap: state dimension mismatch");
  return evaluator_(std::clamp(s, sp.start, sp.end), std::clamp(t, sp.start, sp.end), x, with_jacobian);
}

double flow_composition_residual(const FlowMap& flow, double s, double u, double t, const std::vector<Vec>& points) {
  double worst = 0.0;
  for (const auto& x : points) worst = std::max(worst, (flow(u, t, flow(s, u, x)) - flow(s, t, x)).norm());
  return worst;
}

namespace {

struct CellGrid {
  double start;
  double step;
  std::size_t cells;

  double node(std::size_t k) const { return k == cells ? end_ : start + step * static_cast<double>(k); }
  double end_;

  static CellGrid make(Interval interval, double step) {
    if (!(step > 0.0)) throw ArgumentError("solver: step must be positive");
    const double n = interval.length() / step;
    const double rounded = std::round(n);
    if (rounded < 1.0 || std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
      throw ArgumentError("solver: step " + format_number(step) + " does not divide [" + format_number(interval.start) +
                          ", " + format_number(interval.end) + "]");
    return CellGrid{interval.start, step, static_cast<std::size_t>(rounded), interval.end};
  }

  std::vector<double> nodes() const {
    std::vector<double> out(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) out[k] = node(k);
    return out;
  }

  // Index of the cell containing t (t at a node belongs to the cell to its right).
  std::size_t cell_of(double t) const {
    const double r = (t - start) / step;
    auto k = static_cast<long long>(std::floor(r + 1e-9));
    k = std::clamp<long long>(k, 0, static_cast<long long>(cells) - 1);
    return static_cast<std::size_t>(k);
  }
};

// Advances (y, J) across [c0, c1]; `full_cell` is the cell index when [c0, c1]
// is exactly a grid cell.
using SegmentStep = std::function<void(double, double, std::optional<std::size_t>, Vec&, Mat*)>;

bool blown_up(const Vec& y) { return !y.allFinite() || y.norm() > kBlowUpThreshold; }

FlowValue walk(const CellGrid& grid, double s, double t, Vec y, bool with_jacobian, const SegmentStep& step,
               const char* who) {
  const auto m = y.size();
  Mat j = with_jacobian ? Mat::Identity(m, m) : Mat();
  Mat* jp = with_jacobian ? &j : nullptr;
  if (same_time(s, t)) return {y, j};
  std::size_t k = grid.cell_of(s);
  double c0 = s;
  while (true) {
    const double node_end = grid.node(k + 1);
    const bool last = t <= node_end + kTimeTolerance * std::max(1.0, std::abs(node_end));
    const double c1 = last ? t : node_end;
    const bool full = same_time(c0, grid.node(k)) && same_time(c1, node_end);
    const Vec y_saved = y;
    const Mat j_saved = j;
    step(c0, c1, full ? std::optional<std::size_t>(k) : std::nullopt, y, jp);
    if (blown_up(y)) {
      y = y_saved;
      j = j_saved;
      constexpr int kRetry = 8;
      for (int r = 0; r < kRetry; ++r) {
        const double a = c0 + (c1 - c0) * r / kRetry;
        const double b = r + 1 == kRetry ? c1 : c0 + (c1 - c0) * (r + 1) / kRetry;
        step(a, b, std::nullopt, y, jp);
        if (blown_up(y))
          throw DivergenceError(std::string(who) + ": solution left the ball of radius 1e8 at t = " + format_number(c0),
                                c0);
      }
    }
    if (last) break;
    c0 = c1;
    ++k;
    if (k >= grid.cells) break;
  }
  return {y, j};
}

struct RdeData {
  std::vector<VectorField> fields;
  SampledRoughPath x;
  CellGrid grid;
  std::vector<GroupElement> cell_increments;
  SolveOptions options;
};

void rde_update(const RdeData& data, const GroupElement& inc, Vec& y, Mat* jac) {
  const auto& f = data.fields;
  const std::size_t d = f.size();
  const auto m = y.size();
  std::vector<Vec> s(d);
  std::vector<Mat> ds(d);
  for (std::size_t i = 0; i < d; ++i) {
    s[i] = f[i](y);
    ds[i] = f[i].jacobian(y);
  }
  Vec dy = Vec::Zero(m);
  Mat dm = jac ? Mat::Identity(m, m) : Mat();
  const std::size_t xd = static_cast<std::size_t>(data.x.dim());
  for (std::size_t i = 0; i < d; ++i) {
    const double x1 = inc[1][i];
    dy += x1 * s[i];
    if (jac) dm += x1 * ds[i];
  }
  std::vector<std::vector<Mat>> hs;
  if (jac) {
    hs.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      if (!f[i].hessian) throw ArgumentError("solve_rde: Jacobian propagation needs field Hessians");
      hs[i] = f[i].hessian(y);
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t jj = 0; jj < d; ++jj) {
      const double x2 = inc[2][i * xd + jj];
      if (x2 == 0.0) continue;
      dy += x2 * (ds[jj] * s[i]);
      if (jac) dm += x2 * (hessian_apply(hs[jj], s[i]) + ds[jj] * ds[i]);
    }
  y += dy;
  if (jac) *jac = dm * *jac;
}

void rde_segment(const RdeData& data, double c0, double c1, const GroupElement& inc, Vec& y, Mat* jac, int depth) {
  if (depth < 30 && homogeneous_size(inc) > data.options.split_threshold) {
    const double mid = 0.5 * (c0 + c1);
    rde_segment(data, c0, mid, data.x.increment(c0, mid), y, jac, depth + 1);
    rde_segment(data, mid, c1, data.x.increment(mid, c1), y, jac, depth + 1);
    return;
  }
  rde_update(data, inc, y, jac);
}

std::shared_ptr<RdeData> make_rde_data(const RDEProblem& problem, SolveOptions options) {
  const auto& x = problem.driver;
  if (x.level() < 2) throw ArgumentError("solve_rde: driver must carry level 2");
  if (static_cast<std::size_t>(x.dim()) != problem.sigma.size())
    throw ArgumentError("solve_rde: driver dimension " + std::to_string(x.dim()) + " but " +
                        std::to_string(problem.sigma.size()) + " fields");
  if (problem.y0.size() != problem.sigma.dim()) throw ArgumentError("solve_rde: y0 dimension mismatch");
  if (!problem.y0.allFinite()) throw ArgumentError("solve_rde: y0 not finite");
  const Interval span = x.span();
  if (problem.interval.start < span.start - kTimeTolerance || problem.interval.end > span.end + kTimeTolerance)
    throw ArgumentError("solve_rde: interval outside the driver span");
  auto data = std::make_shared<RdeData>(
      RdeData{problem.sigma.fields, x, CellGrid::make(problem.interval, options.step), {}, options});
  data->cell_increments.reserve(data->grid.cells);
  for (std::size_t k = 0; k < data->grid.cells; ++k)
    data->cell_increments.push_back(x.increment(data->grid.node(k), data->grid.node(k + 1)));
  return data;
}

SegmentStep rde_stepper(std::shared_ptr<const RdeData> data) {
  return [data](double c0, double c1, std::optional<std::size_t> cell, Vec& y, Mat* jac) {
    if (cell)
      rde_segment(*data, c0, c1, data->cell_increments[*cell], y, jac, 0);
    else
      rde_segment(*data, c0, c1, data->x.increment(c0, c1), y, jac, 0);
  };
}

FlowMap rde_flow(std::shared_ptr<const RdeData> data, int dim) {
  SegmentStep step = rde_stepper(data);
  return FlowMap(data->grid.nodes(), dim, [data, step](double s, double t, const Vec& x, bool jac) {
    return walk(data->grid, s, t, x, jac, step, "solve_rde");
  });
}

}  // namespace

RDESolution solve_rde(const RDEProblem& problem, SolveOptions options) {
  auto data = make_rde_data(problem, options);
  const int m = static_cast<int>(problem.y0.size());
  const SegmentStep step = rde_stepper(data);
  std::vector<double> times = data->grid.nodes();
  Mat states(m, static_cast<Eigen::Index>(times.size()));
  Vec y = problem.y0;
  Mat jac = Mat::Identity(m, m);
  states.col(0) = y;
  for (std::size_t k = 0; k < data->grid.cells; ++k) {
    FlowValue v = walk(data->grid, times[k], times[k + 1], y, options.jacobian, step, "solve_rde");
    y = v.state;
    if (options.jacobian) jac = v.jacobian * jac;
    states.col(static_cast<Eigen::Index>(k + 1)) = y;
  }
  return RDESolution{std::move(times), std::move(states), options.jacobian ? jac : Mat(), rde_flow(data, m)};
}

FlowMap solve_driver_flow(const RoughDriver& driver, Interval interval, SolveOptions options) {
  if (!(driver.rho > driver.p / 3.0))
    throw ConfigError("solve_driver_flow: rho = " + format_number(driver.rho) + " must exceed p/3 = " +
                      format_number(driver.p / 3.0));
  const Interval span = driver.span();
  if (interval.start < span.start - kTimeTolerance || interval.end > span.end + kTimeTolerance)
    throw ArgumentError("solve_driver_flow: interval outside the driver grid");
  const CellGrid grid = CellGrid::make(interval, options.step);
  auto d = std::make_shared<RoughDriver>(driver);
  const double threshold = options.split_threshold;

  // Self-referential bisection; the weak pointer avoids a reference cycle.
  auto holder = std::make_shared<std::function<void(double, double, Vec&, Mat*, int)>>();
  *holder = [d, threshold, holder_weak = std::weak_ptr<std::function<void(double, double, Vec&, Mat*, int)>>(holder)](
                double c0, double c1, Vec& x, Mat* jac, int depth) {
    const auto self = holder_weak.lock();
    const Vec v = d->V(c0, c1, x);
    if (depth < 30 && v.norm() > threshold) {
      const double mid = 0.5 * (c0 + c1);
      (*self)(c0, mid, x, jac, depth + 1);
      (*self)(mid, c1, x, jac, depth + 1);
      return;
    }
    const Mat dv = d->DV(c0, c1, x);
    const Vec w = d->W(c0, c1, x);
    if (jac) {
      const auto m = x.size();
      const Mat dm =
          Mat::Identity(m, m) + dv + d->DW(c0, c1, x) + 0.5 * (hessian_apply(d->D2V(c0, c1, x), v) + dv * dv);
      *jac = dm * *jac;
    }
    x += v + w + 0.5 * dv * v;
  };
  SegmentStep step = [holder](double c0, double c1, std::optional<std::size_t>, Vec& x, Mat* jac) {
    (*holder)(c0, c1, x, jac, 0);
  };
  return FlowMap(grid.nodes(), driver.state_dim, [grid, step](double s, double t, const Vec& x, bool jac) {
    return walk(grid, s, t, x, jac, step, "solve_driver_flow");
  });
}

namespace {

double squared_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

GrowthReport drift_growth_check(const DriftSpec& drift, int dim, double radius, std::size_t samples,
                                std::uint64_t seed, double growth_limit) {
  if (!(radius > 0.0)) throw ArgumentError("drift_growth_check: radius must be positive");
  if (samples < 1000) throw ArgumentError("drift_growth_check: at least 1000 samples required");
  auto constants = [&](double r, std::uint64_t stream) {
    std::mt19937_64 rng(derive_seed(seed, stream));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Vec> pts(samples, Vec(dim));
    for (auto& x : pts) {
      for (int a = 0; a < dim; ++a) x(a) = normal(rng);
      const double n = x.norm();
      x *= (n > 0 ? r * std::pow(unif(rng), 1.0 / dim) / n : 0.0);
    }
    GrowthConstants c{r, 0.0, 0.0, 0.0, 0.0};
    std::vector<Vec> bs(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const Vec& x = pts[i];
      bs[i] = drift.b(x);
      const double bx = bs[i].dot(x);
      const double n2 = x.squaredNorm();
      c.c1 = std::max(c.c1, bx / (1.0 + n2));
      if (n2 > 0.0) c.c2 = std::max(c.c2, (bs[i] - bx * x / n2).norm() / (1.0 + std::sqrt(n2)));
    }
    for (std::size_t i = 0; i + 1 < samples; ++i) {
      const Vec dx = pts[i] - pts[i + 1];
      const Vec db = bs[i] - bs[i + 1];
      const double n2 = dx.squaredNorm();
      c.c3 = std::max(c.c3, squared_ratio(db.dot(dx), n2));
      if (n2 > 0.0) c.c4 = std::max(c.c4, db.norm() / std::sqrt(n2));
    }
    return c;
  };
  const GrowthConstants a = constants(radius, 0);
  const GrowthConstants b = constants(2.0 * radius, 1);
  auto finite = [](const GrowthConstants& c) {
    return std::isfinite(c.c1) && std::isfinite(c.c2) && std::isfinite(c.c3) && std::isfinite(c.c4);
  };
  const bool stable =
      b.c1 <= growth_limit * a.c1 + 1e-12 && b.c2 <= growth_limit * a.c2 + 1e-12;
  return GrowthReport{a, b, growth_limit, finite(a) && finite(b) && stable};
}

std::vector<double> drift_subintervals(const SampledRoughPath& x, double origin, double s, double t, double step,
                                       double p, double delta) {
  if (!(t >= s)) throw ArgumentError("drift_subintervals: t < s");
  std::vector<double> bounds{s};
  if (same_time(s, t)) {
    bounds.push_back(t);
    return bounds;
  }
  // candidate points: grid nodes strictly inside (s, t), then t
  std::vector<double> cand;
  auto k = static_cast<long long>(std::floor((s - origin) / step + 1e-9)) + 1;
  for (;; ++k) {
    const double c = origin + step * static_cast<double>(k);
    if (c >= t - kTimeTolerance * std::max(1.0, std::abs(t))) break;
    if (c > s + kTimeTolerance * std::max(1.0, std::abs(s))) cand.push_back(c);
  }
  cand.push_back(t);

  const int levels = std::min(x.level(), static_cast<int>(std::floor(p)));
  std::vector<double> pts{s};
  std::vector<std::vector<double>> best(static_cast<std::size_t>(levels), std::vector<double>{0.0});
  std::size_t i = 0;
  while (i < cand.size()) {
    const double q = cand[i];
    double functional = 0.0;
    std::vector<double> next(static_cast<std::size_t>(levels), 0.0);
    std::vector<GroupElement> incs;
    incs.reserve(pts.size());
    for (double a : pts) incs.push_back(x.increment(a, q));
    for (int lv = 1; lv <= levels; ++lv) {
      double b = 0.0;
      for (std::size_t j = 0; j < pts.size(); ++j)
        b = std::max(b, best[static_cast<std::size_t>(lv - 1)][j] +
                            std::pow(level_norm(incs[j][lv]), p / lv));
      next[static_cast<std::size_t>(lv - 1)] = b;
      functional = std::max(functional, b);
    }
    functional += q - pts.front();
    if (functional > delta && pts.size() > 1) {
      // cut at the previous point and restart from it
      const double cut = pts.back();
      bounds.push_back(cut);
      pts.assign(1, cut);
      for (auto& b : best) b.assign(1, 0.0);
      continue;
    }
    pts.push_back(q);
    for (int lv = 0; lv < levels; ++lv) best[static_cast<std::size_t>(lv)].push_back(next[static_cast<std::size_t>(lv)]);
    ++i;
  }
  bounds.push_back(t);
  return bounds;
}

namespace {

double condition_number(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& sv = svd.singularValues();
  const double lo = sv(sv.size() - 1);
  return lo > 0.0 ? sv(0) / lo : INFINITY;
}

}  // namespace

FlowMap drift_transform_solve(const RDEProblem& problem, const DriftSpec& drift, DriftOptions options) {
  SolveOptions so = options.solve;
  so.jacobian = true;
  auto data = make_rde_data(problem, so);
  const SegmentStep step = rde_stepper(data);
  const int m = static_cast<int>(problem.y0.size());
  const double origin = problem.interval.start;
  const double cell = so.step;
  const auto b = drift.b;

  auto psi = [data, step](double s, double u, const Vec& y) { return walk(data->grid, s, u, y, true, step, "drift_transform_solve"); };

  auto solve = [=](double s, double t, const Vec& x0) -> Vec {
    const std::vector<double> bounds =
        drift_subintervals(data->x, origin, s, t, cell, options.p, options.delta);
    Vec x = x0;
    for (std::size_t j = 0; j + 1 < bounds.size(); ++j) {
      const double a = bounds[j];
      const double e = bounds[j + 1];
      if (same_time(a, e)) continue;
      auto rhs = [&](double u, const Vec& y) -> Vec {
        const FlowValue v = psi(a, u, y);
        const double cond = condition_number(v.jacobian);
        if (cond > 1e12)
          throw NumericalError("drift_transform_solve: flow Jacobian condition number " + format_number(cond) +
                               " at t = " + format_number(u));
        if (!v.state.allFinite() || v.state.norm() > kBlowUpThreshold)
          throw DivergenceError("drift_transform_solve: solution left the ball of radius 1e8 at t = " +
                                    format_number(u),
                                u);
        return v.jacobian.partialPivLu().solve(b(v.state));
      };
      const auto n = static_cast<long long>(
          std::max(1.0, std::ceil((e - a) / (cell / options.ode_substeps) - 1e-9)));
      const double h = (e - a) / static_cast<double>(n);
      Vec y = x;
      for (long long k = 0; k < n; ++k) {
        const double u = a + h * static_cast<double>(k);
        const double u1 = k + 1 == n ? e : a + h * static_cast<double>(k + 1);
        const double hh = u1 - u;
        const Vec k1 = rhs(u, y);
        const Vec k2 = rhs(u + 0.5 * hh, y + 0.5 * hh * k1);
        const Vec k3 = rhs(u + 0.5 * hh, y + 0.5 * hh * k2);
        const Vec k4 = rhs(u1, y + hh * k3);
        y += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite() || y.norm() > kBlowUpThreshold)
          throw DivergenceError("drift_transform_solve: auxiliary ODE left the ball of radius 1e8 at t = " +
                                    format_number(u1),
                                u);
      }
      x = psi(a, e, y).state;
    }
    return x;
  };

  return FlowMap(data->grid.nodes(), m, [solve, m](double s, double t, const Vec& x, bool jac) {
    FlowValue out{solve(s, t, x), Mat()};
    if (jac) {
      out.jacobian.resize(m, m);
      for (int a = 0; a < m; ++a) {
        const double h = 1e-6 * std::max(1.0, std::abs(x(a)));
        Vec xp = x, xm = x;
        xp(a) += h;
        xm(a) -= h;
        out.jacobian.col(a) = (solve(s, t, xp) - solve(s, t, xm)) / (2.0 * h);
      }
    }
    return out;
  });
}

namespace {

VectorField drift_field(const DriftSpec& drift, int dim) {
  auto b = drift.b;
  VectorField f;
  f.dim = dim;
  f.value = b;
  f.jacobian = [b, dim](const Vec& x) -> Mat {
    Mat j(dim, dim);
    for (int a = 0; a < dim; ++a) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(a)));
      Vec xp = x, xm = x;
      xp(a) += h;
      xm(a) -= h;
      j.col(a) = (b(xp) - b(xm)) / (2.0 * h);
    }
    return j;
  };
  return f;
}

}  // namespace

Vec joint_scheme_solve(const RDEProblem& problem, const DriftSpec& drift, double step) {
  const PiecewiseLinearPath base = problem.driver.level_one();
  const int d = base.dim();
  Mat values(d + 1, static_cast<Eigen::Index>(base.size()));
  for (std::size_t i = 0; i < base.size(); ++i) {
    values(0, static_cast<Eigen::Index>(i)) = base.times()[i];
    values.block(1, static_cast<Eigen::Index>(i), d, 1) = base.value(i);
  }
  const PiecewiseLinearPath augmented(base.times(), std::move(values));
  RDEProblem joint{problem.sigma, signature_lift(augmented, 2, problem.driver.p()), problem.y0, problem.interval};
  joint.sigma.fields.insert(joint.sigma.fields.begin(), drift_field(drift, static_cast<int>(problem.y0.size())));
  SolveOptions so;
  so.step = step;
  so.jacobian = false;
  const RDESolution sol = solve_rde(joint, so);
  return sol.states.col(sol.states.cols() - 1);
}

Vec joint_euler_solve(const RDEProblem& problem, const DriftSpec& drift, double step) {
  SolveOptions so;
  so.step = step;
  so.jacobian = false;
  auto data = make_rde_data(problem, so);
  Vec y = problem.y0;
  for (std::size_t k = 0; k < data->grid.cells; ++k) {
    const double c0 = data->grid.node(k);
    const double c1 = data->grid.node(k + 1);
    const Vec drift_term = drift.b(y) * (c1 - c0);
    rde_segment(*data, c0, c1, data->cell_increments[k], y, nullptr, 0);
    y += drift_term;
    if (blown_up(y)) throw DivergenceError("joint_euler_solve: solution left the ball of radius 1e8", c0);
  }
  return y;
}

RdsCocycleResidual rds_cocycle_residual(const FlowMap& phi_omega, const FlowMap& phi_shifted, double h, double s,
                                        double t, const std::vector<Vec>& points) {
  if (phi_omega.dim() != phi_shifted.dim()) throw ArgumentError("rds_cocycle_residual: discretization mismatch");
  RdsCocycleResidual r{0.0, 0.0};
  for (const auto& x : points) {
    r.two_parameter = std::max(r.two_parameter, (phi_omega(s + h, t + h, x) - phi_shifted(s, t, x)).norm());
    const Vec first = phi_omega(0.0, h, x);
    r.one_parameter = std::max(r.one_parameter, (phi_omega(0.0, h + t, x) - phi_shifted(0.0, t, first)).norm());
  }
  return r;
}

LyapunovEstimate top_lyapunov_estimate(const std::vector<FlowMap>& flows, const Vec& x0, double horizon,
                                       double renormalize_every) {
  if (flows.empty()) throw ArgumentError("top_lyapunov_estimate: no flows");
  const double blocks = horizon / renormalize_every;
  const auto n = static_cast<long long>(std::llround(blocks));
  if (n < 1 || std::abs(blocks - static_cast<double>(n)) > 1e-9)
    throw ArgumentError("top_lyapunov_estimate: horizon must be a multiple of the renormalization interval");
  std::vector<double> values;
  values.reserve(flows.size());
  for (const auto& flow : flows) {
    Vec x = x0;
    const auto m = x.size();
    Mat q = Mat::Identity(m, m);
    double sum = 0.0;
    for (long long k = 0; k < n; ++k) {
      const double a = renormalize_every * static_cast<double>(k);
      const FlowValue v = flow.evaluate(a, a + renormalize_every, x, true);
      Eigen::HouseholderQR<Mat> qr(v.jacobian * q);
      const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
      const double lead = std::abs(r(0, 0));
      if (!(lead > 0.0) || !std::isfinite(lead))
        throw NumericalError("top_lyapunov_estimate: degenerate Jacobian at t = " + format_number(a));
      sum += std::log(lead);
      q = qr.householderQ();
      x = v.state;
    }
    values.push_back(sum / horizon);
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double se =
      values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()))
                        : 0.0;
  return {mean, se, values.size()};
}

nlohmann::json to_json(const GrowthReport& report) {
  auto c = [](const GrowthConstants& g) {
    return nlohmann::json{{"radius", g.radius}, {"C1", g.c1}, {"C2", g.c2}, {"C3", g.c3}, {"C4", g.c4}};
  };
  return nlohmann::json{
      {"at_R", c(report.at_r)}, {"at_2R", c(report.at_2r)}, {"growth_limit", report.growth_limit}, {"pass", report.pass}};
}

}  // namespace roughflow
