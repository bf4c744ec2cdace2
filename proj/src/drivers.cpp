#include "roughflow/drivers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "roughflow/errors.hpp"

namespace roughflow {

namespace {

void for_each_box_node(int dim, double radius, int nodes, const std::function<void(const Vec&)>& fn) {
  if (nodes < 2) throw ArgumentError("box sampling needs at least 2 nodes per axis");
  std::vector<int> idx(static_cast<std::size_t>(dim), 0);
  Vec x(dim);
  const double h = 2.0 * radius / (nodes - 1);
  while (true) {
    for (int a = 0; a < dim; ++a) x(a) = -radius + h * idx[static_cast<std::size_t>(a)];
    fn(x);
    int a = 0;
    while (a < dim && ++idx[static_cast<std::size_t>(a)] == nodes) idx[static_cast<std::size_t>(a++)] = 0;
    if (a == dim) break;
  }
}

double hessian_norm(const std::vector<Mat>& h) {
  double s = 0.0;
  for (const auto& m : h) s += m.squaredNorm();
  return std::sqrt(s);
}

std::vector<Mat> zero_hessian(int dim) { return std::vector<Mat>(static_cast<std::size_t>(dim), Mat::Zero(dim, dim)); }

}  // namespace

Mat hessian_apply(const std::vector<Mat>& hessian, const Vec& g) {
  const auto m = static_cast<Eigen::Index>(hessian.size());
  Mat out(m, g.size());
  for (Eigen::Index a = 0; a < m; ++a) out.row(a) = (hessian[static_cast<std::size_t>(a)] * g).transpose();
  return out;
}

VectorField lie_bracket(const VectorField& f, const VectorField& g) {
  if (f.dim != g.dim) throw ArgumentError("lie_bracket: dimension mismatch");
  VectorField out;
  out.dim = f.dim;
  out.value = [f, g](const Vec& x) -> Vec { return g.jacobian(x) * f(x) - f.jacobian(x) * g(x); };
  out.jacobian = [f, g](const Vec& x) -> Mat {
    if (!f.hessian || !g.hessian) throw ArgumentError("lie_bracket: Jacobian of the bracket needs both Hessians");
    const Vec fx = f(x);
    const Vec gx = g(x);
    const Mat df = f.jacobian(x);
    const Mat dg = g.jacobian(x);
    return hessian_apply(g.hessian(x), fx) + dg * df - hessian_apply(f.hessian(x), gx) - df * dg;
  };
  return out;
}

VectorField linear_field(Mat a) {
  if (a.rows() != a.cols()) throw ArgumentError("linear_field: matrix must be square");
  const int m = static_cast<int>(a.rows());
  return VectorField{m, [a](const Vec& x) -> Vec { return a * x; }, [a](const Vec&) -> Mat { return a; },
                     [m](const Vec&) { return zero_hessian(m); }};
}

VectorField constant_field(Vec v) {
  const int m = static_cast<int>(v.size());
  return VectorField{m, [v](const Vec&) -> Vec { return v; }, [m](const Vec&) -> Mat { return Mat::Zero(m, m); },
                     [m](const Vec&) { return zero_hessian(m); }};
}

VectorFieldFamily VectorFieldFamily::truncated(std::size_t k) const {
  if (k > fields.size()) throw ArgumentError("truncation exceeds the number of stored fields");
  VectorFieldFamily out = *this;
  out.fields.resize(k);
  return out;
}

VectorFieldFamily VectorFieldFamily::scaled(double c) const {
  VectorFieldFamily out = *this;
  for (auto& f : out.fields) {
    const VectorField g = f;
    f.value = [g, c](const Vec& x) -> Vec { return c * g(x); };
    f.jacobian = [g, c](const Vec& x) -> Mat { return c * g.jacobian(x); };
    if (g.hessian)
      f.hessian = [g, c](const Vec& x) {
        auto h = g.hessian(x);
        for (auto& m : h) m *= c;
        return h;
      };
  }
  out.kappa *= std::abs(c);
  return out;
}

double sup_box_c2(const VectorField& f, double radius, int nodes) {
  double best = 0.0;
  for_each_box_node(f.dim, radius, nodes, [&](const Vec& x) {
    double v = f(x).norm() + f.jacobian(x).norm();
    if (f.hessian) v += hessian_norm(f.hessian(x));
    best = std::max(best, v);
  });
  return best;
}

double tail_ratio(const VectorFieldFamily& family, double radius, int nodes) {
  const std::size_t k = family.size();
  if (k < 2) return 0.0;
  std::vector<double> sizes;
  for (const auto& f : family.fields) sizes.push_back(sup_box_c2(f, radius, nodes));
  double worst = 0.0;
  for (std::size_t n = std::max<std::size_t>(1, k / 2); n < k; ++n) {
    if (sizes[n - 1] == 0.0) {
      if (sizes[n] > 0.0) return INFINITY;
      continue;
    }
    worst = std::max(worst, sizes[n] / sizes[n - 1]);
  }
  return worst;
}

VectorFieldFamily linear_fields(const std::vector<Mat>& matrices) {
  if (matrices.empty()) throw ArgumentError("linear_fields: no matrices");
  VectorFieldFamily out;
  out.name = "linear_fields";
  for (const auto& a : matrices) {
    if (a.rows() != matrices.front().rows()) throw ArgumentError("linear_fields: matrices differ in size");
    out.fields.push_back(linear_field(a));
  }
  return out;
}

VectorFieldFamily rotation_fields(int count) {
  if (count < 1 || count > 3) throw ArgumentError("rotation_fields: count must be 1, 2 or 3");
  Mat rot(2, 2), hyp(2, 2), swap(2, 2);
  rot << 0, -1, 1, 0;
  hyp << 1, 0, 0, -1;
  swap << 0, 1, 1, 0;
  std::vector<Mat> ms{rot, hyp, swap};
  ms.resize(static_cast<std::size_t>(count));
  VectorFieldFamily out = linear_fields(ms);
  out.name = "rotation_fields";
  return out;
}

VectorFieldFamily constant_fields(int dim, int count) {
  if (dim < 1 || count < 1 || count > dim) throw ArgumentError("constant_fields: need 1 <= count <= dim");
  VectorFieldFamily out;
  out.name = "constant_fields";
  for (int i = 0; i < count; ++i) out.fields.push_back(constant_field(Vec::Unit(dim, i)));
  return out;
}

VectorFieldFamily bump_fields(int dim, int count, double ratio, double width) {
  if (dim < 1 || count < 1) throw ArgumentError("bump_fields: dim and count must be positive");
  if (!(ratio > 0.0) || !(width > 0.0)) throw ArgumentError("bump_fields: ratio and width must be positive");
  VectorFieldFamily out;
  out.name = "bump_fields";
  out.kappa = 1.0;
  out.eta = 2.0;
  out.gamma = 1.0;
  const double w2 = width * width;
  for (int n = 1; n <= count; ++n) {
    Vec c(dim), dir(dim);
    for (int a = 0; a < dim; ++a) {
      c(a) = 0.5 * std::sin(1.3 * n + 0.7 * a + 0.4);
      dir(a) = std::cos(0.9 * n + 1.1 * a);
    }
    dir /= dir.norm();
    const double amp = std::pow(ratio, n - 1);
    auto phi = [c, amp, w2](const Vec& x) { return amp * std::exp(-(x - c).squaredNorm() / (2.0 * w2)); };
    VectorField f;
    f.dim = dim;
    f.value = [phi, dir](const Vec& x) -> Vec { return phi(x) * dir; };
    f.jacobian = [phi, dir, c, w2](const Vec& x) -> Mat {
      const Vec grad = -phi(x) * (x - c) / w2;
      return dir * grad.transpose();
    };
    f.hessian = [phi, dir, c, w2, dim](const Vec& x) {
      const Vec r = x - c;
      const Mat h = phi(x) * (r * r.transpose() / (w2 * w2) - Mat::Identity(dim, dim) / w2);
      std::vector<Mat> out(static_cast<std::size_t>(dim));
      for (int a = 0; a < dim; ++a) out[static_cast<std::size_t>(a)] = dir(a) * h;
      return out;
    };
    out.fields.push_back(std::move(f));
  }
  return out;
}

RoughDriver zero_driver(std::vector<double> grid, int state_dim, double p, double rho) {
  RoughDriver d;
  d.grid = std::move(grid);
  d.state_dim = state_dim;
  d.p = p;
  d.rho = rho;
  d.V = [state_dim](double, double, const Vec&) -> Vec { return Vec::Zero(state_dim); };
  d.W = d.V;
  d.DV = [state_dim](double, double, const Vec&) -> Mat { return Mat::Zero(state_dim, state_dim); };
  d.DW = d.DV;
  d.D2V = [state_dim](double, double, const Vec&) { return zero_hessian(state_dim); };
  return d;
}

namespace {

struct SeriesData {
  SampledRoughPath x;
  std::vector<VectorField> fields;
  // brackets[i][j - i - 1] = [sigma_i, sigma_j], i < j
  std::vector<std::vector<VectorField>> brackets;
  int d;  // dimension of x
  std::size_t k;
};

RoughDriver series_driver(const VectorFieldFamily& sigma, const SampledRoughPath& x, std::size_t k, double rho) {
  if (x.level() < 2) throw ArgumentError("driver: the rough path must carry level 2");
  if (k == 0) throw ArgumentError("driver: no fields");
  auto data = std::make_shared<SeriesData>(SeriesData{x, {}, {}, x.dim(), k});
  data->fields.assign(sigma.fields.begin(), sigma.fields.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t i = 0; i < k; ++i) {
    data->brackets.emplace_back();
    for (std::size_t j = i + 1; j < k; ++j) data->brackets[i].push_back(lie_bracket(data->fields[i], data->fields[j]));
  }
  const int m = sigma.dim();
  RoughDriver out;
  out.grid = x.times();
  out.state_dim = m;
  out.p = x.p();
  out.rho = rho;

  // Antisymmetric pairing 1/2 (A^{ij} - A^{ji}) for i < j.
  auto area = [data](const GroupElement& inc, std::size_t i, std::size_t j) {
    const auto dd = static_cast<std::size_t>(data->d);
    return 0.5 * (inc[2][i * dd + j] - inc[2][j * dd + i]);
  };
  out.V = [data, m](double s, double t, const Vec& y) -> Vec {
    const GroupElement inc = data->x.increment(s, t);
    Vec v = Vec::Zero(m);
    for (std::size_t i = 0; i < data->k; ++i) v += inc[1][i] * data->fields[i](y);
    return v;
  };
  out.DV = [data, m](double s, double t, const Vec& y) -> Mat {
    const GroupElement inc = data->x.increment(s, t);
    Mat v = Mat::Zero(m, m);
    for (std::size_t i = 0; i < data->k; ++i) v += inc[1][i] * data->fields[i].jacobian(y);
    return v;
  };
  out.D2V = [data, m](double s, double t, const Vec& y) {
    const GroupElement inc = data->x.increment(s, t);
    std::vector<Mat> h = zero_hessian(m);
    for (std::size_t i = 0; i < data->k; ++i) {
      if (!data->fields[i].hessian) throw ArgumentError("driver: field without Hessian");
      const auto hi = data->fields[i].hessian(y);
      for (int a = 0; a < m; ++a) h[static_cast<std::size_t>(a)] += inc[1][i] * hi[static_cast<std::size_t>(a)];
    }
    return h;
  };
  out.W = [data, m, area](double s, double t, const Vec& y) -> Vec {
    const GroupElement inc = data->x.increment(s, t);
    Vec w = Vec::Zero(m);
    for (std::size_t i = 0; i < data->k; ++i)
      for (std::size_t j = i + 1; j < data->k; ++j) {
        const double a = area(inc, i, j);
        if (a != 0.0) w += a * data->brackets[i][j - i - 1](y);
      }
    return w;
  };
  out.DW = [data, m, area](double s, double t, const Vec& y) -> Mat {
    const GroupElement inc = data->x.increment(s, t);
    Mat w = Mat::Zero(m, m);
    for (std::size_t i = 0; i < data->k; ++i)
      for (std::size_t j = i + 1; j < data->k; ++j) {
        const double a = area(inc, i, j);
        if (a != 0.0) w += a * data->brackets[i][j - i - 1].jacobian(y);
      }
    return w;
  };
  out.raw = SecondOrderData{data->fields, [data](double s, double t) -> Mat {
                              const GroupElement inc = data->x.increment(s, t);
                              const auto k = static_cast<Eigen::Index>(data->k);
                              Mat c(k, k);
                              for (Eigen::Index i = 0; i < k; ++i)
                                for (Eigen::Index j = 0; j < k; ++j)
                                  c(i, j) = inc[2][static_cast<std::size_t>(i * data->d + j)];
                              return c;
                            }};
  return out;
}

}  // namespace

RoughDriver driver_from_rough_path(const VectorFieldFamily& sigma, const SampledRoughPath& x, double rho) {
  if (static_cast<std::size_t>(x.dim()) != sigma.size())
    throw ArgumentError("driver_from_rough_path: path dimension " + std::to_string(x.dim()) + " but " +
                        std::to_string(sigma.size()) + " fields");
  if (x.level() < 2) throw ArgumentError("driver_from_rough_path: the rough path must carry level 2");
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double r = geometricity_residual(x.increment(i, i + 1));
    if (r > 1e-8)
      throw ArgumentError("driver_from_rough_path: non-geometric increment at t = " + format_number(x.times()[i]) +
                          " (residual " + format_number(r) + ")");
  }
  return series_driver(sigma, x, sigma.size(), rho);
}

RoughDriver gaussian_driver(const VectorFieldFamily& sigma, const SampledRoughPath& joint_lift, std::size_t truncation,
                            double rho, double max_tail_ratio) {
  if (truncation > sigma.size() || truncation > static_cast<std::size_t>(joint_lift.dim()))
    throw ArgumentError("gaussian_driver: truncation " + std::to_string(truncation) + " exceeds the available fields (" +
                        std::to_string(sigma.size()) + ") or paths (" + std::to_string(joint_lift.dim()) + ")");
  const double ratio = tail_ratio(sigma.truncated(truncation));
  if (ratio > max_tail_ratio)
    throw ConfigError("gaussian_driver: tail ratio " + format_number(ratio) + " above bound " +
                      format_number(max_tail_ratio));
  return series_driver(sigma, joint_lift, truncation, rho);
}

RoughDriver corrupt_cell(const RoughDriver& d, double a, double b, Vec offset) {
  RoughDriver out = d;
  const DriverField w = d.W;
  out.W = [w, a, b, offset](double s, double t, const Vec& x) -> Vec {
    Vec v = w(s, t, x);
    if (same_time(s, a) && same_time(t, b)) v += offset;
    return v;
  };
  return out;
}

DriverNormEstimate driver_norm(const RoughDriver& d, Interval interval, int sample_times, BoxSpec box) {
  if (!(interval.end > interval.start)) throw ArgumentError("driver_norm: degenerate interval");
  if (sample_times < 2) throw ArgumentError("driver_norm: need at least 2 sample times");
  const int m = d.state_dim;
  const int nodes = box.nodes;
  const double h = 2.0 * box.radius / (nodes - 1);
  std::size_t total = 1;
  for (int a = 0; a < m; ++a) total *= static_cast<std::size_t>(nodes);
  std::vector<Vec> pts;
  pts.reserve(total);
  for_each_box_node(m, box.radius, nodes, [&](const Vec& x) { pts.push_back(x); });
  std::vector<std::size_t> stride(static_cast<std::size_t>(m), 1);
  for (int a = 1; a < m; ++a) stride[static_cast<std::size_t>(a)] = stride[static_cast<std::size_t>(a - 1)] * nodes;

  // Holder quotient of a sampled tensor field at separations h, 2h, 4h along each axis.
  auto holder = [&](const std::vector<Vec>& vals) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int a = 0; a < m; ++a) {
        const auto coord = static_cast<int>((i / stride[static_cast<std::size_t>(a)]) % nodes);
        for (int k = 1; k <= 4; k *= 2) {
          if (coord + k >= nodes) break;
          const std::size_t j = i + static_cast<std::size_t>(k) * stride[static_cast<std::size_t>(a)];
          best = std::max(best, (vals[j] - vals[i]).norm() / std::pow(k * h, d.rho));
        }
      }
    return best;
  };
  auto flatten = [](const std::vector<Mat>& hs) {
    Eigen::Index n = 0;
    for (const auto& m : hs) n += m.size();
    Vec out(n);
    Eigen::Index k = 0;
    for (const auto& m : hs)
      for (Eigen::Index i = 0; i < m.size(); ++i) out(k++) = m.data()[i];
    return out;
  };

  std::vector<double> ts(static_cast<std::size_t>(sample_times));
  for (int i = 0; i < sample_times; ++i)
    ts[static_cast<std::size_t>(i)] = interval.start + interval.length() * i / (sample_times - 1);
  ts.back() = interval.end;

  double v_part = 0.0, w_part = 0.0;
  std::vector<Vec> d2v(pts.size()), dw(pts.size());
  for (std::size_t a = 0; a < ts.size(); ++a)
    for (std::size_t b = a + 1; b < ts.size(); ++b) {
      const double s = ts[a], t = ts[b];
      double sv = 0.0, sdv = 0.0, sd2v = 0.0, sw = 0.0, sdw = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        sv = std::max(sv, d.V(s, t, pts[i]).norm());
        sdv = std::max(sdv, d.DV(s, t, pts[i]).norm());
        d2v[i] = flatten(d.D2V(s, t, pts[i]));
        sd2v = std::max(sd2v, d2v[i].norm());
        sw = std::max(sw, d.W(s, t, pts[i]).norm());
        const Mat j = d.DW(s, t, pts[i]);
        dw[i] = Eigen::Map<const Vec>(j.data(), j.size());
        sdw = std::max(sdw, dw[i].norm());
      }
      const double cv = sv + sdv + sd2v + holder(d2v);
      const double cw = sw + sdw + holder(dw);
      v_part = std::max(v_part, cv / std::pow(t - s, 1.0 / d.p));
      w_part = std::max(w_part, std::sqrt(cw / std::pow(t - s, 2.0 / d.p)));
    }
  return {std::max(v_part, w_part), v_part, w_part, sample_times, box};
}

double driver_additivity_residual(const RoughDriver& d, double s, double u, double t, const std::vector<Vec>& points) {
  double worst = 0.0;
  for (const auto& x : points) worst = std::max(worst, (d.V(s, t, x) - d.V(s, u, x) - d.V(u, t, x)).norm());
  return worst;
}

namespace {

// V2_{s,t} f (x) = W.grad f + 1/2 (V^T D^2f V + (DV V).grad f)
double second_order(const RoughDriver& d, double s, double t, const Vec& x, const Vec& grad, const Mat& hess) {
  const Vec v = d.V(s, t, x);
  return d.W(s, t, x).dot(grad) + 0.5 * (v.dot(hess * v) + (d.DV(s, t, x) * v).dot(grad));
}

}  // namespace

double driver_chen_residual(const RoughDriver& d, double s, double u, double t, const std::vector<Vec>& points) {
  const int m = d.state_dim;
  double worst = 0.0;
  for (const auto& x : points) {
    const Vec vsu = d.V(s, u, x);
    const Vec vut = d.V(u, t, x);
    const Mat dvut = d.DV(u, t, x);
    auto residual = [&](const Vec& grad, const Mat& hess) {
      const double lhs = second_order(d, s, t, x, grad, hess);
      const double cross = vsu.dot(hess * vut) + (dvut * vsu).dot(grad);
      const double rhs = second_order(d, u, t, x, grad, hess) + cross + second_order(d, s, u, x, grad, hess);
      return std::abs(lhs - rhs);
    };
    for (int a = 0; a < m; ++a) {
      worst = std::max(worst, residual(Vec::Unit(m, a), Mat::Zero(m, m)));
      for (int b = a; b < m; ++b) {
        Vec grad = x(b) * Vec::Unit(m, a) + x(a) * Vec::Unit(m, b);
        Mat hess = Mat::Zero(m, m);
        hess(a, b) += 1.0;
        hess(b, a) += 1.0;
        worst = std::max(worst, residual(grad, hess));
      }
    }
  }
  return worst;
}

double driver_leibniz_residual(const RoughDriver& d, double s, double t, const std::vector<Vec>& points) {
  using Fn = std::function<double(const Vec&)>;
  const int m = d.state_dim;
  const Fn f = [m](const Vec& x) {
    double z = 0.3;
    for (int a = 0; a < m; ++a) z += (0.5 + 0.25 * a) * x(a);
    return std::sin(z);
  };
  const Fn g = [m](const Vec& x) {
    double z = 0.0;
    for (int a = 0; a < m; ++a) z += (a % 2 ? -0.2 : 0.2) * x(a);
    return std::exp(z);
  };
  const Fn q = [m](const Vec& x) { return x(0) * x(0) + std::cos(x(m - 1)); };

  const double h = 2e-4;
  auto grad = [&](const Fn& fn, const Vec& x) {
    Vec out(m);
    for (int a = 0; a < m; ++a) {
      Vec xp = x, xm = x;
      xp(a) += h;
      xm(a) -= h;
      out(a) = (fn(xp) - fn(xm)) / (2 * h);
    }
    return out;
  };
  auto hess = [&](const Fn& fn, const Vec& x) {
    Mat out(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        Vec pp = x, pm = x, mp = x, mm = x;
        pp(a) += h, pp(b) += h;
        pm(a) += h, pm(b) -= h;
        mp(a) -= h, mp(b) += h;
        mm(a) -= h, mm(b) -= h;
        out(a, b) = (fn(pp) - fn(pm) - fn(mp) + fn(mm)) / (4 * h * h);
      }
    return out;
  };
  // L = V2 - 1/2 VV, expected to be the first-order operator W.grad
  auto op = [&](const Fn& fn, const Vec& x) {
    const Vec gr = grad(fn, x);
    const Mat he = hess(fn, x);
    const Vec v = d.V(s, t, x);
    const double half_vv = 0.5 * (v.dot(he * v) + (d.DV(s, t, x) * v).dot(gr));
    if (!d.raw) return second_order(d, s, t, x, gr, he) - half_vv;
    const Mat c = d.raw->coefficients(s, t);
    const auto& fields = d.raw->fields;
    double total = 0.0;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const Vec sj = fields[j](x);
      for (std::size_t k = 0; k < fields.size(); ++k) {
        const double cjk = c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        if (cjk == 0.0) continue;
        total += cjk * (sj.dot(he * fields[k](x)) + (fields[k].jacobian(x) * sj).dot(gr));
      }
    }
    return total - half_vv;
  };
  double worst = 0.0;
  const std::vector<std::pair<Fn, Fn>> pairs{{f, g}, {g, q}, {f, q}};
  for (const auto& x : points)
    for (const auto& [a, b] : pairs) {
      const Fn ab = [&a = a, &b = b](const Vec& y) { return a(y) * b(y); };
      worst = std::max(worst, std::abs(op(ab, x) - a(x) * op(b, x) - b(x) * op(a, x)));
    }
  return worst;
}

double driver_cocycle_residual(const RoughDriver& original, const RoughDriver& shifted, double h, double s, double t,
                               const std::vector<Vec>& points) {
  double worst = 0.0;
  for (const auto& x : points) {
    worst = std::max(worst, (original.V(s + h, s + h + t, x) - shifted.V(s, s + t, x)).norm());
    worst = std::max(worst, (original.W(s + h, s + h + t, x) - shifted.W(s, s + t, x)).norm());
  }
  return worst;
}

std::vector<Vec> probe_points(int dim, std::size_t count, std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<Vec> out(count, Vec(dim));
  for (auto& x : out)
    for (int a = 0; a < dim; ++a) x(a) = u(rng);
  return out;
}

}  // namespace roughflow
