#include "roughflow/tensor_algebra.hpp"

#include <cmath>
#include <string>

#include "roughflow/errors.hpp"

namespace roughflow {

namespace {

// Truncated tensor with an explicit scalar part; used for log/exp series where
// intermediate terms live outside the group.
struct Series {
  int dim;
  int level;
  double scalar;
  std::vector<std::vector<double>> levels;
};

Series zero_series(int dim, int level) {
  Series s{dim, level, 0.0, {}};
  s.levels.reserve(static_cast<std::size_t>(level));
  for (int k = 1; k <= level; ++k) s.levels.emplace_back(level_size(dim, k), 0.0);
  return s;
}

// out_k += a_i (x) b_{k-i} accumulated over the split points.
Series series_mul(const Series& a, const Series& b) {
  Series out = zero_series(a.dim, a.level);
  const int d = a.dim;
  out.scalar = a.scalar * b.scalar;
  for (int k = 1; k <= a.level; ++k) {
    auto& dst = out.levels[static_cast<std::size_t>(k - 1)];
    for (int i = 0; i <= k; ++i) {
      const int j = k - i;
      const std::size_t nb = level_size(d, j);
      if (i == 0) {
        const auto& bj = b.levels[static_cast<std::size_t>(j - 1)];
        if (a.scalar != 0.0)
          for (std::size_t q = 0; q < nb; ++q) dst[q] += a.scalar * bj[q];
      } else if (j == 0) {
        const auto& ai = a.levels[static_cast<std::size_t>(i - 1)];
        if (b.scalar != 0.0)
          for (std::size_t q = 0; q < ai.size(); ++q) dst[q] += ai[q] * b.scalar;
      } else {
        const auto& ai = a.levels[static_cast<std::size_t>(i - 1)];
        const auto& bj = b.levels[static_cast<std::size_t>(j - 1)];
        for (std::size_t p = 0; p < ai.size(); ++p) {
          const double ap = ai[p];
          if (ap == 0.0) continue;
          double* row = dst.data() + p * nb;
          for (std::size_t q = 0; q < nb; ++q) row[q] += ap * bj[q];
        }
      }
    }
  }
  return out;
}

Series to_series(const GroupElement& g) {
  return Series{g.dim(), g.level(), 1.0, g.levels()};
}

GroupElement to_group(Series s) {
  return GroupElement(s.dim, s.level, std::move(s.levels));
}

void axpy(Series& y, double alpha, const Series& x) {
  y.scalar += alpha * x.scalar;
  for (std::size_t k = 0; k < y.levels.size(); ++k)
    for (std::size_t q = 0; q < y.levels[k].size(); ++q) y.levels[k][q] += alpha * x.levels[k][q];
}

void check_compatible(const GroupElement& g, const GroupElement& h, const char* op) {
  if (g.dim() != h.dim() || g.level() != h.level())
    throw ArgumentError(std::string(op) + ": shape mismatch (dim " + std::to_string(g.dim()) + " vs " +
                        std::to_string(h.dim()) + ", level " + std::to_string(g.level()) + " vs " +
                        std::to_string(h.level()) + ")");
}

// log g = sum_{j=1}^N (-1)^{j+1} a^j / j with a = g - 1 (scalar part 0).
Series series_log(const GroupElement& g) {
  Series a = to_series(g);
  a.scalar = 0.0;
  Series out = zero_series(g.dim(), g.level());
  Series power = a;
  for (int j = 1; j <= g.level(); ++j) {
    axpy(out, ((j % 2) ? 1.0 : -1.0) / j, power);
    if (j < g.level()) power = series_mul(power, a);
  }
  return out;
}

// exp x = sum_{j=0}^N x^j / j! for x with zero scalar part.
Series series_exp(const Series& x) {
  Series out = zero_series(x.dim, x.level);
  out.scalar = 1.0;
  Series power = x;
  double fact = 1.0;
  for (int j = 1; j <= x.level; ++j) {
    fact *= j;
    axpy(out, 1.0 / fact, power);
    if (j < x.level) power = series_mul(power, x);
  }
  return out;
}

}  // namespace

std::size_t level_size(int dim, int k) {
  std::size_t n = 1;
  for (int i = 0; i < k; ++i) n *= static_cast<std::size_t>(dim);
  return n;
}

GroupElement::GroupElement(int dim, int level) : dim_(dim), level_(level) {
  if (dim < 1) throw ArgumentError("GroupElement: dim must be positive, got " + std::to_string(dim));
  if (level < 1 || level > kMaxTensorLevel)
    throw ArgumentError("GroupElement: level must be in [1, " + std::to_string(kMaxTensorLevel) + "], got " +
                        std::to_string(level));
  levels_.reserve(static_cast<std::size_t>(level));
  for (int k = 1; k <= level; ++k) levels_.emplace_back(level_size(dim, k), 0.0);
}

GroupElement::GroupElement(int dim, int level, std::vector<std::vector<double>> levels)
    : GroupElement(dim, level) {
  if (levels.size() != static_cast<std::size_t>(level))
    throw ArgumentError("GroupElement: expected " + std::to_string(level) + " levels, got " +
                        std::to_string(levels.size()));
  for (int k = 1; k <= level; ++k) {
    const auto& lv = levels[static_cast<std::size_t>(k - 1)];
    if (lv.size() != level_size(dim, k))
      throw ArgumentError("GroupElement: level " + std::to_string(k) + " must hold " +
                          std::to_string(level_size(dim, k)) + " coefficients, got " + std::to_string(lv.size()));
    for (double c : lv)
      if (!std::isfinite(c)) throw ArgumentError("GroupElement: non-finite coefficient at level " + std::to_string(k));
  }
  levels_ = std::move(levels);
}

std::span<const double> GroupElement::operator[](int k) const {
  if (k < 1 || k > level_) throw ArgumentError("GroupElement: level index out of range: " + std::to_string(k));
  return levels_[static_cast<std::size_t>(k - 1)];
}

std::span<double> GroupElement::mutable_level(int k) {
  if (k < 1 || k > level_) throw ArgumentError("GroupElement: level index out of range: " + std::to_string(k));
  return levels_[static_cast<std::size_t>(k - 1)];
}

GroupElement tensor_mul(const GroupElement& g, const GroupElement& h) {
  check_compatible(g, h, "tensor_mul");
  return to_group(series_mul(to_series(g), to_series(h)));
}

GroupElement tensor_inv(const GroupElement& g) {
  Series minus_a = to_series(g);
  minus_a.scalar = 0.0;
  for (auto& lv : minus_a.levels)
    for (double& c : lv) c = -c;
  Series out = zero_series(g.dim(), g.level());
  out.scalar = 1.0;
  Series power = minus_a;
  for (int j = 1; j <= g.level(); ++j) {
    axpy(out, 1.0, power);
    if (j < g.level()) power = series_mul(power, minus_a);
  }
  return to_group(std::move(out));
}

double level_norm(std::span<const double> coeffs, TensorNormConfig) {
  double s = 0.0;
  for (double c : coeffs) s += c * c;
  return std::sqrt(s);
}

double flat_norm(const GroupElement& g, TensorNormConfig cfg) {
  double m = 1.0;
  for (int k = 1; k <= g.level(); ++k) m = std::max(m, level_norm(g[k], cfg));
  return m;
}

double flat_distance(const GroupElement& g, const GroupElement& h, TensorNormConfig cfg) {
  check_compatible(g, h, "flat_distance");
  double m = 0.0;
  std::vector<double> diff;
  for (int k = 1; k <= g.level(); ++k) {
    const auto a = g[k];
    const auto b = h[k];
    diff.assign(a.size(), 0.0);
    for (std::size_t q = 0; q < a.size(); ++q) diff[q] = a[q] - b[q];
    m = std::max(m, level_norm(diff, cfg));
  }
  return m;
}

double homogeneous_size(const GroupElement& g) {
  double m = 0.0;
  for (int k = 1; k <= g.level(); ++k) m = std::max(m, std::pow(level_norm(g[k]), 1.0 / k));
  return m;
}

GroupElement segment_signature(std::span<const double> increment, int level) {
  const int d = static_cast<int>(increment.size());
  GroupElement out(d, level);
  std::vector<double> power(increment.begin(), increment.end());
  auto lv1 = out.mutable_level(1);
  std::copy(power.begin(), power.end(), lv1.begin());
  for (int k = 2; k <= level; ++k) {
    std::vector<double> next = outer(power, increment);
    for (double& c : next) c /= k;
    auto dst = out.mutable_level(k);
    std::copy(next.begin(), next.end(), dst.begin());
    power = std::move(next);
  }
  return out;
}

GroupElement tensor_pow(const GroupElement& g, double lambda) {
  Series x = series_log(g);
  for (auto& lv : x.levels)
    for (double& c : lv) c *= lambda;
  return to_group(series_exp(x));
}

std::vector<double> outer(std::span<const double> v, std::span<const double> w) {
  std::vector<double> out(v.size() * w.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < w.size(); ++j) out[i * w.size() + j] = v[i] * w[j];
  return out;
}

double geometricity_residual(const GroupElement& g) {
  if (g.level() < 2) throw ArgumentError("geometricity_residual: level must be at least 2");
  const int d = g.dim();
  const auto x = g[1];
  double s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const double sym = 0.5 * (g.at2(i, j) + g.at2(j, i));
      const double r = sym - 0.5 * x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
      s += r * r;
    }
  return std::sqrt(s);
}

void to_json(nlohmann::json& j, const GroupElement& g) {
  j = nlohmann::json{{"dim", g.dim()}, {"level", g.level()}, {"levels", g.levels()}};
}

GroupElement group_element_from_json(const nlohmann::json& j) {
  return GroupElement(j.at("dim").get<int>(), j.at("level").get<int>(),
                      j.at("levels").get<std::vector<std::vector<double>>>());
}

}  // namespace roughflow
