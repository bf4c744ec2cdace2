#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace roughflow {

inline constexpr int kMaxTensorLevel = 4;

/// Norm used on each tensor level. Frobenius is the only kind: it satisfies
/// |v (x) w| <= |v||w| and |v (x) w| = |w (x) v|.
struct TensorNormConfig {
  enum class Kind { frobenius };
  Kind kind = Kind::frobenius;
};

/// Element of the truncated tensor group T_1^N(R^d).
///
/// The level-0 coefficient is the implicit scalar 1. Level k (1 <= k <= N)
/// stores d^k coefficients in lexicographic multi-index order, i.e. the entry
/// for (i_1, ..., i_k) lives at i_1 d^{k-1} + ... + i_k.
class GroupElement {
 public:
  /// The identity element of T_1^N(R^d).
  GroupElement(int dim, int level);

  /// Builds an element from explicit levels; levels.size() must equal `level`
  /// and levels[k-1].size() must equal dim^k.
  GroupElement(int dim, int level, std::vector<std::vector<double>> levels);

  static GroupElement identity(int dim, int level) { return GroupElement(dim, level); }

  int dim() const noexcept { return dim_; }
  int level() const noexcept { return level_; }

  /// pi_k for k >= 1; pi_0 is the scalar 1 and is served by scalar().
  std::span<const double> operator[](int k) const;
  std::span<double> mutable_level(int k);
  double scalar() const noexcept { return 1.0; }

  /// Coefficient of the multi-index (i, j) at level 2.
  double at2(int i, int j) const { return levels_[1][static_cast<std::size_t>(i * dim_ + j)]; }

  const std::vector<std::vector<double>>& levels() const noexcept { return levels_; }

 private:
  int dim_;
  int level_;
  std::vector<std::vector<double>> levels_;
};

/// Number of coefficients at level k: d^k.
std::size_t level_size(int dim, int k);

/// Group product: pi_k(g (x) h) = sum_{i=0}^k pi_{k-i}(g) (x) pi_i(h).
GroupElement tensor_mul(const GroupElement& g, const GroupElement& h);

/// Inverse through the truncated Neumann series sum_{j<=N} (-a)^{(x)j}, a = g - 1.
GroupElement tensor_inv(const GroupElement& g);

/// max over k = 0..N of the level-k norm (the level-0 term is 1).
double flat_norm(const GroupElement& g, TensorNormConfig cfg = {});

/// max over k = 0..N of the level-k norm of pi_k(g) - pi_k(h).
double flat_distance(const GroupElement& g, const GroupElement& h, TensorNormConfig cfg = {});

/// Frobenius norm of a single level.
double level_norm(std::span<const double> coeffs, TensorNormConfig cfg = {});

/// max over k >= 1 of |pi_k(g)|^{1/k}; a homogeneous size used for step control.
double homogeneous_size(const GroupElement& g);

/// exp(v) for v in R^d embedded at level 1: level k equals v^{(x)k}/k!.
/// This is the signature of a linear segment with increment v.
GroupElement segment_signature(std::span<const double> increment, int level);

/// exp(lambda log g): the point at fraction lambda along the geodesic from 1 to g.
GroupElement tensor_pow(const GroupElement& g, double lambda);

/// Outer product of two vectors (level-wise tensor product of plain vectors).
std::vector<double> outer(std::span<const double> v, std::span<const double> w);

/// Symmetric-part residual |Sym(pi_2 g) - 1/2 pi_1 g (x) pi_1 g|; zero for
/// geometric elements. Requires level >= 2.
double geometricity_residual(const GroupElement& g);

/// Serialization {dim, level, levels: [[...], ...]}.
void to_json(nlohmann::json& j, const GroupElement& g);
GroupElement group_element_from_json(const nlohmann::json& j);

}  // namespace roughflow
