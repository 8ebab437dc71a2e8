#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smdn::signature {

// Truncated signature of an m-dimensional path up to level l. Level k holds
// m^k iterated integrals indexed by multi-indices in row-major order; the
// level-0 term is implicitly 1 and not stored.
class TruncatedSignature {
 public:
  TruncatedSignature(std::size_t dim, std::size_t level);

  // Signature of the constant path: every stored coefficient is zero.
  static TruncatedSignature identity(std::size_t dim, std::size_t level) { return {dim, level}; }

  std::size_t dim() const { return dim_; }
  std::size_t level() const { return level_; }

  std::span<const double> level_block(std::size_t k) const;
  std::span<double> level_block(std::size_t k);
  std::span<const double> coefficients() const { return coeffs_; }

  // Coefficient for a multi-index of length 1..level, entries in [0, dim).
  double at(std::span<const std::size_t> multi_index) const;

 private:
  std::size_t dim_;
  std::size_t level_;
  std::vector<std::size_t> offsets_;  // offsets_[k-1] = start of level k
  std::vector<double> coeffs_;
};

// Number of stored coefficients: sum_{k=1}^{level} dim^k.
std::size_t coefficient_count(std::size_t dim, std::size_t level);

// Tensor exponential of a straight segment: Delta_{i1}...Delta_{ik} / k!.
TruncatedSignature signature_of_linear_segment(std::span<const double> increment, std::size_t level);

// Truncated tensor product; the signature of the concatenated path.
TruncatedSignature chen_concat(const TruncatedSignature& a, const TruncatedSignature& b);

// samples: row-major, n_points x dim, interpreted as a piecewise-linear path.
TruncatedSignature signature_of_path(std::span<const double> samples, std::size_t dim, std::size_t level);

// Reverses the traversal direction of a sampled path.
std::vector<double> reverse_path(std::span<const double> samples, std::size_t dim);

// Per-level features of a scalar path with level k scaled by k!, so a path
// with increment Delta yields (Delta, Delta^2, ..., Delta^l).
std::vector<double> scalar_signature_features(std::span<const double> path, std::size_t level);

// Features of the time-augmented path (t, x(t)) with the same k! scaling;
// 2 + 4 + ... + 2^l values per path. Samples sit at 0, dt, 2 dt, ... except
// the last, which sits at the horizon (see RatePath::restricted).
std::vector<double> time_augmented_features(std::span<const double> path, double dt, double horizon,
                                            std::size_t level);

}  // namespace smdn::signature
