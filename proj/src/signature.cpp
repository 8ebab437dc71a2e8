#include "smdn/signature.hpp"

#include <string>

#include "smdn/error.hpp"

namespace smdn::signature {

namespace {

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

}  // namespace

std::size_t coefficient_count(std::size_t dim, std::size_t level) {
  std::size_t total = 0;
  for (std::size_t k = 1; k <= level; ++k) total += ipow(dim, k);
  return total;
}

TruncatedSignature::TruncatedSignature(std::size_t dim, std::size_t level) : dim_(dim), level_(level) {
  if (dim == 0 || level == 0) throw InvalidInput("signature dimension and level must be positive");
  std::size_t offset = 0;
  for (std::size_t k = 1; k <= level; ++k) {
    offsets_.push_back(offset);
    offset += ipow(dim, k);
  }
  coeffs_.assign(offset, 0.0);
}

std::span<const double> TruncatedSignature::level_block(std::size_t k) const {
  if (k == 0 || k > level_) throw InvalidInput("signature level out of range");
  return {coeffs_.data() + offsets_[k - 1], ipow(dim_, k)};
}

std::span<double> TruncatedSignature::level_block(std::size_t k) {
  if (k == 0 || k > level_) throw InvalidInput("signature level out of range");
  return {coeffs_.data() + offsets_[k - 1], ipow(dim_, k)};
}

double TruncatedSignature::at(std::span<const std::size_t> multi_index) const {
  std::size_t flat = 0;
  for (std::size_t i : multi_index) {
    if (i >= dim_) throw InvalidInput("multi-index entry out of range");
    flat = flat * dim_ + i;
  }
  return level_block(multi_index.size())[flat];
}

TruncatedSignature signature_of_linear_segment(std::span<const double> increment, std::size_t level) {
  TruncatedSignature sig(increment.size(), level);
  const std::size_t m = increment.size();
  auto first = sig.level_block(1);
  for (std::size_t i = 0; i < m; ++i) first[i] = increment[i];
  // level k = (level k-1 (x) Delta) / k
  for (std::size_t k = 2; k <= level; ++k) {
    auto prev = sig.level_block(k - 1);
    auto cur = sig.level_block(k);
    const double inv_k = 1.0 / static_cast<double>(k);
    for (std::size_t p = 0; p < prev.size(); ++p)
      for (std::size_t i = 0; i < m; ++i) cur[p * m + i] = prev[p] * increment[i] * inv_k;
  }
  return sig;
}

TruncatedSignature chen_concat(const TruncatedSignature& a, const TruncatedSignature& b) {
  if (a.dim() != b.dim() || a.level() != b.level()) {
    throw InvalidInput("chen_concat needs signatures of equal dimension and level");
  }
  const std::size_t m = a.dim();
  TruncatedSignature out(m, a.level());
  for (std::size_t k = 1; k <= a.level(); ++k) {
    auto dst = out.level_block(k);
    const auto ak = a.level_block(k);
    const auto bk = b.level_block(k);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = ak[i] + bk[i];
    for (std::size_t i = 1; i < k; ++i) {
      const auto left = a.level_block(i);
      const auto right = b.level_block(k - i);
      for (std::size_t p = 0; p < left.size(); ++p) {
        const double lp = left[p];
        double* row = dst.data() + p * right.size();
        for (std::size_t q = 0; q < right.size(); ++q) row[q] += lp * right[q];
      }
    }
  }
  return out;
}

TruncatedSignature signature_of_path(std::span<const double> samples, std::size_t dim, std::size_t level) {
  if (dim == 0 || samples.size() % dim != 0) throw InvalidInput("sample buffer is not a multiple of dim");
  const std::size_t n = samples.size() / dim;
  if (n < 2) throw InvalidInput("signature_of_path needs at least 2 sample points");
  TruncatedSignature acc = TruncatedSignature::identity(dim, level);
  std::vector<double> delta(dim);
  for (std::size_t p = 0; p + 1 < n; ++p) {
    for (std::size_t i = 0; i < dim; ++i) delta[i] = samples[(p + 1) * dim + i] - samples[p * dim + i];
    acc = chen_concat(acc, signature_of_linear_segment(delta, level));
  }
  return acc;
}

std::vector<double> reverse_path(std::span<const double> samples, std::size_t dim) {
  const std::size_t n = samples.size() / dim;
  std::vector<double> out(samples.size());
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t i = 0; i < dim; ++i) out[p * dim + i] = samples[(n - 1 - p) * dim + i];
  return out;
}

std::vector<double> scalar_signature_features(std::span<const double> path, std::size_t level) {
  const TruncatedSignature sig = signature_of_path(path, 1, level);
  std::vector<double> out(level);
  double factorial = 1.0;
  for (std::size_t k = 1; k <= level; ++k) {
    factorial *= static_cast<double>(k);
    out[k - 1] = factorial * sig.level_block(k)[0];
  }
  return out;
}

std::vector<double> time_augmented_features(std::span<const double> path, double dt, double horizon,
                                            std::size_t level) {
  const std::size_t n = path.size();
  if (n < 2) throw InvalidInput("time augmentation needs at least 2 sample points");
  if (!(horizon > 0.0) || !(dt > 0.0)) throw InvalidInput("time augmentation needs positive dt and horizon");
  std::vector<double> samples(2 * n);
  for (std::size_t p = 0; p < n; ++p) {
    samples[2 * p] = (p + 1 == n) ? horizon : dt * static_cast<double>(p);
    samples[2 * p + 1] = path[p];
  }
  const TruncatedSignature sig = signature_of_path(samples, 2, level);
  std::vector<double> out;
  double factorial = 1.0;
  for (std::size_t k = 1; k <= level; ++k) {
    factorial *= static_cast<double>(k);
    for (double v : sig.level_block(k)) out.push_back(factorial * v);
  }
  return out;
}

}  // namespace smdn::signature
