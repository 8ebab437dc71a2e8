#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace smdn::rng {

// Domain tags that keep independent consumers of a master seed apart.
enum class Tag : std::uint64_t {
  kMaturity = 0x11,
  kScenario = 0x12,
  kPaths = 0x13,
  kInit = 0x21,
  kShuffle = 0x22,
  kEvaluation = 0x31,
  kHoldout = 0x32,
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Hierarchical stream key. Streams derived from distinct keys are
// statistically independent, and a key fully determines its stream, so
// work can be split across threads without changing results.
class StreamKey {
 public:
  explicit StreamKey(std::uint64_t seed) : words_{seed} {}
  StreamKey(std::uint64_t seed, Tag tag) : words_{seed, static_cast<std::uint64_t>(tag)} {}

  StreamKey child(std::uint64_t index) const {
    StreamKey k = *this;
    k.words_.push_back(index);
    return k;
  }
  StreamKey child(std::initializer_list<std::uint64_t> indices) const {
    StreamKey k = *this;
    k.words_.insert(k.words_.end(), indices);
    return k;
  }

  std::uint64_t digest() const noexcept;

 private:
  std::vector<std::uint64_t> words_;
};

// xoshiro256** seeded from the key digest; satisfies
// UniformRandomBitGenerator so it composes with <random> distributions.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(const StreamKey& key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal() { return normal_(*this); }

 private:
  std::uint64_t s_[4];
  std::normal_distribution<double> normal_;
};

}  // namespace smdn::rng
