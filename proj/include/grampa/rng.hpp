#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace grampa {

/// Seeded random source with a pinned algorithm so draws agree across compilers and
/// standard libraries.
///
/// Bits come from std::mt19937_64 (fully specified by the standard). The distributions are
/// implemented here rather than taken from <random>, whose distribution algorithms are
/// implementation-defined:
///   - uniform():  top 53 bits of one draw, scaled to [0, 1)
///   - normal():   Marsaglia polar method, second variate cached
///   - below(n):   rejection sampling on the top bits, no modulo bias
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// k distinct indices from [0, n), uniformly over subsets, in draw order.
  std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace grampa
