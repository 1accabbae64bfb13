#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "horolab/manifold.hpp"

namespace horolab {

// Counter-based pseudo-random stream: draw i of stream `seed` is a SplitMix64 hash
// of (seed, i), so any draw can be reproduced without replaying the stream.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// `count` g-unit vectors at `anchor`: standard-normal chart components projected to
// unit length. Deterministic in `seed`.
std::vector<TangentVector> sample_unit_vectors(const ManifoldSpec& spec, const ChartPoint& anchor,
                                               int count, std::uint64_t seed);

// As above, keeping only vectors accepted by `keep`; draws continue until `count`
// vectors pass (at most 1000 * count draws).
std::vector<TangentVector> sample_unit_vectors_if(
    const ManifoldSpec& spec, const ChartPoint& anchor, int count, std::uint64_t seed,
    const std::function<bool(const TangentVector&)>& keep);

// Default anchor point for a model: the origin, with height 1 in half-space factors.
ChartPoint default_anchor(const ManifoldSpec& spec);

}  // namespace horolab
