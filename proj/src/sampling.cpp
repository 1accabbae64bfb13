#include "horolab/sampling.hpp"

#include <cmath>
#include <numbers>

#include "horolab/error.hpp"

namespace horolab {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t CounterRng::next_u64() {
  return splitmix64(splitmix64(seed_) ^ (counter_++ * 0xd1b54a32d192ed03ULL));
}

double CounterRng::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<TangentVector> sample_unit_vectors(const ManifoldSpec& spec, const ChartPoint& anchor,
                                               int count, std::uint64_t seed) {
  return sample_unit_vectors_if(spec, anchor, count, seed, [](const TangentVector&) { return true; });
}

std::vector<TangentVector> sample_unit_vectors_if(
    const ManifoldSpec& spec, const ChartPoint& anchor, int count, std::uint64_t seed,
    const std::function<bool(const TangentVector&)>& keep) {
  if (count < 0) throw Error(ErrorKind::InvalidParams, "sample count must be >= 0");
  const int n = spec.dimension();
  CounterRng rng(seed);
  std::vector<TangentVector> out;
  out.reserve(static_cast<std::size_t>(count));
  const long max_draws = 1000L * std::max(count, 1);
  for (long draw = 0; static_cast<int>(out.size()) < count; ++draw) {
    if (draw >= max_draws)
      throw Error(ErrorKind::InvalidParams, "sample_unit_vectors_if: acceptance region too small");
    Vec z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    TangentVector v = unit_vector(spec, anchor, z);
    if (keep(v)) out.push_back(std::move(v));
  }
  return out;
}

ChartPoint default_anchor(const ManifoldSpec& spec) {
  if (spec.is_product()) {
    ChartPoint a = default_anchor(spec.left());
    ChartPoint b = default_anchor(spec.right());
    ChartPoint p(a.size() + b.size());
    p << a, b;
    return p;
  }
  ChartPoint p = ChartPoint::Zero(spec.dimension());
  if (spec.kind() == ModelKind::Hyperbolic) p[spec.dimension() - 1] = 1.0;
  return p;
}

}  // namespace horolab
