#ifndef SENSEDEF_RNG_HPP
#define SENSEDEF_RNG_HPP

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace sensedef {

/// Seeded generator with distribution code written out here, so draws are
/// identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in the open interval (0, 1).
  double open01() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform in the open interval (-limit, limit).
  double symmetric(double limit) { return limit * (2.0 * open01() - 1.0); }

  /// Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = engine_(); while (r >= bound);
    return r % n;
  }

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

  std::uint64_t next() { return engine_(); }

private:
  std::mt19937_64 engine_;
};

} // namespace sensedef

#endif // SENSEDEF_RNG_HPP
