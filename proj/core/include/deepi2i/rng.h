#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "deepi2i/errors.h"
#include "deepi2i/tensor.h"

namespace deepi2i {

/// splitmix64 finalizer; used to derive independent stream seeds from
/// (seed, key...) tuples so draw order never depends on call-site ordering.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> keys) {
  uint64_t h = mix64(seed ^ 0x6c62272e07bb0142ull);
  for (uint64_t k : keys) h = mix64(h ^ mix64(k));
  return h;
}

/// Deterministic RNG. mt19937_64 has a standard-specified sequence and a
/// serializable state, which the checkpoint format relies on. normal() uses
/// Box-Muller (one value per call, no cached spare) so the state is the
/// engine state alone.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t raw() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  /// Unbiased integer in [0, n).
  int64_t randint(int64_t n) {
    if (n <= 0) throw ConfigError("randint: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return static_cast<int64_t>(r % un);
  }

  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> p(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(randint(i + 1))]);
    return p;
  }

  template <typename T>
  void fill_normal(Tensor<T>& t, double mean = 0.0, double stddev = 1.0) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(mean + stddev * normal());
  }
  template <typename T>
  void fill_uniform(Tensor<T>& t, double lo, double hi) {
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }
  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) throw CheckpointError("invalid rng state string");
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace deepi2i
