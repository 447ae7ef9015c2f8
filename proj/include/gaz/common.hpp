#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaz {

using Real = double;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Mat = MatX<Real>;
using Vec = VecX<Real>;
using Row = RowX<Real>;
using VecI = Eigen::VectorXi;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic RNG: hand-rolled generator and distributions so streams are
/// bit-identical across platforms and standard library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_{splitmix64(seed), splitmix64(seed ^ 0x5851f42d4c957f2dull)} {
    if (s_[0] == 0 && s_[1] == 0) s_[1] = 1;
  }

  /// Derive an independent stream, e.g. per episode or worker.
  static Rng derive(uint64_t seed, uint64_t stream) { return Rng(splitmix64(seed) ^ splitmix64(stream * 0x9e3779b97f4a7c15ull + 1)); }

  uint64_t bits() {
    // xoshiro-style mix over two lanes of splitmix; simple and fully portable
    uint64_t x = s_[0];
    const uint64_t y = s_[1];
    s_[0] = y;
    x ^= x << 23;
    s_[1] = x ^ y ^ (x >> 17) ^ (y >> 26);
    return s_[1] + y;
  }

  /// Uniform in [0, 1).
  Real uniform() { return Real(bits() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1), safe for log().
  Real uniformOpen() { return (Real(bits() >> 11) + 0.5) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  int uniformInt(int n) {
    require(n > 0, "uniformInt: n must be positive");
    return int(bits() % uint64_t(n));
  }

  Real gumbel() { return -std::log(-std::log(uniformOpen())); }

  Real normal() {
    Real u1 = uniformOpen(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  uint64_t s_[2];
};

}  // namespace gaz
