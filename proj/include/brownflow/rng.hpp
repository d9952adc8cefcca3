#ifndef BROWNFLOW_RNG_HPP
#define BROWNFLOW_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace brownflow {

/// SplitMix64 finalizer; used to spread user seeds and replica indices over
/// the full 64-bit state space.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream for one replica. Every replica derives its
/// own stream from (seed, replica_index), so results do not depend on how
/// replicas are scheduled across workers.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Deterministic stream of uniforms and standard normals.
///
/// Normals use the Marsaglia polar method on top of mt19937_64 rather than
/// std::normal_distribution, whose algorithm is implementation-defined; the
/// byte-reproducibility contract requires the draw sequence to be pinned by
/// this library alone.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  std::uint64_t next_u64() { return gen_(); }

private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline RngStream replica_stream(std::uint64_t seed, std::uint64_t replica_index) {
  return RngStream(stream_seed(seed, replica_index));
}

}  // namespace brownflow

#endif  // BROWNFLOW_RNG_HPP
