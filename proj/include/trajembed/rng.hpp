#ifndef TRAJEMBED_RNG_HPP
#define TRAJEMBED_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace trajembed {

// Deterministic seed derivation (splitmix64). Stream k of a master seed is
// obtained by jumping the splitmix sequence, so per-trajectory streams are
// reproducible regardless of scheduling or thread count.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

// Uniform variates are built from raw mt19937_64 output rather than
// std::uniform_real_distribution, whose mapping is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  static RngStream child(std::uint64_t master, std::uint64_t stream) {
    return RngStream(derive_stream_seed(master, stream));
  }

  // Uniform on (0, 1]: never returns 0, so -log(u) and inverse CDFs are safe.
  double uniform01() {
    const std::uint64_t bits = gen_() >> 11;  // 53 random bits
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
  }

  double exponential(double rate) { return -std::log(uniform01()) / rate; }

  // Index drawn proportionally to the (non-negative) weights.
  std::size_t categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace trajembed

#endif
