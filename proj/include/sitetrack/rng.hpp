#pragma once

#include <cmath>
#include <cstdint>

namespace sitetrack {

// Counter-free splittable generator built on the splitmix64 finalizer.
// Stream identity (base_) never changes with draws, so derive() yields the
// same child stream no matter how many values were consumed — that is what
// keeps per-(sensor, agent, scan) and per-(particle, scan) streams stable
// under any execution order, including OpenMP.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : base_(mix(seed ^ 0x9e3779b97f4a7c15ull)), state_(base_) {}

  // Child stream addressed by tag; independent of this stream's draw position.
  Rng derive(std::uint64_t tag) const {
    return Rng(from_base_tag{}, mix(base_ ^ mix(tag + 0xbf58476d1ce4e5b9ull)));
  }
  Rng derive(std::uint64_t a, std::uint64_t b) const { return derive(a).derive(b); }
  Rng derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return derive(a).derive(b).derive(c);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes exactly two uniforms per call.
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

  // Knuth product-of-uniforms; fine for the small rates used here.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // uniform index in [0, n)
  std::size_t index(std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  struct from_base_tag {};
  Rng(from_base_tag, std::uint64_t base) : base_(base), state_(base) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t base_;
  std::uint64_t state_;
};

// Stream tags for derive(); keeps addressing collision-free and readable.
namespace stream {
inline constexpr std::uint64_t kCamera = 1;
inline constexpr std::uint64_t kRadio = 2;
inline constexpr std::uint64_t kImu = 3;
inline constexpr std::uint64_t kTruth = 4;
inline constexpr std::uint64_t kParticle = 5;
inline constexpr std::uint64_t kResample = 6;
inline constexpr std::uint64_t kOcclusion = 7;
inline constexpr std::uint64_t kPixelNoise = 8;
inline constexpr std::uint64_t kClutter = 9;
inline constexpr std::uint64_t kPhantom = 10;
inline constexpr std::uint64_t kBirth = 11;
inline constexpr std::uint64_t kAgent = 12;
}  // namespace stream

}  // namespace sitetrack
