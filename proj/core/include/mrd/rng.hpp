#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace mrd {

// Finalizer from the splitmix64 generator; bijective on 64-bit words.
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed chain used everywhere randomness is consumed: every logical stream
// gets its own seed derived from (base, role, indices...).  Streams derived
// with distinct (role, indices) never overlap, which is what makes trial- and
// replicate-level parallelism reproducible.
std::uint64_t derive_seed(std::uint64_t base, std::string_view role,
                          std::initializer_list<std::uint64_t> indices = {});

// Deterministic RNG with hand-rolled transforms so that results do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (cosine branch only, stateless).
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Gamma(shape, 1) by Marsaglia-Tsang squeeze.
  double gamma(double shape);

  double chi_square(double dof) { return 2.0 * gamma(0.5 * dof); }

  double student_t(double dof) {
    return normal() / std::sqrt(chi_square(dof) / dof);
  }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  int uniform_int(int n);

  // Sorted k-subset of {0, ..., n-1}, uniform without replacement.
  std::vector<int> sample_without_replacement(int n, int k);

  // Fisher-Yates; independent of std::shuffle's unspecified algorithm.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mrd
