#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace qabk {

/// Seedable generator used everywhere in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Uniform doubles take the top 53 bits of one draw, normals use the
/// Box-Muller transform on two uniforms and integers in [0, n) use rejection
/// sampling, so every derived distribution is reproducible within a build
/// without depending on the standard library's unspecified distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Generator for an independent stream keyed by (seed, purpose, index...).
  /// Different purposes never share state, so e.g. toggling corruption does
  /// not perturb the matrix entries.
  static Rng stream(std::uint64_t seed, std::string_view purpose,
                    std::uint64_t a = 0, std::uint64_t b = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double low, double high);
  double normal();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// k distinct indices drawn uniformly from [0, n), returned sorted.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);
  void shuffle(std::span<std::size_t> values);

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view purpose,
                       std::uint64_t a = 0, std::uint64_t b = 0);

}  // namespace qabk
