#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qabk/linalg.hpp"

namespace qabk {

enum class Family { gaussian, coherent, sphere, adversarial_duplicate };
enum class Placement { uniform, given_indices };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);
std::string_view to_string(Placement placement);
Placement parse_placement(std::string_view text);

struct CorruptionSpec {
  double beta = 0.0;
  double magnitude_low = -100.0;
  double magnitude_high = 100.0;
  Placement placement = Placement::uniform;
  /// Used when placement is given_indices; size must equal ⌊beta·m⌋.
  std::vector<std::size_t> indices;
  /// Right-hand side value written onto the duplicate rows of the
  /// adversarial-duplicate family.
  double target = 500.0;
};

struct GeneratorSpec {
  Family family = Family::gaussian;
  std::size_t m = 2000;
  std::size_t n = 50;
  std::uint64_t seed = 0;
  CorruptionSpec corruption;
};

/// Ax = b where b = bᵗ + bᶜ and bᶜ is supported on corrupted_indices.
struct CorruptedSystem {
  DenseMatrix a;
  Vector x_star;
  Vector b_true;
  Vector b_observed;
  /// Sorted ascending.
  std::vector<std::size_t> corrupted_indices;
  double beta = 0.0;
  GeneratorSpec spec;

  std::size_t rows() const noexcept { return a.rows(); }
  std::size_t cols() const noexcept { return a.cols(); }
  /// |corrupted_indices| / m, the fraction the convergence theory uses.
  double corrupted_fraction() const noexcept;
  /// Per-row flag, true on corrupted rows.
  std::vector<bool> corruption_mask() const;
};

/// Builds a gaussian, coherent or sphere system. Corruption is additive:
/// b_observed = b_true + bᶜ with bᶜ drawn Uniform(magnitude_low, magnitude_high)
/// on ⌊beta·m⌋ rows chosen by a seeded shuffle prefix. The adversarial family
/// is forwarded to generate_adversarial_duplicate with dup_rows = ⌊beta·m⌋.
CorruptedSystem generate(const GeneratorSpec& spec);

struct AdversarialSystem {
  CorruptedSystem system;
  /// Projection of the all-ones vector onto {x : ⟨a, x⟩ = target}.
  Vector x0;
  /// Index of the first duplicate row; rows [duplicate_row, m) are copies.
  std::size_t duplicate_row = 0;
};

/// clean_rows normalized gaussian rows followed by dup_rows copies of one more
/// normalized gaussian row a whose right-hand sides all equal target.
AdversarialSystem generate_adversarial_duplicate(std::size_t n, std::size_t clean_rows,
                                                 std::size_t dup_rows, double target,
                                                 std::uint64_t seed);

/// ‖x − x*‖ / ‖x0 − x*‖. Throws ZeroBaseline when x0 = x*.
double relative_error(std::span<const double> x, const CorruptedSystem& system,
                      std::span<const double> x0);

/// Writes matrix.csv, b.csv and metadata.json into dir (created if missing).
/// Reals use 17 significant digits so a reload reproduces every bit.
void save_system(const CorruptedSystem& system, const std::filesystem::path& dir);
CorruptedSystem load_system(const std::filesystem::path& dir);

}  // namespace qabk
