#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qabk {

using Vector = std::vector<double>;

/// Dense row-major matrix. Rows are the equations of a linear system, so the
/// storage is laid out to make row access contiguous.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }

  /// Set by row_normalize; cleared by any structural copy that could break it.
  bool row_normalized() const noexcept { return row_normalized_; }
  void mark_row_normalized(bool flag) noexcept { row_normalized_ = flag; }

  /// Submatrix made of the listed rows, in the given order.
  DenseMatrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const DenseMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  bool row_normalized_ = false;
};

/// Summary of the spectral quantities the convergence theory is built on.
struct SpectralSummary {
  double sigma_max_sq = 0.0;
  /// Smallest squared singular value over the examined row subsets.
  double sigma_restricted_min_sq = 0.0;
  /// Subset size as a fraction of the row count.
  double restricted_fraction = 1.0;
  std::size_t subset_size = 0;
  /// True only when every subset of the prescribed size was enumerated.
  bool exact = false;
  std::uint64_t subsets_examined = 0;
};

// Vector kernels.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
double distance(std::span<const double> a, std::span<const double> b);
/// y += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> y);

Vector matvec(const DenseMatrix& m, std::span<const double> x);
/// Mᵀ y
Vector matvec_transpose(const DenseMatrix& m, std::span<const double> y);

/// MᵀM (n×n).
DenseMatrix gram(const DenseMatrix& m);
/// Gram of the listed rows only: Σ aᵢaᵢᵀ over the subset.
DenseMatrix gram_of_rows(const DenseMatrix& m, std::span<const std::size_t> rows);
/// M Mᵀ restricted to the listed rows (|rows|×|rows|).
DenseMatrix outer_gram_of_rows(const DenseMatrix& m, std::span<const std::size_t> rows);

/// Absolute-plus-relative comparison: |a−b| ≤ atol + rtol·max(|a|,|b|).
bool approx_equal(double a, double b, double atol = 1e-10, double rtol = 1e-8);

/// ⌈x⌉ for counts such as q·m, snapping values within 1e-9 of an integer so
/// that products like 0.7·2000 do not round up past the intended count.
std::size_t ceil_count(double x);

/// Scales each row to unit Euclidean norm. Throws ZeroRow for a row with norm
/// below 1e-300.
DenseMatrix row_normalize(const DenseMatrix& m);

/// Largest eigenvalue of MᵀM by power iteration on the Gram matrix, started
/// from the normalized all-ones vector (seeded random start if that vector
/// lies in the null space). Stops when the Rayleigh quotient changes by at
/// most tol relative; throws NoConvergence after max_iter sweeps.
double sigma_max_sq(const DenseMatrix& m, double tol = 1e-12, std::size_t max_iter = 100000);

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
Vector symmetric_eigenvalues(const DenseMatrix& symmetric);

/// Smallest eigenvalue of MᵀM, clamped at zero. Requires rows ≥ cols.
double sigma_min_sq(const DenseMatrix& m);

inline constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// Number of k-subsets of an m-set, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t m, std::uint64_t k);

/// Exact infimum of sigma_min_sq over every k-row submatrix. Throws
/// TooManySubsets when C(m, k) exceeds cap.
SpectralSummary restricted_min_sv_bruteforce(const DenseMatrix& m, std::size_t k,
                                             std::uint64_t cap = kDefaultEnumerationCap);

/// Minimum of sigma_min_sq over `samples` uniformly drawn k-row subsets.
/// An upper estimate of the true infimum; exact is always false.
SpectralSummary restricted_min_sv_sampled(const DenseMatrix& m, std::size_t k,
                                          std::size_t samples, std::uint64_t seed);

/// Solves G z = rhs for a symmetric positive semi-definite G by Cholesky.
/// When a pivot falls below 1e-10 of the largest diagonal entry the matrix is
/// treated as rank deficient and the factorization is retried on
/// G + ridge·I. Returns whether the ridge was needed.
bool solve_psd(const DenseMatrix& g, std::span<const double> rhs, double ridge,
               std::span<double> out);

}  // namespace qabk
