#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qabk/errors.hpp"
#include "qabk/linalg.hpp"
#include "qabk/problems.hpp"
#include "qabk/rng.hpp"

namespace qabk {

enum class Method { rk, quantile_rk, averaged_rbk, quantile_abk, sampled_qabk, quantile_pbk };

/// How a residual entry is compared against the quantile threshold.
/// strict_below keeps |rᵢ| < Q; at_or_below keeps |rᵢ| ≤ Q.
enum class Comparator { strict_below, at_or_below };

std::string_view to_string(Method method);
Method parse_method(std::string_view text);
std::string_view to_string(Comparator comparator);
Comparator parse_comparator(std::string_view text);

inline constexpr Method kAllMethods[] = {Method::rk,           Method::quantile_rk,
                                         Method::averaged_rbk, Method::quantile_abk,
                                         Method::sampled_qabk, Method::quantile_pbk};

/// Step size as configured: a literal value, a multiple of the column count n,
/// or "auto" (theoretically optimal step from the convergence theory).
struct StepSize {
  enum class Kind { fixed, per_column, automatic };
  Kind kind = Kind::fixed;
  double value = 1.0;

  static StepSize fixed(double alpha) { return {Kind::fixed, alpha}; }
  static StepSize per_column(double factor) { return {Kind::per_column, factor}; }
  static StepSize automatic() { return {Kind::automatic, 0.0}; }

  /// Accepts "auto", "12.5" or "1.7n".
  static StepSize parse(std::string_view text);
  std::string to_string() const;
};

struct SolverConfig {
  Method method = Method::quantile_abk;
  double q = 0.7;
  StepSize alpha = StepSize::fixed(1.0);
  /// Sample size for SampledQABK and QuantileRK; 0 means m.
  std::size_t t = 0;
  /// Block size for AveragedRBK; 0 means n.
  std::size_t block_size = 0;
  std::size_t max_iters = 100;
  double stop_rel_error = 0.0;
  Comparator comparator = Comparator::strict_below;
  std::uint64_t seed = 0;
  /// When false, elapsed_ns is recorded as 0 so traces are byte-reproducible.
  bool record_timing = true;
};

/// SolverConfig with every default materialized against a concrete system.
struct ResolvedSolverConfig {
  SolverConfig config;
  double alpha = 0.0;
  std::size_t t = 0;
  std::size_t block_size = 0;
  /// "fixed", "per-column", "auto-exact", "auto-sampled", or "unused" for
  /// methods without a step size.
  std::string alpha_source = "fixed";
};

struct StepStats {
  /// Threshold used this step; NaN for methods without a quantile.
  double quantile = std::numeric_limits<double>::quiet_NaN();
  /// Rows that contributed to the update, ascending.
  std::vector<std::size_t> accepted;
};

struct StepResult {
  Vector x;
  StepStats stats;
};

struct IterationRecord {
  std::size_t iter = 0;
  double rel_error = 0.0;
  double quantile = std::numeric_limits<double>::quiet_NaN();
  std::size_t tau_size = 0;
  std::size_t tau_corrupted = 0;
  std::int64_t elapsed_ns = 0;
};

struct IterationTrace {
  ResolvedSolverConfig resolved;
  std::vector<IterationRecord> records;
  Vector x0;
  Vector final_iterate;
};

/// Raised when the relative error exceeds 1e12 or stops being finite. Carries
/// the trace up to and including the failing iteration.
class Diverged : public Error {
 public:
  explicit Diverged(IterationTrace trace);
  const IterationTrace& trace() const noexcept { return trace_; }

 private:
  IterationTrace trace_;
};

inline constexpr double kDivergenceThreshold = 1e12;

/// The ⌈q·|S|⌉-th smallest element (1-indexed, duplicates counted).
double quantile_of_multiset(std::span<const double> values, double q);

/// b − A·x
Vector residual(const DenseMatrix& a, std::span<const double> b, std::span<const double> x);

/// One iteration of quantile averaged block Kaczmarz over the full residual.
/// An empty accepted set leaves x unchanged.
StepResult quantile_abk_step(const DenseMatrix& a, std::span<const double> b,
                             std::span<const double> x, double q, double alpha,
                             Comparator comparator = Comparator::strict_below);

/// Same update with the quantile and accepted set restricted to t rows drawn
/// without replacement. With t = m the full index set is used without drawing.
StepResult sampled_qabk_step(const DenseMatrix& a, std::span<const double> b,
                             std::span<const double> x, double q, std::size_t t,
                             double alpha, Rng& rng,
                             Comparator comparator = Comparator::strict_below);

/// Projects x onto the least-squares affine set of the accepted block:
/// x + A_τ⁺(b_τ − A_τx). Solved through the smaller of the two Gram systems,
/// with a 1e-12·trace ridge when the factorization detects rank deficiency.
StepResult quantile_pbk_step(const DenseMatrix& a, std::span<const double> b,
                             std::span<const double> x, double q,
                             Comparator comparator = Comparator::strict_below);

/// Classical Kaczmarz projection onto row i.
Vector kaczmarz_projection(const DenseMatrix& a, std::span<const double> b,
                           std::span<const double> x, std::size_t i);

/// Randomized Kaczmarz; rows are unit norm so the row is drawn uniformly.
StepResult rk_step(const DenseMatrix& a, std::span<const double> b,
                   std::span<const double> x, Rng& rng);

/// QuantileRK: quantile over t sampled rows, then one uniformly drawn
/// candidate row that is projected onto only if it passes the comparator.
StepResult quantile_rk_step(const DenseMatrix& a, std::span<const double> b,
                            std::span<const double> x, double q, std::size_t t, Rng& rng,
                            Comparator comparator = Comparator::strict_below);

/// x − (α/|block|)·Σ_{i∈block}(aᵢᵀx − bᵢ)aᵢ
Vector averaged_rbk_step(const DenseMatrix& a, std::span<const double> b,
                         std::span<const double> x, std::span<const std::size_t> block,
                         double alpha);

/// Resolves defaults (t, block size, step size) against the system and checks
/// the configuration. Throws ConfigError.
ResolvedSolverConfig resolve_config(const CorruptedSystem& system, const SolverConfig& config);

/// Called after every iteration with the iteration number and the new iterate.
using IterateObserver = std::function<void(std::size_t iter, std::span<const double> x)>;

/// Runs the configured method from x0 for max_iters iterations or until the
/// relative error reaches stop_rel_error (a value of 0 disables the check).
IterationTrace solve(const CorruptedSystem& system, const SolverConfig& config,
                     std::span<const double> x0, const IterateObserver& observer = {});
IterationTrace solve(const CorruptedSystem& system, const ResolvedSolverConfig& resolved,
                     std::span<const double> x0, const IterateObserver& observer = {});

inline constexpr std::string_view kTraceCsvHeader =
    "iter,rel_error,quantile,tau_size,tau_corrupted,elapsed_ns";

std::string trace_to_csv(const IterationTrace& trace);
/// JSON sidecar holding the resolved configuration.
std::string trace_config_json(const IterationTrace& trace);
void write_trace(const IterationTrace& trace, const std::filesystem::path& csv_path);

}  // namespace qabk
