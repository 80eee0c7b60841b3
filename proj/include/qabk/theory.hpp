#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "qabk/linalg.hpp"
#include "qabk/problems.hpp"

namespace qabk {

struct RateInputs {
  double q = 0.0;
  double beta = 0.0;
  std::size_t m = 0;
  double sigma_max_sq = 0.0;
  double sigma_restricted_min_sq = 0.0;
  /// Whether sigma_restricted_min_sq came from full enumeration.
  bool exact = true;
};

/// Constants of the linear-convergence guarantee for quantile averaged block
/// Kaczmarz: ‖e_{k+1}‖² ≤ (1 − c1·α + c2·α²)‖e_k‖².
struct RateReport {
  double c1 = 0.0;
  double c2 = 0.0;
  double alpha_opt = 0.0;
  /// 1 − c1²/(4c2), the guaranteed factor at alpha_opt.
  double contraction = 1.0;
  bool condition_holds = false;
  double epsilon = 0.0;
  RateInputs inputs;
};

struct ConditionResult {
  bool holds = false;
  /// (√β/√(1−q−β))·(σ²_max/σ²_restricted); infinite when σ²_restricted = 0.
  double epsilon = 0.0;
};

/// √β/√(1−q−β) < σ²_restricted/σ²_max. Throws DomainError unless β < q < 1−β.
ConditionResult convergence_condition(double q, double beta, double sigma_max_sq,
                                      double sigma_restricted_min_sq);

/// Throws ConditionViolated when the convergence condition fails.
RateReport rate_report(double q, double beta, std::size_t m, double sigma_max_sq,
                       double sigma_restricted_min_sq, bool exact = true);

/// The optimal step through the ε-parametrized closed form
/// qm(1−ε)/(σ²_max − ε(2−ε)σ²_restricted).
double alpha_opt_from_epsilon(double q, double beta, std::size_t m, double sigma_max_sq,
                              double sigma_restricted_min_sq);
/// 1 − (1−ε)²σ²_restricted/(σ²_max − ε(2−ε)σ²_restricted)
double contraction_from_epsilon(double q, double beta, double sigma_max_sq,
                                double sigma_restricted_min_sq);

/// c1·α − c2·α², the guaranteed per-iteration decrease of ‖e‖²/‖e_prev‖².
double decrease(const RateReport& report, double alpha);
/// 1 − c1·α + c2·α²
double rate_factor(const RateReport& report, double alpha);

/// decrease(ξ·α_opt)/decrease(α_opt) = 2ξ − ξ². Throws DomainError unless 0 < ξ < 2.
double scaled_step_decrease(double xi);

/// Size of the row subsets the restricted singular value ranges over:
/// ⌈(q−β)·m⌉.
std::size_t restricted_subset_size(double q, double beta, std::size_t m);

/// σ²_max and σ²_{q−β,min} for a concrete matrix: exact enumeration when
/// C(m, k) fits under the cap, otherwise a sampled estimate flagged inexact.
SpectralSummary restricted_spectrum(const DenseMatrix& a, double q, double beta,
                                    std::size_t samples = 200, std::uint64_t seed = 0);

/// One bound of the per-iteration certificate.
struct TermCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs − lhs
  bool pass = false;
};

struct CertificateResult {
  /// ‖X‖² ≤ (1 − (2α/|τ| − α²σ²_max/|τ|²)·σ²_min(A_τ₁))‖e_k‖²
  TermCheck term1;
  /// 2|⟨X,Y⟩| ≤ 2α·Q·√|τ₂|·σ_max·‖X‖/|τ|
  TermCheck term2;
  /// ‖Y‖² ≤ α²Q²σ²_max|τ₂|/|τ|²
  TermCheck term3;
  /// ‖e_{k+1}‖² against the sum of the three right-hand sides, with ‖X‖
  /// replaced by the Term 1 bound.
  TermCheck combined;
  /// ‖e_{k+1}‖² ≤ (1 − c1α + c2α²)‖e_k‖² using the worst-case constants.
  std::optional<TermCheck> worst_case;
  /// ‖(x_{k+1} − x*) − (X − Y)‖, a consistency check on the inputs.
  double decomposition_error = 0.0;
  double quantile = 0.0;
  double sigma_min_sq_uncorrupted = 0.0;
  std::size_t tau_size = 0;
  std::size_t tau_uncorrupted = 0;
  std::size_t tau_corrupted = 0;

  bool all_pass() const;
};

/// Checks the error decomposition e_{k+1} = X − Y for one quantile averaged
/// block step x_k → x_{k+1} with accepted rows tau, using the realized
/// quantities of that iteration. Throws ShapeError when the uncorrupted part
/// of tau has fewer rows than columns, PreconditionViolated when
/// 2α/|τ| − α²σ²_max/|τ|² < 0.
CertificateResult certify_iteration(const CorruptedSystem& system,
                                    std::span<const double> x_k,
                                    std::span<const double> x_k1, double q, double alpha,
                                    std::span<const std::size_t> tau, double sigma_max_sq,
                                    const std::optional<RateReport>& worst_case = std::nullopt,
                                    double tolerance = 1e-9);

struct AutoStepSize {
  double alpha = 0.0;
  bool exact = false;
  RateReport report;
};

/// Optimal step for a concrete system using its realized corruption fraction.
/// Throws ConditionViolated when the theory gives no step.
AutoStepSize resolve_auto_alpha(const CorruptedSystem& system, double q);

std::string rate_report_json(const RateReport& report);
std::string rate_report_summary(const RateReport& report);

}  // namespace qabk
