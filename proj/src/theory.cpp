#include "qabk/theory.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "io_util.hpp"
#include "json.hpp"
#include "qabk/errors.hpp"
#include "qabk/solvers.hpp"

namespace qabk {

using nlohmann::json;

namespace {

void check_window(double q, double beta) {
  if (!std::isfinite(q) || !std::isfinite(beta) || beta < 0.0) {
    throw DomainError("q and beta must be finite with beta ≥ 0");
  }
  if (!(q > beta && q < 1.0 - beta)) {
    throw DomainError("q must lie strictly between beta and 1 − beta");
  }
}

void check_sigmas(double sigma_max_sq, double sigma_restricted_min_sq) {
  if (!(sigma_max_sq > 0.0) || !std::isfinite(sigma_max_sq)) {
    throw DomainError("sigma_max_sq must be positive and finite");
  }
  if (!(sigma_restricted_min_sq >= 0.0) || !std::isfinite(sigma_restricted_min_sq)) {
    throw DomainError("sigma_restricted_min_sq must be finite and ≥ 0");
  }
}

// √β/√(1−q−β)
double corruption_ratio(double q, double beta) {
  return std::sqrt(beta) / std::sqrt(1.0 - q - beta);
}

TermCheck make_check(double lhs, double rhs, double tolerance) {
  TermCheck c;
  c.lhs = lhs;
  c.rhs = rhs;
  c.slack = rhs - lhs;
  c.pass = c.slack >= -tolerance;
  return c;
}

}  // namespace

ConditionResult convergence_condition(double q, double beta, double sigma_max_sq,
                                      double sigma_restricted_min_sq) {
  check_window(q, beta);
  check_sigmas(sigma_max_sq, sigma_restricted_min_sq);
  const double s = corruption_ratio(q, beta);
  ConditionResult out;
  out.holds = s < sigma_restricted_min_sq / sigma_max_sq;
  if (beta == 0.0) {
    out.epsilon = 0.0;
  } else if (sigma_restricted_min_sq == 0.0) {
    out.epsilon = std::numeric_limits<double>::infinity();
  } else {
    out.epsilon = s * sigma_max_sq / sigma_restricted_min_sq;
  }
  return out;
}

RateReport rate_report(double q, double beta, std::size_t m, double sigma_max_sq,
                       double sigma_restricted_min_sq, bool exact) {
  if (m == 0) throw DomainError("row count must be positive");
  const ConditionResult cond = convergence_condition(q, beta, sigma_max_sq, sigma_restricted_min_sq);
  if (!cond.holds) {
    throw ConditionViolated("√β/√(1−q−β) is not below σ²_restricted/σ²_max");
  }
  const double qm = q * static_cast<double>(m);
  const double qm2 = qm * qm;
  const double s = corruption_ratio(q, beta);
  const double smax = sigma_max_sq;
  const double sr = sigma_restricted_min_sq;

  RateReport r;
  r.inputs = {q, beta, m, sigma_max_sq, sigma_restricted_min_sq, exact};
  r.condition_holds = true;
  r.epsilon = cond.epsilon;
  r.c1 = 2.0 * sr / qm - 2.0 * s * smax / qm;
  r.c2 = smax * sr / qm2 - 2.0 * s * smax * sr / qm2 + beta * smax * smax / (qm2 * (1.0 - q - beta));
  r.alpha_opt = r.c1 / (2.0 * r.c2);
  r.contraction = 1.0 - r.c1 * r.c1 / (4.0 * r.c2);
  return r;
}

double alpha_opt_from_epsilon(double q, double beta, std::size_t m, double sigma_max_sq,
                              double sigma_restricted_min_sq) {
  const double eps = convergence_condition(q, beta, sigma_max_sq, sigma_restricted_min_sq).epsilon;
  const double qm = q * static_cast<double>(m);
  return qm * (1.0 - eps) / (sigma_max_sq - eps * (2.0 - eps) * sigma_restricted_min_sq);
}

double contraction_from_epsilon(double q, double beta, double sigma_max_sq,
                                double sigma_restricted_min_sq) {
  const double eps = convergence_condition(q, beta, sigma_max_sq, sigma_restricted_min_sq).epsilon;
  const double one_minus = 1.0 - eps;
  return 1.0 - one_minus * one_minus * sigma_restricted_min_sq /
                   (sigma_max_sq - eps * (2.0 - eps) * sigma_restricted_min_sq);
}

double decrease(const RateReport& report, double alpha) {
  return report.c1 * alpha - report.c2 * alpha * alpha;
}

double rate_factor(const RateReport& report, double alpha) {
  return 1.0 - report.c1 * alpha + report.c2 * alpha * alpha;
}

double scaled_step_decrease(double xi) {
  if (!(xi > 0.0 && xi < 2.0)) throw DomainError("step scale must lie in (0, 2)");
  return 2.0 * xi - xi * xi;
}

std::size_t restricted_subset_size(double q, double beta, std::size_t m) {
  if (!(q > beta)) throw DomainError("q must exceed beta");
  return ceil_count((q - beta) * static_cast<double>(m));
}

SpectralSummary restricted_spectrum(const DenseMatrix& a, double q, double beta,
                                    std::size_t samples, std::uint64_t seed) {
  const std::size_t k = std::min(restricted_subset_size(q, beta, a.rows()), a.rows());
  if (k < a.cols()) {
    // Fewer rows than columns: every such submatrix is rank deficient.
    SpectralSummary s;
    s.sigma_max_sq = sigma_max_sq(a);
    s.sigma_restricted_min_sq = 0.0;
    s.subset_size = k;
    s.restricted_fraction = static_cast<double>(k) / static_cast<double>(a.rows());
    s.exact = true;
    return s;
  }
  if (binomial(a.rows(), k) <= kDefaultEnumerationCap) {
    return restricted_min_sv_bruteforce(a, k);
  }
  return restricted_min_sv_sampled(a, k, samples, seed);
}

bool CertificateResult::all_pass() const {
  return term1.pass && term2.pass && term3.pass && combined.pass &&
         (!worst_case || worst_case->pass);
}

CertificateResult certify_iteration(const CorruptedSystem& system,
                                    std::span<const double> x_k,
                                    std::span<const double> x_k1, double q, double alpha,
                                    std::span<const std::size_t> tau, double sigma_max_sq,
                                    const std::optional<RateReport>& worst_case,
                                    double tolerance) {
  const DenseMatrix& a = system.a;
  const std::size_t n = a.cols();
  if (x_k.size() != n || x_k1.size() != n) throw ShapeError("iterate length mismatch");

  const auto mask = system.corruption_mask();
  std::vector<std::size_t> tau1;
  std::vector<std::size_t> tau2;
  for (std::size_t i : tau) {
    if (i >= a.rows()) throw ShapeError("accepted index out of range");
    (mask[i] ? tau2 : tau1).push_back(i);
  }
  if (tau1.size() < n) {
    throw ShapeError("uncorrupted accepted rows do not form a tall submatrix");
  }

  const double t = static_cast<double>(tau.size());
  const double coef = 2.0 * alpha / t - alpha * alpha * sigma_max_sq / (t * t);
  if (coef < 0.0) throw PreconditionViolated("2α/|τ| − α²σ²_max/|τ|² is negative");

  const Vector r = residual(a, system.b_observed, x_k);
  std::vector<double> magnitudes(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) magnitudes[i] = std::abs(r[i]);

  CertificateResult out;
  out.quantile = quantile_of_multiset(magnitudes, q);
  out.tau_size = tau.size();
  out.tau_uncorrupted = tau1.size();
  out.tau_corrupted = tau2.size();

  Vector e(n);
  Vector e_next(n);
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = x_k[j] - system.x_star[j];
    e_next[j] = x_k1[j] - system.x_star[j];
  }
  const double e_sq = dot(e, e);
  const double scale = alpha / t;

  // X = (I − (α/|τ|)·A_τ₁ᵀA_τ₁)e
  Vector x_part = e;
  for (std::size_t i : tau1) axpy(-scale * dot(a.row(i), e), a.row(i), x_part);
  // Y = (α/|τ|)·Σ_{τ₂}(aᵢᵀx_k − bᵢ)aᵢ
  Vector y_part(n, 0.0);
  for (std::size_t i : tau2) axpy(-scale * r[i], a.row(i), y_part);

  Vector gap = e_next;
  axpy(-1.0, x_part, gap);
  axpy(1.0, y_part, gap);
  out.decomposition_error = norm(gap);

  out.sigma_min_sq_uncorrupted = sigma_min_sq(a.select_rows(tau1));
  const double sigma_max = std::sqrt(sigma_max_sq);
  const double x_sq = dot(x_part, x_part);
  const double x_norm = std::sqrt(x_sq);
  const double y_sq = dot(y_part, y_part);
  const double cross = 2.0 * alpha * out.quantile * std::sqrt(static_cast<double>(tau2.size())) *
                       sigma_max / t;

  const double t1_rhs = (1.0 - coef * out.sigma_min_sq_uncorrupted) * e_sq;
  const double t3_rhs = alpha * alpha * out.quantile * out.quantile * sigma_max_sq *
                        static_cast<double>(tau2.size()) / (t * t);
  out.term1 = make_check(x_sq, t1_rhs, tolerance);
  out.term2 = make_check(2.0 * std::abs(dot(x_part, y_part)), cross * x_norm, tolerance);
  out.term3 = make_check(y_sq, t3_rhs, tolerance);

  const double e_next_sq = dot(e_next, e_next);
  out.combined =
      make_check(e_next_sq, t1_rhs + cross * std::sqrt(std::max(t1_rhs, 0.0)) + t3_rhs, tolerance);
  if (worst_case) {
    out.worst_case = make_check(e_next_sq, rate_factor(*worst_case, alpha) * e_sq, tolerance);
  }
  return out;
}

AutoStepSize resolve_auto_alpha(const CorruptedSystem& system, double q) {
  const double beta = system.corrupted_fraction();
  check_window(q, beta);
  const SpectralSummary s = restricted_spectrum(system.a, q, beta, 200, system.spec.seed);
  AutoStepSize out;
  out.report = rate_report(q, beta, system.rows(), s.sigma_max_sq, s.sigma_restricted_min_sq,
                           s.exact);
  out.alpha = out.report.alpha_opt;
  out.exact = s.exact;
  return out;
}

std::string rate_report_json(const RateReport& r) {
  const json j{{"c1", r.c1},
               {"c2", r.c2},
               {"alpha_opt", r.alpha_opt},
               {"contraction", r.contraction},
               {"condition_holds", r.condition_holds},
               {"epsilon", r.epsilon},
               {"inputs",
                {{"q", r.inputs.q},
                 {"beta", r.inputs.beta},
                 {"m", r.inputs.m},
                 {"sigma_max_sq", r.inputs.sigma_max_sq},
                 {"sigma_restricted_min_sq", r.inputs.sigma_restricted_min_sq},
                 {"exact", r.inputs.exact}}}};
  return j.dump(2) + "\n";
}

std::string rate_report_summary(const RateReport& r) {
  using detail::format_real;
  std::string out;
  out += "q = " + format_real(r.inputs.q) + ", beta = " + format_real(r.inputs.beta) +
         ", m = " + std::to_string(r.inputs.m) + "\n";
  out += "sigma_max^2 = " + format_real(r.inputs.sigma_max_sq) +
         ", restricted sigma_min^2 = " + format_real(r.inputs.sigma_restricted_min_sq) +
         (r.inputs.exact ? " (exact)" : " (sampled estimate)") + "\n";
  out += std::string("convergence condition: ") + (r.condition_holds ? "holds" : "fails") +
         ", epsilon = " + format_real(r.epsilon) + "\n";
  out += "c1 = " + format_real(r.c1) + ", c2 = " + format_real(r.c2) + "\n";
  out += "optimal step = " + format_real(r.alpha_opt) +
         ", contraction per iteration = " + format_real(r.contraction) + "\n";
  return out;
}

}  // namespace qabk
