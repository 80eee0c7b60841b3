#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qabk/errors.hpp"
#include "qabk/linalg.hpp"
#include "qabk/problems.hpp"
#include "qabk/rng.hpp"
#include "qabk/solvers.hpp"
#include "qabk/theory.hpp"

namespace {

const double kHalfRoot2 = std::sqrt(2.0) / 2.0;

qabk::DenseMatrix four_by_two() {
  auto m = qabk::DenseMatrix::from_rows(
      {{1, 0}, {0, 1}, {kHalfRoot2, kHalfRoot2}, {kHalfRoot2, -kHalfRoot2}});
  m.mark_row_normalized(true);
  return m;
}

qabk::CorruptedSystem consistent_system(const qabk::DenseMatrix& a, const qabk::Vector& x_star) {
  qabk::CorruptedSystem sys;
  sys.a = a;
  sys.x_star = x_star;
  sys.b_true = qabk::matvec(a, x_star);
  sys.b_observed = sys.b_true;
  sys.spec.m = a.rows();
  sys.spec.n = a.cols();
  return sys;
}

qabk::CorruptedSystem make_system(std::size_t m, std::size_t n, double beta, std::uint64_t seed) {
  qabk::GeneratorSpec s;
  s.m = m;
  s.n = n;
  s.seed = seed;
  s.corruption.beta = beta;
  return qabk::generate(s);
}

}  // namespace

TEST(Condition, CleanSystemsAlwaysHold) {
  for (double q : {0.1, 0.5, 0.9}) {
    const auto c = qabk::convergence_condition(q, 0.0, 3.0, 1e-6);
    EXPECT_TRUE(c.holds);
    EXPECT_EQ(c.epsilon, 0.0);
  }
  const auto c = qabk::convergence_condition(0.5, 0.0, 2.0, 1.0 - kHalfRoot2);
  EXPECT_TRUE(c.holds);
  EXPECT_EQ(c.epsilon, 0.0);
}

TEST(Condition, StrictAtEquality) {
  // √0.25/√0.25 = 1 = σ²_restricted/σ²_max, exactly representable.
  const auto c = qabk::convergence_condition(0.5, 0.25, 1.0, 1.0);
  EXPECT_FALSE(c.holds);
  EXPECT_EQ(c.epsilon, 1.0);
  EXPECT_TRUE(qabk::convergence_condition(0.5, 0.24, 1.0, 1.0).holds);
}

TEST(Condition, Epsilon) {
  const auto c = qabk::convergence_condition(0.7, 0.1, 4.0, 2.0);
  EXPECT_NEAR(c.epsilon, std::sqrt(0.1) / std::sqrt(0.2) * 2.0, 1e-15);
  EXPECT_FALSE(c.holds);
  EXPECT_TRUE(std::isinf(qabk::convergence_condition(0.7, 0.1, 4.0, 0.0).epsilon));
}

TEST(Condition, DomainErrors) {
  EXPECT_THROW(qabk::convergence_condition(0.2, 0.2, 1.0, 1.0), qabk::DomainError);
  EXPECT_THROW(qabk::convergence_condition(0.8, 0.2, 1.0, 1.0), qabk::DomainError);
  EXPECT_THROW(qabk::convergence_condition(0.5, -0.1, 1.0, 1.0), qabk::DomainError);
  EXPECT_THROW(qabk::convergence_condition(0.5, 0.1, 0.0, 1.0), qabk::DomainError);
  EXPECT_THROW(qabk::convergence_condition(0.5, 0.1, 1.0, -1.0), qabk::DomainError);
}

TEST(RateReport, FourByTwoWorkedExample) {
  const auto spectrum = qabk::restricted_spectrum(four_by_two(), 0.5, 0.0);
  ASSERT_TRUE(spectrum.exact);
  EXPECT_NEAR(spectrum.sigma_max_sq, 2.0, 1e-12);
  EXPECT_NEAR(spectrum.sigma_restricted_min_sq, 1.0 - kHalfRoot2, 1e-12);
  const auto r = qabk::rate_report(0.5, 0.0, 4, spectrum.sigma_max_sq, spectrum.sigma_restricted_min_sq);
  EXPECT_NEAR(r.c1, 1.0 - kHalfRoot2, 1e-10);
  EXPECT_NEAR(r.c2, 2.0 * (1.0 - kHalfRoot2) / 4.0, 1e-10);
  EXPECT_NEAR(r.alpha_opt, 1.0, 1e-10);
  EXPECT_NEAR(r.contraction, (1.0 + kHalfRoot2) / 2.0, 1e-10);
  EXPECT_TRUE(r.condition_holds);
  EXPECT_TRUE(r.inputs.exact);
}

TEST(RateReport, CleanClosedForm) {
  qabk::Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double q = 0.05 + 0.9 * rng.uniform();
    const std::size_t m = 10 + rng.below(5000);
    const double smax = 0.5 + 10 * rng.uniform();
    const double sr = smax * (0.01 + 0.98 * rng.uniform());
    const auto r = qabk::rate_report(q, 0.0, m, smax, sr);
    EXPECT_NEAR(r.alpha_opt, q * m / smax, 1e-10 * q * m / smax);
    EXPECT_NEAR(r.contraction, 1.0 - sr / smax, 1e-12);
  }
}

TEST(RateReport, ViolationThrows) {
  EXPECT_THROW(qabk::rate_report(0.7, 0.2, 100, 1.0, 0.1), qabk::ConditionViolated);
  EXPECT_THROW(qabk::rate_report(0.5, 0.25, 100, 1.0, 1.0), qabk::ConditionViolated);
}

TEST(RateReport, EpsilonFormAgrees) {
  qabk::Rng rng(2);
  int checked = 0;
  while (checked < 200) {
    const double beta = 0.3 * rng.uniform();
    const double q = beta + (1.0 - 2.0 * beta) * (0.05 + 0.9 * rng.uniform());
    const double smax = 0.5 + 10.0 * rng.uniform();
    const double sr = smax * rng.uniform();
    const std::size_t m = 10 + rng.below(10000);
    if (!(q > beta && q < 1.0 - beta)) continue;
    if (!qabk::convergence_condition(q, beta, smax, sr).holds) continue;
    const auto r = qabk::rate_report(q, beta, m, smax, sr);
    EXPECT_NEAR(qabk::alpha_opt_from_epsilon(q, beta, m, smax, sr), r.alpha_opt,
                1e-10 * std::abs(r.alpha_opt));
    EXPECT_NEAR(qabk::contraction_from_epsilon(q, beta, smax, sr), r.contraction, 1e-10);
    EXPECT_GE(r.contraction, 0.0);
    EXPECT_LT(r.contraction, 1.0);
    EXPECT_GT(r.c2, 0.0);
    EXPECT_GE(r.epsilon, 0.0);
    EXPECT_LT(r.epsilon, 1.0);
    ++checked;
  }
}

TEST(RateReport, QuadraticStructureAndWindow) {
  qabk::Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double beta = 0.05 * rng.uniform();
    const double q = 0.5 + 0.3 * rng.uniform();
    const double smax = 1.0 + rng.uniform();
    const double sr = smax * (0.6 + 0.4 * rng.uniform());
    if (!qabk::convergence_condition(q, beta, smax, sr).holds) continue;
    const auto r = qabk::rate_report(q, beta, 1000, smax, sr);
    const double best = qabk::decrease(r, r.alpha_opt);
    EXPECT_NEAR(best, r.c1 * r.c1 / (4.0 * r.c2), 1e-12 * std::max(1.0, best));
    EXPECT_LT(qabk::decrease(r, 1.1 * r.alpha_opt), best);
    EXPECT_LT(qabk::decrease(r, 0.9 * r.alpha_opt), best);

    const double edge = r.c1 / r.c2;
    EXPECT_NEAR(qabk::rate_factor(r, edge), 1.0, 1e-12);
    EXPECT_EQ(qabk::rate_factor(r, 0.0), 1.0);
    for (double f : {0.01, 0.25, 0.5, 0.75, 0.99}) EXPECT_LT(qabk::rate_factor(r, f * edge), 1.0);
    EXPECT_GT(qabk::rate_factor(r, 1.01 * edge), 1.0);
  }
}

TEST(RateReport, ContractionNonIncreasingInRestrictedSigma) {
  for (double beta : {0.0, 0.01, 0.05}) {
    double prev = 1.0;
    for (int i = 1; i <= 200; ++i) {
      const double sr = i / 200.0;
      if (!qabk::convergence_condition(0.6, beta, 1.0, sr).holds) continue;
      const double c = qabk::rate_report(0.6, beta, 500, 1.0, sr).contraction;
      EXPECT_LE(c, prev + 1e-15);
      prev = c;
    }
  }
}

TEST(ScaledStep, Examples) {
  EXPECT_EQ(qabk::scaled_step_decrease(1.0), 1.0);
  EXPECT_EQ(qabk::scaled_step_decrease(0.5), 0.75);
  EXPECT_NEAR(qabk::scaled_step_decrease(1e-9), 0.0, 1e-8);
  EXPECT_NEAR(qabk::scaled_step_decrease(2.0 - 1e-9), 0.0, 1e-8);
  EXPECT_THROW(qabk::scaled_step_decrease(0.0), qabk::DomainError);
  EXPECT_THROW(qabk::scaled_step_decrease(2.0), qabk::DomainError);
}

TEST(ScaledStep, MatchesQuadraticRatio) {
  const auto r = qabk::rate_report(0.6, 0.02, 800, 1.5, 1.2);
  for (double xi : {0.1, 0.5, 0.9, 1.3, 1.9}) {
    EXPECT_NEAR(qabk::decrease(r, xi * r.alpha_opt) / qabk::decrease(r, r.alpha_opt),
                qabk::scaled_step_decrease(xi), 1e-12);
  }
}

TEST(RestrictedSpectrum, SubsetSizeAndShortcuts) {
  EXPECT_EQ(qabk::restricted_subset_size(0.7, 0.2, 2000), 1000u);
  EXPECT_EQ(qabk::restricted_subset_size(0.5, 0.0, 4), 2u);
  EXPECT_EQ(qabk::restricted_subset_size(0.55, 0.1, 10), 5u);
  const auto sys = make_system(12, 4, 0.0, 1);
  const auto wide = qabk::restricted_spectrum(sys.a, 0.25, 0.0);
  EXPECT_EQ(wide.sigma_restricted_min_sq, 0.0);
  EXPECT_TRUE(wide.exact);
  const auto big = make_system(400, 5, 0.0, 2);
  const auto sampled = qabk::restricted_spectrum(big.a, 0.5, 0.0, 20, 1);
  EXPECT_FALSE(sampled.exact);
  EXPECT_EQ(sampled.subsets_examined, 20u);
}

TEST(Certificate, CleanSystemHasNoCorruptedTerm) {
  const auto sys = make_system(300, 10, 0.0, 4);
  const double smax = qabk::sigma_max_sq(sys.a);
  const double alpha = 0.7 * 300 / smax;
  qabk::Vector x(10, 1.0);
  for (int k = 0; k < 10; ++k) {
    const auto step = qabk::quantile_abk_step(sys.a, sys.b_observed, x, 0.7, alpha);
    const auto cert = qabk::certify_iteration(sys, x, step.x, 0.7, alpha, step.stats.accepted, smax);
    EXPECT_EQ(cert.tau_corrupted, 0u);
    EXPECT_EQ(cert.term2.lhs, 0.0);
    EXPECT_EQ(cert.term2.slack, 0.0);
    EXPECT_EQ(cert.term3.lhs, 0.0);
    EXPECT_EQ(cert.term3.slack, 0.0);
    EXPECT_TRUE(cert.all_pass());
    EXPECT_LT(cert.decomposition_error, 1e-12);
    x = step.x;
  }
}

TEST(Certificate, FourByTwoCombinedBound) {
  const auto a = four_by_two();
  const double smax = 2.0;
  const auto report = qabk::rate_report(0.5, 0.0, 4, smax, 1.0 - kHalfRoot2);
  qabk::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const qabk::Vector x_star{rng.normal(), rng.normal()};
    const auto sys = consistent_system(a, x_star);
    const qabk::Vector x0{x_star[0] + rng.normal(), x_star[1] + rng.normal()};
    const auto step = qabk::quantile_abk_step(a, sys.b_observed, x0, 0.5, 1.0,
                                              qabk::Comparator::at_or_below);
    const auto cert = qabk::certify_iteration(sys, x0, step.x, 0.5, 1.0, step.stats.accepted, smax,
                                              report);
    EXPECT_TRUE(cert.all_pass());
    const double e0 = qabk::distance(x0, x_star);
    const double e1 = qabk::distance(step.x, x_star);
    EXPECT_LE(e1 * e1, 0.85355339059327 * e0 * e0 + 1e-12);
    EXPECT_NEAR(cert.worst_case->rhs, report.contraction * e0 * e0, 1e-12);
  }
}

TEST(Certificate, CorruptedIterationsPassEveryTerm) {
  const auto sys = make_system(2000, 20, 0.2, 6);
  const double smax = qabk::sigma_max_sq(sys.a);
  // The clean-row bound needs α ≤ 2|τ|/σ²_max.
  const double alpha = 0.7 * 2000 / smax;
  qabk::Vector x(20, 1.0);
  std::size_t corrupted_seen = 0;
  for (int k = 0; k < 40; ++k) {
    const auto step = qabk::quantile_abk_step(sys.a, sys.b_observed, x, 0.7, alpha);
    const auto cert = qabk::certify_iteration(sys, x, step.x, 0.7, alpha, step.stats.accepted, smax);
    EXPECT_TRUE(cert.term1.pass);
    EXPECT_TRUE(cert.term2.pass);
    EXPECT_TRUE(cert.term3.pass);
    EXPECT_TRUE(cert.combined.pass);
    EXPECT_LT(cert.decomposition_error, 1e-9 * std::max(1.0, qabk::distance(x, sys.x_star)));
    corrupted_seen += cert.tau_corrupted;
    x = step.x;
  }
  EXPECT_GT(corrupted_seen, 0u);
}

TEST(Certificate, Errors) {
  const auto sys = make_system(50, 5, 0.0, 7);
  const qabk::Vector x(5, 1.0);
  const std::vector<std::size_t> few{0, 1, 2};
  EXPECT_THROW(qabk::certify_iteration(sys, x, x, 0.5, 1.0, few, 1.0), qabk::ShapeError);
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
  EXPECT_THROW(qabk::certify_iteration(sys, x, x, 0.5, 100.0, rows, 1.0),
               qabk::PreconditionViolated);
  EXPECT_THROW(qabk::certify_iteration(sys, qabk::Vector(4), x, 0.5, 1.0, rows, 1.0),
               qabk::ShapeError);
}

TEST(AutoStep, UsesRealizedCorruption) {
  const auto sys = make_system(12, 2, 0.0, 8);
  const auto step = qabk::resolve_auto_alpha(sys, 0.5);
  EXPECT_TRUE(step.exact);
  EXPECT_EQ(step.report.inputs.beta, 0.0);
  EXPECT_NEAR(step.alpha, 6.0 / step.report.inputs.sigma_max_sq, 1e-9);
  EXPECT_THROW(qabk::resolve_auto_alpha(make_system(2000, 50, 0.2, 9), 0.7), qabk::ConditionViolated);
}

TEST(Serialization, JsonAndSummary) {
  const auto r = qabk::rate_report(0.5, 0.0, 4, 2.0, 1.0 - kHalfRoot2);
  const auto json = qabk::rate_report_json(r);
  EXPECT_NE(json.find("\"c1\""), std::string::npos);
  EXPECT_NE(json.find("\"alpha_opt\""), std::string::npos);
  EXPECT_NE(json.find("\"contraction\""), std::string::npos);
  EXPECT_NE(qabk::rate_report_summary(r).find("holds"), std::string::npos);
}
