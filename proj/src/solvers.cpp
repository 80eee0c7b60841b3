#include "qabk/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "io_util.hpp"
#include "json.hpp"
#include "json_io.hpp"
#include "qabk/theory.hpp"

namespace qabk {

using nlohmann::json;

std::string_view to_string(Method method) {
  switch (method) {
    case Method::rk: return "rk";
    case Method::quantile_rk: return "quantile-rk";
    case Method::averaged_rbk: return "averaged-rbk";
    case Method::quantile_abk: return "quantile-abk";
    case Method::sampled_qabk: return "sampled-qabk";
    case Method::quantile_pbk: return "quantile-pbk";
  }
  return "quantile-abk";
}

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

std::string_view to_string(Comparator comparator) {
  return comparator == Comparator::strict_below ? "strict-below" : "at-or-below";
}

Comparator parse_comparator(std::string_view text) {
  if (text == "strict-below") return Comparator::strict_below;
  if (text == "at-or-below") return Comparator::at_or_below;
  throw ConfigError("unknown comparator '" + std::string(text) + "'");
}

StepSize StepSize::parse(std::string_view text) {
  if (text == "auto") return automatic();
  std::string body(text);
  bool per_col = false;
  if (!body.empty() && body.back() == 'n') {
    per_col = true;
    body.pop_back();
  }
  char* end = nullptr;
  const double v = std::strtod(body.c_str(), &end);
  if (body.empty() || end != body.c_str() + body.size() || !std::isfinite(v) || v < 0.0) {
    throw ConfigError("invalid step size '" + std::string(text) + "'");
  }
  return per_col ? per_column(v) : fixed(v);
}

std::string StepSize::to_string() const {
  switch (kind) {
    case Kind::automatic: return "auto";
    case Kind::per_column: return detail::format_real(value) + "n";
    case Kind::fixed: break;
  }
  return detail::format_real(value);
}

Diverged::Diverged(IterationTrace trace)
    : Error("relative error diverged at iteration " +
            std::to_string(trace.records.empty() ? 0 : trace.records.back().iter)),
      trace_(std::move(trace)) {}

double quantile_of_multiset(std::span<const double> values, double q) {
  if (values.empty()) throw EmptyInput("quantile of an empty multiset");
  if (!(q > 0.0 && q <= 1.0)) throw DomainError("quantile level must lie in (0, 1]");
  std::size_t k = ceil_count(q * static_cast<double>(values.size()));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::vector<double> work(values.begin(), values.end());
  auto nth = work.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(work.begin(), nth, work.end());
  return *nth;
}

Vector residual(const DenseMatrix& a, std::span<const double> b, std::span<const double> x) {
  if (b.size() != a.rows() || x.size() != a.cols()) {
    throw ShapeError("residual: shapes of A, b and x disagree");
  }
  Vector r(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) r[i] = b[i] - dot(a.row(i), x);
  return r;
}

namespace {

bool admits(double value, double threshold, Comparator comparator) {
  return comparator == Comparator::strict_below ? value < threshold : value <= threshold;
}

void check_shapes(const DenseMatrix& a, std::span<const double> b, std::span<const double> x) {
  if (b.size() != a.rows() || x.size() != a.cols()) {
    throw ShapeError("shapes of A, b and x disagree");
  }
}

// x + (α/|τ|)·Σ_{i∈τ} rᵢaᵢ, where rᵢ = bᵢ − aᵢᵀx, accumulated in index order.
Vector averaged_update(const DenseMatrix& a, std::span<const double> x,
                       std::span<const std::size_t> tau, std::span<const double> r_of_tau,
                       double alpha) {
  Vector next(x.begin(), x.end());
  if (tau.empty() || alpha == 0.0) return next;
  Vector sum(a.cols(), 0.0);
  for (std::size_t k = 0; k < tau.size(); ++k) axpy(r_of_tau[k], a.row(tau[k]), sum);
  axpy(alpha / static_cast<double>(tau.size()), sum, next);
  return next;
}

// Threshold and accepted rows over the listed candidate rows.
StepStats select(std::span<const std::size_t> candidates, std::span<const double> r, double q,
                 Comparator comparator) {
  std::vector<double> magnitudes(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) magnitudes[k] = std::abs(r[k]);
  StepStats stats;
  stats.quantile = quantile_of_multiset(magnitudes, q);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (admits(magnitudes[k], stats.quantile, comparator)) stats.accepted.push_back(candidates[k]);
  }
  return stats;
}

std::vector<std::size_t> all_rows(std::size_t m) {
  std::vector<std::size_t> rows(m);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void check_sample_size(std::size_t t, std::size_t m) {
  if (t < 1 || t > m) throw ShapeError("sample size must lie in [1, m]");
}

}  // namespace

StepResult quantile_abk_step(const DenseMatrix& a, std::span<const double> b,
                             std::span<const double> x, double q, double alpha,
                             Comparator comparator) {
  const Vector r = residual(a, b, x);
  const auto rows = all_rows(a.rows());
  StepResult out;
  out.stats = select(rows, r, q, comparator);
  Vector r_tau;
  r_tau.reserve(out.stats.accepted.size());
  for (std::size_t i : out.stats.accepted) r_tau.push_back(r[i]);
  out.x = averaged_update(a, x, out.stats.accepted, r_tau, alpha);
  return out;
}

StepResult sampled_qabk_step(const DenseMatrix& a, std::span<const double> b,
                             std::span<const double> x, double q, std::size_t t,
                             double alpha, Rng& rng, Comparator comparator) {
  check_shapes(a, b, x);
  check_sample_size(t, a.rows());
  const auto sample = t == a.rows() ? all_rows(a.rows()) : rng.sample_without_replacement(a.rows(), t);
  Vector r(sample.size());
  for (std::size_t k = 0; k < sample.size(); ++k) r[k] = b[sample[k]] - dot(a.row(sample[k]), x);
  StepResult out;
  out.stats = select(sample, r, q, comparator);
  Vector r_tau;
  r_tau.reserve(out.stats.accepted.size());
  for (std::size_t k = 0, j = 0; k < sample.size() && j < out.stats.accepted.size(); ++k) {
    if (sample[k] == out.stats.accepted[j]) {
      r_tau.push_back(r[k]);
      ++j;
    }
  }
  out.x = averaged_update(a, x, out.stats.accepted, r_tau, alpha);
  return out;
}

StepResult quantile_pbk_step(const DenseMatrix& a, std::span<const double> b,
                             std::span<const double> x, double q, Comparator comparator) {
  const Vector r = residual(a, b, x);
  const auto rows = all_rows(a.rows());
  StepResult out;
  out.stats = select(rows, r, q, comparator);
  out.x.assign(x.begin(), x.end());
  const auto& tau = out.stats.accepted;
  if (tau.empty()) return out;

  Vector r_tau;
  r_tau.reserve(tau.size());
  for (std::size_t i : tau) r_tau.push_back(r[i]);
  // Every row is unit norm, so both Gram matrices have trace |τ|; the sum is
  // still taken explicitly to stay correct for unnormalized input.
  double trace = 0.0;
  for (std::size_t i : tau) trace += dot(a.row(i), a.row(i));
  const double ridge = 1e-12 * trace;

  const std::size_t n = a.cols();
  Vector step(n, 0.0);
  if (tau.size() <= n) {
    // Minimum-norm solution of A_τ d = r_τ: d = A_τᵀ (A_τA_τᵀ)⁻¹ r_τ.
    const DenseMatrix g = outer_gram_of_rows(a, tau);
    Vector z(tau.size());
    solve_psd(g, r_tau, ridge, z);
    for (std::size_t k = 0; k < tau.size(); ++k) axpy(z[k], a.row(tau[k]), step);
  } else {
    // Least-squares solution of A_τ d ≈ r_τ: (A_τᵀA_τ) d = A_τᵀ r_τ.
    const DenseMatrix g = gram_of_rows(a, tau);
    Vector rhs(n, 0.0);
    for (std::size_t k = 0; k < tau.size(); ++k) axpy(r_tau[k], a.row(tau[k]), rhs);
    solve_psd(g, rhs, ridge, step);
  }
  axpy(1.0, step, out.x);
  return out;
}

Vector kaczmarz_projection(const DenseMatrix& a, std::span<const double> b,
                           std::span<const double> x, std::size_t i) {
  check_shapes(a, b, x);
  if (i >= a.rows()) throw ShapeError("row index out of range");
  Vector next(x.begin(), x.end());
  axpy(b[i] - dot(a.row(i), x), a.row(i), next);
  return next;
}

StepResult rk_step(const DenseMatrix& a, std::span<const double> b, std::span<const double> x,
                   Rng& rng) {
  check_shapes(a, b, x);
  const auto i = static_cast<std::size_t>(rng.below(a.rows()));
  StepResult out;
  out.x = kaczmarz_projection(a, b, x, i);
  out.stats.accepted = {i};
  return out;
}

StepResult quantile_rk_step(const DenseMatrix& a, std::span<const double> b,
                            std::span<const double> x, double q, std::size_t t, Rng& rng,
                            Comparator comparator) {
  check_shapes(a, b, x);
  check_sample_size(t, a.rows());
  const auto sample = t == a.rows() ? all_rows(a.rows()) : rng.sample_without_replacement(a.rows(), t);
  std::vector<double> magnitudes(sample.size());
  for (std::size_t k = 0; k < sample.size(); ++k) {
    magnitudes[k] = std::abs(b[sample[k]] - dot(a.row(sample[k]), x));
  }
  StepResult out;
  out.stats.quantile = quantile_of_multiset(magnitudes, q);
  const auto j = static_cast<std::size_t>(rng.below(a.rows()));
  const double rj = b[j] - dot(a.row(j), x);
  if (admits(std::abs(rj), out.stats.quantile, comparator)) {
    out.x.assign(x.begin(), x.end());
    axpy(rj, a.row(j), out.x);
    out.stats.accepted = {j};
  } else {
    out.x.assign(x.begin(), x.end());
  }
  return out;
}

Vector averaged_rbk_step(const DenseMatrix& a, std::span<const double> b,
                         std::span<const double> x, std::span<const std::size_t> block,
                         double alpha) {
  check_shapes(a, b, x);
  if (block.empty()) throw EmptyInput("averaged block step needs a nonempty block");
  Vector r_block(block.size());
  for (std::size_t k = 0; k < block.size(); ++k) {
    if (block[k] >= a.rows()) throw ShapeError("block index out of range");
    r_block[k] = b[block[k]] - dot(a.row(block[k]), x);
  }
  return averaged_update(a, x, block, r_block, alpha);
}

ResolvedSolverConfig resolve_config(const CorruptedSystem& system, const SolverConfig& config) {
  const std::size_t m = system.rows();
  const std::size_t n = system.cols();
  const double md = static_cast<double>(m);
  ResolvedSolverConfig out;
  out.config = config;

  if (!(config.q > 0.0 && config.q <= 1.0)) throw ConfigError("q must lie in (0, 1]");
  if (ceil_count(config.q * md) < 1 || config.q * md < 1.0 - 1e-9) {
    throw ConfigError("q·m must be at least 1");
  }
  if (!(config.stop_rel_error >= 0.0) || !std::isfinite(config.stop_rel_error)) {
    throw ConfigError("stop_rel_error must be a finite value ≥ 0");
  }

  out.t = config.t == 0 ? m : config.t;
  if (out.t > m) throw ConfigError("sample size t exceeds the row count");
  if ((config.method == Method::sampled_qabk || config.method == Method::quantile_rk) &&
      config.q * static_cast<double>(out.t) < 1.0 - 1e-9) {
    throw ConfigError("q·t must be at least 1");
  }
  out.block_size = config.block_size == 0 ? n : config.block_size;
  if (out.block_size > m) throw ConfigError("block size exceeds the row count");

  const bool uses_alpha = config.method == Method::quantile_abk ||
                          config.method == Method::sampled_qabk ||
                          config.method == Method::averaged_rbk;
  switch (config.alpha.kind) {
    case StepSize::Kind::fixed:
      out.alpha = config.alpha.value;
      out.alpha_source = "fixed";
      break;
    case StepSize::Kind::per_column:
      out.alpha = config.alpha.value * static_cast<double>(n);
      out.alpha_source = "per-column";
      break;
    case StepSize::Kind::automatic:
      if (!uses_alpha) {
        out.alpha = 1.0;
        out.alpha_source = "unused";
        break;
      }
      try {
        const AutoStepSize automatic = resolve_auto_alpha(system, config.q);
        out.alpha = automatic.alpha;
        out.alpha_source = automatic.exact ? "auto-exact" : "auto-sampled";
      } catch (const ConditionViolated& e) {
        throw ConfigError(std::string("alpha=auto: ") + e.what());
      } catch (const DomainError& e) {
        throw ConfigError(std::string("alpha=auto: ") + e.what());
      }
      break;
  }
  if (!std::isfinite(out.alpha) || out.alpha < 0.0) throw ConfigError("step size must be ≥ 0");
  return out;
}

IterationTrace solve(const CorruptedSystem& system, const SolverConfig& config,
                     std::span<const double> x0, const IterateObserver& observer) {
  return solve(system, resolve_config(system, config), x0, observer);
}

IterationTrace solve(const CorruptedSystem& system, const ResolvedSolverConfig& resolved,
                     std::span<const double> x0, const IterateObserver& observer) {
  if (x0.size() != system.cols()) throw ConfigError("x0 length does not match the column count");
  const double baseline = distance(x0, system.x_star);
  if (baseline == 0.0) throw ZeroBaseline("x0 equals x_star; relative error is undefined");

  const SolverConfig& cfg = resolved.config;
  const DenseMatrix& a = system.a;
  const std::span<const double> b = system.b_observed;
  const auto mask = system.corruption_mask();
  Rng rng = Rng::stream(cfg.seed, "solver");

  IterationTrace trace;
  trace.resolved = resolved;
  trace.x0.assign(x0.begin(), x0.end());
  trace.records.reserve(cfg.max_iters);
  Vector x = trace.x0;

  const auto start = std::chrono::steady_clock::now();
  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    StepResult step;
    switch (cfg.method) {
      case Method::rk:
        step = rk_step(a, b, x, rng);
        break;
      case Method::quantile_rk:
        step = quantile_rk_step(a, b, x, cfg.q, resolved.t, rng, cfg.comparator);
        break;
      case Method::averaged_rbk: {
        const auto block = rng.sample_without_replacement(a.rows(), resolved.block_size);
        step.x = averaged_rbk_step(a, b, x, block, resolved.alpha);
        step.stats.accepted = block;
        break;
      }
      case Method::quantile_abk:
        step = quantile_abk_step(a, b, x, cfg.q, resolved.alpha, cfg.comparator);
        break;
      case Method::sampled_qabk:
        step = sampled_qabk_step(a, b, x, cfg.q, resolved.t, resolved.alpha, rng, cfg.comparator);
        break;
      case Method::quantile_pbk:
        step = quantile_pbk_step(a, b, x, cfg.q, cfg.comparator);
        break;
    }
    x = std::move(step.x);

    IterationRecord rec;
    rec.iter = k;
    rec.rel_error = distance(x, system.x_star) / baseline;
    rec.quantile = step.stats.quantile;
    rec.tau_size = step.stats.accepted.size();
    for (std::size_t i : step.stats.accepted) rec.tau_corrupted += mask[i] ? 1 : 0;
    if (cfg.record_timing) {
      rec.elapsed_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
    }
    trace.records.push_back(rec);
    if (observer) observer(k, x);

    if (!std::isfinite(rec.rel_error) || rec.rel_error > kDivergenceThreshold) {
      trace.final_iterate = std::move(x);
      throw Diverged(std::move(trace));
    }
    if (cfg.stop_rel_error > 0.0 && rec.rel_error <= cfg.stop_rel_error) break;
  }
  trace.final_iterate = std::move(x);
  return trace;
}

std::string trace_to_csv(const IterationTrace& trace) {
  std::string out(kTraceCsvHeader);
  out += '\n';
  for (const auto& r : trace.records) {
    out += std::to_string(r.iter);
    out += ',';
    out += detail::format_real(r.rel_error);
    out += ',';
    out += detail::format_real(r.quantile);
    out += ',';
    out += std::to_string(r.tau_size);
    out += ',';
    out += std::to_string(r.tau_corrupted);
    out += ',';
    out += std::to_string(r.elapsed_ns);
    out += '\n';
  }
  return out;
}

namespace detail {

json solver_config_to_json(const ResolvedSolverConfig& resolved) {
  const SolverConfig& c = resolved.config;
  return json{{"method", to_string(c.method)},
              {"q", c.q},
              {"alpha", c.alpha.to_string()},
              {"alpha_resolved", resolved.alpha},
              {"alpha_source", resolved.alpha_source},
              {"t", resolved.t},
              {"block_size", resolved.block_size},
              {"max_iters", c.max_iters},
              {"stop_rel_error", c.stop_rel_error},
              {"comparator", to_string(c.comparator)},
              {"seed", c.seed},
              {"record_timing", c.record_timing}};
}

}  // namespace detail

std::string trace_config_json(const IterationTrace& trace) {
  json j = detail::solver_config_to_json(trace.resolved);
  json x0 = json::array();
  for (double v : trace.x0) x0.push_back(detail::format_real(v));
  j["x0"] = x0;
  j["iterations_recorded"] = trace.records.size();
  return j.dump(2) + "\n";
}

void write_trace(const IterationTrace& trace, const std::filesystem::path& csv_path) {
  detail::write_text(csv_path, trace_to_csv(trace));
  auto sidecar = csv_path;
  sidecar.replace_extension(".json");
  detail::write_text(sidecar, trace_config_json(trace));
}

}  // namespace qabk
