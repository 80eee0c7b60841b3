#include "qabk/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "io_util.hpp"
#include "json.hpp"
#include "json_io.hpp"
#include "qabk/errors.hpp"
#include "qabk/rng.hpp"

namespace qabk {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(X0Policy policy) {
  switch (policy) {
    case X0Policy::ones: return "ones";
    case X0Policy::zeros: return "zeros";
    case X0Policy::hyperplane: return "hyperplane";
  }
  return "ones";
}

X0Policy parse_x0_policy(std::string_view text) {
  if (text == "ones") return X0Policy::ones;
  if (text == "zeros") return X0Policy::zeros;
  if (text == "hyperplane") return X0Policy::hyperplane;
  throw ConfigError("unknown x0 policy '" + std::string(text) + "'");
}

std::string_view to_string(SweepParameter parameter) {
  switch (parameter) {
    case SweepParameter::alpha: return "alpha";
    case SweepParameter::q: return "q";
    case SweepParameter::t: return "t";
  }
  return "alpha";
}

SweepParameter parse_sweep_parameter(std::string_view text) {
  if (text == "alpha") return SweepParameter::alpha;
  if (text == "q") return SweepParameter::q;
  if (text == "t") return SweepParameter::t;
  throw ConfigError("unknown sweep parameter '" + std::string(text) + "'");
}

void validate(const ExperimentConfig& config) {
  if (config.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (config.sweep) {
    const auto& v = config.sweep->values;
    if (v.empty()) throw ConfigError("sweep needs at least one value");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) throw ConfigError("sweep values must be finite");
      if (i > 0 && !(v[i] > v[i - 1])) throw ConfigError("sweep values must be strictly increasing");
    }
    if (config.sweep->parameter == SweepParameter::t) {
      for (double t : v) {
        if (t < 1.0 || t != std::floor(t)) throw ConfigError("sample sizes must be positive integers");
      }
    }
  }
}

namespace {

json solver_to_json(const SolverConfig& c) {
  return json{{"method", to_string(c.method)},
              {"q", c.q},
              {"alpha", c.alpha.to_string()},
              {"t", c.t},
              {"block_size", c.block_size},
              {"max_iters", c.max_iters},
              {"stop_rel_error", c.stop_rel_error},
              {"comparator", to_string(c.comparator)},
              {"seed", c.seed},
              {"record_timing", c.record_timing}};
}

json experiment_json(const ExperimentConfig& config) {
  json j{{"generator", detail::spec_to_json(config.generator)},
         {"solver", solver_to_json(config.solver)},
         {"repetitions", config.repetitions},
         {"output_dir", config.output_dir.string()},
         {"x0", to_string(config.x0)},
         {"svg", config.svg}};
  if (config.sweep) {
    j["sweep"] = json{{"parameter", to_string(config.sweep->parameter)},
                      {"values", config.sweep->values},
                      {"per_column", config.sweep->per_column}};
  } else {
    j["sweep"] = nullptr;
  }
  return j;
}

template <typename T>
void patch(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void patch_generator(const json& j, GeneratorSpec& g) {
  if (j.contains("family")) g.family = parse_family(j.at("family").get<std::string>());
  patch(j, "m", g.m);
  patch(j, "n", g.n);
  patch(j, "seed", g.seed);
  if (j.contains("corruption")) {
    const json& c = j.at("corruption");
    patch(c, "beta", g.corruption.beta);
    patch(c, "magnitude_low", g.corruption.magnitude_low);
    patch(c, "magnitude_high", g.corruption.magnitude_high);
    if (c.contains("placement")) {
      g.corruption.placement = parse_placement(c.at("placement").get<std::string>());
    }
    patch(c, "indices", g.corruption.indices);
    patch(c, "target", g.corruption.target);
  }
}

void patch_solver(const json& j, SolverConfig& s) {
  if (j.contains("method")) s.method = parse_method(j.at("method").get<std::string>());
  patch(j, "q", s.q);
  if (j.contains("alpha")) {
    const json& a = j.at("alpha");
    s.alpha = a.is_string() ? StepSize::parse(a.get<std::string>()) : StepSize::fixed(a.get<double>());
  }
  patch(j, "t", s.t);
  patch(j, "block_size", s.block_size);
  patch(j, "max_iters", s.max_iters);
  patch(j, "stop_rel_error", s.stop_rel_error);
  if (j.contains("comparator")) s.comparator = parse_comparator(j.at("comparator").get<std::string>());
  patch(j, "seed", s.seed);
  patch(j, "record_timing", s.record_timing);
}

// Defaults that depend on the system shape, written out explicitly.
ExperimentConfig materialized(ExperimentConfig config, const CorruptedSystem& system) {
  if (config.solver.t == 0) config.solver.t = system.rows();
  if (config.solver.block_size == 0) config.solver.block_size = system.cols();
  return config;
}

GeneratorSpec repetition_spec(GeneratorSpec spec, std::size_t repetition) {
  if (repetition > 0) spec.seed = mix_seed(spec.seed, "repetition", repetition);
  return spec;
}

std::vector<double> positive_finite_only(const std::vector<double>& xs, const std::vector<double>& ys,
                                         std::vector<double>& kept_x) {
  std::vector<double> kept_y;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::isfinite(ys[i]) && ys[i] > 0.0 && std::isfinite(xs[i])) {
      kept_x.push_back(xs[i]);
      kept_y.push_back(ys[i]);
    }
  }
  return kept_y;
}

// Log-scale chart of whatever points can be drawn; skipped when none can.
void chart(std::vector<Series> series, const fs::path& path, const ChartLabels& labels,
           RunArtifacts& artifacts) {
  std::vector<Series> drawable;
  for (auto& s : series) {
    Series kept{s.label, {}, {}};
    kept.y = positive_finite_only(s.x, s.y, kept.x);
    if (!kept.x.empty()) drawable.push_back(std::move(kept));
  }
  if (drawable.empty()) return;
  artifacts.files.push_back(emit_svg(drawable, true, path, labels));
}

Series trace_series(const std::string& label, const IterationTrace& trace) {
  Series s{label, {}, {}};
  for (const auto& r : trace.records) {
    s.x.push_back(static_cast<double>(r.iter));
    s.y.push_back(r.rel_error);
  }
  return s;
}

}  // namespace

std::string experiment_to_json(const ExperimentConfig& config) {
  return experiment_json(config).dump(2) + "\n";
}

ExperimentConfig experiment_from_json(std::string_view text, const ExperimentConfig& base) {
  ExperimentConfig config = base;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    if (j.contains("generator")) patch_generator(j.at("generator"), config.generator);
    if (j.contains("solver")) patch_solver(j.at("solver"), config.solver);
    patch(j, "repetitions", config.repetitions);
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("x0")) config.x0 = parse_x0_policy(j.at("x0").get<std::string>());
    patch(j, "svg", config.svg);
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.is_null()) {
        config.sweep.reset();
      } else {
        SweepSpec spec = config.sweep.value_or(SweepSpec{});
        if (s.contains("parameter")) spec.parameter = parse_sweep_parameter(s.at("parameter").get<std::string>());
        patch(s, "values", spec.values);
        patch(s, "per_column", spec.per_column);
        config.sweep = spec;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  } catch (const SpecError& e) {
    throw ConfigError(e.what());
  }
  return config;
}

ExperimentConfig load_experiment(const fs::path& path, const ExperimentConfig& base) {
  return experiment_from_json(detail::read_text(path), base);
}

GeneratorSpec paper_scale(GeneratorSpec spec) {
  spec.m = 10000;
  return spec;
}

Vector initial_iterate(const CorruptedSystem& system, X0Policy policy) {
  const std::size_t n = system.cols();
  switch (policy) {
    case X0Policy::ones: return Vector(n, 1.0);
    case X0Policy::zeros: return Vector(n, 0.0);
    case X0Policy::hyperplane: {
      if (system.spec.family != Family::adversarial_duplicate || system.rows() == 0) {
        throw ConfigError("x0=hyperplane needs an adversarial-duplicate system");
      }
      const auto a = system.a.row(system.rows() - 1);
      Vector x(n, 1.0);
      axpy(system.spec.corruption.target - dot(a, x), a, x);
      return x;
    }
  }
  return Vector(n, 1.0);
}

std::vector<double> SweepResult::mean_rel_error() const {
  const std::size_t k = spec.values.size();
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (const auto& row : rows) {
    const auto it = std::find(spec.values.begin(), spec.values.end(), row.value);
    const auto i = static_cast<std::size_t>(it - spec.values.begin());
    if (i >= k) continue;
    sum[i] += std::isfinite(row.rel_error) ? row.rel_error : std::numeric_limits<double>::infinity();
    ++count[i];
  }
  for (std::size_t i = 0; i < k; ++i) {
    sum[i] = count[i] ? sum[i] / static_cast<double>(count[i])
                      : std::numeric_limits<double>::quiet_NaN();
  }
  return sum;
}

double SweepResult::argmin() const {
  const auto means = mean_rel_error();
  if (means.empty()) throw EmptyInput("sweep has no values");
  std::size_t best = 0;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] < means[best] || std::isnan(means[best])) best = i;
  }
  return spec.values[best];
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  for (const auto& r : result.rows) {
    out += detail::format_real(r.value) + ',' + std::to_string(r.repetition) + ',' +
           detail::format_real(r.rel_error) + ',' + (r.diverged ? "1" : "0") + ',' +
           detail::format_real(r.wall_ms) + '\n';
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  validate(config);
  if (!config.sweep) throw ConfigError("no sweep configured");
  const SweepSpec& spec = *config.sweep;
  const std::size_t reps = config.repetitions;

  std::vector<CorruptedSystem> systems;
  std::vector<Vector> starts;
  systems.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    systems.push_back(generate(repetition_spec(config.generator, r)));
    starts.push_back(initial_iterate(systems.back(), config.x0));
  }

  // Resolve every point up front so configuration errors surface before any
  // work starts.
  const std::size_t points = spec.values.size() * reps;
  std::vector<ResolvedSolverConfig> resolved(points);
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const double v = spec.values[i];
    for (std::size_t r = 0; r < reps; ++r) {
      SolverConfig c = config.solver;
      switch (spec.parameter) {
        case SweepParameter::alpha:
          c.alpha = spec.per_column ? StepSize::per_column(v) : StepSize::fixed(v);
          break;
        case SweepParameter::q: c.q = v; break;
        case SweepParameter::t: c.t = static_cast<std::size_t>(v); break;
      }
      c.seed = mix_seed(config.solver.seed, "sweep", i, r);
      resolved[i * reps + r] = resolve_config(systems[r], c);
    }
  }

  SweepResult result;
  result.spec = spec;
  result.rows.resize(points);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t p = next++; p < points; p = next++) {
      const std::size_t i = p / reps;
      const std::size_t r = p % reps;
      SweepRow row;
      row.value = spec.values[i];
      row.repetition = r;
      try {
        const auto start = std::chrono::steady_clock::now();
        try {
          const IterationTrace trace = solve(systems[r], resolved[p], starts[r]);
          row.rel_error = trace.records.empty() ? 1.0 : trace.records.back().rel_error;
          row.diverged = !(row.rel_error <= 1.0);
        } catch (const Diverged& d) {
          const auto& recs = d.trace().records;
          row.rel_error = recs.empty() ? std::numeric_limits<double>::infinity() : recs.back().rel_error;
          row.diverged = true;
        }
        if (config.solver.record_timing) {
          row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                            .count();
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
      result.rows[p] = row;
    }
  };

  const std::size_t threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, std::max<std::size_t>(points, 1));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return result;
}

SweepResult sweep_step_size(ExperimentConfig base, std::vector<double> alphas, bool per_column) {
  base.sweep = SweepSpec{SweepParameter::alpha, std::move(alphas), per_column};
  return run_sweep(base);
}

SweepResult sweep_quantile(ExperimentConfig base, std::vector<double> qs) {
  base.sweep = SweepSpec{SweepParameter::q, std::move(qs), false};
  return run_sweep(base);
}

SweepResult sweep_sample_size(ExperimentConfig base, std::vector<double> ts) {
  base.sweep = SweepSpec{SweepParameter::t, std::move(ts), false};
  return run_sweep(base);
}

RunArtifacts run(const ExperimentConfig& config) {
  validate(config);
  RunArtifacts artifacts;
  const fs::path& dir = config.output_dir;
  detail::ensure_directory(dir);

  if (config.sweep) {
    const CorruptedSystem first = generate(config.generator);
    json snapshot = experiment_json(materialized(config, first));
    detail::write_text(dir / "config.json", snapshot.dump(2) + "\n");
    artifacts.files.push_back(dir / "config.json");

    const SweepResult& result = artifacts.sweep.emplace(run_sweep(config));
    detail::write_text(dir / "sweep.csv", sweep_to_csv(result));
    artifacts.files.push_back(dir / "sweep.csv");
    if (config.svg) {
      Series mean{"mean rel_error", result.spec.values, result.mean_rel_error()};
      const std::string x_label = std::string(to_string(result.spec.parameter)) +
                                  (result.spec.per_column ? " / n" : "");
      chart({mean}, dir / "sweep.svg",
            {"relative error after " + std::to_string(config.solver.max_iters) + " iterations",
             x_label, "relative error"},
            artifacts);
    }
    return artifacts;
  }

  const CorruptedSystem system = generate(config.generator);
  const ResolvedSolverConfig resolved = resolve_config(system, config.solver);
  json snapshot = experiment_json(materialized(config, system));
  snapshot["resolved_solver"] = detail::solver_config_to_json(resolved);
  detail::write_text(dir / "config.json", snapshot.dump(2) + "\n");
  artifacts.files.push_back(dir / "config.json");

  const Vector x0 = initial_iterate(system, config.x0);
  auto finish = [&](const IterationTrace& trace) {
    write_trace(trace, dir / "trace.csv");
    artifacts.files.push_back(dir / "trace.csv");
    artifacts.files.push_back(dir / "trace.json");
    if (config.svg) {
      chart({trace_series(std::string(to_string(config.solver.method)), trace)}, dir / "trace.svg",
            {"relative error", "iteration", "relative error"}, artifacts);
    }
  };
  try {
    finish(solve(system, resolved, x0));
  } catch (const Diverged& d) {
    finish(d.trace());
    throw;
  }
  return artifacts;
}

ComparisonResult compare_methods(const ExperimentConfig& config,
                                 const std::vector<SolverConfig>& solvers) {
  validate(config);
  if (solvers.empty()) throw ConfigError("no methods to compare");
  const fs::path& dir = config.output_dir;
  detail::ensure_directory(dir);

  const CorruptedSystem system = generate(config.generator);
  const Vector x0 = initial_iterate(system, config.x0);

  ComparisonResult out;
  json resolved_list = json::array();
  for (const auto& solver : solvers) {
    std::string label(to_string(solver.method));
    const auto seen = std::count_if(out.labels.begin(), out.labels.end(), [&](const std::string& l) {
      return l == label || l.rfind(label + "-", 0) == 0;
    });
    if (seen > 0) label += "-" + std::to_string(seen + 1);

    const ResolvedSolverConfig resolved = resolve_config(system, solver);
    resolved_list.push_back(detail::solver_config_to_json(resolved));
    bool diverged = false;
    IterationTrace trace;
    try {
      trace = solve(system, resolved, x0);
    } catch (const Diverged& d) {
      trace = d.trace();
      diverged = true;
    }
    out.labels.push_back(label);
    out.traces.push_back(std::move(trace));
    out.diverged.push_back(diverged);
  }

  json snapshot = experiment_json(materialized(config, system));
  snapshot["compared"] = resolved_list;
  detail::write_text(dir / "config.json", snapshot.dump(2) + "\n");
  out.artifacts.files.push_back(dir / "config.json");

  std::size_t longest = 0;
  for (std::size_t k = 0; k < out.traces.size(); ++k) {
    const fs::path path = dir / ("trace_" + out.labels[k] + ".csv");
    write_trace(out.traces[k], path);
    out.artifacts.files.push_back(path);
    longest = std::max(longest, out.traces[k].records.size());
  }

  std::string by_iter = "iter";
  for (const auto& l : out.labels) by_iter += "," + l;
  by_iter += '\n';
  for (std::size_t it = 0; it < longest; ++it) {
    by_iter += std::to_string(it + 1);
    for (const auto& trace : out.traces) {
      by_iter += ',';
      if (it < trace.records.size()) by_iter += detail::format_real(trace.records[it].rel_error);
    }
    by_iter += '\n';
  }
  detail::write_text(dir / "compare_iterations.csv", by_iter);
  out.artifacts.files.push_back(dir / "compare_iterations.csv");

  std::string by_time = "method,iter,elapsed_ms,rel_error\n";
  for (std::size_t k = 0; k < out.traces.size(); ++k) {
    for (const auto& r : out.traces[k].records) {
      by_time += out.labels[k] + ',' + std::to_string(r.iter) + ',' +
                 detail::format_real(static_cast<double>(r.elapsed_ns) / 1e6) + ',' +
                 detail::format_real(r.rel_error) + '\n';
    }
  }
  detail::write_text(dir / "compare_time.csv", by_time);
  out.artifacts.files.push_back(dir / "compare_time.csv");

  if (config.svg) {
    std::vector<Series> iter_series;
    std::vector<Series> time_series;
    for (std::size_t k = 0; k < out.traces.size(); ++k) {
      iter_series.push_back(trace_series(out.labels[k], out.traces[k]));
      Series t{out.labels[k], {}, {}};
      for (const auto& r : out.traces[k].records) {
        t.x.push_back(static_cast<double>(r.elapsed_ns) / 1e6);
        t.y.push_back(r.rel_error);
      }
      time_series.push_back(std::move(t));
    }
    chart(iter_series, dir / "compare.svg", {"relative error", "iteration", "relative error"},
          out.artifacts);
    if (config.solver.record_timing) {
      chart(time_series, dir / "compare_time.svg", {"relative error", "wall time (ms)", "relative error"},
            out.artifacts);
    }
  }
  return out;
}

ComparisonResult compare_methods(const ExperimentConfig& config, const std::vector<Method>& methods) {
  std::vector<SolverConfig> solvers;
  for (Method m : methods) {
    SolverConfig c = config.solver;
    c.method = m;
    solvers.push_back(c);
  }
  return compare_methods(config, solvers);
}

AdversarialDemoResult adversarial_demo(const AdversarialDemoConfig& config) {
  AdversarialDemoResult out;
  out.problem = generate_adversarial_duplicate(config.n, config.clean_rows, config.dup_rows,
                                               config.target, config.seed);
  const CorruptedSystem& system = out.problem.system;
  const auto a = system.a.row(out.problem.duplicate_row);

  SolverConfig pbk;
  pbk.method = Method::quantile_pbk;
  pbk.q = config.q;
  pbk.max_iters = config.iterations;
  pbk.seed = config.seed;
  pbk.record_timing = config.record_timing;
  SolverConfig abk = pbk;
  abk.method = Method::quantile_abk;
  abk.alpha = StepSize::fixed(config.alpha);

  auto track = [&](std::size_t, std::span<const double> x) {
    const double dev = std::abs(dot(a, x) - config.target);
    out.pbk_hyperplane_residuals.push_back(dev);
    out.pbk_hyperplane_deviation = std::max(out.pbk_hyperplane_deviation, dev);
  };
  try {
    out.pbk = solve(system, pbk, out.problem.x0, track);
  } catch (const Diverged& d) {
    out.pbk = d.trace();
  }
  try {
    out.abk = solve(system, abk, out.problem.x0);
  } catch (const Diverged& d) {
    out.abk = d.trace();
  }

  const fs::path& dir = config.output_dir;
  detail::ensure_directory(dir);
  const json snapshot{{"n", config.n},
                      {"clean_rows", config.clean_rows},
                      {"dup_rows", config.dup_rows},
                      {"target", config.target},
                      {"q", config.q},
                      {"alpha", config.alpha},
                      {"iterations", config.iterations},
                      {"seed", config.seed},
                      {"record_timing", config.record_timing},
                      {"solvers",
                       {detail::solver_config_to_json(out.pbk.resolved),
                        detail::solver_config_to_json(out.abk.resolved)}}};
  detail::write_text(dir / "config.json", snapshot.dump(2) + "\n");
  out.artifacts.files.push_back(dir / "config.json");
  write_trace(out.pbk, dir / "trace_quantile-pbk.csv");
  write_trace(out.abk, dir / "trace_quantile-abk.csv");
  out.artifacts.files.push_back(dir / "trace_quantile-pbk.csv");
  out.artifacts.files.push_back(dir / "trace_quantile-abk.csv");

  std::string hyper = "iter,abs_deviation\n";
  for (std::size_t k = 0; k < out.pbk_hyperplane_residuals.size(); ++k) {
    hyper += std::to_string(k + 1) + ',' + detail::format_real(out.pbk_hyperplane_residuals[k]) + '\n';
  }
  detail::write_text(dir / "pbk_hyperplane.csv", hyper);
  out.artifacts.files.push_back(dir / "pbk_hyperplane.csv");

  if (config.svg) {
    chart({trace_series("quantile-pbk", out.pbk), trace_series("quantile-abk", out.abk)},
          dir / "adversarial.svg", {"duplicated-row system", "iteration", "relative error"},
          out.artifacts);
  }
  return out;
}

}  // namespace qabk
