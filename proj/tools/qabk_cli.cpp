// Command-line front end: system generation, single runs, parameter sweeps,
// method comparisons, the duplicated-row demonstration and rate reports.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qabk/errors.hpp"
#include "qabk/harness.hpp"
#include "qabk/problems.hpp"
#include "qabk/solvers.hpp"
#include "qabk/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

struct Overrides {
  std::string config_file;
  std::optional<std::string> family;
  std::optional<std::size_t> m;
  std::optional<std::size_t> n;
  std::optional<double> beta;
  std::optional<double> low;
  std::optional<double> high;
  std::optional<double> target;
  std::optional<std::uint64_t> seed;

  std::optional<std::string> method;
  std::optional<double> q;
  std::optional<std::string> alpha;
  std::optional<std::size_t> t;
  std::optional<std::size_t> block_size;
  std::optional<std::size_t> iters;
  std::optional<double> stop;
  std::optional<std::string> comparator;
  std::optional<std::uint64_t> solver_seed;

  std::optional<std::size_t> repetitions;
  std::optional<std::string> out;
  std::optional<std::string> x0;
  bool no_svg = false;
  bool no_timing = false;
  bool paper_scale = false;
};

void add_generator_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--family", o.family, "gaussian, coherent, sphere or adversarial-duplicate");
  cmd->add_option("--m", o.m, "Row count");
  cmd->add_option("--n", o.n, "Column count");
  cmd->add_option("--beta", o.beta, "Corrupted fraction of rows");
  cmd->add_option("--corruption-low", o.low, "Lower end of the corruption magnitudes");
  cmd->add_option("--corruption-high", o.high, "Upper end of the corruption magnitudes");
  cmd->add_option("--target", o.target, "Right-hand side of the duplicated rows");
  cmd->add_flag("--paper-scale", o.paper_scale, "Use 10000 rows");
}

void add_experiment_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_file, "JSON experiment config; flags override it");
  add_generator_options(cmd, o);
  cmd->add_option("--method", o.method,
                  "rk, quantile-rk, averaged-rbk, quantile-abk, sampled-qabk or quantile-pbk");
  cmd->add_option("--q", o.q, "Quantile level");
  cmd->add_option("--alpha", o.alpha, "Step size: a number, a multiple of n such as 1.7n, or auto");
  cmd->add_option("--t", o.t, "Sample size (0 means m)");
  cmd->add_option("--block-size", o.block_size, "AveragedRBK block size (0 means n)");
  cmd->add_option("--iters", o.iters, "Iteration budget");
  cmd->add_option("--stop", o.stop, "Stop once the relative error is at most this value");
  cmd->add_option("--comparator", o.comparator, "strict-below or at-or-below");
  cmd->add_option("--solver-seed", o.solver_seed, "Solver seed (defaults to --seed)");
  cmd->add_option("--repetitions", o.repetitions, "Repetitions per sweep value");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--x0", o.x0, "Starting point: ones, zeros or hyperplane");
  cmd->add_flag("--no-svg", o.no_svg, "Skip SVG charts");
  cmd->add_flag("--no-timing", o.no_timing, "Record zero timings so outputs are byte-identical");
}

qabk::ExperimentConfig build_config(const Overrides& o, qabk::ExperimentConfig base = {}) {
  qabk::ExperimentConfig c = base;
  if (!o.config_file.empty()) c = qabk::load_experiment(o.config_file, c);
  auto& g = c.generator;
  if (o.paper_scale) g = qabk::paper_scale(g);
  if (o.family) g.family = qabk::parse_family(*o.family);
  if (o.m) g.m = *o.m;
  if (o.n) g.n = *o.n;
  if (o.beta) g.corruption.beta = *o.beta;
  if (o.low) g.corruption.magnitude_low = *o.low;
  if (o.high) g.corruption.magnitude_high = *o.high;
  if (o.target) g.corruption.target = *o.target;
  if (o.seed) {
    g.seed = *o.seed;
    c.solver.seed = *o.seed;
  }
  auto& s = c.solver;
  if (o.method) s.method = qabk::parse_method(*o.method);
  if (o.q) s.q = *o.q;
  if (o.alpha) s.alpha = qabk::StepSize::parse(*o.alpha);
  if (o.t) s.t = *o.t;
  if (o.block_size) s.block_size = *o.block_size;
  if (o.iters) s.max_iters = *o.iters;
  if (o.stop) s.stop_rel_error = *o.stop;
  if (o.comparator) s.comparator = qabk::parse_comparator(*o.comparator);
  if (o.solver_seed) s.seed = *o.solver_seed;
  if (o.no_timing) s.record_timing = false;
  if (o.repetitions) c.repetitions = *o.repetitions;
  if (o.out) c.output_dir = *o.out;
  if (o.x0) c.x0 = qabk::parse_x0_policy(*o.x0);
  if (o.no_svg) c.svg = false;
  return c;
}

// "lo:hi:step" or a comma-separated list.
std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != token.size() || token.empty()) {
      throw qabk::ConfigError("malformed value '" + token + "'");
    }
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw qabk::ConfigError("range must be lo:hi:step");
    const double lo = number(parts[0]);
    const double hi = number(parts[1]);
    const double step = number(parts[2]);
    if (!(step > 0.0) || hi < lo) throw qabk::ConfigError("range needs step > 0 and hi ≥ lo");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) {
      out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
    }
    return out;
  }
  std::stringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) out.push_back(number(token));
  return out;
}

void print_paths(const qabk::RunArtifacts& artifacts) {
  for (const auto& p : artifacts.files) std::cout << p.string() << '\n';
}

void print_sweep_summary(const qabk::SweepResult& result) {
  const auto means = result.mean_rel_error();
  std::cout << "value,mean_rel_error\n";
  for (std::size_t i = 0; i < means.size(); ++i) {
    std::printf("%.10g,%.6g\n", result.spec.values[i], means[i]);
  }
  std::printf("argmin: %.10g\n", result.argmin());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile-based Kaczmarz solvers for linear systems with sparse corruptions"};
  app.require_subcommand(1);

  Overrides gen_opts;
  std::string gen_out = "system";
  auto* gen = app.add_subcommand("generate", "Generate a corrupted system and save it");
  add_generator_options(gen, gen_opts);
  gen->add_option("--seed", gen_opts.seed, "Seed");
  gen->add_option("--out", gen_out, "Output directory");

  Overrides run_opts;
  auto* run = app.add_subcommand("run", "Run one solver and write its trace");
  add_experiment_options(run, run_opts);
  run->add_option("--seed", run_opts.seed, "Seed for the system and the solver")->required();

  struct SweepCommand {
    CLI::App* cmd;
    Overrides opts;
    std::string values;
    bool per_column = false;
    qabk::SweepParameter parameter;
  };
  std::vector<SweepCommand> sweeps(3);
  const char* names[] = {"sweep-alpha", "sweep-q", "sweep-t"};
  const char* help[] = {"Relative error after a fixed budget across step sizes",
                        "Relative error after a fixed budget across quantile levels",
                        "Relative error after a fixed budget across sample sizes"};
  const qabk::SweepParameter params[] = {qabk::SweepParameter::alpha, qabk::SweepParameter::q,
                                         qabk::SweepParameter::t};
  for (std::size_t i = 0; i < 3; ++i) {
    auto& s = sweeps[i];
    s.parameter = params[i];
    s.cmd = app.add_subcommand(names[i], help[i]);
    add_experiment_options(s.cmd, s.opts);
    s.cmd->add_option("--seed", s.opts.seed, "Seed");
    s.cmd->add_option("--values", s.values, "lo:hi:step or a comma-separated list")->required();
    if (params[i] == qabk::SweepParameter::alpha) {
      s.cmd->add_flag("--per-column", s.per_column, "Values are multiples of n");
    }
  }

  Overrides cmp_opts;
  std::string cmp_methods = "quantile-abk,quantile-rk";
  auto* cmp = app.add_subcommand("compare", "Run several methods on one shared system");
  add_experiment_options(cmp, cmp_opts);
  cmp->add_option("--seed", cmp_opts.seed, "Seed");
  cmp->add_option("--methods", cmp_methods, "Comma-separated method names");

  qabk::AdversarialDemoConfig adv_cfg;
  std::string adv_out = adv_cfg.output_dir.string();
  bool adv_no_svg = false;
  bool adv_no_timing = false;
  auto* adv = app.add_subcommand("adversarial-demo",
                                 "Projective against averaged blocks on a duplicated-row system");
  adv->add_option("--n", adv_cfg.n, "Column count");
  adv->add_option("--clean-rows", adv_cfg.clean_rows, "Independent gaussian rows");
  adv->add_option("--dup-rows", adv_cfg.dup_rows, "Copies of the corrupted row");
  adv->add_option("--target", adv_cfg.target, "Right-hand side of the copies");
  adv->add_option("--q", adv_cfg.q, "Quantile level");
  adv->add_option("--alpha", adv_cfg.alpha, "QuantileABK step size");
  adv->add_option("--iters", adv_cfg.iterations, "Iterations");
  adv->add_option("--seed", adv_cfg.seed, "Seed");
  adv->add_option("--out", adv_out, "Output directory");
  adv->add_flag("--no-svg", adv_no_svg, "Skip SVG charts");
  adv->add_flag("--no-timing", adv_no_timing, "Record zero timings");

  Overrides rate_opts;
  std::optional<double> rate_q = 0.5;
  std::optional<std::size_t> rate_m;
  std::optional<double> rate_smax;
  std::optional<double> rate_srestricted;
  std::string rate_system;
  bool rate_json = false;
  auto* rate = app.add_subcommand("rate", "Convergence condition, optimal step and contraction");
  add_generator_options(rate, rate_opts);
  rate->add_option("--seed", rate_opts.seed, "Seed of the generated system");
  rate->add_option("--q", rate_q, "Quantile level");
  rate->add_option("--sigma-max-sq", rate_smax, "Largest squared singular value");
  rate->add_option("--sigma-restricted-sq", rate_srestricted,
                   "Restricted smallest squared singular value");
  rate->add_option("--rows", rate_m, "Row count used with explicit singular values");
  rate->add_option("--system", rate_system, "Directory written by generate");
  rate->add_flag("--json", rate_json, "Print JSON instead of text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      const qabk::ExperimentConfig c = build_config(gen_opts);
      const qabk::CorruptedSystem sys = qabk::generate(c.generator);
      qabk::save_system(sys, gen_out);
      std::cout << gen_out << '\n';
    } else if (run->parsed()) {
      print_paths(qabk::run(build_config(run_opts)));
    } else if (cmp->parsed()) {
      std::vector<qabk::Method> methods;
      std::stringstream in(cmp_methods);
      std::string token;
      while (std::getline(in, token, ',')) methods.push_back(qabk::parse_method(token));
      const auto result = qabk::compare_methods(build_config(cmp_opts), methods);
      for (std::size_t k = 0; k < result.labels.size(); ++k) {
        const auto& recs = result.traces[k].records;
        std::printf("%s: final rel_error %.6g%s\n", result.labels[k].c_str(),
                    recs.empty() ? 1.0 : recs.back().rel_error,
                    result.diverged[k] ? " (diverged)" : "");
      }
      print_paths(result.artifacts);
    } else if (adv->parsed()) {
      adv_cfg.output_dir = adv_out;
      adv_cfg.svg = !adv_no_svg;
      adv_cfg.record_timing = !adv_no_timing;
      const auto result = qabk::adversarial_demo(adv_cfg);
      const auto final_of = [](const qabk::IterationTrace& t) {
        return t.records.empty() ? 1.0 : t.records.back().rel_error;
      };
      std::printf("quantile-pbk: final rel_error %.6g, max |<a,x_k> - target| %.3g\n",
                  final_of(result.pbk), result.pbk_hyperplane_deviation);
      std::printf("quantile-abk: final rel_error %.6g\n", final_of(result.abk));
      print_paths(result.artifacts);
    } else if (rate->parsed()) {
      qabk::RateReport report;
      if (rate_smax && rate_srestricted) {
        if (!rate_m) throw qabk::ConfigError("--rows is required with explicit singular values");
        const double beta = rate_opts.beta.value_or(0.0);
        const auto cond = qabk::convergence_condition(*rate_q, beta, *rate_smax, *rate_srestricted);
        if (!cond.holds) {
          std::printf("convergence condition fails (epsilon = %.6g)\n", cond.epsilon);
          return kExitConfig;
        }
        report = qabk::rate_report(*rate_q, beta, *rate_m, *rate_smax, *rate_srestricted);
      } else {
        const qabk::CorruptedSystem sys =
            rate_system.empty() ? qabk::generate(build_config(rate_opts).generator)
                                : qabk::load_system(rate_system);
        const double beta = sys.corrupted_fraction();
        const auto summary = qabk::restricted_spectrum(sys.a, *rate_q, beta, 200, sys.spec.seed);
        const auto cond = qabk::convergence_condition(*rate_q, beta, summary.sigma_max_sq,
                                                      summary.sigma_restricted_min_sq);
        if (!cond.holds) {
          std::printf("sigma_max^2 = %.6g, restricted sigma_min^2 = %.6g (%s)\n",
                      summary.sigma_max_sq, summary.sigma_restricted_min_sq,
                      summary.exact ? "exact" : "sampled estimate");
          std::printf("convergence condition fails (epsilon = %.6g)\n", cond.epsilon);
          return kExitConfig;
        }
        report = qabk::rate_report(*rate_q, beta, sys.rows(), summary.sigma_max_sq,
                                   summary.sigma_restricted_min_sq, summary.exact);
      }
      std::cout << (rate_json ? qabk::rate_report_json(report) : qabk::rate_report_summary(report));
    } else {
      for (auto& s : sweeps) {
        if (!s.cmd->parsed()) continue;
        qabk::ExperimentConfig c = build_config(s.opts);
        // Sweeps compare the error after a short fixed budget.
        if (s.opts.iters == std::nullopt && s.opts.config_file.empty()) c.solver.max_iters = 10;
        c.sweep = qabk::SweepSpec{s.parameter, parse_values(s.values), s.per_column};
        const auto artifacts = qabk::run(c);
        print_sweep_summary(*artifacts.sweep);
        print_paths(artifacts);
      }
    }
  } catch (const qabk::Diverged& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const qabk::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const qabk::Error& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
