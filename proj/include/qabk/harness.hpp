#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qabk/problems.hpp"
#include "qabk/solvers.hpp"

namespace qabk {

/// Starting point of every run.
enum class X0Policy {
  ones,
  zeros,
  /// Projection of the all-ones vector onto the hyperplane of the duplicated
  /// row (adversarial-duplicate family only).
  hyperplane,
};

std::string_view to_string(X0Policy policy);
X0Policy parse_x0_policy(std::string_view text);

enum class SweepParameter { alpha, q, t };

std::string_view to_string(SweepParameter parameter);
SweepParameter parse_sweep_parameter(std::string_view text);

struct SweepSpec {
  SweepParameter parameter = SweepParameter::alpha;
  /// Strictly increasing.
  std::vector<double> values;
  /// For alpha sweeps: values are multiples of the column count n.
  bool per_column = false;
};

struct ExperimentConfig {
  GeneratorSpec generator;
  SolverConfig solver;
  std::optional<SweepSpec> sweep;
  std::size_t repetitions = 1;
  std::filesystem::path output_dir = "out";
  X0Policy x0 = X0Policy::ones;
  bool svg = true;
};

/// Checks the invariants that do not depend on a generated system.
/// Throws ConfigError.
void validate(const ExperimentConfig& config);

std::string experiment_to_json(const ExperimentConfig& config);
/// Fields missing from the document keep the values already in `base`.
/// Throws ConfigError on malformed input.
ExperimentConfig experiment_from_json(std::string_view text, const ExperimentConfig& base = {});
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const ExperimentConfig& base = {});

/// Generator spec for the 10000-row experiments, keeping the column count.
GeneratorSpec paper_scale(GeneratorSpec spec);

Vector initial_iterate(const CorruptedSystem& system, X0Policy policy);

struct SweepRow {
  double value = 0.0;
  std::size_t repetition = 0;
  double rel_error = 0.0;
  /// The solver raised Diverged or finished with rel_error > 1.
  bool diverged = false;
  double wall_ms = 0.0;
};

struct SweepResult {
  SweepSpec spec;
  /// Ordered by value index, then repetition.
  std::vector<SweepRow> rows;

  /// Mean rel_error per swept value, in value order. A non-finite entry
  /// makes the mean infinite.
  std::vector<double> mean_rel_error() const;
  /// Swept value with the smallest mean rel_error.
  double argmin() const;
};

inline constexpr std::string_view kSweepCsvHeader = "value,repetition,rel_error,diverged,wall_ms";
std::string sweep_to_csv(const SweepResult& result);

/// Runs the sweep in config.sweep. Repetition r uses a system generated with
/// seed mix(seed, r) shared by every value; the solver of (value index i,
/// repetition r) uses seed mix(solver seed, i, r). Points run concurrently
/// and never abort the sweep.
SweepResult run_sweep(const ExperimentConfig& config);
SweepResult sweep_step_size(ExperimentConfig base, std::vector<double> alphas,
                            bool per_column = false);
SweepResult sweep_quantile(ExperimentConfig base, std::vector<double> qs);
SweepResult sweep_sample_size(ExperimentConfig base, std::vector<double> ts);

struct RunArtifacts {
  std::vector<std::filesystem::path> files;
  /// Set when the run was a sweep.
  std::optional<SweepResult> sweep;
};

/// Generates the system and runs the solver or the configured sweep, writing
/// config.json plus trace.csv/trace.json or sweep.csv, and an SVG chart when
/// config.svg is set. Throws Diverged (after writing the partial trace) for a
/// diverging single run; ConfigError; IoError.
RunArtifacts run(const ExperimentConfig& config);

struct ComparisonResult {
  std::vector<std::string> labels;
  std::vector<IterationTrace> traces;
  /// Whether the trace of the same index ended in Diverged.
  std::vector<bool> diverged;
  RunArtifacts artifacts;
};

/// Runs every solver configuration on one shared system from one x0 and
/// writes per-method traces, compare_iterations.csv (rel_error per method by
/// iteration), compare_time.csv (rel_error against cumulative wall time) and
/// compare.svg.
ComparisonResult compare_methods(const ExperimentConfig& config,
                                 const std::vector<SolverConfig>& solvers);
/// Same, varying only the method of config.solver.
ComparisonResult compare_methods(const ExperimentConfig& config,
                                 const std::vector<Method>& methods);

struct AdversarialDemoConfig {
  std::size_t n = 100;
  std::size_t clean_rows = 1000;
  std::size_t dup_rows = 250;
  double target = 500.0;
  double q = 0.7;
  double alpha = 10.0;
  std::size_t iterations = 50;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out/adversarial";
  bool record_timing = true;
  bool svg = true;
};

struct AdversarialDemoResult {
  AdversarialSystem problem;
  IterationTrace pbk;
  IterationTrace abk;
  /// max over the QuantilePBK iterates x_1..x_N of |⟨a, x_k⟩ − target|.
  double pbk_hyperplane_deviation = 0.0;
  /// Same quantity per iterate, in iteration order.
  std::vector<double> pbk_hyperplane_residuals;
  RunArtifacts artifacts;
};

/// QuantilePBK and QuantileABK on the duplicated-row system, both from the
/// projection of the all-ones vector onto the corrupted hyperplane.
AdversarialDemoResult adversarial_demo(const AdversarialDemoConfig& config);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Standalone 800×600 SVG line chart with one polyline per series.
/// Throws DomainError for an empty series list, a series with no points or
/// mismatched lengths, non-finite values, or non-positive y when log_y.
std::string render_svg(const std::vector<Series>& series, bool log_y,
                       const ChartLabels& labels = {});
std::filesystem::path emit_svg(const std::vector<Series>& series, bool log_y,
                               const std::filesystem::path& path,
                               const ChartLabels& labels = {});

}  // namespace qabk
