#include "qabk/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "io_util.hpp"
#include "json_io.hpp"
#include "json.hpp"
#include "qabk/errors.hpp"
#include "qabk/rng.hpp"

namespace qabk {

using nlohmann::json;

std::string_view to_string(Family family) {
  switch (family) {
    case Family::gaussian: return "gaussian";
    case Family::coherent: return "coherent";
    case Family::sphere: return "sphere";
    case Family::adversarial_duplicate: return "adversarial-duplicate";
  }
  return "gaussian";
}

Family parse_family(std::string_view text) {
  if (text == "gaussian") return Family::gaussian;
  if (text == "coherent") return Family::coherent;
  if (text == "sphere") return Family::sphere;
  if (text == "adversarial-duplicate") return Family::adversarial_duplicate;
  throw SpecError("unknown family '" + std::string(text) + "'");
}

std::string_view to_string(Placement placement) {
  return placement == Placement::uniform ? "uniform" : "given-indices";
}

Placement parse_placement(std::string_view text) {
  if (text == "uniform") return Placement::uniform;
  if (text == "given-indices") return Placement::given_indices;
  throw SpecError("unknown placement '" + std::string(text) + "'");
}

double CorruptedSystem::corrupted_fraction() const noexcept {
  return rows() == 0 ? 0.0
                     : static_cast<double>(corrupted_indices.size()) /
                           static_cast<double>(rows());
}

std::vector<bool> CorruptedSystem::corruption_mask() const {
  std::vector<bool> mask(rows(), false);
  for (std::size_t i : corrupted_indices) mask[i] = true;
  return mask;
}

namespace {

std::size_t floor_count(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::floor(x));
}

DenseMatrix random_rows(Rng& rng, std::size_t m, std::size_t n, Family family) {
  DenseMatrix raw(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (double& v : raw.row(i)) {
      v = family == Family::coherent ? rng.uniform() : rng.normal();
    }
  }
  return row_normalize(raw);
}

Vector random_normal_vector(Rng& rng, std::size_t n) {
  Vector v(n);
  for (double& e : v) e = rng.normal();
  return v;
}

void validate(const GeneratorSpec& spec) {
  if (spec.n < 1) throw SpecError("n must be at least 1");
  if (spec.m <= spec.n) {
    throw SpecError("system must be overdetermined (m > n), got m=" +
                    std::to_string(spec.m) + " n=" + std::to_string(spec.n));
  }
  const auto& c = spec.corruption;
  if (!(c.beta >= 0.0 && c.beta < 1.0)) throw SpecError("beta must lie in [0, 1)");
  if (!(c.magnitude_low < c.magnitude_high)) {
    throw SpecError("magnitude_low must be below magnitude_high");
  }
}

}  // namespace

CorruptedSystem generate(const GeneratorSpec& spec) {
  validate(spec);
  if (spec.family == Family::adversarial_duplicate) {
    const std::size_t dup = floor_count(spec.corruption.beta * static_cast<double>(spec.m));
    if (dup == 0 || dup >= spec.m) throw SpecError("adversarial family needs 0 < beta*m < m");
    auto adversarial = generate_adversarial_duplicate(spec.n, spec.m - dup, dup,
                                                      spec.corruption.target, spec.seed);
    adversarial.system.spec.corruption.magnitude_low = spec.corruption.magnitude_low;
    adversarial.system.spec.corruption.magnitude_high = spec.corruption.magnitude_high;
    return std::move(adversarial.system);
  }

  CorruptedSystem sys;
  sys.spec = spec;
  sys.beta = spec.corruption.beta;

  Rng matrix_rng = Rng::stream(spec.seed, "matrix");
  sys.a = random_rows(matrix_rng, spec.m, spec.n, spec.family);

  Rng x_rng = Rng::stream(spec.seed, "x-star");
  sys.x_star = random_normal_vector(x_rng, spec.n);
  sys.b_true = matvec(sys.a, sys.x_star);
  sys.b_observed = sys.b_true;

  const std::size_t count = floor_count(spec.corruption.beta * static_cast<double>(spec.m));
  if (spec.corruption.placement == Placement::given_indices) {
    auto idx = spec.corruption.indices;
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
      throw SpecError("given corruption indices contain duplicates");
    }
    if (idx.size() != count) {
      throw SpecError("expected " + std::to_string(count) + " corruption indices, got " +
                      std::to_string(idx.size()));
    }
    if (!idx.empty() && idx.back() >= spec.m) throw SpecError("corruption index out of range");
    sys.corrupted_indices = std::move(idx);
  } else {
    std::vector<std::size_t> order(spec.m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng placement_rng = Rng::stream(spec.seed, "placement");
    placement_rng.shuffle(order);
    order.resize(count);
    std::sort(order.begin(), order.end());
    sys.corrupted_indices = std::move(order);
  }

  Rng magnitude_rng = Rng::stream(spec.seed, "magnitudes");
  for (std::size_t i : sys.corrupted_indices) {
    sys.b_observed[i] +=
        magnitude_rng.uniform(spec.corruption.magnitude_low, spec.corruption.magnitude_high);
  }
  return sys;
}

AdversarialSystem generate_adversarial_duplicate(std::size_t n, std::size_t clean_rows,
                                                 std::size_t dup_rows, double target,
                                                 std::uint64_t seed) {
  if (n < 2) throw SpecError("adversarial system needs n >= 2");
  if (clean_rows < 1 || dup_rows < 1) throw SpecError("row counts must be positive");
  if (!std::isfinite(target)) throw SpecError("target must be finite");

  const std::size_t m = clean_rows + dup_rows;
  Rng matrix_rng = Rng::stream(seed, "matrix");
  const DenseMatrix clean = random_rows(matrix_rng, clean_rows, n, Family::gaussian);
  const DenseMatrix extra = random_rows(matrix_rng, 1, n, Family::gaussian);

  AdversarialSystem out;
  CorruptedSystem& sys = out.system;
  std::vector<double> data(clean.data().begin(), clean.data().end());
  data.reserve(m * n);
  for (std::size_t r = 0; r < dup_rows; ++r) {
    data.insert(data.end(), extra.data().begin(), extra.data().end());
  }
  sys.a = DenseMatrix(m, n, std::move(data));
  sys.a.mark_row_normalized(true);

  Rng x_rng = Rng::stream(seed, "x-star");
  sys.x_star = random_normal_vector(x_rng, n);
  sys.b_true = matvec(sys.a, sys.x_star);
  sys.b_observed = sys.b_true;
  for (std::size_t i = clean_rows; i < m; ++i) {
    sys.b_observed[i] = target;
    sys.corrupted_indices.push_back(i);
  }
  sys.beta = static_cast<double>(dup_rows) / static_cast<double>(m);
  sys.spec.family = Family::adversarial_duplicate;
  sys.spec.m = m;
  sys.spec.n = n;
  sys.spec.seed = seed;
  sys.spec.corruption.beta = sys.beta;
  sys.spec.corruption.target = target;

  const auto a = extra.row(0);
  const Vector ones(n, 1.0);
  const double shift = target - dot(a, ones);
  out.x0 = ones;
  axpy(shift, a, out.x0);
  out.duplicate_row = clean_rows;
  return out;
}

double relative_error(std::span<const double> x, const CorruptedSystem& system,
                      std::span<const double> x0) {
  const double baseline = distance(x0, system.x_star);
  if (baseline == 0.0) throw ZeroBaseline("x0 equals x_star; relative error is undefined");
  return distance(x, system.x_star) / baseline;
}

json detail::spec_to_json(const GeneratorSpec& spec) {
  return json{{"family", to_string(spec.family)},
              {"m", spec.m},
              {"n", spec.n},
              {"seed", spec.seed},
              {"corruption",
               {{"beta", spec.corruption.beta},
                {"magnitude_low", spec.corruption.magnitude_low},
                {"magnitude_high", spec.corruption.magnitude_high},
                {"placement", to_string(spec.corruption.placement)},
                {"indices", spec.corruption.indices},
                {"target", spec.corruption.target}}}};
}

GeneratorSpec detail::spec_from_json(const json& j) {
  GeneratorSpec spec;
  spec.family = parse_family(j.at("family").get<std::string>());
  spec.m = j.at("m").get<std::size_t>();
  spec.n = j.at("n").get<std::size_t>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  const json& c = j.at("corruption");
  spec.corruption.beta = c.at("beta").get<double>();
  spec.corruption.magnitude_low = c.at("magnitude_low").get<double>();
  spec.corruption.magnitude_high = c.at("magnitude_high").get<double>();
  spec.corruption.placement = parse_placement(c.at("placement").get<std::string>());
  spec.corruption.indices = c.value("indices", std::vector<std::size_t>{});
  spec.corruption.target = c.value("target", 500.0);
  return spec;
}

namespace {

double parse_real(const std::string& token, const std::filesystem::path& source) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str()) throw IoError("malformed number '" + token + "' in " + source.string());
  return v;
}

}  // namespace

void save_system(const CorruptedSystem& system, const std::filesystem::path& dir) {
  detail::ensure_directory(dir);

  std::string matrix;
  matrix.reserve(system.rows() * system.cols() * 24);
  for (std::size_t i = 0; i < system.rows(); ++i) {
    const auto row = system.a.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) matrix += ',';
      matrix += detail::format_real(row[j]);
    }
    matrix += '\n';
  }
  detail::write_text(dir / "matrix.csv", matrix);

  std::string rhs;
  for (double v : system.b_observed) {
    rhs += detail::format_real(v);
    rhs += '\n';
  }
  detail::write_text(dir / "b.csv", rhs);

  json x_star = json::array();
  for (double v : system.x_star) x_star.push_back(detail::format_real(v));
  const json meta{{"rows", system.rows()},
                  {"cols", system.cols()},
                  {"seed", system.spec.seed},
                  {"beta", system.beta},
                  {"spec", detail::spec_to_json(system.spec)},
                  {"corrupted_indices", system.corrupted_indices},
                  {"x_star", x_star}};
  detail::write_text(dir / "metadata.json", meta.dump(2) + "\n");
}

CorruptedSystem load_system(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(detail::read_text(dir / "metadata.json"));
  } catch (const json::exception& e) {
    throw IoError("malformed metadata.json: " + std::string(e.what()));
  }

  CorruptedSystem sys;
  try {
    sys.spec = detail::spec_from_json(meta.at("spec"));
    sys.beta = meta.at("beta").get<double>();
    sys.corrupted_indices = meta.at("corrupted_indices").get<std::vector<std::size_t>>();
    for (const auto& v : meta.at("x_star")) {
      sys.x_star.push_back(v.is_string() ? parse_real(v.get<std::string>(), dir)
                                         : v.get<double>());
    }
  } catch (const json::exception& e) {
    throw IoError("metadata.json is missing fields: " + std::string(e.what()));
  }
  const auto rows = meta.at("rows").get<std::size_t>();
  const auto cols = meta.at("cols").get<std::size_t>();

  std::vector<double> data;
  data.reserve(rows * cols);
  {
    std::istringstream in(detail::read_text(dir / "matrix.csv"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream fields(line);
      std::string token;
      while (std::getline(fields, token, ',')) data.push_back(parse_real(token, dir / "matrix.csv"));
    }
  }
  if (data.size() != rows * cols) throw IoError("matrix.csv does not match metadata shape");
  sys.a = DenseMatrix(rows, cols, std::move(data));
  bool unit = true;
  for (std::size_t i = 0; i < rows && unit; ++i) unit = std::abs(norm(sys.a.row(i)) - 1.0) <= 1e-12;
  sys.a.mark_row_normalized(unit);

  {
    std::istringstream in(detail::read_text(dir / "b.csv"));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) sys.b_observed.push_back(parse_real(line, dir / "b.csv"));
    }
  }
  if (sys.b_observed.size() != rows) throw IoError("b.csv length does not match metadata");
  if (sys.x_star.size() != cols) throw IoError("x_star length does not match metadata");
  sys.b_true = matvec(sys.a, sys.x_star);
  return sys;
}

}  // namespace qabk
