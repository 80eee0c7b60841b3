#include "qabk/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qabk/errors.hpp"
#include "qabk/rng.hpp"

namespace qabk {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data has " + std::to_string(data_.size()) +
                     " entries, expected " + std::to_string(rows * cols));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw DomainError("matrix entry is not finite");
  }
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) throw ShapeError("matrix must be non-empty");
  const std::size_t n = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw ShapeError("ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return DenseMatrix(rows.size(), n, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix id(n, n);
  for (std::size_t i = 0; i < n; ++i) id(i, i) = 1.0;
  id.mark_row_normalized(true);
  return id;
}

DenseMatrix DenseMatrix::select_rows(std::span<const std::size_t> indices) const {
  DenseMatrix out(indices.size(), cols_);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= rows_) throw ShapeError("row index out of range");
    const auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  out.row_normalized_ = row_normalized_;
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ShapeError("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

Vector matvec(const DenseMatrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) throw ShapeError("matvec: length mismatch");
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), x);
  return out;
}

Vector matvec_transpose(const DenseMatrix& m, std::span<const double> y) {
  if (y.size() != m.rows()) throw ShapeError("matvec_transpose: length mismatch");
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) axpy(y[i], m.row(i), out);
  return out;
}

DenseMatrix gram(const DenseMatrix& m) {
  std::vector<std::size_t> all(m.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return gram_of_rows(m, all);
}

DenseMatrix gram_of_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  const std::size_t n = m.cols();
  DenseMatrix g(n, n);
  for (std::size_t r : rows) {
    const auto a = m.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      const double ai = a[i];
      if (ai == 0.0) continue;
      for (std::size_t j = i; j < n; ++j) g(i, j) += ai * a[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

DenseMatrix outer_gram_of_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  const std::size_t k = rows.size();
  DenseMatrix g(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      const double v = dot(m.row(rows[i]), m.row(rows[j]));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

bool approx_equal(double a, double b, double atol, double rtol) {
  return std::abs(a - b) <= atol + rtol * std::max(std::abs(a), std::abs(b));
}

std::size_t ceil_count(double x) {
  const double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
    return static_cast<std::size_t>(nearest);
  }
  return static_cast<std::size_t>(std::ceil(x));
}

DenseMatrix row_normalize(const DenseMatrix& m) {
  DenseMatrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    const double len = norm(r);
    if (!(len >= 1e-300)) throw ZeroRow(i);
    for (double& v : r) v /= len;
  }
  out.mark_row_normalized(true);
  return out;
}

namespace {

Vector symmetric_matvec(const DenseMatrix& g, std::span<const double> v) {
  Vector out(g.rows(), 0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) out[i] = dot(g.row(i), v);
  return out;
}

double power_iterate(const DenseMatrix& g, Vector v, double tol, std::size_t max_iter,
                     bool& stalled) {
  stalled = false;
  Vector w = symmetric_matvec(g, v);
  double lambda = dot(v, w);
  if (norm(w) == 0.0) {
    stalled = true;
    return 0.0;
  }
  for (std::size_t it = 0; it < max_iter; ++it) {
    const double len = norm(w);
    if (len == 0.0) {
      stalled = true;
      return 0.0;
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / len;
    w = symmetric_matvec(g, v);
    const double next = dot(v, w);
    if (std::abs(next - lambda) <= tol * std::abs(next)) return next;
    lambda = next;
  }
  throw NoConvergence("power iteration did not reach relative tolerance");
}

}  // namespace

double sigma_max_sq(const DenseMatrix& m, double tol, std::size_t max_iter) {
  if (m.empty()) throw ShapeError("sigma_max_sq: empty matrix");
  if (!(tol > 0.0)) throw DomainError("sigma_max_sq: tol must be positive");
  const DenseMatrix g = gram(m);
  const std::size_t n = g.rows();

  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += g(i, i);
  if (trace == 0.0) return 0.0;

  Vector start(n, 1.0 / std::sqrt(static_cast<double>(n)));
  bool stalled = false;
  const double lambda = power_iterate(g, start, tol, max_iter, stalled);
  if (!stalled) return lambda;

  Rng rng = Rng::stream(0x5eed, "power-iteration-start");
  for (double& v : start) v = rng.normal();
  const double len = norm(start);
  for (double& v : start) v /= len;
  return power_iterate(g, start, tol, max_iter, stalled);
}

Vector symmetric_eigenvalues(const DenseMatrix& symmetric) {
  if (symmetric.rows() != symmetric.cols()) throw ShapeError("eigenvalues: not square");
  const std::size_t n = symmetric.rows();
  DenseMatrix a = symmetric;

  double scale = 0.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return Vector(n, 0.0);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-17 * scale) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }

  Vector eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

double sigma_min_sq(const DenseMatrix& m) {
  if (m.empty()) throw ShapeError("sigma_min_sq: empty matrix");
  if (m.rows() < m.cols()) {
    throw ShapeError("sigma_min_sq: matrix is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", needs rows >= cols");
  }
  const Vector eig = symmetric_eigenvalues(gram(m));
  return std::max(0.0, eig.front());
}

std::uint64_t binomial(std::uint64_t m, std::uint64_t k) {
  if (k > m) return 0;
  k = std::min(k, m - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (m - k + i) / i stays integral at every step.
    const std::uint64_t factor = m - k + i;
    if (result > UINT64_MAX / factor) return UINT64_MAX;
    result = result * factor / i;
  }
  return result;
}

namespace {

void check_subset_size(const DenseMatrix& m, std::size_t k) {
  if (m.empty()) throw ShapeError("restricted singular value: empty matrix");
  if (k < m.cols() || k > m.rows()) {
    throw ShapeError("restricted singular value: subset size " + std::to_string(k) +
                     " must lie in [" + std::to_string(m.cols()) + ", " +
                     std::to_string(m.rows()) + "]");
  }
}

double subset_sigma_min_sq(const DenseMatrix& m, std::span<const std::size_t> rows) {
  const Vector eig = symmetric_eigenvalues(gram_of_rows(m, rows));
  return std::max(0.0, eig.front());
}

}  // namespace

SpectralSummary restricted_min_sv_bruteforce(const DenseMatrix& m, std::size_t k,
                                             std::uint64_t cap) {
  check_subset_size(m, k);
  const std::uint64_t count = binomial(m.rows(), k);
  if (count > cap) {
    throw TooManySubsets("C(" + std::to_string(m.rows()) + ", " + std::to_string(k) +
                         ") subsets exceed the enumeration cap of " + std::to_string(cap));
  }

  SpectralSummary summary;
  summary.sigma_max_sq = sigma_max_sq(m);
  summary.subset_size = k;
  summary.restricted_fraction = static_cast<double>(k) / static_cast<double>(m.rows());
  summary.sigma_restricted_min_sq = std::numeric_limits<double>::infinity();

  // Lexicographic walk over k-combinations of [0, m).
  std::vector<std::size_t> subset(k);
  std::iota(subset.begin(), subset.end(), std::size_t{0});
  const std::size_t m_rows = m.rows();
  while (true) {
    summary.sigma_restricted_min_sq =
        std::min(summary.sigma_restricted_min_sq, subset_sigma_min_sq(m, subset));
    ++summary.subsets_examined;

    std::size_t i = k;
    while (i > 0 && subset[i - 1] == m_rows - k + (i - 1)) --i;
    if (i == 0) break;
    ++subset[i - 1];
    for (std::size_t j = i; j < k; ++j) subset[j] = subset[j - 1] + 1;
  }
  summary.exact = true;
  return summary;
}

SpectralSummary restricted_min_sv_sampled(const DenseMatrix& m, std::size_t k,
                                          std::size_t samples, std::uint64_t seed) {
  check_subset_size(m, k);
  if (samples == 0) throw DomainError("restricted_min_sv_sampled: samples must be >= 1");

  SpectralSummary summary;
  summary.sigma_max_sq = sigma_max_sq(m);
  summary.subset_size = k;
  summary.restricted_fraction = static_cast<double>(k) / static_cast<double>(m.rows());
  summary.exact = false;

  if (k == m.rows()) {
    summary.sigma_restricted_min_sq = sigma_min_sq(m);
    summary.subsets_examined = 1;
    return summary;
  }

  Rng rng = Rng::stream(seed, "restricted-sv-sample");
  summary.sigma_restricted_min_sq = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const auto subset = rng.sample_without_replacement(m.rows(), k);
    summary.sigma_restricted_min_sq =
        std::min(summary.sigma_restricted_min_sq, subset_sigma_min_sq(m, subset));
    ++summary.subsets_examined;
  }
  return summary;
}

bool solve_psd(const DenseMatrix& g, std::span<const double> rhs, double ridge,
               std::span<double> out) {
  const std::size_t n = g.rows();
  if (g.cols() != n || rhs.size() != n || out.size() != n) {
    throw ShapeError("solve_psd: shape mismatch");
  }
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, g(i, i));
  const double pivot_floor = 1e-10 * max_diag;

  auto factor = [&](double shift, DenseMatrix& l) {
    l = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      double d = g(j, j) + shift;
      for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
      if (!(d > pivot_floor) && shift == 0.0) return false;
      if (!(d > 0.0)) return false;
      const double ljj = std::sqrt(d);
      l(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = g(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        l(i, j) = s / ljj;
      }
    }
    return true;
  };

  DenseMatrix l;
  bool ridged = false;
  if (!factor(0.0, l)) {
    ridged = true;
    double shift = ridge > 0.0 ? ridge : 1e-12 * std::max(max_diag, 1e-300);
    while (!factor(shift, l)) shift *= 10.0;
  }

  // Forward then backward substitution.
  Vector y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
    y[i] = s / l(i, i);
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * out[k];
    out[ii] = s / l(ii, ii);
  }
  return ridged;
}

}  // namespace qabk
