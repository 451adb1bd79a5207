#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace sbattn {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// Row-major dense matrix of doubles. Immutable by convention after
// construction: operations return new matrices.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  DenseMatrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols)
      throw std::invalid_argument("DenseMatrix: data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(rows, cols));
  }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static DenseMatrix ones(std::size_t r, std::size_t c) { return DenseMatrix(r, c, 1.0); }
};

struct SparseEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

inline bool entry_pos_less(const SparseEntry& a, const SparseEntry& b) {
  return a.row != b.row ? a.row < b.row : a.col < b.col;
}

// Sorted coordinate-list matrix. Entries are unique and, except where a
// caller explicitly keeps structural zeros (threshold masks do), nonzero.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<SparseEntry> entries;  // sorted by (row, col), no duplicates

  SparseMatrix() = default;
  SparseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c) {}

  std::size_t nnz() const { return entries.size(); }

  static SparseMatrix from_triplets(std::size_t r, std::size_t c,
                                    std::vector<SparseEntry> triplets,
                                    bool keep_explicit_zeros = false) {
    SparseMatrix m(r, c);
    for (const auto& e : triplets) {
      if (e.row >= r || e.col >= c)
        throw std::invalid_argument("SparseMatrix: index (" + std::to_string(e.row) + "," +
                                    std::to_string(e.col) + ") out of bounds for " +
                                    shape_str(r, c));
    }
    std::sort(triplets.begin(), triplets.end(), entry_pos_less);
    for (std::size_t i = 1; i < triplets.size(); ++i) {
      if (triplets[i].row == triplets[i - 1].row && triplets[i].col == triplets[i - 1].col)
        throw std::invalid_argument("SparseMatrix: duplicate entry at (" +
                                    std::to_string(triplets[i].row) + "," +
                                    std::to_string(triplets[i].col) + ")");
    }
    if (!keep_explicit_zeros) {
      triplets.erase(std::remove_if(triplets.begin(), triplets.end(),
                                    [](const SparseEntry& e) { return e.value == 0.0; }),
                     triplets.end());
    }
    m.entries = std::move(triplets);
    return m;
  }
};

// Sorted, deduplicated set of (row, col) positions.
struct SupportPattern {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::pair<std::size_t, std::size_t>> positions;

  std::size_t size() const { return positions.size(); }
  bool contains(std::size_t i, std::size_t j) const {
    return std::binary_search(positions.begin(), positions.end(), std::make_pair(i, j));
  }
};

// Runs fn(begin, end) over a row partition. Each row is produced entirely by
// one worker, so results are bit-identical to the sequential order.
inline void parallel_rows(std::size_t n, int threads,
                          const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(fn, lo, hi);
  }
  for (auto& t : pool) t.join();
}

inline void check_finite(const DenseMatrix& m, const char* op) {
  for (std::size_t k = 0; k < m.data.size(); ++k) {
    if (!std::isfinite(m.data[k]))
      throw std::overflow_error(std::string(op) + ": non-finite entry at (" +
                                std::to_string(k / m.cols) + "," + std::to_string(k % m.cols) +
                                ")");
  }
}

// Standard product with left-to-right accumulation over the inner index, so
// results are reproducible and independent of row partitioning.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b, int threads = 1) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: inner dimensions differ, " + shape_str(a.rows, a.cols) +
                                " x " + shape_str(b.rows, b.cols));
  DenseMatrix out(a.rows, b.cols);
  parallel_rows(a.rows, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double* oi = out.row(i);
      const double* ai = a.row(i);
      for (std::size_t k = 0; k < a.cols; ++k) {
        double aik = ai[k];
        const double* bk = b.row(k);
        for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
      }
    }
  });
  check_finite(out, "matmul");
  return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("add: shape mismatch " + shape_str(a.rows, a.cols) + " vs " +
                                shape_str(b.rows, b.cols));
  DenseMatrix out = a;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += b.data[k];
  check_finite(out, "add");
  return out;
}

inline DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("sub: shape mismatch " + shape_str(a.rows, a.cols) + " vs " +
                                shape_str(b.rows, b.cols));
  DenseMatrix out = a;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] -= b.data[k];
  check_finite(out, "sub");
  return out;
}

inline DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix out = a;
  for (double& v : out.data) v *= s;
  check_finite(out, "scale");
  return out;
}

// Entrywise exponential. Arguments above the double exp() range are an error:
// callers are expected to pre-scale, so overflow signals a caller bug.
inline DenseMatrix entrywise_exp(const DenseMatrix& a) {
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    double x = a.data[k];
    if (x > 709.0)
      throw std::overflow_error("entrywise_exp: entry (" + std::to_string(k / a.cols) + "," +
                                std::to_string(k % a.cols) + ") = " + std::to_string(x) +
                                " exceeds the exp range; pre-scale the input");
    out.data[k] = std::exp(x);
  }
  return out;
}

// Entrywise power A^{.c}. Non-integer exponents require positive entries.
inline DenseMatrix hadamard_pow(const DenseMatrix& a, double c) {
  bool integral = (c == std::nearbyint(c));
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t k = 0; k < a.data.size(); ++k) {
    double x = a.data[k];
    if (!integral && x <= 0.0)
      throw std::domain_error("hadamard_pow: non-integer exponent with non-positive entry at (" +
                              std::to_string(k / a.cols) + "," + std::to_string(k % a.cols) + ")");
    out.data[k] = std::pow(x, c);
  }
  check_finite(out, "hadamard_pow");
  return out;
}

inline SupportPattern support(const DenseMatrix& a) {
  SupportPattern p;
  p.rows = a.rows;
  p.cols = a.cols;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      if (a.at(i, j) != 0.0) p.positions.emplace_back(i, j);
  return p;
}

inline SupportPattern support(const SparseMatrix& a) {
  SupportPattern p;
  p.rows = a.rows;
  p.cols = a.cols;
  for (const auto& e : a.entries)
    if (e.value != 0.0) p.positions.emplace_back(e.row, e.col);
  return p;
}

inline bool are_disjoint(const std::vector<SupportPattern>& patterns) {
  if (patterns.empty()) return true;
  std::size_t r = patterns.front().rows, c = patterns.front().cols;
  std::vector<char> seen(r * c, 0);
  for (const auto& p : patterns) {
    if (p.rows != r || p.cols != c)
      throw std::invalid_argument("are_disjoint: shape mismatch " + shape_str(r, c) + " vs " +
                                  shape_str(p.rows, p.cols));
    for (const auto& [i, j] : p.positions) {
      if (seen[i * c + j]) return false;
      seen[i * c + j] = 1;
    }
  }
  return true;
}

inline bool are_disjoint(const std::vector<DenseMatrix>& mats) {
  std::vector<SupportPattern> ps;
  ps.reserve(mats.size());
  for (const auto& m : mats) ps.push_back(support(m));
  return are_disjoint(ps);
}

enum class Norm { linf, l1, fro };

inline double norm(const DenseMatrix& a, Norm kind) {
  double acc = 0.0;
  switch (kind) {
    case Norm::linf:
      for (double v : a.data) acc = std::max(acc, std::abs(v));
      return acc;
    case Norm::l1:
      for (double v : a.data) acc += std::abs(v);
      return acc;
    case Norm::fro:
      for (double v : a.data) acc += v * v;
      return std::sqrt(acc);
  }
  return acc;
}

// Entrywise lp norm (sum |a_ij|^p)^(1/p).
inline double lp_norm(const DenseMatrix& a, double p) {
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  double acc = 0.0;
  for (double v : a.data) acc += std::pow(std::abs(v), p);
  return std::pow(acc, 1.0 / p);
}

// ||a - ref||_F / ||ref||_F.
inline double rel_fro(const DenseMatrix& a, const DenseMatrix& ref) {
  if (a.rows != ref.rows || a.cols != ref.cols)
    throw std::invalid_argument("rel_fro: shape mismatch " + shape_str(a.rows, a.cols) + " vs " +
                                shape_str(ref.rows, ref.cols));
  double den = norm(ref, Norm::fro);
  if (den == 0.0) throw std::invalid_argument("rel_fro: reference has zero Frobenius norm");
  return norm(sub(a, ref), Norm::fro) / den;
}

// Product touching only stored entries; cost is nnz * V.cols.
inline DenseMatrix sparse_apply(const SparseMatrix& s, const DenseMatrix& v) {
  if (s.cols != v.rows)
    throw std::invalid_argument("sparse_apply: inner dimensions differ, " +
                                shape_str(s.rows, s.cols) + " x " + shape_str(v.rows, v.cols));
  DenseMatrix out(s.rows, v.cols);
  for (const auto& e : s.entries) {
    double* oi = out.row(e.row);
    const double* vr = v.row(e.col);
    for (std::size_t c = 0; c < v.cols; ++c) oi[c] += e.value * vr[c];
  }
  check_finite(out, "sparse_apply");
  return out;
}

inline DenseMatrix densify(const SparseMatrix& s) {
  DenseMatrix out(s.rows, s.cols);
  for (const auto& e : s.entries) out.at(e.row, e.col) = e.value;
  return out;
}

inline SparseMatrix sparsify(const DenseMatrix& d) {
  SparseMatrix out(d.rows, d.cols);
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t j = 0; j < d.cols; ++j)
      if (d.at(i, j) != 0.0) out.entries.push_back({i, j, d.at(i, j)});
  return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  return norm(sub(a, b), Norm::linf);
}

}  // namespace sbattn
