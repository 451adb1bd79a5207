#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sbattn/matrix.hpp"
#include "sbattn/rng.hpp"

namespace sbattn {

// Split of a matrix into entries strictly above a threshold (sparse) and the
// rest (dense, with the large positions zeroed). Ties go to small.
struct ThresholdSplit {
  double threshold = 0.0;
  SparseMatrix large;
  DenseMatrix small;
};

inline ThresholdSplit split(const DenseMatrix& m, double T) {
  if (T < 0.0) throw std::invalid_argument("split: threshold must be nonnegative");
  ThresholdSplit s;
  s.threshold = T;
  s.large = SparseMatrix(m.rows, m.cols);
  s.small = m;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) {
      double v = m.at(i, j);
      if (std::abs(v) > T) {
        s.large.entries.push_back({i, j, v});
        s.small.at(i, j) = 0.0;
      }
    }
  return s;
}

// Row/column-union mask over the n x n Gram matrix: full rows for every row
// of Q holding a large entry, full columns for every row of K holding one.
// The pattern is kept implicit (it can be ~n^2 positions at low thresholds).
struct LargeMask {
  std::size_t n = 0;
  std::vector<std::size_t> large_rows;  // sorted
  std::vector<std::size_t> large_cols;  // sorted
  std::vector<char> row_flag, col_flag;

  bool contains(std::size_t i, std::size_t j) const { return row_flag[i] || col_flag[j]; }

  // |rows|*n + |cols|*n - |rows|*|cols| by inclusion-exclusion.
  std::size_t size() const {
    return large_rows.size() * n + large_cols.size() * n -
           large_rows.size() * large_cols.size();
  }

  SupportPattern to_pattern() const {
    SupportPattern p;
    p.rows = n;
    p.cols = n;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (contains(i, j)) p.positions.emplace_back(i, j);
    return p;
  }
};

inline LargeMask build_large_mask(const ThresholdSplit& qs, const ThresholdSplit& ks,
                                  std::size_t n) {
  if (qs.small.rows != n || ks.small.rows != n)
    throw std::invalid_argument("build_large_mask: splits do not have n rows");
  LargeMask m;
  m.n = n;
  m.row_flag.assign(n, 0);
  m.col_flag.assign(n, 0);
  for (const auto& e : qs.large.entries) m.row_flag[e.row] = 1;
  for (const auto& e : ks.large.entries) m.col_flag[e.row] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.row_flag[i]) m.large_rows.push_back(i);
    if (m.col_flag[i]) m.large_cols.push_back(i);
  }
  return m;
}

// Gram values <Q_i, K_j> at every mask position, stored as sorted COO.
// Positions whose inner product happens to be zero are kept as structural
// zeros so the decomposition's support arithmetic stays mask-based.
inline SparseMatrix compute_A_L(const DenseMatrix& Q, const DenseMatrix& K, const LargeMask& mask,
                                int threads = 1) {
  if (Q.rows != mask.n || K.rows != mask.n)
    throw std::invalid_argument("compute_A_L: Q/K row count does not match the mask");
  if (Q.cols != K.cols)
    throw std::invalid_argument("compute_A_L: Q and K have different widths");
  std::size_t n = mask.n, d = Q.cols;
  // Per-row entry counts are known up front, so rows can be filled in place.
  std::vector<std::size_t> offset(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i)
    offset[i + 1] = offset[i] + (mask.row_flag[i] ? n : mask.large_cols.size());
  SparseMatrix out(n, n);
  out.entries.resize(offset[n]);
  parallel_rows(n, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* qi = Q.row(i);
      SparseEntry* dst = out.entries.data() + offset[i];
      auto emit = [&](std::size_t j) {
        const double* kj = K.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += qi[k] * kj[k];
        *dst++ = {i, j, s};
      };
      if (mask.row_flag[i]) {
        for (std::size_t j = 0; j < n; ++j) emit(j);
      } else {
        for (std::size_t j : mask.large_cols) emit(j);
      }
    }
  });
  return out;
}

struct SparsityReport {
  std::size_t n = 0, d = 0;
  double threshold = 0.0;
  std::size_t count_large_Q = 0;
  std::size_t count_large_K = 0;
  std::size_t mask_size = 0;
  double expected_large = 0.0;  // tail-bound value for one matrix
  double alpha_hat = 0.0;       // log(mask_size)/log(n) - 1
};

// Default split threshold sqrt(c * ln n); c in (0, 1) keeps the expected
// large-entry count subpolynomial for concentrated inputs.
inline double default_threshold(std::size_t n, double c = 0.5) {
  if (n < 2) throw std::invalid_argument("default_threshold: need n >= 2");
  if (!(c > 0.0)) throw std::invalid_argument("default_threshold: c must be positive");
  return std::sqrt(c * std::log(static_cast<double>(n)));
}

// Expected number of entries above T for an n x d matrix with sub-Gaussian
// entries of variance proxy sigma^2 (a Gaussian with std s has proxy s*sqrt2).
inline double expected_large_count(std::size_t n, std::size_t d, double T, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("expected_large_count: sigma must be positive");
  return 2.0 * static_cast<double>(n) * static_cast<double>(d) *
         std::exp(-(T * T) / (sigma * sigma));
}

inline SparsityReport sparsity_report(const ThresholdSplit& qs, const ThresholdSplit& ks,
                                      const LargeMask& mask, double sigma_proxy) {
  SparsityReport r;
  r.n = mask.n;
  r.d = qs.small.cols;
  r.threshold = qs.threshold;
  r.count_large_Q = qs.large.nnz();
  r.count_large_K = ks.large.nnz();
  r.mask_size = mask.size();
  r.expected_large = expected_large_count(r.n, r.d, r.threshold, sigma_proxy);
  r.alpha_hat = r.mask_size == 0
                    ? -std::numeric_limits<double>::infinity()
                    : std::log(static_cast<double>(r.mask_size)) /
                              std::log(static_cast<double>(r.n)) -
                          1.0;
  return r;
}

// i.i.d. mean-zero Gaussian entries with standard deviation sigma; identical
// output for identical (n, d, sigma, seed).
inline DenseMatrix sample_subgaussian(std::size_t n, std::size_t d, double sigma,
                                      std::uint64_t seed) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_subgaussian: sigma must be positive");
  DenseMatrix m(n, d);
  Rng rng(derive_seed(seed, 0x5a));
  for (double& v : m.data) v = sigma * rng.gaussian();
  return m;
}

}  // namespace sbattn
