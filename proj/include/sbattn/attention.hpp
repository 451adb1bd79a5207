#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbattn/exp_poly.hpp"
#include "sbattn/matrix.hpp"
#include "sbattn/support_basis.hpp"

namespace sbattn {

struct AttentionInputs {
  DenseMatrix Q, K, V;

  AttentionInputs() = default;
  AttentionInputs(DenseMatrix q, DenseMatrix k, DenseMatrix v)
      : Q(std::move(q)), K(std::move(k)), V(std::move(v)) {
    if (Q.rows != K.rows || Q.rows != V.rows || Q.cols != K.cols || Q.cols != V.cols)
      throw std::invalid_argument("AttentionInputs: Q, K, V must share one n x d shape");
    check_finite(Q, "AttentionInputs(Q)");
    check_finite(K, "AttentionInputs(K)");
    check_finite(V, "AttentionInputs(V)");
  }
  std::size_t n() const { return Q.rows; }
  std::size_t d() const { return Q.cols; }
};

enum class Engine { exact, as23, support_basis, multi_threshold };

inline const char* engine_name(Engine e) {
  switch (e) {
    case Engine::exact: return "exact";
    case Engine::as23: return "as23";
    case Engine::support_basis: return "support_basis";
    case Engine::multi_threshold: return "multi_threshold";
  }
  return "?";
}

struct AttentionOutput {
  DenseMatrix P;                  // n x d
  std::vector<double> row_sums;   // diagonal of D (or its estimate)
  Engine engine = Engine::exact;
  double wall_seconds = 0.0;
  // Diagnostics.
  int poly_degree = -1;
  double poly_achieved_eps = 0.0;
  std::size_t mask_size = 0;
};

struct EngineOptions {
  int threads = 1;
  int degree_cap = 30;
  // Budget on n * r per factor; keeps the monomial expansion in memory.
  std::uint64_t max_factor_doubles = 1ull << 27;
  // When set, an uncertifiable fit degrades to the best polynomial under the
  // caps instead of throwing (benchmark mode).
  bool allow_degraded = false;
  // Debug-only O(n^2 d) check that the Gram matrix respects the fitted bound.
  bool check_gram_bound = false;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;  // sketch streams only
};

namespace detail {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Degree cap honoring both the explicit cap and the factor memory budget.
inline int effective_degree_cap(std::size_t n, std::size_t d, const EngineOptions& o) {
  int cap = o.degree_cap;
  std::uint64_t budget = o.max_factor_doubles / std::max<std::uint64_t>(n, 1);
  while (cap > 0 && monomial_count(d, cap) > budget) --cap;
  return cap;
}

inline ExpPolynomial select_poly(double R, double eps0, std::size_t n, std::size_t d,
                                 const EngineOptions& o) {
  FitOptions fo;
  fo.degree_cap = effective_degree_cap(n, d, o);
  return o.allow_degraded ? fit_exp_polynomial_best(R, eps0, fo)
                          : fit_exp_polynomial(R, eps0, fo);
}

// U2^T * M for M with small width; accumulation ascends over rows of U2.
inline DenseMatrix factor_rhs(const DenseMatrix& U2, const DenseMatrix& M) {
  DenseMatrix out(U2.cols, M.cols);
  for (std::size_t i = 0; i < U2.rows; ++i) {
    const double* u = U2.row(i);
    const double* m = M.row(i);
    for (std::size_t a = 0; a < U2.cols; ++a) {
      double* o = out.row(a);
      double ua = u[a];
      for (std::size_t c = 0; c < M.cols; ++c) o[c] += ua * m[c];
    }
  }
  return out;
}

inline DenseMatrix factor_lhs(const DenseMatrix& U1, const DenseMatrix& R, int threads) {
  DenseMatrix out(U1.rows, R.cols);
  parallel_rows(U1.rows, threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* u = U1.row(i);
      double* o = out.row(i);
      for (std::size_t a = 0; a < U1.cols; ++a) {
        double ua = u[a];
        const double* r = R.row(a);
        for (std::size_t c = 0; c < R.cols; ++c) o[c] += ua * r[c];
      }
    }
  });
  return out;
}

inline std::vector<double> column_sums(const DenseMatrix& m) {
  std::vector<double> s(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* r = m.row(i);
    for (std::size_t c = 0; c < m.cols; ++c) s[c] += r[c];
  }
  return s;
}

}  // namespace detail

// Dense reference: P = D^-1 exp(QK^T/d) V, streamed over rows so the n x n
// matrix is never materialized. Row sums of D^-1 A are 1 by construction.
inline AttentionOutput exact_attention(const AttentionInputs& in, const EngineOptions& opt = {}) {
  detail::Timer timer;
  std::size_t n = in.n(), d = in.d();
  AttentionOutput out;
  out.engine = Engine::exact;
  out.P = DenseMatrix(n, d);
  out.row_sums.assign(n, 0.0);
  double inv_d = 1.0 / static_cast<double>(d);
  parallel_rows(n, opt.threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double* qi = in.Q.row(i);
      double* pi = out.P.row(i);
      double den = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double* kj = in.K.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += qi[k] * kj[k];
        s *= inv_d;
        if (s > 700.0)
          throw std::overflow_error("exact_attention: Gram entry " + std::to_string(s) +
                                    " exceeds the exp guard (700)");
        double a = std::exp(s);
        den += a;
        const double* vj = in.V.row(j);
        for (std::size_t c = 0; c < d; ++c) pi[c] += a * vj[c];
      }
      out.row_sums[i] = den;
      for (std::size_t c = 0; c < d; ++c) pi[c] /= den;
    }
  });
  out.wall_seconds = timer.seconds();
  return out;
}

// Polynomial attention: P = D~^-1 U1 (U2^T V) with D~ = diag(U1 (U2^T 1)).
// The polynomial is fitted on R = ||Q||inf * ||K||inf, which always bounds
// the scaled Gram entries; no bounded-entry assumption is enforced, so
// fidelity degrades on wide-range inputs exactly as expected.
inline AttentionOutput poly_attention_as23(const AttentionInputs& in, double eps0,
                                           const EngineOptions& opt = {}) {
  detail::Timer timer;
  std::size_t n = in.n(), d = in.d();
  double R = norm(in.Q, Norm::linf) * norm(in.K, Norm::linf);
  ExpPolynomial poly = detail::select_poly(R, eps0, n, d, opt);
  LowRankFactors f = build_low_rank_factors(in.Q, in.K, poly, opt.threads,
                                            opt.max_factor_doubles / std::max<std::size_t>(n, 1),
                                            opt.check_gram_bound);
  DenseMatrix rhs1(in.V.rows, 1, 1.0);
  DenseMatrix d1 = detail::factor_lhs(f.U1, detail::factor_rhs(f.U2, rhs1), opt.threads);
  DenseMatrix c1 = detail::factor_lhs(f.U1, detail::factor_rhs(f.U2, in.V), opt.threads);

  AttentionOutput out;
  out.engine = Engine::as23;
  out.P = DenseMatrix(n, d);
  out.row_sums.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double den = d1.at(i, 0);
    if (!(den > 0.0))
      throw std::runtime_error("poly_attention_as23: polynomial normalization collapsed at row " +
                               std::to_string(i) + " (eps0/R mismatch)");
    out.row_sums[i] = den;
    const double* ci = c1.row(i);
    double* pi = out.P.row(i);
    for (std::size_t c = 0; c < d; ++c) pi[c] = ci[c] / den;
  }
  out.poly_degree = poly.degree;
  out.poly_achieved_eps = poly.achieved_eps;
  out.wall_seconds = timer.seconds();
  return out;
}

namespace detail {

// Shared core of the single-threshold engines. Computes
//   C = U1 (U2^T V) + sum over mask (exp(<Q_i,K_j>/d) - P(<Qs_i,Ks_j>/d)) V_j
//   den = same with V replaced by the all-ones vector,
// i.e. the low-rank estimate plus an exact sparse correction that replaces
// the polynomial value with the true exponential at every mask position.
struct SingleCore {
  DenseMatrix C;
  std::vector<double> den;
  std::size_t mask_size = 0;
  int poly_degree = 0;
  double poly_achieved_eps = 0.0;
};

inline SingleCore single_threshold_core(const AttentionInputs& in, double T, double eps0,
                                        const EngineOptions& opt) {
  std::size_t n = in.n(), d = in.d();
  ThresholdSplit qs = split(in.Q, T);
  ThresholdSplit ks = split(in.K, T);
  LargeMask mask = build_large_mask(qs, ks, n);

  // Realized bound on the small-part Gram entries. Never exceeds T*T, and
  // coincides with the full-range polynomial bound when the mask is empty.
  double R = norm(qs.small, Norm::linf) * norm(ks.small, Norm::linf);
  ExpPolynomial poly = select_poly(R, eps0, n, d, opt);
  LowRankFactors f = build_low_rank_factors(qs.small, ks.small, poly, opt.threads,
                                            opt.max_factor_doubles / std::max<std::size_t>(n, 1),
                                            opt.check_gram_bound);
  DenseMatrix ones(n, 1, 1.0);
  DenseMatrix d1 = factor_lhs(f.U1, factor_rhs(f.U2, ones), opt.threads);
  DenseMatrix c1 = factor_lhs(f.U1, factor_rhs(f.U2, in.V), opt.threads);

  SingleCore core;
  core.C = std::move(c1);
  core.den.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) core.den[i] = d1.at(i, 0);
  core.mask_size = mask.size();
  core.poly_degree = poly.degree;
  core.poly_achieved_eps = poly.achieved_eps;

  if (core.mask_size != 0) {
    double inv_d = 1.0 / static_cast<double>(d);
    // Row offsets into the sorted large-entry lists: the small-part Gram
    // value comes from the full dot minus two sparse corrections,
    //   <Qs_i, Ks_j> = <Q_i, K_j> - <QL_i, K_j> - <Qs_i, KL_j>,
    // costing d + nnz(QL_i) + nnz(KL_j) per visit instead of a second dot.
    auto row_offsets = [n](const SparseMatrix& s) {
      std::vector<std::size_t> off(n + 1, 0);
      for (const auto& e : s.entries) ++off[e.row + 1];
      for (std::size_t i = 0; i < n; ++i) off[i + 1] += off[i];
      return off;
    };
    std::vector<std::size_t> qoff = row_offsets(qs.large);
    std::vector<std::size_t> koff = row_offsets(ks.large);
    parallel_rows(n, opt.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const double* qi = in.Q.row(i);
        const double* qsi = qs.small.row(i);
        const SparseEntry* ql = qs.large.entries.data() + qoff[i];
        const SparseEntry* ql_end = qs.large.entries.data() + qoff[i + 1];
        double* ci = core.C.row(i);
        double extra = 0.0;
        auto visit = [&](std::size_t j) {
          const double* kj = in.K.row(j);
          double full = 0.0;
          for (std::size_t k = 0; k < d; ++k) full += qi[k] * kj[k];
          double small = full;
          for (const SparseEntry* e = ql; e != ql_end; ++e) small -= e->value * kj[e->col];
          for (std::size_t t = koff[j]; t != koff[j + 1]; ++t) {
            const SparseEntry& e = ks.large.entries[t];
            small -= qsi[e.col] * e.value;
          }
          full *= inv_d;
          if (full > 700.0)
            throw std::overflow_error("single-threshold attention: Gram entry " +
                                      std::to_string(full) + " exceeds the exp guard (700)");
          double w = std::exp(full) - eval_poly(poly, small * inv_d);
          extra += w;
          const double* vj = in.V.row(j);
          for (std::size_t c = 0; c < d; ++c) ci[c] += w * vj[c];
        };
        if (mask.row_flag[i]) {
          for (std::size_t j = 0; j < n; ++j) visit(j);
        } else {
          for (std::size_t j : mask.large_cols) visit(j);
        }
        core.den[i] += extra;
      }
    });
  }
  return core;
}

}  // namespace detail

// Unnormalized kernel sum: approximates exp(QK^T/d) V by the low-rank
// polynomial estimate on the small split plus exact values on the mask.
inline DenseMatrix gaussian_kde_single(const AttentionInputs& in, double T, double eps0,
                                       const EngineOptions& opt = {}) {
  return detail::single_threshold_core(in, T, eps0, opt).C;
}

// Single-threshold hybrid attention: exact on the large-entry mask,
// polynomial elsewhere, normalized by the combined row sums.
inline AttentionOutput approx_attention_single(const AttentionInputs& in, double T, double eps0,
                                               const EngineOptions& opt = {}) {
  detail::Timer timer;
  detail::SingleCore core = detail::single_threshold_core(in, T, eps0, opt);
  std::size_t n = in.n(), d = in.d();
  AttentionOutput out;
  out.engine = Engine::support_basis;
  out.P = DenseMatrix(n, d);
  out.row_sums = core.den;
  for (std::size_t i = 0; i < n; ++i) {
    double den = core.den[i];
    if (!(den > 0.0))
      throw std::runtime_error("approx_attention_single: non-positive combined row sum at row " +
                               std::to_string(i));
    const double* ci = core.C.row(i);
    double* pi = out.P.row(i);
    for (std::size_t c = 0; c < d; ++c) pi[c] = ci[c] / den;
  }
  out.poly_degree = core.poly_degree;
  out.poly_achieved_eps = core.poly_achieved_eps;
  out.mask_size = core.mask_size;
  out.wall_seconds = timer.seconds();
  return out;
}

// max_i |D~_ii - D_ii| / D_ii for D built from row sums of A and A~.
inline double verify_normalization_error(const DenseMatrix& a, const DenseMatrix& a_tilde) {
  if (a.rows != a_tilde.rows || a.cols != a_tilde.cols)
    throw std::invalid_argument("verify_normalization_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double da = 0.0, dt = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      da += a.at(i, j);
      dt += a_tilde.at(i, j);
    }
    if (!(da > 0.0))
      throw std::invalid_argument("verify_normalization_error: non-positive row sum at row " +
                                  std::to_string(i));
    worst = std::max(worst, std::abs(dt - da) / da);
  }
  return worst;
}

}  // namespace sbattn
