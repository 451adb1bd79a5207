#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbattn/attention.hpp"
#include "sbattn/exp_poly.hpp"
#include "sbattn/matrix.hpp"
#include "sbattn/rng.hpp"

namespace sbattn {

// Geometric row bucketing. Row i lands in bucket l (1-based) iff
// T_{l-1} <= max_j |M_{i,j}| < T_l, with the last bucket closed above and
// all-zero rows assigned to bucket 1.
struct BucketScheme {
  double b = 0.0;      // floored minimum magnitude
  double B = 0.0;      // maximum magnitude
  double eps_B = 0.0;  // bucketing parameter
  int m = 0;
  std::vector<double> thresholds;  // T_0..T_m; T_m acts as +inf for assignment
  std::vector<int> q_assign, k_assign;
};

namespace detail {

inline int bucket_of(double row_max, const std::vector<double>& thresholds, int m) {
  // First l in [1, m] with row_max < T_l; T_m is treated as +inf.
  auto it = std::upper_bound(thresholds.begin() + 1, thresholds.begin() + m, row_max);
  return static_cast<int>(it - thresholds.begin());
}

inline double row_max_abs(const DenseMatrix& M, std::size_t i) {
  double mx = 0.0;
  const double* r = M.row(i);
  for (std::size_t j = 0; j < M.cols; ++j) mx = std::max(mx, std::abs(r[j]));
  return mx;
}

}  // namespace detail

inline BucketScheme bucket_scheme(const DenseMatrix& Q, const DenseMatrix& K, double eps_B) {
  if (!(eps_B > 0.0)) throw std::invalid_argument("bucket_scheme: eps_B must be positive");
  if (Q.cols != K.cols || Q.rows != K.rows)
    throw std::invalid_argument("bucket_scheme: Q and K must share one shape");
  double B = 0.0;
  double bmin = std::numeric_limits<double>::infinity();
  for (const auto* M : {&Q, &K})
    for (double v : M->data) {
      double a = std::abs(v);
      B = std::max(B, a);
      if (a > 0.0) bmin = std::min(bmin, a);
    }
  if (B == 0.0) throw std::invalid_argument("bucket_scheme: all-zero inputs (b undefined)");
  // The raw minimum magnitude can be arbitrarily close to zero, which would
  // make the bucket count unbounded; floor it relative to B.
  double b = std::max(bmin, 1e-6 * B);

  BucketScheme s;
  s.b = b;
  s.B = B;
  s.eps_B = eps_B;
  int m = b >= B ? 1
                 : static_cast<int>(std::floor(std::log(B / b) / std::log1p(eps_B))) + 1;
  m = std::max(m, 1);
  while (b * std::pow(1.0 + eps_B, m) <= B) ++m;  // guard against log() rounding
  s.m = m;
  s.thresholds.resize(m + 1);
  for (int l = 0; l <= m; ++l) s.thresholds[l] = b * std::pow(1.0 + eps_B, l);
  for (int l = 1; l <= m; ++l)
    if (!(s.thresholds[l] > s.thresholds[l - 1]))
      throw std::runtime_error("bucket_scheme: thresholds failed to increase (eps_B too small)");

  s.q_assign.resize(Q.rows);
  s.k_assign.resize(K.rows);
  for (std::size_t i = 0; i < Q.rows; ++i)
    s.q_assign[i] = detail::bucket_of(detail::row_max_abs(Q, i), s.thresholds, m);
  for (std::size_t i = 0; i < K.rows; ++i)
    s.k_assign[i] = detail::bucket_of(detail::row_max_abs(K, i), s.thresholds, m);
  return s;
}

// Rows of one bucket scaled by 1/C_scalar with C_scalar = T_l / sqrt(ln n),
// so the scaled entries stay below sqrt(ln n).
struct NormalizedBlock {
  int bucket = 0;
  double C_scalar = 0.0;
  std::vector<std::size_t> rows;
  DenseMatrix M_norm;  // rows.size() x d
};

struct BlockDecomposition {
  int m = 0;
  std::size_t n = 0;
  std::vector<NormalizedBlock> q_blocks;  // index l-1
  std::vector<NormalizedBlock> k_blocks;

  // C^(T_l, T_l') = C^(T_l) * C^(T_l').
  double pair_scale(int l, int lp) const {
    return q_blocks[l - 1].C_scalar * k_blocks[lp - 1].C_scalar;
  }
};

inline BlockDecomposition decompose_blocks(const DenseMatrix& Q, const DenseMatrix& K,
                                           const BucketScheme& scheme) {
  std::size_t n = Q.rows;
  if (n < 2) throw std::invalid_argument("decompose_blocks: need n >= 2 (log n normalization)");
  double sqrt_log_n = std::sqrt(std::log(static_cast<double>(n)));
  BlockDecomposition dec;
  dec.m = scheme.m;
  dec.n = n;
  auto build_side = [&](const DenseMatrix& M, const std::vector<int>& assign,
                        std::vector<NormalizedBlock>& out) {
    out.resize(scheme.m);
    for (int l = 1; l <= scheme.m; ++l) {
      NormalizedBlock& blk = out[l - 1];
      blk.bucket = l;
      blk.C_scalar = scheme.thresholds[l] / sqrt_log_n;
      for (std::size_t i = 0; i < M.rows; ++i)
        if (assign[i] == l) blk.rows.push_back(i);
      blk.M_norm = DenseMatrix(blk.rows.size(), M.cols);
      double inv = 1.0 / blk.C_scalar;
      for (std::size_t a = 0; a < blk.rows.size(); ++a) {
        const double* src = M.row(blk.rows[a]);
        double* dst = blk.M_norm.row(a);
        for (std::size_t j = 0; j < M.cols; ++j) dst[j] = src[j] * inv;
      }
    }
  };
  build_side(Q, scheme.q_assign, dec.q_blocks);
  build_side(K, scheme.k_assign, dec.k_blocks);
  return dec;
}

// Flat view of the m^2 block pairs: (l, l', C^(T_l,T_l'), Q-side, K-side).
struct BlockPair {
  int l = 0, lp = 0;
  double C = 0.0;
  const NormalizedBlock* q = nullptr;
  const NormalizedBlock* k = nullptr;
};

inline std::vector<BlockPair> block_pairs(const BlockDecomposition& dec) {
  std::vector<BlockPair> out;
  out.reserve(static_cast<std::size_t>(dec.m) * dec.m);
  for (int l = 1; l <= dec.m; ++l)
    for (int lp = 1; lp <= dec.m; ++lp)
      out.push_back({l, lp, dec.pair_scale(l, lp), &dec.q_blocks[l - 1], &dec.k_blocks[lp - 1]});
  return out;
}

// Dense QK^T rebuilt from the block row selections (test-scale helper).
// Uses the original rows, so the reconstruction is bit-exact.
inline DenseMatrix reconstruct_gram(const DenseMatrix& Q, const DenseMatrix& K,
                                    const BlockDecomposition& dec) {
  DenseMatrix out(dec.n, dec.n);
  for (const auto& qb : dec.q_blocks)
    for (const auto& kb : dec.k_blocks)
      for (std::size_t a = 0; a < qb.rows.size(); ++a)
        for (std::size_t bidx = 0; bidx < kb.rows.size(); ++bidx) {
          const double* qi = Q.row(qb.rows[a]);
          const double* kj = K.row(kb.rows[bidx]);
          double s = 0.0;
          for (std::size_t k = 0; k < Q.cols; ++k) s += qi[k] * kj[k];
          out.at(qb.rows[a], kb.rows[bidx]) = s;
        }
  return out;
}

// ---------------------------------------------------------------------------
// Sketched polynomial kernels.

struct SketchSpec {
  int p = 2;                  // even kernel degree
  std::size_t input_dim = 0;  // r
  std::size_t z = 0;          // sketch width
  double eps = 0.0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  double kappa = 8.0;
};

inline SketchSpec make_sketch_spec(int p, std::size_t input_dim, double eps, double delta,
                                   std::size_t n, std::uint64_t seed, double kappa = 8.0) {
  if (p < 2 || p % 2 != 0) throw std::invalid_argument("make_sketch_spec: p must be even, >= 2");
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("make_sketch_spec: eps in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("make_sketch_spec: delta in (0,1)");
  SketchSpec s;
  s.p = p;
  s.input_dim = input_dim;
  s.eps = eps;
  s.delta = delta;
  s.seed = seed;
  s.kappa = kappa;
  double zf = std::ceil(kappa * p / (eps * eps) * std::log(static_cast<double>(n) / delta));
  s.z = static_cast<std::size_t>(std::max(zf, 1.0));
  return s;
}

namespace detail {

// Rademacher (+-1/sqrt z) stage maps: q = p/2 input sketches of shape z x r
// and q-2 mixing maps of shape z x z. Seeded per stage so every sketch is
// reproducible and independent.
struct SketchStages {
  std::size_t z = 0, r = 0;
  int q = 0;
  std::vector<DenseMatrix> S;  // q maps, z x r
  std::vector<DenseMatrix> G;  // max(q-2, 0) maps, z x z
};

inline DenseMatrix rademacher_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  DenseMatrix m(rows, cols);
  Rng rng(seed);
  double s = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : m.data) v = s * rng.rademacher();
  return m;
}

inline SketchStages build_sketch_stages(const SketchSpec& spec) {
  SketchStages st;
  st.z = spec.z;
  st.r = spec.input_dim;
  st.q = spec.p / 2;
  for (int i = 0; i < st.q; ++i)
    st.S.push_back(rademacher_matrix(st.z, st.r, derive_seed(spec.seed, 0xA5, i)));
  for (int i = 0; i + 2 < st.q; ++i)
    st.G.push_back(rademacher_matrix(st.z, st.z, derive_seed(spec.seed, 0x6E, i)));
  return st;
}

inline std::vector<double> apply_map(const DenseMatrix& m, const double* x) {
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* mi = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) acc += mi[j] * x[j];
    out[i] = acc;
  }
  return out;
}

// Core z-dimensional embedding w(x): the feature map is w(x) tensor w(x), so
// <phi(x), phi(y)> = <w(x), w(y)>^2 approximates <x, y>^p.
inline std::vector<double> sketch_core_vector(const double* x, const SketchStages& st) {
  std::vector<double> w = apply_map(st.S[0], x);
  double sqz = std::sqrt(static_cast<double>(st.z));
  for (int i = 1; i < st.q; ++i) {
    std::vector<double> u = apply_map(st.S[i], x);
    for (std::size_t k = 0; k < st.z; ++k) w[k] *= u[k] * sqz;
    if (i + 1 < st.q) w = apply_map(st.G[i - 1], w.data());
  }
  return w;
}

}  // namespace detail

// phi'(x): the z^2-dimensional degree-p feature embedding. Inner products of
// embeddings are squares, hence always nonnegative.
inline std::vector<double> sketch_feature_map(const std::vector<double>& x,
                                              const SketchSpec& spec) {
  if (x.size() != spec.input_dim)
    throw std::invalid_argument("sketch_feature_map: vector length " + std::to_string(x.size()) +
                                " does not match input_dim " + std::to_string(spec.input_dim));
  detail::SketchStages st = detail::build_sketch_stages(spec);
  std::vector<double> w = detail::sketch_core_vector(x.data(), st);
  std::vector<double> out(spec.z * spec.z);
  for (std::size_t a = 0; a < spec.z; ++a)
    for (std::size_t b = 0; b < spec.z; ++b) out[a * spec.z + b] = w[a] * w[b];
  return out;
}

// phi'(U1) phi'(U2)^T as a dense matrix, computed through the z-dimensional
// core vectors: entry (i,j) = <w(U1_i), w(U2_j)>^2.
inline DenseMatrix sketched_poly_kernel(const DenseMatrix& U1, const DenseMatrix& U2,
                                        const SketchSpec& spec) {
  if (U1.cols != spec.input_dim || U2.cols != spec.input_dim)
    throw std::invalid_argument("sketched_poly_kernel: factor width does not match input_dim");
  detail::SketchStages st = detail::build_sketch_stages(spec);
  std::vector<std::vector<double>> w1(U1.rows), w2(U2.rows);
  for (std::size_t i = 0; i < U1.rows; ++i) w1[i] = detail::sketch_core_vector(U1.row(i), st);
  for (std::size_t j = 0; j < U2.rows; ++j) w2[j] = detail::sketch_core_vector(U2.row(j), st);
  DenseMatrix out(U1.rows, U2.rows);
  for (std::size_t i = 0; i < U1.rows; ++i)
    for (std::size_t j = 0; j < U2.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < spec.z; ++k) s += w1[i][k] * w2[j][k];
      out.at(i, j) = s * s;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Bucketed attention.

namespace detail {

inline int nearest_even_ge2(double c) {
  long long half = std::llround(c / 2.0);
  long long p = 2 * std::max<long long>(half, 1);
  return static_cast<int>(p);
}

inline double max_row_2norm(const DenseMatrix& m) {
  double mx = 0.0;
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    const double* r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) s += r[j] * r[j];
    mx = std::max(mx, s);
  }
  return std::sqrt(mx);
}

}  // namespace detail

// Reference (unsketched) bucketed approximation of exp(QK^T/d):
// sum over block pairs of the real Hadamard power of the per-block low-rank
// polynomial estimate, with the all-ones correction folded in (off-block
// positions contribute exactly 1). Factor-product entries are clamped to a
// tiny positive floor before the real power: they approximate exp(.) > 0 and
// any negative value is polynomial-approximation noise.
inline DenseMatrix multi_reference_matrix(const AttentionInputs& in, const BucketScheme& scheme,
                                          double eps0, const EngineOptions& opt = {}) {
  std::size_t n = in.n(), d = in.d();
  BlockDecomposition dec = decompose_blocks(in.Q, in.K, scheme);
  DenseMatrix a_tilde(n, n, 1.0);
  for (int l = 1; l <= scheme.m; ++l) {
    const NormalizedBlock& qb = dec.q_blocks[l - 1];
    if (qb.rows.empty()) continue;
    for (int lp = 1; lp <= scheme.m; ++lp) {
      const NormalizedBlock& kb = dec.k_blocks[lp - 1];
      if (kb.rows.empty()) continue;
      double C = dec.pair_scale(l, lp);
      double fit_range =
          detail::max_row_2norm(qb.M_norm) * detail::max_row_2norm(kb.M_norm) / d;
      ExpPolynomial poly = detail::select_poly(fit_range, eps0, n, d, opt);
      LowRankFactors f = build_low_rank_factors(qb.M_norm, kb.M_norm, poly, opt.threads);
      for (std::size_t a = 0; a < qb.rows.size(); ++a) {
        const double* u1 = f.U1.row(a);
        for (std::size_t bi = 0; bi < kb.rows.size(); ++bi) {
          const double* u2 = f.U2.row(bi);
          double v = 0.0;
          for (std::size_t k = 0; k < f.basis.rank(); ++k) v += u1[k] * u2[k];
          double powv = std::pow(std::max(v, 1e-300), C);
          a_tilde.at(qb.rows[a], kb.rows[bi]) += powv - 1.0;
        }
      }
    }
  }
  return a_tilde;
}

// The product form: reference bucketed estimate applied to V.
inline DenseMatrix multi_reference_oracle(const AttentionInputs& in, const BucketScheme& scheme,
                                          double eps0, const EngineOptions& opt = {}) {
  return matmul(multi_reference_matrix(in, scheme, eps0, opt), in.V, opt.threads);
}

struct MultiBlockDiag {
  int l = 0, lp = 0;
  double C = 0.0;        // real exponent before rounding
  int p = 0;             // even degree actually sketched
  std::size_t z = 0;
  int poly_degree = 0;
  double poly_achieved_eps = 0.0;
  double fit_range = 0.0;
  double max_row_norm_u1 = 0.0, max_row_norm_u2 = 0.0;
};

// Bucketed sketched attention. Per block pair (l, l'):
//   exp(A^(T_l,T_l')/d) = exp(M'/d)^{op}  with  M' = (C/p) * Qn Kn^T,
// where p is the nearest even integer >= 2 to C and the factor sqrt(C/p) is
// absorbed into the normalized rows, so the even-degree rounding introduces
// no algebraic error. exp(M'/d) is then low-rank factored and the degree-p
// kernel of the factors is sketched. Off-block ones and the block-count
// correction are applied algebraically; no n x n matrix is formed.
inline AttentionOutput approx_attention_multi(const AttentionInputs& in, double eps_B, double eps0,
                                              double eps_sk, double delta,
                                              const EngineOptions& opt = {},
                                              std::vector<MultiBlockDiag>* diag = nullptr) {
  detail::Timer timer;
  std::size_t n = in.n(), d = in.d();
  BucketScheme scheme = bucket_scheme(in.Q, in.K, eps_B);
  BlockDecomposition dec = decompose_blocks(in.Q, in.K, scheme);

  DenseMatrix num(n, d);
  std::vector<double> den(n, 0.0);
  std::vector<double> colsum_v = detail::column_sums(in.V);

  int max_degree = 0;
  double max_eps = 0.0;
  for (int l = 1; l <= scheme.m; ++l) {
    const NormalizedBlock& qb = dec.q_blocks[l - 1];
    if (qb.rows.empty()) continue;
    for (int lp = 1; lp <= scheme.m; ++lp) {
      const NormalizedBlock& kb = dec.k_blocks[lp - 1];
      if (kb.rows.empty()) continue;
      double C = dec.pair_scale(l, lp);
      int p = detail::nearest_even_ge2(C);
      double absorb = std::sqrt(C / p);
      DenseMatrix Qb = scale(qb.M_norm, absorb);
      DenseMatrix Kb = scale(kb.M_norm, absorb);
      double fit_range = detail::max_row_2norm(Qb) * detail::max_row_2norm(Kb) / d;
      ExpPolynomial poly = detail::select_poly(fit_range, eps0, n, d, opt);
      LowRankFactors f = build_low_rank_factors(Qb, Kb, poly, opt.threads);
      std::size_t r = f.basis.rank();
      SketchSpec spec = make_sketch_spec(p, r, eps_sk, delta, n,
                                         derive_seed(opt.seed, l, lp));
      std::size_t zz = spec.z * spec.z;
      if (zz / spec.z != spec.z || zz > (1ull << 27) / (d + 1))
        throw std::invalid_argument("approx_attention_multi: sketch width z=" +
                                    std::to_string(spec.z) + " too large; relax eps_sk/delta");
      detail::SketchStages st = detail::build_sketch_stages(spec);

      // M-hat[(a,b), c] = sum_j w2_j[a] w2_j[b] * [V_j | 1][c]
      std::vector<double> mhat(zz * (d + 1), 0.0);
      std::vector<double> colsum_rect(d, 0.0);
      for (std::size_t jj = 0; jj < kb.rows.size(); ++jj) {
        std::vector<double> w2 = detail::sketch_core_vector(f.U2.row(jj), st);
        const double* vj = in.V.row(kb.rows[jj]);
        for (std::size_t c = 0; c < d; ++c) colsum_rect[c] += vj[c];
        for (std::size_t a = 0; a < spec.z; ++a) {
          double wa = w2[a];
          for (std::size_t b = 0; b < spec.z; ++b) {
            double t = wa * w2[b];
            double* cell = mhat.data() + (a * spec.z + b) * (d + 1);
            for (std::size_t c = 0; c < d; ++c) cell[c] += t * vj[c];
            cell[d] += t;
          }
        }
      }
      double rect_count = static_cast<double>(kb.rows.size());

      double mrn1 = 0.0, mrn2 = 0.0;
      parallel_rows(qb.rows.size(), opt.threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> acc(d + 1);
        for (std::size_t ii = lo; ii < hi; ++ii) {
          std::vector<double> w1 = detail::sketch_core_vector(f.U1.row(ii), st);
          std::fill(acc.begin(), acc.end(), 0.0);
          for (std::size_t a = 0; a < spec.z; ++a) {
            double wa = w1[a];
            for (std::size_t b = 0; b < spec.z; ++b) {
              double t = wa * w1[b];
              const double* cell = mhat.data() + (a * spec.z + b) * (d + 1);
              for (std::size_t c = 0; c <= d; ++c) acc[c] += t * cell[c];
            }
          }
          std::size_t i = qb.rows[ii];
          double* ni = num.row(i);
          for (std::size_t c = 0; c < d; ++c) ni[c] += acc[c] - colsum_rect[c];
          den[i] += acc[d] - rect_count;
        }
      });

      if (diag) {
        for (std::size_t i = 0; i < f.U1.rows; ++i)
          mrn1 = std::max(mrn1, std::sqrt(std::inner_product(
                                     f.U1.row(i), f.U1.row(i) + r, f.U1.row(i), 0.0)));
        for (std::size_t i = 0; i < f.U2.rows; ++i)
          mrn2 = std::max(mrn2, std::sqrt(std::inner_product(
                                     f.U2.row(i), f.U2.row(i) + r, f.U2.row(i), 0.0)));
        diag->push_back({l, lp, C, p, spec.z, poly.degree, poly.achieved_eps, fit_range, mrn1,
                         mrn2});
      }
      max_degree = std::max(max_degree, poly.degree);
      max_eps = std::max(max_eps, poly.achieved_eps);
    }
  }

  AttentionOutput out;
  out.engine = Engine::multi_threshold;
  out.P = DenseMatrix(n, d);
  out.row_sums.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* ni = num.row(i);
    for (std::size_t c = 0; c < d; ++c) ni[c] += colsum_v[c];
    double di = den[i] + static_cast<double>(n);
    if (!(di > 0.0))
      throw std::runtime_error("approx_attention_multi: non-positive normalizer at row " +
                               std::to_string(i) + " (sketch noise exceeded signal, increase z)");
    out.row_sums[i] = di;
    double* pi = out.P.row(i);
    for (std::size_t c = 0; c < d; ++c) pi[c] = ni[c] / di;
  }
  out.poly_degree = max_degree;
  out.poly_achieved_eps = max_eps;
  out.wall_seconds = timer.seconds();
  return out;
}

}  // namespace sbattn
