#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbattn/matrix.hpp"

namespace sbattn {

// Degree-g polynomial in the monomial basis, certified to approximate exp
// with relative error <= target_eps on [-bound_R, bound_R] when `certified`.
struct ExpPolynomial {
  int degree = 0;
  std::vector<double> coeffs;  // c0..c_degree
  double bound_R = 0.0;
  double target_eps = 0.0;
  double achieved_eps = 0.0;  // grid-measured max relative error
  bool certified = false;
};

inline double eval_poly(const ExpPolynomial& p, double x) {
  double acc = 0.0;
  for (std::size_t i = p.coeffs.size(); i-- > 0;) acc = acc * x + p.coeffs[i];
  return acc;
}

struct FitOptions {
  int degree_cap = 30;
  int grid_points = 10001;  // uniform, endpoints included
};

namespace detail {

// Chebyshev interpolant of exp on [-R, R], converted to monomial coefficients.
inline std::vector<double> cheb_exp_monomial(double R, int g) {
  int n = g + 1;
  constexpr double kPi = 3.14159265358979323846264338327950288;
  std::vector<double> theta(n), f(n);
  for (int k = 0; k < n; ++k) {
    theta[k] = kPi * (2.0 * k + 1.0) / (2.0 * n);
    f[k] = std::exp(R * std::cos(theta[k]));
  }
  std::vector<double> a(n);  // Chebyshev-basis coefficients in u = x/R
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += f[k] * std::cos(j * theta[k]);
    a[j] = s * 2.0 / n;
  }
  a[0] *= 0.5;
  // Accumulate a_j * T_j(u) in the monomial basis via the T recurrence.
  std::vector<double> cu(n, 0.0), tprev(n, 0.0), tcur(n, 0.0), tnext(n, 0.0);
  tprev[0] = 1.0;  // T_0
  cu[0] += a[0];
  if (g >= 1) {
    tcur[1] = 1.0;  // T_1
    for (int i = 0; i <= g; ++i) cu[i] += a[1] * tcur[i];
  }
  for (int j = 2; j <= g; ++j) {
    for (int i = 0; i <= g; ++i) tnext[i] = -tprev[i];
    for (int i = g; i >= 1; --i) tnext[i] += 2.0 * tcur[i - 1];
    for (int i = 0; i <= g; ++i) cu[i] += a[j] * tnext[i];
    tprev = tcur;
    tcur = tnext;
  }
  // u = x/R: divide the u^i coefficient by R^i.
  std::vector<double> cx(n);
  double rpow = 1.0;
  for (int i = 0; i <= g; ++i) {
    cx[i] = cu[i] / rpow;
    rpow *= R;
  }
  return cx;
}

inline double grid_max_rel_err(const std::vector<double>& coeffs, double R, int grid_points) {
  ExpPolynomial tmp;
  tmp.coeffs = coeffs;
  tmp.degree = static_cast<int>(coeffs.size()) - 1;
  double worst = 0.0;
  int G = std::max(grid_points, 2);
  for (int i = 0; i < G; ++i) {
    double x = -R + 2.0 * R * static_cast<double>(i) / (G - 1);
    double e = std::exp(x);
    worst = std::max(worst, std::abs(eval_poly(tmp, x) - e) / e);
  }
  return worst;
}

inline ExpPolynomial fit_search(double R, double eps, const FitOptions& opt, bool allow_best) {
  if (!(R >= 0.0) || R > 50.0)
    throw std::invalid_argument("fit_exp_polynomial: R must be in [0, 50], got " +
                                std::to_string(R));
  if (!(eps > 0.0) || eps < 1e-12 || eps >= 0.1)
    throw std::invalid_argument("fit_exp_polynomial: eps must be in [1e-12, 0.1), got " +
                                std::to_string(eps));
  ExpPolynomial out;
  out.bound_R = R;
  out.target_eps = eps;
  if (R == 0.0) {
    out.degree = 0;
    out.coeffs = {1.0};
    out.achieved_eps = 0.0;
    out.certified = true;
    return out;
  }

  auto try_degree = [&](int g, ExpPolynomial& cand) {
    cand.degree = g;
    cand.coeffs = cheb_exp_monomial(R, g);
    cand.achieved_eps = grid_max_rel_err(cand.coeffs, R, opt.grid_points);
    cand.certified = cand.achieved_eps <= eps;
    cand.bound_R = R;
    cand.target_eps = eps;
    return cand.certified;
  };

  ExpPolynomial best;
  best.achieved_eps = std::numeric_limits<double>::infinity();
  int cap = std::max(opt.degree_cap, 0);
  int fail_below = 0;  // highest degree known to fail
  int pass_at = -1;
  ExpPolynomial cand;
  for (int g = std::min(1, cap);; g = std::min(std::max(2 * g, 1), cap)) {
    if (try_degree(g, cand)) {
      pass_at = g;
      best = cand;
      break;
    }
    if (cand.achieved_eps < best.achieved_eps) best = cand;
    fail_below = g;
    if (g >= cap) break;
  }
  if (pass_at < 0) {
    if (allow_best) return best;
    throw std::runtime_error("fit_exp_polynomial: degree cap " + std::to_string(cap) +
                             " reached before certificate passed; best achieved relative error " +
                             std::to_string(best.achieved_eps) + " on R=" + std::to_string(R));
  }
  // Bisect for the smallest passing degree in (fail_below, pass_at].
  int lo = fail_below, hi = pass_at;
  while (hi - lo > 1) {
    int mid = lo + (hi - lo) / 2;
    if (try_degree(mid, cand)) {
      hi = mid;
      best = cand;
    } else {
      lo = mid;
    }
  }
  return best;
}

}  // namespace detail

// Smallest degree in the doubling-then-bisection sequence whose uniform-grid
// certificate meets eps; throws when the degree cap is reached first.
inline ExpPolynomial fit_exp_polynomial(double R, double eps, const FitOptions& opt = {}) {
  return detail::fit_search(R, eps, opt, /*allow_best=*/false);
}

// Like fit_exp_polynomial but returns the best polynomial under the cap when
// the certificate cannot pass; `certified` is false in that case and
// achieved_eps carries the grid-measured error.
inline ExpPolynomial fit_exp_polynomial_best(double R, double eps, const FitOptions& opt = {}) {
  return detail::fit_search(R, eps, opt, /*allow_best=*/true);
}

namespace detail {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

inline std::uint64_t mul_sat(std::uint64_t a, std::uint64_t b) {
  if (a == kSaturated || b == kSaturated) return kSaturated;
  unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  if (p > kSaturated) return kSaturated;
  return static_cast<std::uint64_t>(p);
}

inline std::uint64_t add_sat(std::uint64_t a, std::uint64_t b) {
  if (a == kSaturated || b == kSaturated || a + b < a) return kSaturated;
  return a + b;
}

// C(n, k) with saturation at 2^64-1.
inline std::uint64_t binom_sat(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    r = r * (n - i);
    r /= (i + 1);
    if (r > kSaturated) return kSaturated;
  }
  return static_cast<std::uint64_t>(r);
}

}  // namespace detail

// Number of monomials in d variables of total degree <= g: sum_j C(d+j-1, j).
// Saturates instead of overflowing.
inline std::uint64_t monomial_count(std::size_t d, int g) {
  std::uint64_t total = 0;
  for (int j = 0; j <= g; ++j)
    total = detail::add_sat(total, detail::binom_sat(d + j - 1, j));
  return total;
}

// Upper bound C(2(g+d), 2g) on the rank of the monomial expansion; saturates.
inline std::uint64_t rank_upper_bound(std::size_t d, int g) {
  return detail::binom_sat(2 * (static_cast<std::uint64_t>(g) + d), 2 * static_cast<std::uint64_t>(g));
}

// Exponent vectors e with sum(e) <= g in graded lexicographic order.
struct MonomialBasis {
  std::size_t dim = 0;
  int degree = 0;
  std::vector<std::vector<int>> exponents;
  std::size_t rank() const { return exponents.size(); }
};

inline MonomialBasis enumerate_monomials(std::size_t d, int g, std::uint64_t r_cap = 1000000) {
  if (d == 0) throw std::invalid_argument("enumerate_monomials: d must be positive");
  if (g < 0) throw std::invalid_argument("enumerate_monomials: g must be nonnegative");
  std::uint64_t r = monomial_count(d, g);
  if (r > r_cap)
    throw std::invalid_argument("enumerate_monomials: rank " + std::to_string(r) +
                                " exceeds cap " + std::to_string(r_cap));
  MonomialBasis basis;
  basis.dim = d;
  basis.degree = g;
  basis.exponents.reserve(static_cast<std::size_t>(r));
  for (int j = 0; j <= g; ++j) {
    std::vector<int> e(d, 0);
    e[0] = j;
    for (;;) {
      basis.exponents.push_back(e);
      if (e[d - 1] == j) break;
      // Next composition of j in descending lexicographic order.
      std::size_t i = d - 2;
      while (e[i] == 0) --i;
      --e[i];
      int tail = 1;
      for (std::size_t k = i + 1; k < d; ++k) {
        tail += e[k];
        e[k] = 0;
      }
      e[i + 1] = tail;
    }
  }
  return basis;
}

// Multinomial coefficient (sum e)! / prod e_k!; errors above 2^63-1.
inline std::uint64_t multinomial(const std::vector<int>& e) {
  std::uint64_t result = 1;
  std::uint64_t partial = 0;
  for (int ek : e) {
    partial += static_cast<std::uint64_t>(ek);
    result = detail::mul_sat(result, detail::binom_sat(partial, static_cast<std::uint64_t>(ek)));
  }
  if (result >= (1ull << 63))
    throw std::overflow_error(
        "multinomial: coefficient exceeds 2^63-1; reduce the polynomial degree or dimension");
  return result;
}

// Rank-r factorization of the entrywise polynomial of the scaled Gram matrix:
// (U1 U2^T)[i,l] = P(<Q_i, K_l> / d). The scalar coefficient c_j * m(e) * d^-j
// lives on the U1 side; U2 holds bare monomials of K.
struct LowRankFactors {
  DenseMatrix U1, U2;
  MonomialBasis basis;
  double eps0 = 0.0;
};

inline LowRankFactors build_low_rank_factors(const DenseMatrix& Q, const DenseMatrix& K,
                                             const ExpPolynomial& poly, int threads = 1,
                                             std::uint64_t r_cap = 1000000,
                                             bool verify_gram_bound = false) {
  if (Q.cols != K.cols)
    throw std::invalid_argument("build_low_rank_factors: Q and K have different widths, " +
                                shape_str(Q.rows, Q.cols) + " vs " + shape_str(K.rows, K.cols));
  std::size_t d = Q.cols;
  std::size_t n = Q.rows;
  std::size_t nk = K.rows;
  int g = poly.degree;
  if (verify_gram_bound) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < nk; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += Q.at(i, k) * K.at(j, k);
        s /= static_cast<double>(d);
        if (std::abs(s) > poly.bound_R * (1.0 + 1e-12))
          throw std::domain_error("build_low_rank_factors: |Gram entry| " + std::to_string(s) +
                                  " exceeds the fitted bound " + std::to_string(poly.bound_R));
      }
  }

  MonomialBasis basis = enumerate_monomials(d, g, r_cap);
  std::size_t r = basis.rank();

  // Per-column scalar for U1: c_j * m(e) * d^-j.
  std::vector<double> colscale(r);
  for (std::size_t a = 0; a < r; ++a) {
    const auto& e = basis.exponents[a];
    int j = 0;
    for (int ek : e) j += ek;
    double m = static_cast<double>(multinomial(e));
    colscale[a] = poly.coeffs[j] * m * std::pow(static_cast<double>(d), -j);
  }

  LowRankFactors f;
  f.basis = basis;
  f.eps0 = poly.certified ? poly.target_eps : poly.achieved_eps;
  f.U1 = DenseMatrix(n, r);
  f.U2 = DenseMatrix(nk, r);

  auto fill = [&](const DenseMatrix& M, DenseMatrix& U, const double* scales) {
    parallel_rows(M.rows, threads, [&](std::size_t lo, std::size_t hi) {
      std::vector<double> pw(d * (g + 1));
      for (std::size_t i = lo; i < hi; ++i) {
        const double* mi = M.row(i);
        for (std::size_t k = 0; k < d; ++k) {
          pw[k * (g + 1)] = 1.0;
          for (int t = 1; t <= g; ++t) pw[k * (g + 1) + t] = pw[k * (g + 1) + t - 1] * mi[k];
        }
        double* ui = U.row(i);
        for (std::size_t a = 0; a < r; ++a) {
          const auto& e = basis.exponents[a];
          double prod = 1.0;
          for (std::size_t k = 0; k < d; ++k)
            if (e[k] != 0) prod *= pw[k * (g + 1) + e[k]];
          ui[a] = scales ? scales[a] * prod : prod;
        }
      }
    });
  };
  fill(Q, f.U1, colscale.data());
  fill(K, f.U2, nullptr);
  return f;
}

// Entrywise polynomial of the scaled Gram matrix by per-entry Horner
// evaluation; independent of the factorization route.
inline DenseMatrix eval_poly_gram_oracle(const DenseMatrix& Q, const DenseMatrix& K,
                                         const ExpPolynomial& poly) {
  if (Q.cols != K.cols)
    throw std::invalid_argument("eval_poly_gram_oracle: Q and K have different widths");
  std::size_t d = Q.cols;
  DenseMatrix out(Q.rows, K.rows);
  for (std::size_t i = 0; i < Q.rows; ++i) {
    const double* qi = Q.row(i);
    for (std::size_t j = 0; j < K.rows; ++j) {
      const double* kj = K.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += qi[k] * kj[k];
      out.at(i, j) = eval_poly(poly, s / static_cast<double>(d));
    }
  }
  return out;
}

}  // namespace sbattn
