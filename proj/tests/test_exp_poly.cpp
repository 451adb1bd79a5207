#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "sbattn/checks.hpp"
#include "sbattn/exp_poly.hpp"
#include "sbattn/matrix.hpp"
#include "sbattn/support_basis.hpp"

using namespace sbattn;

TEST_CASE("fit certifies the requested relative error", "[exp_poly]") {
  ExpPolynomial p = fit_exp_polynomial(1.0, 1e-3);
  double at_zero = eval_poly(p, 0.0);
  REQUIRE(at_zero >= 1.0 - 1e-3);
  REQUIRE(at_zero <= 1.0 + 1e-3);

  ExpPolynomial q = fit_exp_polynomial(2.0, 1e-6);
  REQUIRE(q.certified);
  // Independent, denser grid than the construction certificate.
  double worst = 0.0;
  for (int i = 0; i <= 40000; ++i) {
    double x = -2.0 + 4.0 * i / 40000.0;
    double e = std::exp(x);
    worst = std::max(worst, std::abs(eval_poly(q, x) - e) / e);
  }
  REQUIRE(worst <= 1e-6);
}

TEST_CASE("fitted degree is monotone in the interval radius", "[exp_poly]") {
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    int prev = 0;
    for (double R : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      ExpPolynomial p = fit_exp_polynomial(R, eps);
      REQUIRE(p.degree >= prev);
      prev = p.degree;
    }
  }
}

TEST_CASE("fit reports the best achieved error when the cap blocks it", "[exp_poly]") {
  FitOptions opt;
  opt.degree_cap = 2;
  REQUIRE_THROWS_WITH(fit_exp_polynomial(4.0, 1e-6, opt),
                      Catch::Matchers::ContainsSubstring("best achieved"));
  ExpPolynomial best = fit_exp_polynomial_best(4.0, 1e-6, opt);
  REQUIRE_FALSE(best.certified);
  REQUIRE(best.degree == 2);
  REQUIRE(best.achieved_eps > 1e-6);
}

TEST_CASE("degenerate zero-radius fit is the constant 1", "[exp_poly]") {
  ExpPolynomial p = fit_exp_polynomial(0.0, 1e-8);
  REQUIRE(p.degree == 0);
  REQUIRE(eval_poly(p, 0.0) == 1.0);
}

TEST_CASE("monomial enumeration small cases", "[exp_poly]") {
  MonomialBasis u = enumerate_monomials(1, 2);
  REQUIRE(u.exponents == std::vector<std::vector<int>>{{0}, {1}, {2}});

  MonomialBasis b = enumerate_monomials(2, 1);
  REQUIRE(b.exponents == std::vector<std::vector<int>>{{0, 0}, {1, 0}, {0, 1}});

  MonomialBasis t = enumerate_monomials(3, 3);
  REQUIRE(t.rank() == 20);
  REQUIRE(monomial_count(3, 3) == 20);
}

TEST_CASE("enumeration matches brute force and respects the rank bound", "[exp_poly]") {
  std::size_t d = 4;
  int g = 5;
  MonomialBasis basis = enumerate_monomials(d, g);
  std::set<std::vector<int>> seen(basis.exponents.begin(), basis.exponents.end());
  REQUIRE(seen.size() == basis.rank());  // no duplicates
  std::size_t brute = 0;
  for (int a = 0; a <= g; ++a)
    for (int b = 0; b <= g; ++b)
      for (int c = 0; c <= g; ++c)
        for (int e = 0; e <= g; ++e)
          if (a + b + c + e <= g) {
            ++brute;
            REQUIRE(seen.count({a, b, c, e}) == 1);
          }
  REQUIRE(brute == basis.rank());
  REQUIRE(basis.rank() <= rank_upper_bound(d, g));
  REQUIRE(basis.rank() == monomial_count(d, g));
}

TEST_CASE("enumeration order is graded lexicographic", "[exp_poly]") {
  MonomialBasis basis = enumerate_monomials(3, 4);
  auto total = [](const std::vector<int>& e) { return e[0] + e[1] + e[2]; };
  for (std::size_t i = 1; i < basis.exponents.size(); ++i) {
    int ta = total(basis.exponents[i - 1]);
    int tb = total(basis.exponents[i]);
    REQUIRE(ta <= tb);
    if (ta == tb) REQUIRE(basis.exponents[i - 1] > basis.exponents[i]);
  }
}

TEST_CASE("enumeration cap reports the computed rank", "[exp_poly]") {
  REQUIRE_THROWS_WITH(enumerate_monomials(8, 8, 1000),
                      Catch::Matchers::ContainsSubstring("exceeds cap"));
  REQUIRE_THROWS_AS(enumerate_monomials(0, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(enumerate_monomials(2, -1), std::invalid_argument);
}

TEST_CASE("fit rejects out-of-range parameters", "[exp_poly]") {
  REQUIRE_THROWS_AS(fit_exp_polynomial(51.0, 1e-3), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_exp_polynomial(1.0, 1e-13), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_exp_polynomial(1.0, 0.5), std::invalid_argument);
}

TEST_CASE("multinomial values and overflow", "[exp_poly]") {
  REQUIRE(multinomial({0, 0}) == 1);
  REQUIRE(multinomial({1, 1}) == 2);
  REQUIRE(multinomial({2, 1}) == 3);
  REQUIRE(multinomial({2, 2, 2}) == 90);
  REQUIRE_THROWS_AS(multinomial(std::vector<int>(30, 4)), std::overflow_error);
}

TEST_CASE("constant polynomial factorization", "[exp_poly]") {
  ExpPolynomial c;
  c.degree = 0;
  c.coeffs = {3.5};
  c.bound_R = 1.0;
  c.certified = true;
  DenseMatrix Q = sample_subgaussian(5, 3, 0.5, 1);
  DenseMatrix K = sample_subgaussian(4, 3, 0.5, 2);
  LowRankFactors f = build_low_rank_factors(Q, K, c);
  REQUIRE(f.basis.rank() == 1);
  DenseMatrix prod = matmul(f.U1, transpose(f.U2));
  for (double v : prod.data) REQUIRE(v == 3.5);
}

TEST_CASE("univariate factorization expands the scalar polynomial", "[exp_poly]") {
  ExpPolynomial p;
  p.degree = 2;
  p.coeffs = {0.7, -1.3, 0.25};
  p.bound_R = 10.0;
  p.certified = true;
  double qv = 1.7, kv = -0.6;
  DenseMatrix Q(1, 1, {qv});
  DenseMatrix K(1, 1, {kv});
  LowRankFactors f = build_low_rank_factors(Q, K, p);
  double got = matmul(f.U1, transpose(f.U2)).at(0, 0);
  double want = p.coeffs[0] + p.coeffs[1] * qv * kv + p.coeffs[2] * qv * qv * kv * kv;
  REQUIRE(got == Catch::Approx(want).epsilon(1e-14));
  REQUIRE(got == Catch::Approx(eval_poly_gram_oracle(Q, K, p).at(0, 0)).epsilon(1e-14));
}

TEST_CASE("factorization agrees with the Horner oracle", "[exp_poly]") {
  ExpPolynomial p = fit_exp_polynomial(2.0, 1e-8);
  DenseMatrix Q = sample_subgaussian(16, 3, 0.4, 3);
  DenseMatrix K = sample_subgaussian(16, 3, 0.4, 4);
  REQUIRE(p.degree >= 4);
  LowRankFactors f = build_low_rank_factors(Q, K, p);
  DenseMatrix prod = matmul(f.U1, transpose(f.U2));
  DenseMatrix oracle = eval_poly_gram_oracle(Q, K, p);
  REQUIRE(max_abs_diff(prod, oracle) <= 1e-10);
}

TEST_CASE("factorization exactness holds at the top of the tested envelope", "[exp_poly]") {
  std::size_t n = 256, d = 6;
  int g = 8;
  DenseMatrix Q = sample_subgaussian(n, d, 0.4, 11);
  DenseMatrix K = sample_subgaussian(n, d, 0.4, 12);
  ExpPolynomial poly = chebyshev_exp_interpolant(1.5, g);
  LowRankFactors f = build_low_rank_factors(Q, K, poly);
  REQUIRE(f.basis.rank() == monomial_count(d, g));
  REQUIRE(max_abs_diff(matmul(f.U1, transpose(f.U2)), eval_poly_gram_oracle(Q, K, poly)) <=
          1e-9);
}

TEST_CASE("corrupting one factor entry breaks factorization exactness", "[exp_poly]") {
  ExpPolynomial p = fit_exp_polynomial(1.0, 1e-6);
  DenseMatrix Q = sample_subgaussian(16, 3, 0.4, 5);
  DenseMatrix K = sample_subgaussian(16, 3, 0.4, 6);
  LowRankFactors f = build_low_rank_factors(Q, K, p);
  DenseMatrix oracle = eval_poly_gram_oracle(Q, K, p);
  REQUIRE(max_abs_diff(matmul(f.U1, transpose(f.U2)), oracle) <= 1e-10);
  f.U1.at(3, 0) += 1e-3;  // U2 column 0 is the constant monomial (value 1)
  REQUIRE(max_abs_diff(matmul(f.U1, transpose(f.U2)), oracle) > 1e-9);
}

TEST_CASE("factors give an entrywise relative approximation of exp", "[exp_poly]") {
  double eps0 = 1e-6;
  std::size_t n = 24, d = 4;
  DenseMatrix Q = sample_subgaussian(n, d, 0.25, 7);
  DenseMatrix K = sample_subgaussian(n, d, 0.25, 8);
  double R = norm(Q, Norm::linf) * norm(K, Norm::linf);
  ExpPolynomial p = fit_exp_polynomial(R, eps0);
  LowRankFactors f = build_low_rank_factors(Q, K, p);
  DenseMatrix approx = matmul(f.U1, transpose(f.U2));
  DenseMatrix gram = scale(matmul(Q, transpose(K)), 1.0 / d);
  DenseMatrix target = entrywise_exp(gram);
  for (std::size_t k = 0; k < target.data.size(); ++k)
    REQUIRE(std::abs(approx.data[k] - target.data[k]) <= (eps0 + 1e-9) * target.data[k]);
}

TEST_CASE("gram bound verification triggers on violating inputs", "[exp_poly]") {
  ExpPolynomial p = fit_exp_polynomial(0.1, 1e-3);
  DenseMatrix Q(1, 2, {3.0, 0.0});
  DenseMatrix K(1, 2, {3.0, 0.0});
  REQUIRE_THROWS_AS(build_low_rank_factors(Q, K, p, 1, 1000000, true), std::domain_error);
}

TEST_CASE("oracle degenerate cases", "[exp_poly]") {
  ExpPolynomial c;
  c.degree = 0;
  c.coeffs = {2.25};
  c.bound_R = 1.0;
  DenseMatrix Q = sample_subgaussian(4, 2, 0.3, 9);
  DenseMatrix K = sample_subgaussian(4, 2, 0.3, 10);
  DenseMatrix out = eval_poly_gram_oracle(Q, K, c);
  for (double v : out.data) REQUIRE(v == 2.25);
}

TEST_CASE("fixed-degree interpolant helper reports its grid error", "[exp_poly]") {
  ExpPolynomial p = chebyshev_exp_interpolant(1.0, 6);
  REQUIRE(p.degree == 6);
  REQUIRE(p.achieved_eps > 0.0);
  REQUIRE(p.achieved_eps < 1e-5);
}
