#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sbattn/matrix.hpp"
#include "sbattn/rng.hpp"
#include "sbattn/support_basis.hpp"

using namespace sbattn;

TEST_CASE("split definition examples", "[support_basis]") {
  DenseMatrix m(2, 2, {0.1, 2.5, 0.3, 0.2});
  ThresholdSplit s = split(m, 1.0);
  REQUIRE(s.large.nnz() == 1);
  REQUIRE(s.large.entries[0].row == 0);
  REQUIRE(s.large.entries[0].col == 1);
  REQUIRE(s.large.entries[0].value == 2.5);
  REQUIRE(s.small.data == std::vector<double>{0.1, 0.0, 0.3, 0.2});

  ThresholdSplit s2 = split(m, 3.0);
  REQUIRE(s2.large.nnz() == 0);
  REQUIRE(s2.small.data == m.data);
}

TEST_CASE("ties at the threshold go to the small part", "[support_basis]") {
  DenseMatrix m(1, 2, {1.0, -1.0});
  ThresholdSplit s = split(m, 1.0);
  REQUIRE(s.large.nnz() == 0);
}

TEST_CASE("split reconstructs, is disjoint, and respects the bound", "[support_basis]") {
  Rng rng(11);
  for (int inst = 0; inst < 20; ++inst) {
    DenseMatrix m = sample_subgaussian(32, 8, 0.5, 1000 + inst);
    double T = rng.uniform01();
    ThresholdSplit s = split(m, T);
    REQUIRE(add(densify(s.large), s.small).data == m.data);
    REQUIRE(are_disjoint({support(s.large), support(s.small)}));
    for (const auto& e : s.large.entries) REQUIRE(std::abs(e.value) > T);
    for (double v : s.small.data) REQUIRE(std::abs(v) <= T);
  }
}

TEST_CASE("mask of no large entries is empty", "[support_basis]") {
  DenseMatrix q(3, 2, std::vector<double>(6, 0.1));
  ThresholdSplit qs = split(q, 1.0);
  LargeMask mask = build_large_mask(qs, qs, 3);
  REQUIRE(mask.size() == 0);
  REQUIRE(mask.to_pattern().positions.empty());
}

TEST_CASE("mask is the row/column union of the worked 3x3 case", "[support_basis]") {
  // Q's second row and K's third row carry the large entries.
  DenseMatrix q(3, 2, {0.1, 0.2, 1.5, 0.1, 0.2, 0.1});
  DenseMatrix k(3, 2, {0.1, 0.1, 0.2, 0.1, 1.4, 0.2});
  ThresholdSplit qs = split(q, 1.0);
  ThresholdSplit ks = split(k, 1.0);
  LargeMask mask = build_large_mask(qs, ks, 3);
  REQUIRE(mask.large_rows == std::vector<std::size_t>{1});
  REQUIRE(mask.large_cols == std::vector<std::size_t>{2});
  auto pat = mask.to_pattern();
  std::vector<std::pair<std::size_t, std::size_t>> want = {{0, 2}, {1, 0}, {1, 1}, {1, 2}, {2, 2}};
  REQUIRE(pat.positions == want);
  REQUIRE(mask.size() == 5);
}

TEST_CASE("mask size matches inclusion-exclusion", "[support_basis]") {
  for (int inst = 0; inst < 15; ++inst) {
    std::size_t n = 24;
    DenseMatrix q = sample_subgaussian(n, 6, 0.5, 2000 + inst);
    DenseMatrix k = sample_subgaussian(n, 6, 0.5, 3000 + inst);
    ThresholdSplit qs = split(q, 0.8);
    ThresholdSplit ks = split(k, 0.8);
    LargeMask mask = build_large_mask(qs, ks, n);
    std::size_t rows = mask.large_rows.size(), cols = mask.large_cols.size();
    REQUIRE(mask.size() == rows * n + cols * n - rows * cols);
    REQUIRE(mask.to_pattern().positions.size() == mask.size());
  }
}

TEST_CASE("masked gram values", "[support_basis]") {
  LargeMask mask;
  mask.n = 1;
  mask.large_rows = {0};
  mask.row_flag = {1};
  mask.col_flag = {0};
  DenseMatrix q(1, 2, {1.0, 2.0});
  DenseMatrix k(1, 2, {3.0, 4.0});
  SparseMatrix al = compute_A_L(q, k, mask);
  REQUIRE(al.nnz() == 1);
  REQUIRE(al.entries[0].value == 11.0);
}

TEST_CASE("structural zeros are kept in the masked gram", "[support_basis]") {
  LargeMask mask;
  mask.n = 2;
  mask.large_rows = {0};
  mask.row_flag = {1, 0};
  mask.col_flag = {0, 0};
  DenseMatrix q(2, 2, {1.0, 0.0, 0.0, 1.0});
  DenseMatrix k(2, 2, {0.0, 1.0, 0.0, 1.0});
  SparseMatrix al = compute_A_L(q, k, mask);
  REQUIRE(al.nnz() == 2);          // row 0, both columns, one of them a zero value
  REQUIRE(al.entries[0].value == 0.0);
}

TEST_CASE("decomposition identity A_small + A_large == QK^T", "[support_basis]") {
  for (int inst = 0; inst < 10; ++inst) {
    std::size_t n = 20, d = 5;
    DenseMatrix q = sample_subgaussian(n, d, 0.4, 4000 + inst);
    DenseMatrix k = sample_subgaussian(n, d, 0.4, 5000 + inst);
    double T = 0.5;
    ThresholdSplit qs = split(q, T);
    ThresholdSplit ks = split(k, T);
    LargeMask mask = build_large_mask(qs, ks, n);
    SparseMatrix al = compute_A_L(q, k, mask);
    DenseMatrix as = matmul(qs.small, transpose(ks.small));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (mask.contains(i, j)) as.at(i, j) = 0.0;
    DenseMatrix gram = matmul(q, transpose(k));
    REQUIRE(max_abs_diff(add(densify(al), as), gram) <= 1e-12);
    REQUIRE(are_disjoint({support(al), support(as)}));
    // Bounded small part, exact by construction.
    REQUIRE(norm(as, Norm::linf) / static_cast<double>(d) <= T * T);
    // Exponential splits additively across the two disjoint parts.
    DenseMatrix al_dense = densify(al);
    DenseMatrix lhs = entrywise_exp(scale(add(al_dense, as), 1.0 / d));
    DenseMatrix rhs = sub(add(entrywise_exp(scale(as, 1.0 / d)),
                              entrywise_exp(scale(al_dense, 1.0 / d))),
                          DenseMatrix::ones(n, n));
    REQUIRE(max_abs_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("empty mask leaves the whole product to the small part", "[support_basis]") {
  std::size_t n = 12, d = 3;
  DenseMatrix q = sample_subgaussian(n, d, 0.1, 15);
  DenseMatrix k = sample_subgaussian(n, d, 0.1, 16);
  double T = 10.0;
  ThresholdSplit qs = split(q, T);
  ThresholdSplit ks = split(k, T);
  LargeMask mask = build_large_mask(qs, ks, n);
  REQUIRE(compute_A_L(q, k, mask).nnz() == 0);
  REQUIRE(max_abs_diff(matmul(qs.small, transpose(ks.small)), matmul(q, transpose(k))) == 0.0);
}

TEST_CASE("expected large-entry count formula", "[support_basis]") {
  REQUIRE(expected_large_count(50, 4, 0.0, 1.0) == 400.0);
  double T = std::sqrt(std::log(2.0 * 100 * 10));
  REQUIRE(expected_large_count(100, 10, T, 1.0) == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE_THROWS_AS(expected_large_count(10, 10, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("tail-bound formula dominates the Monte Carlo mean", "[support_basis]") {
  std::size_t n = 128, d = 8;
  double sigma = 0.1;
  double proxy = sigma * std::sqrt(2.0);
  for (double T : {0.1, 0.2, 0.25}) {
    double total = 0.0;
    int seeds = 200;
    for (int s = 0; s < seeds; ++s) {
      DenseMatrix m = sample_subgaussian(n, d, sigma, 7000 + s);
      total += static_cast<double>(split(m, T).large.nnz());
    }
    double mean = total / seeds;
    REQUIRE(mean <= expected_large_count(n, d, T, proxy) * 1.2);
  }
}

TEST_CASE("sampler determinism and moments", "[support_basis]") {
  DenseMatrix a = sample_subgaussian(64, 16, 0.3, 99);
  DenseMatrix b = sample_subgaussian(64, 16, 0.3, 99);
  REQUIRE(a.data == b.data);
  REQUIRE(sample_subgaussian(64, 16, 0.3, 100).data != a.data);

  std::size_t n = 1000, d = 32;
  double sigma = 0.7;
  DenseMatrix m = sample_subgaussian(n, d, sigma, 101);
  double mean = 0.0;
  for (double v : m.data) mean += v;
  mean /= static_cast<double>(n * d);
  REQUIRE(std::abs(mean) <= 5.0 * sigma / std::sqrt(static_cast<double>(n * d)));
}

TEST_CASE("sampler tails are Gaussian", "[support_basis]") {
  double sigma = 0.5;
  std::size_t n = 1000, d = 1000;  // 1e6 entries
  DenseMatrix m = sample_subgaussian(n, d, sigma, 102);
  for (double t : {sigma, 2.0 * sigma, 3.0 * sigma}) {
    std::size_t beyond = 0;
    for (double v : m.data)
      if (std::abs(v) > t) ++beyond;
    double frac = static_cast<double>(beyond) / static_cast<double>(n * d);
    REQUIRE(frac <= 2.0 * std::exp(-t * t / (2.0 * sigma * sigma)) * 1.1);
  }
}

TEST_CASE("large-entry counts stay subpolynomial under concentration", "[support_basis]") {
  std::size_t d = 16;
  for (std::size_t n : {256u, 1024u, 4096u}) {
    double T = default_threshold(n);
    REQUIRE(T == Catch::Approx(std::sqrt(0.5 * std::log(static_cast<double>(n)))));
    double cap = std::pow(static_cast<double>(n), 0.9);
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
      DenseMatrix q = sample_subgaussian(n, d, 0.1, derive_seed(8000, n, trial));
      if (static_cast<double>(split(q, T).large.nnz()) < cap) ++ok;
    }
    REQUIRE(ok >= 99);
  }
}

TEST_CASE("sparsity report fields", "[support_basis]") {
  std::size_t n = 64, d = 8;
  DenseMatrix q = sample_subgaussian(n, d, 0.3, 103);
  DenseMatrix k = sample_subgaussian(n, d, 0.3, 104);
  ThresholdSplit qs = split(q, 0.5);
  ThresholdSplit ks = split(k, 0.5);
  LargeMask mask = build_large_mask(qs, ks, n);
  SparsityReport rep = sparsity_report(qs, ks, mask, 0.3 * std::sqrt(2.0));
  REQUIRE(rep.mask_size == mask.size());
  REQUIRE(rep.count_large_Q == qs.large.nnz());
  REQUIRE(rep.count_large_K == ks.large.nnz());
  if (rep.mask_size > 0) {
    double want = std::log(static_cast<double>(rep.mask_size)) /
                      std::log(static_cast<double>(n)) - 1.0;
    REQUIRE(rep.alpha_hat == Catch::Approx(want));
  }
}
