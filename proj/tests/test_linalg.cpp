#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "gfmate/error.hpp"
#include "gfmate/linalg.hpp"
#include "gfmate/rng.hpp"
#include "support/generators.hpp"

using namespace gfmate;

namespace {

CsrAdjacency identity_csr(std::size_t n) {
  CsrAdjacency a;
  for (std::size_t i = 0; i < n; ++i) {
    a.row_ptr.push_back(i);
    a.col_idx.push_back(static_cast<std::uint32_t>(i));
    a.values.push_back(1.0);
  }
  a.row_ptr.push_back(n);
  return a;
}

CsrAdjacency random_csr(std::size_t n, double density, Rng& rng) {
  CsrAdjacency a;
  a.row_ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      if (rng.uniform() < density) {
        a.col_idx.push_back(static_cast<std::uint32_t>(j));
        a.values.push_back(rng.normal());
      }
    a.row_ptr.push_back(a.col_idx.size());
  }
  return a;
}

}  // namespace

TEST_CASE("spmm with the identity returns the input bit for bit") {
  Rng rng(1);
  const DenseMatrix b = gen::matrix(6, 4, rng);
  CHECK(spmm(identity_csr(6), b) == b);
}

TEST_CASE("spmm on the two-node normalized adjacency") {
  CsrAdjacency a;
  a.row_ptr = {0, 2, 4};
  a.col_idx = {0, 1, 0, 1};
  a.values = {0.5, 0.5, 0.5, 0.5};
  const DenseMatrix out = spmm(a, DenseMatrix::identity(2));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(out(i, j) == 0.5);
}

TEST_CASE("an empty CSR row gives a zero output row") {
  CsrAdjacency a;
  a.row_ptr = {0, 1, 1};
  a.col_idx = {0};
  a.values = {2.0};
  const DenseMatrix out = spmm(a, DenseMatrix(2, 3, 1.0));
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(out(0, j) == 2.0);
    CHECK(out(1, j) == 0.0);
  }
}

TEST_CASE("spmm agrees with a dense triple loop") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const CsrAdjacency a = random_csr(9, 0.3, rng);
    const DenseMatrix b = gen::matrix(9, 5, rng);
    const DenseMatrix out = spmm(a, b);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 9; ++k) acc += a.at(i, k) * b(k, j);
        CHECK(out(i, j) == doctest::Approx(acc).epsilon(1e-12));
      }
  }
}

TEST_CASE("spmm commutes with scalar scaling") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const CsrAdjacency a = random_csr(8, 0.4, rng);
    DenseMatrix b = gen::matrix(8, 3, rng);
    const double c = rng.uniform(-3.0, 3.0);
    DenseMatrix lhs_in = b;
    scale_in_place(lhs_in, c);
    const DenseMatrix lhs = spmm(a, lhs_in);
    DenseMatrix rhs = spmm(a, b);
    scale_in_place(rhs, c);
    for (std::size_t i = 0; i < lhs.data().size(); ++i)
      CHECK(lhs.data()[i] == doctest::Approx(rhs.data()[i]).epsilon(1e-13).scale(1e-13));
  }
}

TEST_CASE("dense products match their definitions") {
  Rng rng(3);
  const DenseMatrix a = gen::matrix(4, 3, rng);
  const DenseMatrix b = gen::matrix(3, 5, rng);
  const DenseMatrix c = gen::matrix(4, 5, rng);
  const DenseMatrix bt = b.transposed();
  const DenseMatrix ab = matmul(a, b);
  const DenseMatrix abt = matmul_nt(a, bt);
  const DenseMatrix atc = matmul_tn(a, c);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += a(i, k) * b(k, j);
      CHECK(ab(i, j) == doctest::Approx(s).epsilon(1e-13));
      CHECK(abt(i, j) == doctest::Approx(s).epsilon(1e-13));
    }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(k, i) * c(k, j);
      CHECK(atc(i, j) == doctest::Approx(s).epsilon(1e-13));
    }
  CHECK_THROWS_AS(matmul(a, c), Error);
}

TEST_CASE("cosine similarity examples") {
  const std::vector<double> h{0.3, -1.2, 2.0};
  CHECK(cosine_sim(h, h) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_sim(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK(cosine_sim(std::vector<double>{1, 2}, std::vector<double>{2, 4}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_sim(std::vector<double>{0, 0}, std::vector<double>{1, 4}) == 0.0);
  CHECK(cosine_sim(std::vector<double>{1e-13, 0}, std::vector<double>{1, 4}) == 0.0);
}

TEST_CASE("cosine similarity ignores positive scaling of either argument") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> h(6), e(6);
    for (auto& v : h) v = rng.normal();
    for (auto& v : e) v = rng.normal();
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    std::vector<double> hc = h;
    for (auto& v : hc) v *= c;
    CHECK(std::abs(cosine_sim(hc, e) - cosine_sim(h, e)) <= 1e-14);
  }
}

TEST_CASE("softmax examples") {
  const auto p = row_softmax(std::vector<double>{1.0, 0.0}, 1.0);
  const double e = std::exp(1.0);
  CHECK(p[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));

  for (double c : {-50.0, 0.0, 3.5, 700.0}) {
    const auto u = row_softmax(std::vector<double>{c, c, c}, 0.7);
    for (double v : u) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  const auto big = row_softmax(std::vector<double>{1000.0, 0.0}, 1.0);
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == 1.0);
  CHECK(big[1] >= 0.0);
  CHECK(big[1] < 1e-300);

  CHECK_THROWS_AS(row_softmax(std::vector<double>{1.0}, 0.0), Error);
}

TEST_CASE("softmax sums to one and ignores additive shifts") {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal(0.0, 10.0);
    const double tau = rng.uniform(0.05, 3.0);
    const auto p = row_softmax(z, tau);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);

    const double c = rng.uniform(-100.0, 100.0);
    std::vector<double> zc = z;
    for (auto& v : zc) v += c;
    const auto q = row_softmax(zc, tau);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) <= 1e-12);
  }
}

TEST_CASE("log-sum-exp is stable and exact on small inputs") {
  CHECK(log_sum_exp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{-1000.0}) == -1000.0);
}

TEST_CASE("entropy examples and bounds") {
  CHECK(shannon_entropy(std::vector<double>(5, 0.2)) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
  CHECK(shannon_entropy(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
  CHECK(shannon_entropy(std::vector<double>{0.5, 0.5, 0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(shannon_entropy(std::vector<double>{1.5, -0.5}), Error);

  Rng rng(13);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t c = 2 + rng.below(8);
    std::vector<double> z(c);
    for (auto& v : z) v = rng.normal(0.0, 4.0);
    const double h = shannon_entropy(row_softmax(z, 1.0));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(c)) + 1e-12);
  }
}

TEST_CASE("argmax and argmin break ties toward the lowest index") {
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  CHECK(argmin(std::vector<double>{2.0, 0.5, 0.5}) == 1);
  CHECK(argmax(std::vector<double>{4.0, 4.0, 4.0}) == 0);
  CHECK(argmin(std::vector<double>{4.0, 4.0, 4.0}) == 0);
}

TEST_CASE("CSR validation rejects malformed structure") {
  CsrAdjacency a;
  a.row_ptr = {0, 2, 1};
  a.col_idx = {0, 1};
  a.values = {1.0, 1.0};
  CHECK_THROWS_AS(a.validate(), Error);
  a.row_ptr = {0, 1, 2};
  a.col_idx = {0, 5};
  CHECK_THROWS_AS(a.validate(), Error);
  a.col_idx = {0, 1};
  CHECK_NOTHROW(a.validate());
}

TEST_CASE("rng streams replay and split apart") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng c = Rng::derive(42, 0), d = Rng::derive(42, 1);
  CHECK(c.next() != d.next());
  Rng e(5);
  for (int i = 0; i < 10000; ++i) {
    const auto v = e.below(7);
    CHECK(v < 7);
    const double u = e.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal draws have unit variance") {
  Rng rng(17);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // Standard errors: 1/sqrt(n) for the mean, sqrt(2/n) for the variance.
  CHECK(std::abs(mean) < 5.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}
