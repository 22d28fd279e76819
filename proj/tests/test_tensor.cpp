#include <doctest.h>

#include <cmath>

#include "argem/rng.hpp"
#include "argem/tensor.hpp"
#include "test_util.hpp"

using namespace argem;
using testutil::random_mat;

namespace {

// independent dense oracle: plain triple loop
DenseMat naive_matmul(const DenseMat& a, const DenseMat& b) {
  DenseMat c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k)
      for (int j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

SparseMat random_sparse(int rows, int cols, double density, Rng& rng) {
  std::vector<std::tuple<int, int, double>> trip;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (rng.uniform01() < density) trip.emplace_back(i, j, rng.uniform(-2, 2));
  return SparseMat::from_coo(rows, cols, std::move(trip));
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("dense matmul matches the naive oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int r = 1 + static_cast<int>(rng.below(8));
    const int k = 1 + static_cast<int>(rng.below(8));
    const int c = 1 + static_cast<int>(rng.below(8));
    DenseMat a = random_mat(r, k, rng);
    DenseMat b = random_mat(k, c, rng);
    DenseMat got = dense_matmul(a, b);
    DenseMat want = naive_matmul(a, b);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(dense_matmul(DenseMat(2, 3), DenseMat(2, 3)), ShapeError);
}

TEST_CASE("from_coo sorts rows and coalesces duplicates") {
  SparseMat s = SparseMat::from_coo(
      3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 0, 3.0}, {0, 2, 0.5}});
  CHECK(s.nnz() == 3);
  DenseMat d = s.to_dense();
  CHECK(d(0, 0) == 3.0);
  CHECK(d(0, 2) == 2.5);
  CHECK(d(2, 1) == 1.0);
  CHECK_THROWS_AS(SparseMat::from_coo(2, 2, {{2, 0, 1.0}}), ContractError);
}

TEST_CASE("spmm: identity times Z returns Z") {
  Rng rng(5);
  DenseMat z = random_mat(6, 4, rng);
  DenseMat out = spmm(SparseMat::identity(6), z);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(out.data[i] == z.data[i]);
}

TEST_CASE("spmm: 2x2 all-half matrix against hand result") {
  SparseMat p = SparseMat::from_coo(
      2, 2, {{0, 0, 0.5}, {0, 1, 0.5}, {1, 0, 0.5}, {1, 1, 0.5}});
  DenseMat z(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = 1.0;
  DenseMat out = spmm(p, z);
  for (double v : out.data) CHECK(v == 0.5);
}

TEST_CASE("spmm equals the densified product on random graphs up to n=100") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(99));
    const int d = 1 + static_cast<int>(rng.below(8));
    SparseMat s = random_sparse(n, n, 0.1, rng);
    DenseMat z = random_mat(n, d, rng);
    DenseMat got = spmm(s, z);
    DenseMat want = naive_matmul(s.to_dense(), z);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got.data[i] - want.data[i]) < 1e-12);
    }
    DenseMat got_t = spmm_transpose(s, z);
    DenseMat st(n, n);
    DenseMat sd = s.to_dense();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) st(i, j) = sd(j, i);
    DenseMat want_t = naive_matmul(st, z);
    for (std::size_t i = 0; i < got_t.size(); ++i) {
      CHECK(std::abs(got_t.data[i] - want_t.data[i]) < 1e-12);
    }
  }
  CHECK_THROWS_AS(spmm(SparseMat::identity(3), DenseMat(4, 2)), ShapeError);
}

TEST_CASE("rng: fixed seed reproduces identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.normal() == b.normal());
    CHECK(a.uniform(-1, 1) == b.uniform(-1, 1));
    CHECK(a.below(97) == b.below(97));
  }
  Rng c(43);
  bool all_equal = true;
  Rng a2(42);
  for (int i = 0; i < 32; ++i) all_equal = all_equal && (a2.next_u64() == c.next_u64());
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng: uniform stays inside (-1, 1) and normal moments look right") {
  Rng rng(7);
  double sum = 0.0, sq = 0.0;
  const int trials = 100000;
  for (int i = 0; i < trials; ++i) {
    const double u = rng.uniform(-1.0, 1.0);
    CHECK(u > -1.0);
    CHECK(u < 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / trials) < 0.02);
  CHECK(std::abs(sq / trials - 1.0) < 0.02);
}

TEST_CASE("rng: derive gives distinct, reproducible child seeds") {
  CHECK(Rng::derive(1, 0) == Rng::derive(1, 0));
  CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
  CHECK(Rng::derive(1, 0) != Rng::derive(2, 0));
}

}  // TEST_SUITE
