#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "avflow/krylov.hpp"

using namespace avflow;

namespace {

// Random diagonally dominant nonsymmetric matrix in both CSR and dense form.
struct DensePair {
  CsrMatrix A;
  Eigen::MatrixXd D;
};

DensePair random_dd(int n, std::uint64_t seed, double density = 0.08) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::tuple<int, int, double>> trip;
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (coin(rng) < density) {
        const double v = val(rng);
        D(i, j) = v;
        trip.emplace_back(i, j, v);
        off += std::fabs(v);
      }
    }
    const double d = off + 1.0 + coin(rng);  // strict dominance
    D(i, i) = d;
    trip.emplace_back(i, i, d);
  }
  return {CsrMatrix::from_triplets(n, std::move(trip)), std::move(D)};
}

}  // namespace

TEST_CASE("from_triplets sorts, merges duplicates, validate accepts") {
  std::vector<std::tuple<int, int, double>> trip = {
      {1, 0, 2.0}, {0, 0, 1.0}, {0, 1, 0.5}, {0, 1, 0.25}, {1, 1, 3.0}};
  CsrMatrix A = CsrMatrix::from_triplets(2, std::move(trip));
  REQUIRE(A.n == 2);
  REQUIRE(A.row_ptr == std::vector<int>{0, 2, 4});
  REQUIRE(A.col == std::vector<int>{0, 1, 0, 1});
  CHECK(A.val[1] == Catch::Approx(0.75));  // merged duplicate
  CHECK_NOTHROW(A.validate());

  CsrMatrix bad = A;
  bad.col[0] = 7;  // out of range
  CHECK_THROWS_AS(bad.validate(), InputError);
  CsrMatrix bad2 = A;
  bad2.row_ptr[1] = 3;
  bad2.row_ptr[2] = 2;  // non-monotone
  CHECK_THROWS_AS(bad2.validate(), InputError);
}

TEST_CASE("spmv matches dense product and is thread-count invariant") {
  auto [A, D] = random_dd(60, 11);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1, 1);
  std::vector<double> x(60);
  for (auto& v : x) v = dist(rng);
  std::vector<double> y1(60), y4(60);
  spmv(A, x, y1, 1);
  spmv(A, x, y4, 4);
  Eigen::Map<Eigen::VectorXd> xe(x.data(), 60);
  Eigen::VectorXd ye = D * xe;
  for (int i = 0; i < 60; ++i) {
    CHECK(y1[i] == Catch::Approx(ye[i]).margin(1e-13));
    REQUIRE(std::memcmp(&y1[i], &y4[i], sizeof(double)) == 0);
  }
}

TEST_CASE("identity system converges immediately") {
  std::vector<std::tuple<int, int, double>> trip;
  for (int i = 0; i < 10; ++i) trip.emplace_back(i, i, 1.0);
  CsrMatrix I = CsrMatrix::from_triplets(10, std::move(trip));
  std::vector<double> b(10, 3.0);
  auto [x, rep] = gpbicg(I, b, std::vector<double>(10, 0.0));
  CHECK(rep.converged);
  CHECK(rep.iterations <= 1);
  for (double v : x) CHECK(v == Catch::Approx(3.0));
}

TEST_CASE("200x200 random diagonally dominant systems against dense LU") {
  for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
    auto [A, D] = random_dd(200, seed);
    std::mt19937_64 rng(seed ^ 0xffff);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<double> b(200);
    for (auto& v : b) v = dist(rng);

    Eigen::Map<Eigen::VectorXd> be(b.data(), 200);
    Eigen::VectorXd xe = Eigen::PartialPivLU<Eigen::MatrixXd>(D).solve(be);

    for (Precond pc : {Precond::Jacobi, Precond::None}) {
      auto [x, rep] = gpbicg(A, b, std::vector<double>(200, 0.0), 1e-10, 5000, pc);
      REQUIRE(rep.converged);
      CHECK(rep.residual <= 1e-10);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < 200; ++i) {
        num += (x[i] - xe[i]) * (x[i] - xe[i]);
        den += xe[i] * xe[i];
      }
      CHECK(std::sqrt(num / den) < 1e-8);
    }
  }
}

TEST_CASE("solution is bit-identical across thread counts") {
  auto [A, D] = random_dd(150, 77);
  std::vector<double> b(150);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dist(-1, 1);
  for (auto& v : b) v = dist(rng);
  auto [x1, r1] = gpbicg(A, b, std::vector<double>(150, 0.0), 1e-9, 5000, Precond::Jacobi, 1);
  auto [x3, r3] = gpbicg(A, b, std::vector<double>(150, 0.0), 1e-9, 5000, Precond::Jacobi, 3);
  REQUIRE(r1.converged);
  REQUIRE(r3.converged);
  CHECK(r1.iterations == r3.iterations);
  REQUIRE(std::memcmp(x1.data(), x3.data(), 150 * sizeof(double)) == 0);
}

TEST_CASE("breakdown is reported, not fatal") {
  // A singular system with b in a degenerate direction forces tiny inner
  // products; the solver must return breakdown/non-convergence, not crash.
  std::vector<std::tuple<int, int, double>> trip = {
      {0, 0, 1.0}, {0, 1, -1.0}, {1, 0, 1.0}, {1, 1, -1.0}, {2, 2, 1.0}};
  CsrMatrix A = CsrMatrix::from_triplets(3, std::move(trip));
  std::vector<double> b = {1.0, 2.0, 3.0};  // inconsistent for the singular block
  auto [x, rep] = gpbicg(A, b, std::vector<double>(3, 0.0), 1e-12, 50, Precond::None);
  CHECK(!rep.converged);
  CHECK((rep.breakdown || rep.iterations == 50));
  for (double v : x) CHECK(std::isfinite(v));
}

TEST_CASE("zero rhs returns zero immediately") {
  std::vector<std::tuple<int, int, double>> trip = {{0, 0, 2.0}, {1, 1, 2.0}};
  CsrMatrix A = CsrMatrix::from_triplets(2, std::move(trip));
  auto [x, rep] = gpbicg(A, {0.0, 0.0}, {5.0, 5.0});
  CHECK(rep.converged);
  CHECK(rep.iterations == 0);
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 0.0);
}

TEST_CASE("max_iter exhaustion reports non-convergence with finite iterate") {
  auto [A, D] = random_dd(80, 5);
  std::vector<double> b(80, 1.0);
  auto [x, rep] = gpbicg(A, b, std::vector<double>(80, 0.0), 1e-14, 2, Precond::None);
  CHECK(!rep.converged);
  CHECK(rep.iterations == 2);
  for (double v : x) CHECK(std::isfinite(v));
}

TEST_CASE("dimension mismatches throw") {
  std::vector<std::tuple<int, int, double>> trip = {{0, 0, 1.0}};
  CsrMatrix A = CsrMatrix::from_triplets(1, std::move(trip));
  CHECK_THROWS_AS(gpbicg(A, {1.0, 2.0}, {0.0}), InputError);
  CHECK_THROWS_AS(gpbicg(A, {1.0}, {0.0, 0.0}), InputError);
}

TEST_CASE("matrix market export is readable and complete") {
  std::vector<std::tuple<int, int, double>> trip = {{0, 0, 1.5}, {1, 0, -2.0}, {1, 1, 4.0}};
  CsrMatrix A = CsrMatrix::from_triplets(2, std::move(trip));
  const auto path =
      (std::filesystem::temp_directory_path() / "avflow_krylov_test.mtx").string();
  write_matrix_market(A, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("%%MatrixMarket matrix coordinate real general", 0) == 0);
  int rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  CHECK(rows == 2);
  CHECK(cols == 2);
  CHECK(nnz == 3);
  double sum = 0.0;
  for (int k = 0; k < nnz; ++k) {
    int i = 0, j = 0;
    double v = 0.0;
    in >> i >> j >> v;
    REQUIRE(i >= 1);
    REQUIRE(j <= 2);
    sum += v;
  }
  CHECK(sum == Catch::Approx(3.5));
}
