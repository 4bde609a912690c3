#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hsg/linsolve.hpp"

using namespace hsg;

namespace {

// 1D Dirichlet Laplacian on the interior nodes of (-1, 1) with spacing h.
SparseMatrix dirichlet_laplacian_1d(int interior, double h) {
  std::vector<Triplet> t;
  for (int i = 0; i < interior; ++i) {
    t.push_back({i, i, 2.0 / h});
    if (i > 0) t.push_back({i, i - 1, -1.0 / h});
    if (i + 1 < interior) t.push_back({i, i + 1, -1.0 / h});
  }
  return from_triplets(interior, t);
}

// Path graph Laplacian (Neumann) with n nodes.
SparseMatrix neumann_path(int n, double h) {
  std::vector<Triplet> t;
  for (int i = 0; i + 1 < n; ++i) {
    t.push_back({i, i, 1.0 / h});
    t.push_back({i + 1, i + 1, 1.0 / h});
    t.push_back({i, i + 1, -1.0 / h});
    t.push_back({i + 1, i, -1.0 / h});
  }
  return from_triplets(n, t);
}

}  // namespace

TEST(CgSolve, IdentityReturnsRightHandSide) {
  const auto I = SparseMatrix::identity(7);
  std::vector<double> b{1, -2, 3, 0.5, 0, 9, -1};
  const auto res = cg_solve(I, b);
  for (int i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(res.x[i], b[i]);
}

TEST(CgSolve, ZeroRightHandSideGivesZero) {
  const auto K = dirichlet_laplacian_1d(50, 0.04);
  const auto res = cg_solve(K, std::vector<double>(50, 0.0));
  for (double v : res.x) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(res.iterations, 0);
}

TEST(CgSolve, PoissonOnIntervalMatchesClosedForm) {
  // -u'' = 1 on (-1, 1), u(+-1) = 0  ->  u = (1 - x^2) / 2
  const int cells = 256;
  const double h = 2.0 / cells;
  const auto K = dirichlet_laplacian_1d(cells - 1, h);
  std::vector<double> b(cells - 1, h);  // M * 1
  const auto res = cg_solve(K, b);
  for (int i = 0; i < cells - 1; ++i) {
    const double x = -1.0 + (i + 1) * h;
    EXPECT_NEAR(res.x[i], (1 - x * x) / 2, 0.01 * 0.5);
  }
  const auto Kx = K * res.x;
  double r = 0;
  for (int i = 0; i < cells - 1; ++i) r += (Kx[i] - b[i]) * (Kx[i] - b[i]);
  EXPECT_LE(std::sqrt(r), 1e-10 * norm2(b));
}

TEST(CgSolve, DeterministicAndPreconditionerAgnostic) {
  const auto K = dirichlet_laplacian_1d(100, 0.02);
  std::vector<double> b(100);
  for (int i = 0; i < 100; ++i) b[i] = std::sin(0.3 * i);
  const auto a = cg_solve(K, b), a2 = cg_solve(K, b);
  EXPECT_EQ(a.x, a2.x);
  SolveOptions plain;
  plain.preconditioner = Preconditioner::None;
  const auto c = cg_solve(K, b, plain);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(a.x[i], c.x[i], 1e-8 * std::abs(a.x[i]) + 1e-12);
  // Constant diagonal: Jacobi is a scalar rescaling and cannot cost iterations.
  EXPECT_LE(a.iterations, c.iterations);
}

TEST(CgSolve, Errors) {
  std::vector<Triplet> t{{0, 0, 1.0}, {1, 1, -1.0}};
  const auto indefinite = from_triplets(2, t);
  try {
    cg_solve(indefinite, std::vector<double>{0.0, 1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidMatrix);
  }
  const auto K = dirichlet_laplacian_1d(200, 0.01);
  SolveOptions few;
  few.max_iterations = 3;
  few.preconditioner = Preconditioner::None;
  std::vector<double> b(200, 1.0);
  try {
    cg_solve(K, b, few);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_GT(e.residual(), 1e-10);
  }
  SolveOptions bad;
  bad.tolerance = 2.0;
  EXPECT_THROW(cg_solve(K, b, bad), Error);
}

TEST(Eigen, NeumannIntervalMatchesCosineMode) {
  // Interval of length 2R with node-centred cells: lambda_1 = (pi / 2R)^2.
  const double R = 0.5;
  const int n = 200;
  const double h = 2 * R / n;
  const auto K = neumann_path(n, h);
  std::vector<double> M(n, h);
  const auto ep = smallest_nonzero_eigenpair(K, M);
  const double exact = std::pow(std::numbers::pi / (2 * R), 2);
  EXPECT_NEAR(ep.lambda / exact, 1.0, 0.01);
  EXPECT_NEAR(dot(ep.vector, M), 0.0, 1e-10);
  // Residual contract checked by an independent product.
  const auto Ku = K * ep.vector;
  double res = 0, unorm = 0;
  for (int i = 0; i < n; ++i) {
    res += std::pow(Ku[i] - ep.lambda * M[i] * ep.vector[i], 2) / M[i];
    unorm += M[i] * ep.vector[i] * ep.vector[i];
  }
  EXPECT_LE(std::sqrt(res), 10 * 1e-10 * ep.lambda * std::sqrt(unorm));
}

TEST(Eigen, ScalingKScalesLambda) {
  const int n = 60;
  const auto K = neumann_path(n, 0.05);
  std::vector<double> M(n, 0.05);
  const auto a = smallest_nonzero_eigenpair(K, M);
  const auto b = smallest_nonzero_eigenpair(K.scaled(3.5), M);
  EXPECT_NEAR(b.lambda / a.lambda, 3.5, 1e-9);
}

TEST(Eigen, DisconnectedRegionIsRejected) {
  std::vector<Triplet> t{{0, 0, 1}, {1, 1, 1}, {0, 1, -1}, {1, 0, -1}, {2, 2, 1}, {3, 3, 1}, {2, 3, -1}, {3, 2, -1}};
  const auto K = from_triplets(4, t);
  try {
    smallest_nonzero_eigenpair(K, std::vector<double>(4, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Connectivity);
  }
}
