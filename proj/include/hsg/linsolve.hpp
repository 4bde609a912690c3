#pragma once

// Sparse symmetric solves: Jacobi-preconditioned conjugate gradients and the
// smallest nonzero generalized eigenpair K u = lambda M u of a Neumann-type
// operator whose kernel is the constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsg/error.hpp"

namespace hsg {

/// Compressed-row sparse matrix.
struct SparseMatrix {
  int rows = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  static SparseMatrix identity(int n) {
    SparseMatrix m;
    m.rows = n;
    m.row_ptr.resize(n + 1);
    for (int i = 0; i < n; ++i) {
      m.row_ptr[i + 1] = i + 1;
      m.col.push_back(i);
      m.val.push_back(1.0);
    }
    return m;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(rows);
    multiply(x, y);
    return y;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
        if (col[k] == i) d[i] += val[k];
    return d;
  }

  int max_row_nonzeros() const {
    int m = 0;
    for (int i = 0; i < rows; ++i) m = std::max(m, row_ptr[i + 1] - row_ptr[i]);
    return m;
  }

  SparseMatrix scaled(double c) const {
    SparseMatrix m = *this;
    for (double& v : m.val) v *= c;
    return m;
  }
};

/// Assembles a CSR matrix from (row, col, value) triplets; duplicates are summed.
struct Triplet {
  int row;
  int col;
  double value;
};

inline SparseMatrix from_triplets(int n, std::vector<Triplet> t) {
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.rows = n;
  m.row_ptr.assign(n + 1, 0);
  for (std::size_t k = 0; k < t.size();) {
    const int r = t[k].row, c = t[k].col;
    double v = 0.0;
    while (k < t.size() && t[k].row == r && t[k].col == c) v += t[k++].value;
    m.col.push_back(c);
    m.val.push_back(v);
    m.row_ptr[r + 1]++;
  }
  for (int i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
  return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

enum class Preconditioner { None, Jacobi };

struct SolveOptions {
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 0;    // 0 means 20 * N
  Preconditioner preconditioner = Preconditioner::Jacobi;

  void validate() const {
    if (!(tolerance > 0.0 && tolerance < 1.0)) fail(ErrorKind::Argument, "tolerance must lie in (0, 1)");
    if (max_iterations < 0) fail(ErrorKind::Argument, "max iterations must be >= 1");
  }
};

struct SolveResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradients for K x = b with K symmetric positive (semi)definite
/// and b in its range. The residual contract ||Kx - b|| <= tol ||b|| is checked
/// against an explicit product; the recursion restarts when it drifts.
inline SolveResult cg_solve(const SparseMatrix& K, std::span<const double> b, const SolveOptions& opts = {}) {
  opts.validate();
  const int n = K.rows;
  if (static_cast<int>(b.size()) != n) fail(ErrorKind::Argument, "right-hand side size mismatch");
  for (double v : b)
    if (!std::isfinite(v)) fail(ErrorKind::Argument, "right-hand side is not finite");

  SolveResult res;
  res.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) return res;
  const int max_it = opts.max_iterations > 0 ? opts.max_iterations : 20 * std::max(n, 1);

  std::vector<double> inv_diag(n, 1.0);
  if (opts.preconditioner == Preconditioner::Jacobi) {
    const auto d = K.diagonal();
    for (int i = 0; i < n; ++i) inv_diag[i] = d[i] > 0.0 ? 1.0 / d[i] : 1.0;
  }

  std::vector<double> r(b.begin(), b.end()), z(n), p(n), Kp(n);
  const double target = opts.tolerance * bnorm;
  int it = 0;
  while (true) {
    // (Re)start from the true residual.
    K.multiply(res.x, Kp);
    for (int i = 0; i < n; ++i) r[i] = b[i] - Kp[i];
    double rnorm = norm2(r);
    res.relative_residual = rnorm / bnorm;
    if (rnorm <= target) return res;
    if (it >= max_it) throw NumericError("conjugate gradients hit the iteration limit", res.relative_residual);

    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    // Stop the recursion a little below the target so the restart check passes.
    while (it < max_it) {
      K.multiply(p, Kp);
      const double curvature = dot(p, Kp);
      if (!(curvature > 0.0)) fail(ErrorKind::InvalidMatrix, "non-positive curvature in conjugate gradients");
      const double alpha = rz / curvature;
      for (int i = 0; i < n; ++i) {
        res.x[i] += alpha * p[i];
        r[i] -= alpha * Kp[i];
      }
      ++it;
      res.iterations = it;
      rnorm = norm2(r);
      if (rnorm <= 0.5 * target) break;
      for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
}

struct EigenPair {
  double lambda = 0.0;
  std::vector<double> vector;  // M-normalized, M-orthogonal to constants
  int iterations = 0;
  double residual = 0.0;  // ||K u - lambda M u||_{M^-1} / (lambda ||u||_M)
};

namespace detail {

inline int count_components(const SparseMatrix& K) {
  const int n = K.rows;
  std::vector<int> seen(n, 0), stack;
  int comps = 0;
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++comps;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int k = K.row_ptr[i]; k < K.row_ptr[i + 1]; ++k) {
        const int j = K.col[k];
        if (j != i && K.val[k] != 0.0 && !seen[j]) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return comps;
}

inline void remove_mean(std::span<double> u, std::span<const double> M, double total) {
  const double mean = dot(u, M) / total;
  for (double& v : u) v -= mean;
}

}  // namespace detail

namespace detail {

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix (row-major).
/// Returns eigenvalues ascending; columns of `vecs` are the eigenvectors.
inline std::vector<double> symmetric_eigen(std::vector<double> a, int p, std::vector<double>& vecs) {
  vecs.assign(p * p, 0.0);
  for (int i = 0; i < p; ++i) vecs[i * p + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, diag = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) (i == j ? diag : off) += a[i * p + j] * a[i * p + j];
    if (off <= 1e-30 * diag) break;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) {
        const double aij = a[i * p + j];
        if (aij == 0.0) continue;
        const double theta = (a[j * p + j] - a[i * p + i]) / (2 * aij);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (int k = 0; k < p; ++k) {
          const double aki = a[k * p + i], akj = a[k * p + j];
          a[k * p + i] = c * aki - s * akj;
          a[k * p + j] = s * aki + c * akj;
        }
        for (int k = 0; k < p; ++k) {
          const double aik = a[i * p + k], ajk = a[j * p + k];
          a[i * p + k] = c * aik - s * ajk;
          a[j * p + k] = s * aik + c * ajk;
        }
        for (int k = 0; k < p; ++k) {
          const double vki = vecs[k * p + i], vkj = vecs[k * p + j];
          vecs[k * p + i] = c * vki - s * vkj;
          vecs[k * p + j] = s * vki + c * vkj;
        }
      }
  }
  std::vector<int> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a[x * p + x] < a[y * p + y]; });
  std::vector<double> vals(p), sorted(p * p);
  for (int k = 0; k < p; ++k) {
    vals[k] = a[order[k] * p + order[k]];
    for (int i = 0; i < p; ++i) sorted[i * p + k] = vecs[i * p + order[k]];
  }
  vecs = std::move(sorted);
  return vals;
}

}  // namespace detail

/// Smallest nonzero eigenvalue of K u = lambda M u by block inverse iteration
/// with Rayleigh-Ritz on the M-orthogonal complement of the constants. Start
/// vectors come from a fixed seed, so results are reproducible bit for bit.
inline EigenPair smallest_nonzero_eigenpair(const SparseMatrix& K, std::span<const double> M,
                                            const SolveOptions& opts = {}, int max_outer = 2000) {
  opts.validate();
  const int n = K.rows;
  if (static_cast<int>(M.size()) != n) fail(ErrorKind::Argument, "mass vector size mismatch");
  if (n < 2) fail(ErrorKind::Connectivity, "region has fewer than two nodes");
  for (double m : M)
    if (!(m >= 0.0)) fail(ErrorKind::Argument, "mass matrix must be nonnegative");
  if (detail::count_components(K) != 1)
    fail(ErrorKind::Connectivity, "operator kernel is not one-dimensional (disconnected region)");
  {
    std::vector<double> ones(n, 1.0);
    const auto k1 = K * ones;
    double scale = 0.0;
    for (double v : K.diagonal()) scale = std::max(scale, std::abs(v));
    for (double v : k1)
      if (std::abs(v) > 1e-10 * scale) fail(ErrorKind::InvalidMatrix, "constants are not in the kernel");
  }

  const double total = std::accumulate(M.begin(), M.end(), 0.0);
  if (!(total > 0.0)) fail(ErrorKind::Argument, "mass matrix has zero total");
  int positive = 0;
  for (double m : M) positive += m > 0.0;
  const int p = std::min(4, positive - 1);
  if (p < 1) fail(ErrorKind::Argument, "mass matrix has fewer than two positive entries");

  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<std::vector<double>> block(p, std::vector<double>(n));
  for (auto& v : block)
    for (double& x : v) x = uni(rng);

  auto m_dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i] * M[i];
    return s;
  };
  // M-orthonormalize against constants and each other (two passes of Gram-Schmidt).
  auto orthonormalize = [&](std::vector<std::vector<double>>& V) {
    for (int k = 0; k < p; ++k) {
      for (int pass = 0; pass < 2; ++pass) {
        detail::remove_mean(V[k], M, total);
        for (int j = 0; j < k; ++j) {
          const double c = m_dot(V[k], V[j]);
          for (int i = 0; i < n; ++i) V[k][i] -= c * V[j][i];
        }
      }
      const double s = std::sqrt(m_dot(V[k], V[k]));
      if (!(s > 0.0)) fail(ErrorKind::Numeric, "eigen block lost rank");
      for (double& x : V[k]) x /= s;
    }
  };
  orthonormalize(block);

  // Inner solves pin the last node to zero: the grounded block is definite.
  std::vector<Triplet> kept;
  for (int i = 0; i + 1 < n; ++i)
    for (int k = K.row_ptr[i]; k < K.row_ptr[i + 1]; ++k)
      if (K.col[k] + 1 < n) kept.push_back({i, K.col[k], K.val[k]});
  const SparseMatrix grounded = from_triplets(n - 1, std::move(kept));
  const SolveOptions& inner = opts;
  std::vector<double> rhs(n);
  EigenPair out;
  for (int it = 1; it <= max_outer; ++it) {
    for (auto& v : block) {
      for (int i = 0; i < n; ++i) rhs[i] = M[i] * v[i];
      detail::remove_mean(rhs, std::vector<double>(n, 1.0), static_cast<double>(n));
      v = cg_solve(grounded, std::span<const double>(rhs).first(n - 1), inner).x;
      v.push_back(0.0);
    }
    orthonormalize(block);
    std::vector<std::vector<double>> KV;
    for (const auto& v : block) KV.push_back(K * v);
    std::vector<double> H(p * p), Y;
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) H[a * p + b] = 0.5 * (dot(block[a], KV[b]) + dot(block[b], KV[a]));
    detail::symmetric_eigen(H, p, Y);
    std::vector<std::vector<double>> next(p, std::vector<double>(n, 0.0));
    for (int k = 0; k < p; ++k)
      for (int j = 0; j < p; ++j) {
        const double y = Y[j * p + k];
        for (int i = 0; i < n; ++i) next[k][i] += y * block[j][i];
      }
    block.swap(next);

    const auto& u = block[0];
    const auto Ku = K * u;
    const double lambda = dot(u, Ku) / m_dot(u, u);
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
      const double ri = Ku[i] - lambda * M[i] * u[i];
      if (M[i] > 0.0) res += ri * ri / M[i];
    }
    res = std::sqrt(res / m_dot(u, u)) / lambda;
    out = {lambda, u, it, res};
    if (res <= opts.tolerance) return out;
  }
  throw NumericError("inverse iteration did not converge", out.residual);
}

}  // namespace hsg
