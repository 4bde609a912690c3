#pragma once

// Discrete strongly local Dirichlet forms a(u, v) = sum_e k_e (u_i - u_j)(v_i - v_j)
// on the grid edges, for doubly weighted elliptic operators div(a(x) grad) and
// for the Grushin operator X1 = d/dx, X2 = x d/dy.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hsg/error.hpp"
#include "hsg/linsolve.hpp"
#include "hsg/space.hpp"

namespace hsg {

enum class OperatorClass { WeightedElliptic, Hormander };

inline const char* to_string(OperatorClass c) {
  return c == OperatorClass::WeightedElliptic ? "weighted_elliptic" : "hormander";
}

/// Operator catalog entry. For WeightedElliptic, A(x) = a(x) Id with the
/// declared bounds lower(x) <= a(x) <= upper(x). For Hormander the coefficient
/// multiplies the Grushin energy (u_x)^2 + x^2 (u_y)^2.
struct OperatorSpec {
  OperatorClass kind = OperatorClass::WeightedElliptic;
  PowerWeight coefficient{};
  PowerWeight lower{};
  PowerWeight upper{};

  static OperatorSpec laplacian() { return {}; }

  static OperatorSpec weighted(double beta, double scale = 1.0) {
    PowerWeight w{beta, scale};
    return {OperatorClass::WeightedElliptic, w, w, w};
  }

  static OperatorSpec grushin(double beta = 0.0) {
    PowerWeight w{beta, 1.0};
    return {OperatorClass::Hormander, w, w, w};
  }
};

struct Edge {
  int a;
  int b;
  double weight;  // k_e, already scaled by h^(n-2)
};

namespace detail {

// Endpoint values of a power weight that are 0 or infinite (the origin node)
// are replaced by the value at the edge midpoint, so harmonic means stay
// positive and finite.
inline double edge_value(const PowerWeight& w, Point node, Point mid) {
  const double v = w(node);
  if (v == 0.0 || !std::isfinite(v)) return w(mid);
  return v;
}

inline double harmonic_edge_coefficient(const PowerWeight& w, Point p, Point q) {
  const Point mid{(p.x + q.x) / 2, (p.y + q.y) / 2};
  const double a = edge_value(w, p, mid);
  const double b = edge_value(w, q, mid);
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

}  // namespace detail

/// Assembled form: edge list, CSR stiffness K, lumped measure M.
class FormAssembly {
 public:
  FormAssembly(std::shared_ptr<const SpaceGrid> grid, OperatorSpec op, std::vector<Edge> edges)
      : grid_(std::move(grid)), op_(op), edges_(std::move(edges)) {
    const int n = grid_->node_count();
    incident_.assign(n + 1, 0);
    for (const Edge& e : edges_) {
      incident_[e.a + 1]++;
      incident_[e.b + 1]++;
    }
    for (int i = 0; i < n; ++i) incident_[i + 1] += incident_[i];
    incident_edges_.resize(incident_[n]);
    std::vector<int> fill(incident_.begin(), incident_.end() - 1);
    for (int k = 0; k < static_cast<int>(edges_.size()); ++k) {
      incident_edges_[fill[edges_[k].a]++] = k;
      incident_edges_[fill[edges_[k].b]++] = k;
    }
    std::vector<Triplet> t;
    t.reserve(4 * edges_.size());
    for (const Edge& e : edges_) {
      t.push_back({e.a, e.a, e.weight});
      t.push_back({e.b, e.b, e.weight});
      t.push_back({e.a, e.b, -e.weight});
      t.push_back({e.b, e.a, -e.weight});
    }
    stiffness_ = from_triplets(n, std::move(t));
  }

  const SpaceGrid& space() const { return *grid_; }
  std::shared_ptr<const SpaceGrid> space_ptr() const { return grid_; }
  const OperatorSpec& op() const { return op_; }
  std::span<const Edge> edges() const { return edges_; }
  const SparseMatrix& stiffness() const { return stiffness_; }
  std::span<const double> lumped_measure() const { return grid_->lumped_measure(); }
  int node_count() const { return grid_->node_count(); }

  /// Edge indices incident to a node.
  std::span<const int> incident(int node) const {
    return std::span<const int>(incident_edges_).subspan(incident_[node], incident_[node + 1] - incident_[node]);
  }

  double bilinear(std::span<const double> u, std::span<const double> v) const {
    check_size(u);
    check_size(v);
    double s = 0.0;
    for (const Edge& e : edges_) s += e.weight * (u[e.a] - u[e.b]) * (v[e.a] - v[e.b]);
    return s;
  }

  double energy(std::span<const double> u) const { return bilinear(u, u); }

  std::vector<double> apply(std::span<const double> u) const {
    check_size(u);
    return stiffness_ * u;
  }

  void check_size(std::span<const double> u) const {
    if (static_cast<int>(u.size()) != node_count()) fail(ErrorKind::Argument, "field size does not match the grid");
  }

 private:
  std::shared_ptr<const SpaceGrid> grid_;
  OperatorSpec op_;
  std::vector<Edge> edges_;
  std::vector<int> incident_;
  std::vector<int> incident_edges_;
  SparseMatrix stiffness_;
};

/// 5-point (3-point in 1D) finite-difference assembly.
///
/// Weighted elliptic: edge coefficient is the harmonic mean of a(x) at the
/// endpoints. Grushin: horizontal edges carry the coefficient, vertical edges
/// carry the coefficient times x^2 at the edge midpoint (zero on x = 0).
inline FormAssembly assemble(std::shared_ptr<const SpaceGrid> grid, const OperatorSpec& op) {
  const SpaceGrid& g = *grid;
  const int n = g.dimension();
  if (op.kind == OperatorClass::Hormander && n != 2) fail(ErrorKind::InvalidOperator, "Grushin operator needs n = 2");
  for (const PowerWeight* w : {&op.coefficient, &op.lower, &op.upper}) {
    if (!(w->scale > 0.0)) fail(ErrorKind::InvalidOperator, "weight scale must be positive");
    if (!(w->exponent > -n && w->exponent < n))
      fail(ErrorKind::InvalidOperator, "weight exponent outside (-n, n)");
  }
  const double hscale = std::pow(g.mesh_size(), n - 2);

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * g.node_count());
  for (int i = 0; i < g.node_count(); ++i) {
    const Point p = g.node(i);
    if (op.kind == OperatorClass::WeightedElliptic) {
      const double lo = op.lower(p), a = op.coefficient(p), hi = op.upper(p);
      if (a < 0.0 || lo > a * (1 + 1e-12) || a > hi * (1 + 1e-12))
        fail(ErrorKind::InvalidOperator, "coefficient violates lower <= a <= upper at a node");
    }
    auto add = [&](int j, bool vertical) {
      const Point q = g.node(j);
      double c = detail::harmonic_edge_coefficient(op.coefficient, p, q);
      if (op.kind == OperatorClass::Hormander && vertical) {
        const double xm = (p.x + q.x) / 2;
        c *= xm * xm;
      }
      if (c < 0.0 || !std::isfinite(c)) fail(ErrorKind::InvalidOperator, "negative or non-finite edge coefficient");
      edges.push_back({i, j, c * hscale});
    };
    if (g.ix(i) + 1 < g.nodes_per_side()) add(i + 1, false);
    if (n == 2 && g.iy(i) + 1 < g.nodes_per_side()) add(i + g.nodes_per_side(), true);
  }
  return FormAssembly(std::move(grid), op, std::move(edges));
}

inline FormAssembly assemble(const SpaceGrid& grid, const OperatorSpec& op) {
  return assemble(std::make_shared<const SpaceGrid>(grid), op);
}

/// Discrete energy measure alpha(u, u): each edge's energy is split half to each endpoint.
inline std::vector<double> energy_measure(const FormAssembly& form, std::span<const double> u) {
  form.check_size(u);
  std::vector<double> out(form.node_count(), 0.0);
  for (const Edge& e : form.edges()) {
    const double du = u[e.a] - u[e.b];
    const double half = 0.5 * e.weight * du * du;
    out[e.a] += half;
    out[e.b] += half;
  }
  return out;
}

/// Energies of u under edge coefficients built from the declared lower and
/// upper weights (the ellipticity sandwich).
inline std::pair<double, double> ellipticity_sandwich(const FormAssembly& form, std::span<const double> u) {
  form.check_size(u);
  const SpaceGrid& g = form.space();
  const double hscale = std::pow(g.mesh_size(), g.dimension() - 2);
  double lo = 0.0, hi = 0.0;
  for (const Edge& e : form.edges()) {
    const Point p = g.node(e.a), q = g.node(e.b);
    double geo = 1.0;
    if (form.op().kind == OperatorClass::Hormander && g.iy(e.a) != g.iy(e.b)) {
      const double xm = (p.x + q.x) / 2;
      geo = xm * xm;
    }
    const double du = u[e.a] - u[e.b];
    lo += detail::harmonic_edge_coefficient(form.op().lower, p, q) * geo * hscale * du * du;
    hi += detail::harmonic_edge_coefficient(form.op().upper, p, q) * geo * hscale * du * du;
  }
  return {lo, hi};
}

/// Node set as a membership mask.
inline std::vector<char> node_mask(int node_count, std::span<const int> nodes) {
  std::vector<char> m(node_count, 0);
  for (int i : nodes) m[i] = 1;
  return m;
}

/// Solves the Dirichlet problem (K u)_i = rhs_i for i in `active`, with
/// u = fixed_values everywhere else. Returns the full field.
///
/// Every connected piece of the active set (through positive-weight edges) must
/// touch a fixed node or carry a consistent right-hand side; isolated pieces
/// are rejected.
inline std::vector<double> solve_dirichlet(const FormAssembly& form, std::span<const int> active,
                                           std::span<const double> fixed_values, std::span<const double> rhs,
                                           const SolveOptions& opts = {}, SolveResult* stats = nullptr) {
  const int N = form.node_count();
  form.check_size(fixed_values);
  if (!rhs.empty()) form.check_size(rhs);
  std::vector<int> local(N, -1);
  for (int k = 0; k < static_cast<int>(active.size()); ++k) local[active[k]] = k;
  const int n = static_cast<int>(active.size());

  std::vector<Triplet> t;
  t.reserve(5 * static_cast<std::size_t>(n));
  std::vector<double> b(n, 0.0);
  std::vector<char> anchored(n, 0);
  for (int k = 0; k < n; ++k) {
    const int i = active[k];
    if (!rhs.empty()) b[k] = rhs[i];
    double diag = 0.0;
    for (int e_id : form.incident(i)) {
      const Edge& e = form.edges()[e_id];
      const int j = e.a == i ? e.b : e.a;
      diag += e.weight;
      if (local[j] >= 0) {
        t.push_back({k, local[j], -e.weight});
      } else {
        b[k] += e.weight * fixed_values[j];
        if (e.weight > 0.0) anchored[k] = 1;
      }
    }
    t.push_back({k, k, diag});
  }
  SparseMatrix K = from_triplets(n, std::move(t));

  // Every component must reach the fixed set.
  {
    std::vector<int> comp(n, -1), stack;
    for (int s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      bool ok = false;
      comp[s] = s;
      stack.push_back(s);
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        ok = ok || anchored[i];
        for (int q = K.row_ptr[i]; q < K.row_ptr[i + 1]; ++q) {
          const int j = K.col[q];
          if (j != i && K.val[q] != 0.0 && comp[j] < 0) {
            comp[j] = s;
            stack.push_back(j);
          }
        }
      }
      if (!ok) fail(ErrorKind::Connectivity, "part of the active region is not connected to its boundary");
    }
  }

  SolveResult res = cg_solve(K, b, opts);
  std::vector<double> u(fixed_values.begin(), fixed_values.end());
  for (int k = 0; k < n; ++k) u[active[k]] = res.x[k];
  if (stats) *stats = std::move(res);
  return u;
}

/// Discrete harmonic extension: u solves (K u)_i = 0 on `region` and equals
/// boundary_values elsewhere (in particular on the region's stencil boundary).
inline std::vector<double> solve_local(const FormAssembly& form, std::span<const int> region,
                                       std::span<const double> boundary_values, const SolveOptions& opts = {}) {
  if (region.empty()) fail(ErrorKind::Argument, "empty region");
  return solve_dirichlet(form, region, boundary_values, {}, opts);
}

/// Exterior stencil boundary of a node set: nodes outside it joined to it by an edge.
inline std::vector<int> stencil_boundary(const FormAssembly& form, std::span<const int> region) {
  const auto in = node_mask(form.node_count(), region);
  std::vector<char> mark(form.node_count(), 0);
  for (int i : region)
    for (int e_id : form.incident(i)) {
      const Edge& e = form.edges()[e_id];
      const int j = e.a == i ? e.b : e.a;
      if (!in[j]) mark[j] = 1;
    }
  std::vector<int> out;
  for (int i = 0; i < form.node_count(); ++i)
    if (mark[i]) out.push_back(i);
  return out;
}

/// Neumann-type restriction: K assembled only from edges with both endpoints
/// in `nodes`, together with the matching lumped measure.
inline std::pair<SparseMatrix, std::vector<double>> neumann_block(const FormAssembly& form, std::span<const int> nodes) {
  std::vector<int> local(form.node_count(), -1);
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) local[nodes[k]] = k;
  std::vector<Triplet> t;
  std::vector<double> M(nodes.size());
  const auto lumped = form.lumped_measure();
  for (int k = 0; k < static_cast<int>(nodes.size()); ++k) {
    const int i = nodes[k];
    M[k] = lumped[i];
    double diag = 0.0;
    for (int e_id : form.incident(i)) {
      const Edge& e = form.edges()[e_id];
      const int j = e.a == i ? e.b : e.a;
      if (local[j] < 0 || e.weight == 0.0) continue;
      diag += e.weight;
      t.push_back({k, local[j], -e.weight});
    }
    t.push_back({k, k, diag});
  }
  return {from_triplets(static_cast<int>(nodes.size()), std::move(t)), std::move(M)};
}

}  // namespace hsg
