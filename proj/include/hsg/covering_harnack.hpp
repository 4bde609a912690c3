#pragma once

// Chains of overlapping balls across an annulus, empirical Harnack ratios,
// the gamma fit and the chained boundary bound for Green functions.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "hsg/constants.hpp"
#include "hsg/dirichlet_form.hpp"
#include "hsg/error.hpp"
#include "hsg/green_capacity.hpp"
#include "hsg/space.hpp"

namespace hsg {

struct BallChain {
  Point center;
  double r = 0.0;
  double r_in = 0.0, r_out = 0.0;  // annulus B(center, r_out) \ B(center, r_in)
  double ball_radius = 0.0;        // r / 8 after dilation
  std::vector<int> annulus;        // annulus nodes
  std::vector<Point> net;          // r/16 net centers
  std::vector<int> owner;          // per annulus node: covering net index
  std::vector<int> chain;          // net indices, endpoint to endpoint
  int l = 0;
  double formula_l = 0.0;            // sup c0^-1 16^-nu, reported alongside
};

/// Greedy r/16 net over the annulus B(center, 9r/4) \ B(center, 3r/4), an
/// overlap graph on the dilated r/8 balls (centres closer than r/4), and a
/// breadth-first shortest chain between the balls holding the two endpoints.
inline BallChain build_chain(const SpaceGrid& g, Point center, double r, Point from, Point to) {
  BallChain ch;
  ch.center = center;
  ch.r = r;
  ch.r_in = 0.75 * r;
  ch.r_out = 2.25 * r;
  ch.ball_radius = r / 8;
  g.require_ball(center, ch.r_out, "chain annulus");
  for (Point p : {from, to}) {
    const double d = g.distance(center, p);
    if (d < ch.r_in || d >= ch.r_out) fail(ErrorKind::Argument, "chain endpoint outside the annulus");
  }
  ch.annulus = g.annulus_nodes(center, ch.r_in, ch.r_out);
  if (ch.annulus.empty()) fail(ErrorKind::Resolution, "annulus has no node");

  // The quasi-distance dominates |dx|, so strips of width r/16 in x bound the search.
  const double cover = r / 16, strip = cover;
  const double x0 = center.x - ch.r_out - strip;
  auto strip_of = [&](Point p) { return static_cast<long>(std::floor((p.x - x0) / strip)); };
  std::map<long, std::vector<int>> strips;
  auto covering = [&](Point p) {
    const long s = strip_of(p);
    for (long t = s - 1; t <= s + 1; ++t) {
      const auto it = strips.find(t);
      if (it == strips.end()) continue;
      for (int c : it->second)
        if (g.distance(ch.net[c], p) < cover) return c;
    }
    return -1;
  };
  auto add_center = [&](Point p) {
    const int id = static_cast<int>(ch.net.size());
    ch.net.push_back(p);
    strips[strip_of(p)].push_back(id);
    return id;
  };

  // Net over a lattice anchored at the center with spacing r/32 in the
  // metric, so the covering does not depend on the mesh.
  const double sx = r / 32;
  double sy = sx;
  const Point ext = g.ball_extent(center, ch.r_out);
  if (g.metric() == MetricKind::Grushin) sy = sx * std::max(std::abs(center.x) - ch.r_out, sx);
  const int kx = static_cast<int>(std::ceil(ext.x / sx));
  const int ky = g.dimension() == 1 ? 0 : static_cast<int>(std::ceil(ext.y / sy));
  for (int j = -ky; j <= ky; ++j)
    for (int i = -kx; i <= kx; ++i) {
      const Point p{center.x + i * sx, center.y + j * sy};
      const double d = g.distance(center, p);
      if (d < ch.r_in || d >= ch.r_out || !g.inside(p)) continue;
      if (covering(p) < 0) add_center(p);
    }
  // Nodes the lattice net misses become centres themselves.
  ch.owner.resize(ch.annulus.size());
  for (std::size_t k = 0; k < ch.annulus.size(); ++k) {
    const Point p = g.node(ch.annulus[k]);
    const int c = covering(p);
    ch.owner[k] = c >= 0 ? c : add_center(p);
  }

  const int n = static_cast<int>(ch.net.size());
  std::vector<std::vector<int>> adj(n);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (g.distance(ch.net[a], ch.net[b]) < 2 * ch.ball_radius) {
        adj[a].push_back(b);
        adj[b].push_back(a);
      }

  auto holder = [&](Point p) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ch.annulus.size(); ++k) {
      const double d = g.distance(p, g.node(ch.annulus[k]));
      if (d < bd) bd = d, best = static_cast<int>(k);
    }
    return ch.owner[best];
  };
  const int src = holder(from), dst = holder(to);
  std::vector<int> prev(n, -2);
  std::deque<int> queue{src};
  prev[src] = -1;
  while (!queue.empty() && prev[dst] == -2) {
    const int a = queue.front();
    queue.pop_front();
    for (int b : adj[a])
      if (prev[b] == -2) {
        prev[b] = a;
        queue.push_back(b);
      }
  }
  if (prev[dst] == -2) fail(ErrorKind::Connectivity, "annulus net is disconnected at this mesh");
  for (int v = dst; v != -1; v = prev[v]) ch.chain.push_back(v);
  std::reverse(ch.chain.begin(), ch.chain.end());
  ch.l = static_cast<int>(ch.chain.size());
  return ch;
}

inline BallChain build_chain(const SpaceGrid& g, const DoublingReport& doubling, Point center, double r, Point from,
                             Point to) {
  auto ch = build_chain(g, center, r, from, to);
  ch.formula_l = doubling.sup_inv_c0() * std::pow(16.0, -doubling.nu_hat);
  return ch;
}

struct HarnackRow {
  Point center;
  double r = 0.0;
  double ratio = 1.0;             // worst sup / inf over B(center, r/2), both families
  double mu = 0.0;
  int samples = 0;
  int filtered = 0;               // samples with a nonpositive minimum
  double random_ratio = 1.0;      // random data only
  double point_mass_ratio = 1.0;  // boundary point masses, sampled at the probe nodes
  int probes = 0;
};

namespace detail {

inline std::vector<double> random_boundary_data(const SpaceGrid& g, std::span<const int> boundary, int level,
                                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> v(boundary.size());
  for (double& x : v) x = uni(rng);
  if (level == 0) return v;
  // Neighbours along the boundary: nodes within one index step in every direction.
  std::vector<std::vector<int>> nb(boundary.size());
  std::map<std::pair<int, int>, int> at;
  for (std::size_t k = 0; k < boundary.size(); ++k) at[{g.ix(boundary[k]), g.iy(boundary[k])}] = static_cast<int>(k);
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    const int ix = g.ix(boundary[k]), iy = g.iy(boundary[k]);
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy) {
        const auto it = at.find({ix + dx, iy + dy});
        if (it != at.end()) nb[k].push_back(it->second);
      }
  }
  const int sweeps = 1 << (2 * level);
  for (int s = 0; s < sweeps; ++s) {
    std::vector<double> next(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) {
      double acc = 0.0;
      for (int j : nb[k]) acc += v[j];
      next[k] = acc / nb[k].size();
    }
    v.swap(next);
  }
  return v;
}

}  // namespace detail

/// Worst ratio max/min over B(center, r/2) of harmonic extensions of
/// nonnegative data on the stencil boundary of B(center, r).
///
/// Two families enter the worst case: `samples` random data (uniform and three
/// smoothing levels), and every point mass on the boundary. The point masses
/// are scanned through Dirichlet Green functions with poles at up to `probes`
/// nodes of the half-ball layer, spread by angle: u_j(x) = sum_k w_kj g_x(k).
inline HarnackRow measure_harnack(const FormAssembly& form, Point center, double r, int samples, std::uint64_t seed,
                                  const SolveOptions& opts = {}, int probes = 16) {
  const SpaceGrid& g = form.space();
  g.require_ball(center, r, "Harnack ball");
  const auto ball = g.ball_nodes(center, r);
  const auto half = g.ball_nodes(center, r / 2);
  if (half.empty()) fail(ErrorKind::Resolution, "half ball has no node");
  const auto boundary = stencil_boundary(form, ball);
  if (boundary.empty()) fail(ErrorKind::Resolution, "ball has no stencil boundary");
  std::mt19937_64 rng(seed);
  HarnackRow row;
  row.center = center;
  row.r = r;
  row.samples = samples;
  std::vector<double> b(g.node_count(), 0.0);
  for (int t = 0; t < samples; ++t) {
    const auto data = detail::random_boundary_data(g, boundary, t % 4, rng);
    for (std::size_t k = 0; k < boundary.size(); ++k) b[boundary[k]] = data[k];
    const auto u = solve_local(form, ball, b, opts);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i : half) lo = std::min(lo, u[i]), hi = std::max(hi, u[i]);
    if (!(lo > 1e-14 * hi)) {
      ++row.filtered;
      continue;
    }
    row.ratio = std::max(row.ratio, hi / lo);
  }
  row.random_ratio = row.ratio;
  if (probes <= 0) return row;

  // Extremes of each u_j over the half ball sit on its inner layer.
  auto layer = inner_boundary_layer(form, half);
  if (layer.empty()) layer = half;
  std::sort(layer.begin(), layer.end(), [&](int a, int c) {
    const Point pa = g.node(a), pc = g.node(c);
    return std::atan2(pa.y - center.y, pa.x - center.x) < std::atan2(pc.y - center.y, pc.x - center.x);
  });
  std::vector<int> poles;
  const std::size_t m = std::min(layer.size(), static_cast<std::size_t>(probes));
  for (std::size_t k = 0; k < m; ++k) poles.push_back(layer[k * layer.size() / m]);

  const auto in_ball = node_mask(g.node_count(), ball);
  std::vector<std::vector<double>> P(poles.size(), std::vector<double>(boundary.size(), 0.0));
  const std::vector<double> zero(g.node_count(), 0.0);
  std::vector<double> rhs(g.node_count(), 0.0);
  for (std::size_t p = 0; p < poles.size(); ++p) {
    rhs[poles[p]] = 1.0;
    const auto gx = solve_dirichlet(form, ball, zero, rhs, opts);
    rhs[poles[p]] = 0.0;
    for (std::size_t j = 0; j < boundary.size(); ++j)
      for (int e_id : form.incident(boundary[j])) {
        const Edge& e = form.edges()[e_id];
        const int k = e.a == boundary[j] ? e.b : e.a;
        if (in_ball[k]) P[p][j] += e.weight * gx[k];
      }
  }
  for (std::size_t j = 0; j < boundary.size(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& col : P) lo = std::min(lo, col[j]), hi = std::max(hi, col[j]);
    if (!(lo > 1e-14 * hi)) continue;
    row.point_mass_ratio = std::max(row.point_mass_ratio, hi / lo);
  }
  row.probes = static_cast<int>(poles.size());
  row.ratio = std::max(row.ratio, row.point_mass_ratio);
  return row;
}

struct HarnackFit {
  double gamma = 0.0;
  double residual = 0.0;  // spread of ln(H) / mu
  std::vector<HarnackRow> rows;
};

inline HarnackFit fit_gamma(std::vector<HarnackRow> rows) {
  if (rows.size() < 8) fail(ErrorKind::InsufficientData, "gamma fit needs at least eight rows");
  std::set<double> scales;
  std::set<std::pair<double, double>> centers;
  for (const auto& r : rows) {
    if (!(r.mu > 0.0)) fail(ErrorKind::InvalidConstants, "mu must be positive");
    scales.insert(r.r);
    centers.insert({r.center.x, r.center.y});
  }
  if (scales.size() < 2 || centers.size() < 2)
    fail(ErrorKind::InsufficientData, "gamma fit needs two scales and two centers");
  HarnackFit fit;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows) {
    const double v = std::log(r.ratio) / r.mu;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  fit.gamma = std::max(0.0, hi);
  fit.residual = hi - lo;
  fit.rows = std::move(rows);
  return fit;
}

/// Largest H / exp(gamma mu) over rows not used in the fit.
inline double held_out_excess(const HarnackFit& fit, std::span<const HarnackRow> rows) {
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.ratio / std::exp(fit.gamma * r.mu));
  return worst;
}

struct ChainedBoundReport {
  double sup_g = 0.0, inf_g = 0.0;
  double ratio = 0.0;
  double bound = 0.0;  // exp(l gamma mu(x, r))
  int l = 0;
  bool verdict = false;
};

/// sup / inf of G over the discrete boundary layer of B(x, r) against exp(l gamma mu).
inline ChainedBoundReport chained_bound_check(const FormAssembly& form, const BallChain& chain, const GreenField& gf,
                                              double gamma, double mu) {
  if (!(gf.rho < chain.r / 2)) fail(ErrorKind::Argument, "smoothing radius must be below r/2");
  const auto layer = inner_boundary_layer(form, form.space().ball_nodes(chain.center, chain.r));
  if (layer.empty()) fail(ErrorKind::Resolution, "empty boundary layer");
  ChainedBoundReport rep;
  rep.inf_g = std::numeric_limits<double>::infinity();
  for (int i : layer) {
    rep.inf_g = std::min(rep.inf_g, gf.values[i]);
    rep.sup_g = std::max(rep.sup_g, gf.values[i]);
  }
  rep.ratio = rep.sup_g / rep.inf_g;
  rep.l = chain.l;
  rep.bound = std::exp(chain.l * gamma * mu);
  rep.verdict = rep.inf_g > 0.0 && rep.ratio <= rep.bound;
  return rep;
}

/// Layer nodes where G attains its maximum and minimum: natural chain endpoints.
inline std::pair<Point, Point> layer_extremes(const FormAssembly& form, Point center, double r, const GreenField& gf) {
  const auto layer = inner_boundary_layer(form, form.space().ball_nodes(center, r));
  if (layer.empty()) fail(ErrorKind::Resolution, "empty boundary layer");
  int hi = layer.front(), lo = layer.front();
  for (int i : layer) {
    if (gf.values[i] > gf.values[hi]) hi = i;
    if (gf.values[i] < gf.values[lo]) lo = i;
  }
  return {form.space().node(hi), form.space().node(lo)};
}

}  // namespace hsg
