#pragma once

// Regularized Green functions, condenser capacities with their equilibrium
// potentials and measures, and the two-sided estimates built on them.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "hsg/constants.hpp"
#include "hsg/dirichlet_form.hpp"
#include "hsg/error.hpp"
#include "hsg/linsolve.hpp"
#include "hsg/space.hpp"

namespace hsg {

struct GreenField {
  Point pole;
  double rho = 0.0;
  Point center;       // domain ball B(center, radius)
  double radius = 0.0;
  std::vector<double> values;
  std::vector<int> source;  // nodes of B(pole, rho)
  double source_measure = 0.0;
  int iterations = 0;
};

/// G solves K G = b on the nodes of B(center, radius), G = 0 elsewhere, with
/// b_i = M_i / m(B(pole, rho)) on B(pole, rho).
inline GreenField green(const FormAssembly& form, Point pole, double rho, Point center, double radius,
                        const SolveOptions& opts = {}) {
  const SpaceGrid& g = form.space();
  g.require_ball(center, radius, "Green domain");
  if (!(rho >= g.mesh_size() * (1 - 1e-12))) fail(ErrorKind::Geometry, "smoothing radius below the mesh size");
  if (!(rho < radius)) fail(ErrorKind::Geometry, "smoothing ball larger than the Green domain");
  if (!g.inside(pole)) fail(ErrorKind::Geometry, "pole outside the grid");
  GreenField out;
  out.pole = pole;
  out.rho = rho;
  out.center = center;
  out.radius = radius;
  out.source = g.ball_nodes(pole, rho);
  if (out.source.empty()) fail(ErrorKind::Geometry, "smoothing ball contains no node");
  const auto domain = g.ball_nodes(center, radius);
  const auto in = node_mask(g.node_count(), domain);
  for (int i : out.source)
    if (!in[i]) fail(ErrorKind::Geometry, "smoothing ball leaves the Green domain");
  out.source_measure = g.measure_of(out.source);
  if (!(out.source_measure > 0.0)) fail(ErrorKind::DegenerateMeasure, "smoothing ball has zero measure");

  const auto lumped = g.lumped_measure();
  std::vector<double> b(g.node_count(), 0.0);
  for (int i : out.source) b[i] = lumped[i] / out.source_measure;
  std::vector<double> zero(g.node_count(), 0.0);
  SolveResult stats;
  out.values = solve_dirichlet(form, domain, zero, b, opts, &stats);
  out.iterations = stats.iterations;
  return out;
}

/// Nodes of `nodes` joined by a positive-weight edge to a node outside it.
inline std::vector<int> inner_boundary_layer(const FormAssembly& form, std::span<const int> nodes) {
  const auto in = node_mask(form.node_count(), nodes);
  std::vector<int> out;
  for (int i : nodes) {
    for (int e_id : form.incident(i)) {
      const Edge& e = form.edges()[e_id];
      if (e.weight > 0.0 && !in[e.a == i ? e.b : e.a]) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

struct CapacityResult {
  Point center;
  double r = 0.0;
  double d = 0.0;
  double capacity = 0.0;
  std::vector<double> potential;          // u_B on all nodes
  std::vector<int> inner;                 // nodes of B(center, r)
  std::vector<double> equilibrium;        // nu_B on `inner`
  std::vector<int> support;               // inner nodes with nu_B > 0
  int iterations = 0;
};

/// Equilibrium potential of B(center, r) in B(center, d r): harmonic on the
/// annulus, 1 on the inner ball, 0 outside. nu_B = (K u_B) on the inner ball.
inline CapacityResult capacity(const FormAssembly& form, Point center, double r, double d,
                               const SolveOptions& opts = {}) {
  const SpaceGrid& g = form.space();
  if (!(d > 1.0)) fail(ErrorKind::Argument, "dilation must exceed 1");
  g.require_ball(center, d * r, "condenser");
  if (r < 4.0 * g.mesh_size() * (1 - 1e-12)) fail(ErrorKind::Resolution, "inner radius below four cells");
  CapacityResult out;
  out.center = center;
  out.r = r;
  out.d = d;
  out.inner = g.ball_nodes(center, r);
  const auto annulus = g.annulus_nodes(center, r, d * r);
  if (annulus.empty() || out.inner.empty()) fail(ErrorKind::Resolution, "condenser annulus has no interior node");
  std::vector<double> fixed(g.node_count(), 0.0);
  for (int i : out.inner) fixed[i] = 1.0;
  SolveResult stats;
  out.potential = solve_dirichlet(form, annulus, fixed, {}, opts, &stats);
  out.iterations = stats.iterations;

  const auto Ku = form.apply(out.potential);
  out.capacity = form.energy(out.potential);
  out.equilibrium.reserve(out.inner.size());
  double total = 0.0;
  for (int i : out.inner) {
    out.equilibrium.push_back(Ku[i]);
    total += Ku[i];
  }
  const double floor = 1e-12 * std::abs(total);
  for (std::size_t k = 0; k < out.inner.size(); ++k) {
    if (out.equilibrium[k] < -1e-10 * std::abs(total))
      fail(ErrorKind::Numeric, "equilibrium measure has a negative atom");
    if (out.equilibrium[k] > floor) out.support.push_back(out.inner[k]);
  }
  if (out.support.empty()) fail(ErrorKind::Resolution, "equilibrium measure has empty support");
  return out;
}

struct DualityReport {
  double pairing = 0.0;  // <nu_B, G_rho>
  double inf_g = 0.0;    // over supp nu_B
  double sup_g = 0.0;
  double inv_capacity = 0.0;
  bool pairing_ok = false;
  bool bracket_ok = false;
  bool verdict = false;
};

inline DualityReport verify_duality(const FormAssembly& form, const CapacityResult& cap, const GreenField& gf) {
  const SpaceGrid& g = form.space();
  auto same = [](Point a, Point b) { return std::abs(a.x - b.x) < 1e-12 && std::abs(a.y - b.y) < 1e-12; };
  if (!same(gf.center, cap.center) || !same(gf.pole, cap.center) ||
      std::abs(gf.radius - cap.d * cap.r) > 1e-12 * gf.radius)
    fail(ErrorKind::Argument, "Green domain does not match the condenser");
  if (!(gf.rho < cap.r / 2)) fail(ErrorKind::Argument, "smoothing radius must be below r/2");
  if (static_cast<int>(gf.values.size()) != g.node_count()) fail(ErrorKind::Argument, "Green field size mismatch");

  DualityReport rep;
  for (std::size_t k = 0; k < cap.inner.size(); ++k) rep.pairing += cap.equilibrium[k] * gf.values[cap.inner[k]];
  rep.inf_g = std::numeric_limits<double>::infinity();
  rep.sup_g = -rep.inf_g;
  for (int i : cap.support) {
    rep.inf_g = std::min(rep.inf_g, gf.values[i]);
    rep.sup_g = std::max(rep.sup_g, gf.values[i]);
  }
  rep.inv_capacity = 1.0 / cap.capacity;
  const double slack = 1e-9 * rep.inv_capacity;
  rep.pairing_ok = std::abs(rep.pairing - 1.0) <= 1e-6;
  rep.bracket_ok = rep.inf_g <= rep.inv_capacity + slack && rep.inv_capacity <= rep.sup_g + slack;
  rep.verdict = rep.pairing_ok && rep.bracket_ok;
  return rep;
}

/// Two-sided capacity estimate for one condenser.
struct CapacityBoundsRow {
  Point center;
  double r = 0.0, d = 0.0;
  double inv_capacity = 0.0;
  double ball_measure = 0.0;
  double lower_base = 0.0;  // (d-1)^2 c0 r^2 / m(B): lower bound is c times this
  double upper = 0.0;       // d^2 r^2 c1(r)^2 tau^6 / m(B)
  double c_hat = 0.0;       // inv_capacity / lower_base
  double lower_limit = 0.0; // 1 / (40 d^nu)
  bool lower_ok = false;
  bool upper_ok = false;
};

inline CapacityBoundsRow capacity_bounds_row(const FormAssembly& form, const DoublingReport& doubling,
                                             const ConstantsProfile& profile, const CapacityResult& cap) {
  if (profile.table().centers.empty()) fail(ErrorKind::Dependency, "constants profile is empty");
  const SpaceGrid& g = form.space();
  const std::size_t ci = profile.center_index(cap.center);
  CapacityBoundsRow row;
  row.center = cap.center;
  row.r = cap.r;
  row.d = cap.d;
  row.inv_capacity = 1.0 / cap.capacity;
  row.ball_measure = ball_measure(g, cap.center, cap.r);
  const double c0 = doubling.c0_at(cap.center), tau = doubling.tau_at(cap.center);
  const double c1 = profile.c1(ci, cap.r);
  row.lower_base = (cap.d - 1) * (cap.d - 1) * c0 * cap.r * cap.r / row.ball_measure;
  row.upper = cap.d * cap.d * cap.r * cap.r * c1 * c1 * std::pow(tau, 6) / row.ball_measure;
  row.c_hat = row.inv_capacity / row.lower_base;
  row.lower_limit = 1.0 / (40.0 * std::pow(cap.d, doubling.nu_hat));
  row.lower_ok = row.c_hat >= row.lower_limit;
  row.upper_ok = row.inv_capacity <= row.upper * (1 + 1e-12);
  return row;
}

struct CapacityBoundsReport {
  std::vector<CapacityBoundsRow> rows;
  double fitted_c = 0.0;  // largest c with c * lower_base <= 1/cap on every row
  bool verdict = false;
};

inline CapacityBoundsReport capacity_bounds_check(std::vector<CapacityBoundsRow> rows) {
  if (rows.empty()) fail(ErrorKind::InsufficientData, "no capacity rows");
  CapacityBoundsReport rep;
  rep.fitted_c = std::numeric_limits<double>::infinity();
  rep.verdict = true;
  for (const auto& r : rows) {
    rep.fitted_c = std::min(rep.fitted_c, r.c_hat);
    rep.verdict = rep.verdict && r.lower_ok && r.upper_ok;
  }
  rep.rows = std::move(rows);
  return rep;
}

/// Size of the Green function of B(pole, R) on the layer of B(pole, r).
struct GreenSizeReport {
  Point pole;
  double r = 0.0, R = 0.0, gamma = 0.0;
  int l = 0;
  double lower = 0.0;
  double upper = 0.0;
  double kernel = 0.0;  // int_r^R s^2 / m(B(pole, s)) ds/s
  double g_min = 0.0, g_max = 0.0;
  std::vector<int> layer;
  bool verdict = false;
};

/// Trapezoid rule in log s on a geometric grid of `points` nodes.
template <class F>
double log_trapezoid(double a, double b, int points, F&& f) {
  if (points < 2) fail(ErrorKind::Argument, "quadrature needs two points");
  const double la = std::log(a), lb = std::log(b), step = (lb - la) / (points - 1);
  double acc = 0.0;
  for (int k = 0; k < points; ++k) {
    const double w = (k == 0 || k == points - 1) ? 0.5 : 1.0;
    acc += w * f(std::exp(la + k * step));
  }
  return acc * step;
}

inline GreenSizeReport green_size_bounds(const FormAssembly& form, const DoublingReport& doubling,
                                         const ConstantsProfile& profile, Point pole, double r, double R,
                                         double gamma, int l, int points = 32, const SolveOptions& opts = {}) {
  if (!(r > 0.0) || r > R / 16 * (1 + 1e-12)) fail(ErrorKind::Argument, "inner radius must lie in (0, R/16]");
  if (!(gamma >= 0.0) || l < 1) fail(ErrorKind::Argument, "gamma must be nonnegative and l positive");
  const SpaceGrid& g = form.space();
  const std::size_t ci = profile.center_index(pole);
  const double c0 = doubling.c0_at(pole), tau = doubling.tau_at(pole);
  const double c1r = profile.c1(ci, r);

  GreenSizeReport rep;
  rep.pole = pole;
  rep.r = r;
  rep.R = R;
  rep.gamma = gamma;
  rep.l = l;
  auto base = [&](double s) { return s * s / ball_measure(g, pole, s); };
  rep.kernel = log_trapezoid(r, R, points, base);
  rep.lower = log_trapezoid(r, R, points, [&](double s) {
    return c0 * std::exp(-l * gamma * profile.mu(ci, s)) * base(s);
  });
  rep.upper = log_trapezoid(r, R, points, [&](double s) {
    return std::pow(tau, 6) * c1r * c1r * std::exp(l * gamma * profile.mu(ci, s)) * base(s);
  });

  const auto gf = green(form, pole, g.mesh_size(), pole, R, opts);
  rep.layer = inner_boundary_layer(form, g.ball_nodes(pole, r));
  if (rep.layer.empty()) fail(ErrorKind::Resolution, "empty boundary layer");
  rep.g_min = std::numeric_limits<double>::infinity();
  rep.g_max = 0.0;
  for (int i : rep.layer) {
    rep.g_min = std::min(rep.g_min, gf.values[i]);
    rep.g_max = std::max(rep.g_max, gf.values[i]);
  }
  rep.verdict = rep.lower <= rep.g_min && rep.g_max <= rep.upper;
  return rep;
}

/// max |a(G, v) - avg_{B(pole, rho)} v| over random v vanishing outside the domain.
inline double green_identity_error(const FormAssembly& form, const GreenField& gf, int samples, std::uint64_t seed) {
  const SpaceGrid& g = form.space();
  const auto domain = g.ball_nodes(gf.center, gf.radius);
  const auto lumped = g.lumped_measure();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < samples; ++t) {
    std::vector<double> v(g.node_count(), 0.0);
    for (int i : domain) v[i] = uni(rng);
    double avg = 0.0;
    for (int i : gf.source) avg += lumped[i] * v[i];
    avg /= gf.source_measure;
    worst = std::max(worst, std::abs(form.bilinear(gf.values, v) - avg));
  }
  return worst;
}

}  // namespace hsg
