#pragma once

// Green-weighted energy decay: psi(r), the Saint-Venant envelope, the weighted
// Caccioppoli inequality and oscillation decay of local solutions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "hsg/constants.hpp"
#include "hsg/dirichlet_form.hpp"
#include "hsg/error.hpp"
#include "hsg/green_capacity.hpp"
#include "hsg/space.hpp"

namespace hsg {

struct DecayConfig {
  Point x0;
  double R0 = 0.0;
  int rungs = 4;             // ladder R0 / 2^(rungs-1), ..., R0
  double q = 1.0 / 6.0;
  double gamma = 0.0;
  int l = 1;
  double normalized_R0 = 1.0 / std::numbers::e;  // R0 is mapped here for the log bounds

  std::vector<double> ladder() const {
    std::vector<double> r;
    for (int k = rungs - 1; k >= 0; --k) r.push_back(R0 / std::pow(2.0, k));
    return r;
  }

  /// Geometric checks; returns false when q r_min < 4h (reported, not fatal).
  bool validate(const SpaceGrid& g) const {
    if (!(q > 0.0 && q <= 1.0 / 6.0 + 1e-15)) fail(ErrorKind::Argument, "q must lie in (0, 1/6]");
    if (!(R0 > 0.0)) fail(ErrorKind::Argument, "R0 must be positive");
    if (!(normalized_R0 > 0.0 && normalized_R0 <= 1.0 / std::numbers::e + 1e-15))
      fail(ErrorKind::Argument, "normalized R0 must lie in (0, 1/e]");
    if (!g.ball_inside(x0, 2 * R0 / q)) fail(ErrorKind::Range, "Green domain 2R0/q leaves the grid");
    return q * ladder().front() >= 4 * g.mesh_size() * (1 - 1e-12);
  }
};

/// Sum over B(x0, r) of G * alpha(u, u).
inline double psi_with(const SpaceGrid& g, const GreenField& gf, std::span<const double> alpha, Point x0, double r) {
  double s = 0.0;
  for (int i : g.ball_nodes(x0, r)) s += gf.values[i] * alpha[i];
  return s;
}

/// psi(r) = int_{B(x0, r)} G_{B(x0, 2r/q)} alpha(u, u), with a fresh Green field (rho = h).
inline double psi(const FormAssembly& form, const DecayConfig& cfg, double r, std::span<const double> u,
                  const SolveOptions& opts = {}) {
  const SpaceGrid& g = form.space();
  if (!g.ball_inside(cfg.x0, 2 * r / cfg.q)) fail(ErrorKind::Range, "Green domain 2r/q leaves the grid");
  const auto gf = green(form, cfg.x0, g.mesh_size(), cfg.x0, 2 * r / cfg.q, opts);
  return psi_with(g, gf, energy_measure(form, u), cfg.x0, r);
}

struct DecayReport {
  std::vector<double> radii;
  std::vector<double> psi_fresh;   // Green field on B(x0, 2r/q) per rung
  std::vector<double> psi_fixed;   // one Green field on B(x0, 2R0/q)
  std::vector<double> osc;
  std::vector<double> mu;          // gamma-free mu(x0, r), c1 clamped below the table
  std::vector<double> e1, e2;      // exp(-int exp(-2 gamma mu)), exp(-int exp(-5 l gamma mu))
  std::vector<double> e2_proof;    // exponent 5 l gamma sup-mu over the annulus
  std::vector<double> c1q;         // c1(q r), clamped
  std::vector<double> envelope;    // with the fitted c
  std::vector<double> log_bound;   // adjacent pairs: log(1/R)/log(1/r), normalized radii
  std::vector<double> pair_ratio;  // psi(r_k) / psi(r_{k+1})
  double fitted_c = 0.0;
  double kappa = 0.0;
  double eta = 0.0;
  double mu_flatness = 1.0;        // max / min of gamma mu over the ladder
  bool resolution_ok = true;       // q r_min >= 4h
  bool clamped = false;            // some c1 below the sampled range
  bool monotone_fixed = false;
  bool envelope_ok = false;
  bool smooth = false;
  bool log_bound_ok = false;
};

namespace detail {

inline double slope(std::span<const double> x, std::span<const double> y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  return sxy / sxx;
}

}  // namespace detail

inline DecayReport saint_venant_check(const FormAssembly& form, const ConstantsProfile& profile,
                                      const DecayConfig& cfg, std::span<const double> u,
                                      const SolveOptions& opts = {}) {
  if (cfg.rungs < 4) fail(ErrorKind::InsufficientData, "Saint-Venant check needs at least four rungs");
  const SpaceGrid& g = form.space();
  form.check_size(u);
  DecayReport rep;
  rep.resolution_ok = cfg.validate(g);
  rep.radii = cfg.ladder();
  const std::size_t ci = profile.center_index(cfg.x0);
  const auto alpha = energy_measure(form, u);
  const double h = g.mesh_size();
  const auto fixed = green(form, cfg.x0, h, cfg.x0, 2 * cfg.R0 / cfg.q, opts);

  for (double r : rep.radii) {
    const auto gf = green(form, cfg.x0, h, cfg.x0, 2 * r / cfg.q, opts);
    rep.psi_fresh.push_back(psi_with(g, gf, alpha, cfg.x0, r));
    rep.psi_fixed.push_back(psi_with(g, fixed, alpha, cfg.x0, r));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i : g.ball_nodes(cfg.x0, r)) lo = std::min(lo, u[i]), hi = std::max(hi, u[i]);
    rep.osc.push_back(hi - lo);
    rep.clamped = rep.clamped || !profile.covers(r / 2) || !profile.covers(cfg.q * r);
    rep.mu.push_back(profile.mu_clamped(ci, r));
    rep.c1q.push_back(profile.c1_clamped(ci, cfg.q * r));
  }
  rep.clamped = rep.clamped || !profile.covers(rep.radii.front() / 4);

  auto mu_at = [&](double rho) { return profile.mu_clamped(ci, rho); };
  auto sup_mu = [&](double rho) { return std::log(profile.s_annulus(ci, rho, cfg.q, 1.0)); };
  const double R0 = cfg.R0;
  for (double r : rep.radii) {
    if (r >= R0 * (1 - 1e-12)) {
      rep.e1.push_back(1.0);
      rep.e2.push_back(1.0);
      rep.e2_proof.push_back(1.0);
      continue;
    }
    rep.e1.push_back(std::exp(-log_trapezoid(r, R0, 32, [&](double s) { return std::exp(-2 * cfg.gamma * mu_at(s)); })));
    rep.e2.push_back(
        std::exp(-log_trapezoid(r, R0, 32, [&](double s) { return std::exp(-5.0 * cfg.l * cfg.gamma * mu_at(s)); })));
    rep.e2_proof.push_back(std::exp(
        -log_trapezoid(r, R0, 32, [&](double s) { return std::exp(-5.0 * cfg.l * cfg.gamma * sup_mu(s)); })));
  }

  const double psiR = rep.psi_fresh.back();
  rep.fitted_c = 0.0;
  for (std::size_t k = 0; k < rep.radii.size(); ++k) {
    const double base = std::pow(rep.c1q[k], 4) * psiR * rep.e1[k];
    if (base > 0.0) rep.fitted_c = std::max(rep.fitted_c, (rep.psi_fresh[k] - rep.e2[k] * psiR) / base);
  }
  rep.envelope_ok = true;
  for (std::size_t k = 0; k < rep.radii.size(); ++k) {
    rep.envelope.push_back(rep.fitted_c * std::pow(rep.c1q[k], 4) * psiR * rep.e1[k] + rep.e2[k] * psiR);
    rep.envelope_ok = rep.envelope_ok && rep.psi_fresh[k] <= rep.envelope[k] * (1 + 1e-12) + 1e-300;
  }

  rep.monotone_fixed = true;
  for (std::size_t k = 0; k + 1 < rep.radii.size(); ++k)
    rep.monotone_fixed = rep.monotone_fixed && rep.psi_fixed[k] <= rep.psi_fixed[k + 1];

  double mu_lo = std::numeric_limits<double>::infinity(), mu_hi = 0.0;
  for (double m : rep.mu) mu_lo = std::min(mu_lo, m), mu_hi = std::max(mu_hi, m);
  rep.mu_flatness = mu_hi / mu_lo;
  rep.smooth = rep.mu_flatness <= 1.1;
  const double scale = cfg.normalized_R0 / R0;
  rep.log_bound_ok = true;
  for (std::size_t k = 0; k + 1 < rep.radii.size(); ++k) {
    const double r = rep.radii[k] * scale, R = rep.radii[k + 1] * scale;
    rep.log_bound.push_back(std::log(1 / R) / std::log(1 / r));
    rep.pair_ratio.push_back(rep.psi_fresh[k] / rep.psi_fresh[k + 1]);
    rep.log_bound_ok = rep.log_bound_ok && rep.pair_ratio.back() <= rep.log_bound.back();
  }

  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < rep.radii.size(); ++k)
    if (rep.psi_fresh[k] > 0.0) lx.push_back(std::log(rep.radii[k])), ly.push_back(std::log(rep.psi_fresh[k]));
  rep.kappa = lx.size() >= 2 ? detail::slope(lx, ly) : 0.0;
  rep.eta = std::exp(-2.0 * cfg.l * cfg.gamma * sup_mu(R0));
  return rep;
}

struct CaccioppoliRow {
  double r = 0.0, q = 0.0;
  double lhs = 0.0;         // int_{B(qr)} G alpha(v, v) + sup_{B(qr)} v^2
  double base = 0.0;        // int_{B(r) - B(qr)} v^2 dm / m(B(r))
  double log_factor = 0.0;  // log of s^(3l) c1^4(qr) s0^18
  double log_ratio = 0.0;   // log(lhs / (base * factor))
  bool clamped = false;
};

/// One Caccioppoli evaluation with a precomputed Green field of B(x0, 2r).
inline CaccioppoliRow caccioppoli_row(const FormAssembly& form, const ConstantsProfile& profile,
                                      const DecayConfig& cfg, double r, const GreenField& gf,
                                      std::span<const double> v) {
  const SpaceGrid& g = form.space();
  form.check_size(v);
  const std::size_t ci = profile.center_index(cfg.x0);
  CaccioppoliRow row;
  row.r = r;
  row.q = cfg.q;
  const auto inner = g.ball_nodes(cfg.x0, cfg.q * r);
  const auto annulus = g.annulus_nodes(cfg.x0, cfg.q * r, r);
  if (annulus.empty() || inner.empty()) fail(ErrorKind::Resolution, "Caccioppoli annulus or inner ball is empty");
  const auto alpha = energy_measure(form, v);
  double sup = 0.0;
  for (int i : inner) {
    row.lhs += gf.values[i] * alpha[i];
    sup = std::max(sup, v[i] * v[i]);
  }
  row.lhs += sup;
  const auto lumped = g.lumped_measure();
  for (int i : annulus) row.base += lumped[i] * v[i] * v[i];
  row.base /= ball_measure(g, cfg.x0, r);
  const double s = profile.s_annulus(ci, r, cfg.q, cfg.gamma);
  const double c1 = profile.c1_clamped(ci, cfg.q * r);
  const double s0 = profile.s0(ci, cfg.q * r);
  row.clamped = !profile.covers(cfg.q * r);
  row.log_factor = 3.0 * cfg.l * std::log(s) + 4.0 * std::log(c1) + 18.0 * std::log(s0);
  row.log_ratio = std::log(row.lhs) - std::log(row.base) - row.log_factor;
  return row;
}

inline GreenField caccioppoli_green(const FormAssembly& form, const DecayConfig& cfg, double r,
                                    const SolveOptions& opts = {}) {
  return green(form, cfg.x0, form.space().mesh_size(), cfg.x0, 2 * r, opts);
}

struct CaccioppoliReport {
  double log_cq = 0.0;  // max log_ratio over the calibration rows
  std::vector<double> radii;
  std::vector<double> log_cq_per_r;
  double spread = 0.0;  // max/min of c_q across r, minus one
  std::vector<bool> held_out_pass;
  bool stable = false;  // spread <= 20%
  bool verdict = false; // stable and every held-out row passes
};

inline CaccioppoliReport caccioppoli_check(std::span<const CaccioppoliRow> calibration,
                                           std::span<const CaccioppoliRow> held_out) {
  if (calibration.empty()) fail(ErrorKind::InsufficientData, "empty Caccioppoli calibration family");
  CaccioppoliReport rep;
  rep.log_cq = -std::numeric_limits<double>::infinity();
  for (const auto& row : calibration) {
    rep.log_cq = std::max(rep.log_cq, row.log_ratio);
    auto it = std::find(rep.radii.begin(), rep.radii.end(), row.r);
    if (it == rep.radii.end()) {
      rep.radii.push_back(row.r);
      rep.log_cq_per_r.push_back(row.log_ratio);
    } else {
      auto& v = rep.log_cq_per_r[it - rep.radii.begin()];
      v = std::max(v, row.log_ratio);
    }
  }
  const auto [lo, hi] = std::minmax_element(rep.log_cq_per_r.begin(), rep.log_cq_per_r.end());
  rep.spread = std::exp(*hi - *lo) - 1.0;
  rep.stable = rep.spread <= 0.2;
  rep.verdict = rep.stable;
  for (const auto& row : held_out) {
    rep.held_out_pass.push_back(row.log_ratio <= rep.log_cq + 1e-12);
    rep.verdict = rep.verdict && rep.held_out_pass.back();
  }
  return rep;
}

struct OscillationTable {
  std::vector<double> radii;
  std::vector<double> osc;
  std::vector<double> normalized;  // radii mapped so the largest is 1/e
  double c = 0.0;                  // max osc(r) log(1/r) / (osc(R) log(1/R))
};

inline OscillationTable oscillation_decay(const SpaceGrid& g, Point center, std::span<const double> radii,
                                          std::span<const double> u, double normalized_R = 1.0 / std::numbers::e) {
  if (radii.empty()) fail(ErrorKind::Argument, "no radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) fail(ErrorKind::Argument, "radii must increase");
  OscillationTable t;
  t.radii.assign(radii.begin(), radii.end());
  const double scale = normalized_R / radii.back();
  for (double r : radii) {
    g.require_ball(center, r);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i : g.ball_nodes(center, r)) lo = std::min(lo, u[i]), hi = std::max(hi, u[i]);
    t.osc.push_back(hi > lo ? hi - lo : 0.0);
    t.normalized.push_back(r * scale);
  }
  const double oR = t.osc.back(), lR = std::log(1 / t.normalized.back());
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (oR > 0.0) t.c = std::max(t.c, t.osc[k] * std::log(1 / t.normalized[k]) / (oR * lR));
  return t;
}

}  // namespace hsg
