#pragma once

// Scale-dependent characteristic constants: the Poincare constant c1(r) from
// the Neumann eigenvalue of a ball, Sobolev ratio checks, and the derived
// profiles mu(x, r) = tau^4(x) c1(r/2), s(x0, r) and s0(x0).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "hsg/dirichlet_form.hpp"
#include "hsg/error.hpp"
#include "hsg/linsolve.hpp"
#include "hsg/space.hpp"

namespace hsg {

struct PoincareResult {
  double c1 = 0.0;
  double lambda1 = 0.0;
  std::vector<int> nodes;           // B(center, R)
  std::vector<int> energy_nodes;    // B(center, kR)
  std::vector<double> eigenvector;  // on energy_nodes
};

/// c1(R) = 1 / (R sqrt(lambda1)), lambda1 the smallest nonzero eigenvalue of
/// K|_{B(kR)} u = lambda M|_{B(R)} u with K built from edges inside B(kR).
inline PoincareResult poincare_constant(const FormAssembly& form, Point center, double R, double k = 1.0,
                                        const SolveOptions& opts = {}) {
  if (!(k >= 1.0)) fail(ErrorKind::Argument, "Poincare enlargement k must be >= 1");
  const SpaceGrid& g = form.space();
  PoincareResult out;
  out.nodes = g.ball_nodes(center, R);
  out.energy_nodes = k == 1.0 ? out.nodes : g.ball_nodes(center, k * R);
  auto [K, M] = neumann_block(form, out.energy_nodes);
  if (k != 1.0) {
    const auto in = node_mask(g.node_count(), out.nodes);
    for (std::size_t i = 0; i < out.energy_nodes.size(); ++i)
      if (!in[out.energy_nodes[i]]) M[i] = 0.0;
  }
  const auto ep = smallest_nonzero_eigenpair(K, M, opts);
  out.lambda1 = ep.lambda;
  out.c1 = 1.0 / (R * std::sqrt(ep.lambda));
  out.eigenvector = ep.vector;
  return out;
}

/// Variance / energy ratios for the Poincare inequality on B(center, R).
struct PoincareCheck {
  double max_ratio = 0.0;          // max over random fields of variance / (c1^2 R^2 energy)
  double eigenfunction_ratio = 0.0;
  bool verdict = false;            // every random ratio <= 1, eigenfunction within 1% of equality
};

inline PoincareCheck poincare_direct_check(const FormAssembly& form, Point center, double R,
                                           const PoincareResult& pr, int trials, std::uint64_t seed) {
  const auto [K, M] = neumann_block(form, pr.energy_nodes);
  const auto in = node_mask(form.node_count(), pr.nodes);
  std::vector<double> Mr(M);
  for (std::size_t i = 0; i < pr.energy_nodes.size(); ++i)
    if (!in[pr.energy_nodes[i]]) Mr[i] = 0.0;
  const double mass = std::accumulate(Mr.begin(), Mr.end(), 0.0);
  const double scale = pr.c1 * pr.c1 * R * R;
  auto ratio = [&](std::vector<double> u) {
    const double mean = dot(u, Mr) / mass;
    double var = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) var += Mr[i] * (u[i] - mean) * (u[i] - mean);
    const auto Ku = K * u;
    return var / (scale * dot(u, Ku));
  };
  PoincareCheck chk;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const SpaceGrid& g = form.space();
  for (int t = 0; t < trials; ++t) {
    // Alternate rough fields and smooth random trigonometric fields.
    std::vector<double> u(pr.energy_nodes.size());
    if (t % 2 == 0) {
      for (double& v : u) v = uni(rng);
    } else {
      const double a = uni(rng) * 3, b = uni(rng) * 3, c = uni(rng) * 6, ph = uni(rng) * 3;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const Point p = g.node(pr.energy_nodes[i]);
        u[i] = std::sin(a * (p.x - center.x) / R + b * (p.y - center.y) / R + ph) + c * (p.x - center.x) / R;
      }
    }
    chk.max_ratio = std::max(chk.max_ratio, ratio(std::move(u)));
  }
  chk.eigenfunction_ratio = ratio(pr.eigenvector);
  chk.verdict = chk.max_ratio <= 1.0 + 1e-9 && std::abs(chk.eigenfunction_ratio - 1.0) <= 0.01;
  return chk;
}

/// Default Sobolev exponent: 2 nu / (nu - 2) for nu > 2, else 4.
inline double default_sobolev_exponent(double nu_hat) { return nu_hat > 2.0 ? 2.0 * nu_hat / (nu_hat - 2.0) : 4.0; }

struct SobolevReport {
  double exponent = 0.0;
  std::vector<double> ratios;
  double max_ratio = 0.0;
  double slack_multiplier = 1.0;  // max(1, max_ratio): fitted global multiplier
  bool verdict = false;           // max_ratio <= 1
};

/// Ratio [avg_B |u|^s]^(1/s) / [tau^3 c1(R) R (int_B alpha(u,u))^(1/2)] over
/// trial fields supported in B(center, R).
inline SobolevReport sobolev_check(const FormAssembly& form, Point center, double R, double s, double tau,
                                   double c1, int trials, std::uint64_t seed) {
  if (!(s > 2.0)) fail(ErrorKind::Argument, "Sobolev exponent must exceed 2");
  const SpaceGrid& g = form.space();
  const auto ball = g.ball_nodes(center, R);
  const double mB = g.measure_of(ball);
  const auto lumped = g.lumped_measure();
  std::vector<double> dist(ball.size());
  for (std::size_t i = 0; i < ball.size(); ++i) dist[i] = g.distance(center, g.node(ball[i]));

  SobolevReport rep;
  rep.exponent = s;
  auto ratio = [&](const std::vector<double>& u) {
    double lp = 0.0;
    for (int i : ball) lp += lumped[i] * std::pow(std::abs(u[i]), s);
    lp = std::pow(lp / mB, 1.0 / s);
    const auto alpha = energy_measure(form, u);
    double e = 0.0;
    for (int i : ball) e += alpha[i];
    return lp / (tau * tau * tau * c1 * R * std::sqrt(e));
  };
  auto bump = [&](double inner) {
    std::vector<double> u(g.node_count(), 0.0);
    for (std::size_t i = 0; i < ball.size(); ++i)
      u[ball[i]] = std::clamp((R - dist[i]) / (R - inner), 0.0, 1.0);
    return u;
  };
  rep.ratios.push_back(ratio(bump(R / 2)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int t = 1; t < trials; ++t) {
    auto u = bump(R * uni(rng) * 0.8);
    std::vector<double> noise(g.node_count(), 0.0);
    for (int i : ball) noise[i] = uni(rng);
    // A few neighbour-averaging sweeps smooth the noise.
    const int sweeps = 1 + t % 4;
    for (int k = 0; k < sweeps; ++k) {
      std::vector<double> next(noise);
      for (int i : ball) {
        double acc = noise[i];
        int cnt = 1;
        g.for_each_neighbor(i, [&](int j) { acc += noise[j], ++cnt; });
        next[i] = acc / cnt;
      }
      noise.swap(next);
    }
    for (int i : ball) u[i] *= 0.5 + noise[i];
    rep.ratios.push_back(ratio(u));
  }
  rep.max_ratio = *std::max_element(rep.ratios.begin(), rep.ratios.end());
  rep.slack_multiplier = std::max(1.0, rep.max_ratio);
  rep.verdict = rep.max_ratio <= 1.0;
  return rep;
}

/// Pool-adjacent-violators projection onto nonincreasing sequences.
inline std::vector<double> isotonic_nonincreasing(std::span<const double> v) {
  struct Block {
    double sum;
    int count;
  };
  std::vector<Block> blocks;
  for (double x : v) {
    blocks.push_back({x, 1});
    while (blocks.size() > 1) {
      const Block& b = blocks.back();
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum / a.count >= b.sum / b.count) break;
      Block merged{a.sum + b.sum, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.sum / b.count);
  return out;
}

/// Raw c1 measurements per (center, radius).
struct C1Table {
  std::vector<Point> centers;
  std::vector<double> radii;  // increasing
  std::vector<std::vector<double>> c1;
  std::vector<std::vector<double>> lambda1;
};

inline C1Table measure_c1_table(const FormAssembly& form, std::span<const Point> centers, std::span<const double> radii,
                                double k = 1.0, const SolveOptions& opts = {}) {
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) fail(ErrorKind::Argument, "c1 radii must increase");
  C1Table t;
  t.centers.assign(centers.begin(), centers.end());
  t.radii.assign(radii.begin(), radii.end());
  for (const Point& c : centers) {
    std::vector<double> c1, lam;
    for (double r : radii) {
      const auto pr = poincare_constant(form, c, r, k, opts);
      c1.push_back(pr.c1);
      lam.push_back(pr.lambda1);
    }
    t.c1.push_back(std::move(c1));
    t.lambda1.push_back(std::move(lam));
  }
  return t;
}

/// Tabulated constants at the sampled centers.
class ConstantsProfile {
 public:
  ConstantsProfile() = default;
  ConstantsProfile(C1Table table, std::vector<double> tau, MetricKind metric)
      : table_(std::move(table)), tau_(std::move(tau)), metric_(metric) {
    if (tau_.size() != table_.centers.size()) fail(ErrorKind::Argument, "tau and c1 tables disagree");
    for (const auto& row : table_.c1) {
      auto iso = isotonic_nonincreasing(row);
      double worst = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, (row[i] - iso[i]) / iso[i]);
      worst = std::max(worst, 0.0);
      for (std::size_t i = 0; i < row.size(); ++i) worst = std::max(worst, (iso[i] - row[i]) / iso[i]);
      violation_ = std::max(violation_, worst);
      c1_.push_back(std::move(iso));
    }
  }

  const C1Table& table() const { return table_; }
  std::span<const double> tau() const { return tau_; }
  std::span<const double> c1_row(std::size_t center) const { return c1_.at(center); }
  /// Largest relative change made by the isotonic projection.
  double monotonicity_violation() const { return violation_; }

  std::size_t center_index(Point x) const {
    for (std::size_t i = 0; i < table_.centers.size(); ++i)
      if (std::abs(table_.centers[i].x - x.x) < 1e-12 && std::abs(table_.centers[i].y - x.y) < 1e-12) return i;
    fail(ErrorKind::Dependency, "point is not a profiled center");
  }

  /// Isotonic c1 interpolated linearly in log r; only inside the sampled range.
  double c1(std::size_t center, double r) const {
    const auto& radii = table_.radii;
    const double tol = 1e-9 * radii.back();
    if (radii.empty() || r < radii.front() - tol || r > radii.back() + tol)
      fail(ErrorKind::Range, "c1 requested outside the sampled radius range");
    const auto& row = c1_.at(center);
    if (radii.size() == 1 || r <= radii.front()) return row.front();
    if (r >= radii.back()) return row.back();
    const auto it = std::upper_bound(radii.begin(), radii.end(), r);
    const std::size_t j = it - radii.begin();
    const double t = (std::log(r) - std::log(radii[j - 1])) / (std::log(radii[j]) - std::log(radii[j - 1]));
    return row[j - 1] + t * (row[j] - row[j - 1]);
  }

  /// c1 with radii below the sampled range clamped to the smallest sampled radius.
  /// Since c1 is nonincreasing, this is a lower bound for the true value.
  double c1_clamped(std::size_t center, double r) const {
    return c1(center, std::clamp(r, table_.radii.front(), table_.radii.back()));
  }

  double mu(std::size_t center, double r) const {
    const double t = tau_.at(center);
    return t * t * t * t * c1(center, r / 2);
  }

  double mu_clamped(std::size_t center, double r) const {
    const double t = tau_.at(center);
    return t * t * t * t * c1_clamped(center, r / 2);
  }

  bool covers(double r) const {
    const double tol = 1e-9 * table_.radii.back();
    return r >= table_.radii.front() - tol && r <= table_.radii.back() + tol;
  }

  /// s(x0, r) = sup over profiled z in B(x0, r) \ B(x0, q r) of exp(gamma mu(z, r)).
  /// Falls back to x0 itself when no profiled center lies in the annulus; mu is clamped.
  double s_annulus(std::size_t x0, double r, double q, double gamma) const {
    const Point c = table_.centers.at(x0);
    double best = -1.0;
    for (std::size_t z = 0; z < table_.centers.size(); ++z) {
      const double d = metric_distance(metric_, c, table_.centers[z]);
      if (d >= q * r && d < r) best = std::max(best, std::exp(gamma * mu_clamped(z, r)));
    }
    return best > 0.0 ? best : std::exp(gamma * mu_clamped(x0, r));
  }

  /// s0(x0) = sup over profiled z in B(x0, radius) of tau(z); x0 always counts.
  double s0(std::size_t x0, double radius) const {
    const Point c = table_.centers.at(x0);
    double best = tau_.at(x0);
    for (std::size_t z = 0; z < table_.centers.size(); ++z)
      if (metric_distance(metric_, c, table_.centers[z]) < radius) best = std::max(best, tau_[z]);
    return best;
  }

 private:
  C1Table table_;
  std::vector<std::vector<double>> c1_;
  std::vector<double> tau_;
  MetricKind metric_ = MetricKind::Euclidean;
  double violation_ = 0.0;
};

/// Combines the doubling report (tau) with a c1 table.
inline ConstantsProfile mu_profile(const DoublingReport& doubling, C1Table c1_table) {
  std::vector<double> tau;
  for (const Point& c : c1_table.centers) tau.push_back(doubling.tau_at(c));
  return ConstantsProfile(std::move(c1_table), std::move(tau), doubling.metric);
}

}  // namespace hsg
