#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "hsg/covering_harnack.hpp"

using namespace hsg;

namespace {

void expect_chain_properties(const SpaceGrid& g, const BallChain& ch) {
  for (std::size_t k = 0; k + 1 < ch.chain.size(); ++k)
    EXPECT_LT(g.distance(ch.net[ch.chain[k]], ch.net[ch.chain[k + 1]]), ch.r / 4);
  for (const Point& c : ch.net) EXPECT_GT(g.distance(ch.center, c), ch.r / 2);
  // Coverage re-checked by brute force.
  for (int i : ch.annulus) {
    bool covered = false;
    for (const Point& c : ch.net) covered = covered || g.distance(c, g.node(i)) < ch.r / 16;
    EXPECT_TRUE(covered);
  }
}

}  // namespace

TEST(Chain, AntipodalEndpointsInEuclideanAnnulus) {
  SpaceGrid g(2, 1.0, 128);
  const double r = 0.2;
  const auto ch = build_chain(g, {0, 0}, r, {r, 0}, {-r, 0});
  EXPECT_GT(ch.l, 2);
  EXPECT_EQ(ch.ball_radius, r / 8);
  expect_chain_properties(g, ch);
  const auto same = build_chain(g, {0, 0}, r, {r, 0}, {r, 0});
  EXPECT_EQ(same.l, 1);
}

TEST(Chain, LengthStableUnderMeshHalving) {
  const double r = 0.125;
  SpaceGrid coarse(2, 1.0, 128), fine(2, 1.0, 256);
  const auto a = build_chain(coarse, {0, 0}, r, {r, 0}, {-r, 0});
  const auto b = build_chain(fine, {0, 0}, r, {r, 0}, {-r, 0});
  EXPECT_LE(std::abs(a.l - b.l), 2);
}

TEST(Chain, GrushinAnnulusOffTheDegeneracyLine) {
  SpaceGrid g(2, 1.0, 128, MetricKind::Grushin);
  const Point c{0.5, 0};
  const double r = 0.1;
  const auto ch = build_chain(g, c, r, {0.5 + r, 0}, {0.5 - r, 0});
  expect_chain_properties(g, ch);
  EXPECT_GE(ch.l, 2);
}

TEST(Chain, Errors) {
  SpaceGrid g(2, 1.0, 64);
  EXPECT_THROW(build_chain(g, {0, 0}, 0.2, {0.05, 0}, {0.2, 0}), Error);
  SpaceGrid line(1, 1.0, 256);
  try {
    build_chain(line, {0, 0}, 0.2, {0.2, 0}, {-0.2, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Connectivity);
  }
}

TEST(Chain, ClosedFormLengthReportedAlongside) {
  SpaceGrid g(2, 1.0, 64);
  const std::vector<Point> centers{{0, 0}};
  const auto dbl = estimate_doubling(g, centers, std::vector<double>{0.0625, 0.125, 0.25, 0.5});
  const auto ch = build_chain(g, dbl, {0, 0}, 0.2, {0.2, 0}, {-0.2, 0});
  EXPECT_NEAR(ch.formula_l, dbl.sup_inv_c0() * std::pow(16.0, -dbl.nu_hat), 1e-15);
  EXPECT_LT(ch.formula_l, 1.0);
}

TEST(Harnack, LaplacianWorstRatioBelowPoissonBound) {
  SpaceGrid g(2, 1.0, 128);
  const auto form = assemble(g, OperatorSpec::laplacian());
  for (double r : {0.125, 0.25}) {
    const auto row = measure_harnack(form, {0, 0}, r, 16, 5);
    EXPECT_GE(row.ratio, 1.0);
    EXPECT_LE(row.ratio, 9 * (1 + 5 * g.mesh_size() / r));
    EXPECT_EQ(row.filtered, 0);
    EXPECT_GE(row.point_mass_ratio, row.random_ratio);
    // Poisson ratio ((R + rho) / (R - rho))^2 with the outermost half-ball node
    // and the stencil boundary radius.
    double rho = 0.0;
    for (int i : g.ball_nodes({0, 0}, r / 2)) rho = std::max(rho, euclidean_norm(g.node(i)));
    const double R = r + g.mesh_size();
    EXPECT_GE(row.point_mass_ratio, 0.9 * std::pow((R + rho) / (R - rho), 2));
  }
}

TEST(Harnack, IntervalPointMassScanIsExact) {
  SpaceGrid g(1, 1.0, 256);
  const auto form = assemble(g, OperatorSpec::laplacian());
  const double h = g.mesh_size(), r = 0.25;
  double rb = 0.0, xh = 0.0;
  for (int i : g.ball_nodes({0, 0}, r)) rb = std::max(rb, std::abs(g.node(i).x) + h);
  for (int i : g.ball_nodes({0, 0}, r / 2)) xh = std::max(xh, std::abs(g.node(i).x));
  const auto row = measure_harnack(form, {0, 0}, r, 4, 1);
  EXPECT_EQ(row.probes, 2);
  EXPECT_NEAR(row.point_mass_ratio, (rb + xh) / (rb - xh), 1e-8);
  EXPECT_DOUBLE_EQ(row.ratio, std::max(row.random_ratio, row.point_mass_ratio));
}

TEST(Harnack, ConstantAndScaledData) {
  SpaceGrid g(2, 1.0, 64);
  const auto form = assemble(g, OperatorSpec::grushin());
  const auto ball = g.ball_nodes({0.3, 0}, 0.2);
  const auto half = g.ball_nodes({0.3, 0}, 0.1);
  auto ratio = [&](const std::vector<double>& b) {
    const auto u = solve_local(form, ball, b);
    double lo = 1e300, hi = 0;
    for (int i : half) lo = std::min(lo, u[i]), hi = std::max(hi, u[i]);
    return hi / lo;
  };
  EXPECT_NEAR(ratio(std::vector<double>(g.node_count(), 2.0)), 1.0, 1e-9);
  std::vector<double> b(g.node_count());
  for (int i = 0; i < g.node_count(); ++i) b[i] = 1.0 + std::sin(5.0 * i);
  std::vector<double> b3(b);
  for (double& v : b3) v *= 3.0;
  EXPECT_NEAR(ratio(b) / ratio(b3), 1.0, 1e-9);
}

TEST(FitGamma, MaxFitAndIdempotence) {
  std::vector<HarnackRow> rows;
  for (int c = 0; c < 2; ++c)
    for (int k = 0; k < 4; ++k) rows.push_back({{0.1 * c, 0}, 0.1 * (k + 1), 2.0 + k + c, 0.5 + 0.1 * k});
  const auto fit = fit_gamma(rows);
  double worst = 0;
  for (const auto& r : rows) worst = std::max(worst, std::log(r.ratio) / r.mu);
  EXPECT_DOUBLE_EQ(fit.gamma, worst);
  for (const auto& r : rows) EXPECT_LE(r.ratio, std::exp(fit.gamma * r.mu) * (1 + 1e-12));
  auto doubled = rows;
  doubled.insert(doubled.end(), rows.begin(), rows.end());
  EXPECT_EQ(fit_gamma(doubled).gamma, fit.gamma);
  EXPECT_LE(held_out_excess(fit, rows), 1.0 + 1e-12);
}

TEST(FitGamma, Errors) {
  std::vector<HarnackRow> rows(8, HarnackRow{{0, 0}, 0.1, 2.0, 0.5});
  EXPECT_THROW(fit_gamma(std::vector<HarnackRow>(rows.begin(), rows.begin() + 7)), Error);
  EXPECT_THROW(fit_gamma(rows), Error);  // one scale, one center
  for (int k = 0; k < 8; ++k) rows[k] = {{0.1 * (k % 2), 0}, 0.1 * (1 + k % 3), 2.0, 0.5};
  rows[3].mu = 0.0;
  try {
    fit_gamma(rows);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidConstants);
  }
}

TEST(ChainedBound, LaplacianLayerIsNearlySymmetric) {
  SpaceGrid g(2, 1.0, 128);
  const auto form = assemble(g, OperatorSpec::laplacian());
  const double r = 0.125;
  const auto gf = green(form, {0, 0}, g.mesh_size(), {0, 0}, 2 * r);
  const auto [hi, lo] = layer_extremes(form, {0, 0}, r, gf);
  const auto ch = build_chain(g, {0, 0}, r, hi, lo);
  const auto rep = chained_bound_check(form, ch, gf, 1.0, std::log(9.0));
  EXPECT_LE(rep.ratio, 1.5);
  EXPECT_TRUE(rep.verdict);
  // Monotone in l.
  auto longer = ch;
  longer.l += 3;
  EXPECT_TRUE(chained_bound_check(form, longer, gf, 1.0, std::log(9.0)).verdict);
}

TEST(ChainedBound, IntervalLayerIsSymmetric) {
  SpaceGrid g(1, 1.0, 512);
  const auto form = assemble(g, OperatorSpec::laplacian());
  const double r = 0.125;
  const auto gf = green(form, {0, 0}, g.mesh_size(), {0, 0}, 2 * r);
  const auto [hi, lo] = layer_extremes(form, {0, 0}, r, gf);
  const auto ch = build_chain(g, {0, 0}, r, hi, hi);
  const auto rep = chained_bound_check(form, ch, gf, 1.0, 1.0);
  EXPECT_NEAR(rep.ratio, 1.0, 1e-6);
  EXPECT_TRUE(rep.verdict);
}
