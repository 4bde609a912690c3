#pragma once

// Uniform-grid model of a homogeneous space (X, d, m): node geometry, the
// Euclidean or Grushin quasi-metric, the weighted lumped measure, ball and
// annulus queries, and the empirical doubling diagnostics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hsg/error.hpp"

namespace hsg {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double euclidean_norm(Point p) { return std::hypot(p.x, p.y); }

enum class MetricKind { Euclidean, Grushin };

inline const char* to_string(MetricKind k) { return k == MetricKind::Euclidean ? "euclidean" : "grushin"; }

/// Euclidean distance, or the Grushin quasi-distance
///   |x1 - x2| + min(|y1 - y2| / max(|x1|, |x2|), sqrt|y1 - y2|).
inline double metric_distance(MetricKind kind, Point a, Point b) {
  if (kind == MetricKind::Euclidean) return std::hypot(a.x - b.x, a.y - b.y);
  const double dx = std::abs(a.x - b.x);
  const double dy = std::abs(a.y - b.y);
  if (dy == 0.0) return dx;
  const double xmax = std::max(std::abs(a.x), std::abs(b.x));
  const double vertical = std::sqrt(dy);
  return dx + (xmax > 0.0 ? std::min(dy / xmax, vertical) : vertical);
}

/// Radial power weight scale * |x|^exponent. Used both for the measure density
/// and for the operator coefficients.
struct PowerWeight {
  double exponent = 0.0;
  double scale = 1.0;

  double operator()(Point p) const {
    if (exponent == 0.0) return scale;
    const double r = euclidean_norm(p);
    if (r == 0.0) return exponent > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return scale * std::pow(r, exponent);
  }

  friend bool operator==(const PowerWeight&, const PowerWeight&) = default;
};

/// Discretized domain: the centered box [-L, L]^n sampled at (cells + 1)^n nodes.
class SpaceGrid {
 public:
  SpaceGrid(int dimension, double half_width, int cells, MetricKind metric = MetricKind::Euclidean,
            PowerWeight measure_weight = {})
      : dim_(dimension), half_width_(half_width), cells_(cells), metric_(metric), weight_(measure_weight) {
    if (dim_ != 1 && dim_ != 2) fail(ErrorKind::Argument, "dimension must be 1 or 2");
    if (!(half_width_ > 0.0)) fail(ErrorKind::Argument, "half-width must be positive");
    if (cells_ < 2) fail(ErrorKind::Argument, "need at least 2 cells per side");
    if (metric_ == MetricKind::Grushin && dim_ != 2) fail(ErrorKind::Argument, "Grushin metric needs n = 2");
    if (weight_.exponent < 0.0 || !(weight_.scale > 0.0))
      fail(ErrorKind::Argument, "measure weight needs exponent >= 0 and scale > 0");
    h_ = 2.0 * half_width_ / cells_;
    side_ = cells_ + 1;
    const std::size_t count = dim_ == 1 ? side_ : static_cast<std::size_t>(side_) * side_;
    lumped_.resize(count);
    const double cell_volume = dim_ == 1 ? h_ : h_ * h_;
    for (std::size_t i = 0; i < count; ++i) lumped_[i] = weight_(node(static_cast<int>(i))) * cell_volume;
  }

  int dimension() const { return dim_; }
  double half_width() const { return half_width_; }
  int cells() const { return cells_; }
  int nodes_per_side() const { return side_; }
  double mesh_size() const { return h_; }
  MetricKind metric() const { return metric_; }
  const PowerWeight& measure_weight() const { return weight_; }
  int node_count() const { return static_cast<int>(lumped_.size()); }

  /// M_i = v_m(x_i) h^n.
  std::span<const double> lumped_measure() const { return lumped_; }

  int index(int ix, int iy = 0) const { return dim_ == 1 ? ix : ix + iy * side_; }
  int ix(int node) const { return dim_ == 1 ? node : node % side_; }
  int iy(int node) const { return dim_ == 1 ? 0 : node / side_; }

  Point node(int i) const {
    const double x = -half_width_ + ix(i) * h_;
    const double y = dim_ == 1 ? 0.0 : -half_width_ + iy(i) * h_;
    return {x, y};
  }

  double distance(Point a, Point b) const { return metric_distance(metric_, a, b); }

  bool inside(Point p) const {
    const double tol = 1e-12 * half_width_;
    if (std::abs(p.x) > half_width_ + tol) return false;
    return dim_ == 1 ? p.y == 0.0 : std::abs(p.y) <= half_width_ + tol;
  }

  /// Half-extents of the coordinate box enclosing B(center, r).
  Point ball_extent(Point center, double r) const {
    if (metric_ == MetricKind::Euclidean) return {r, dim_ == 1 ? 0.0 : r};
    return {r, std::max(r * r, r * (std::abs(center.x) + r))};
  }

  bool ball_inside(Point center, double r) const {
    const Point e = ball_extent(center, r);
    const double tol = 1e-12 * half_width_;
    if (std::abs(center.x) + e.x > half_width_ + tol) return false;
    return dim_ == 1 || std::abs(center.y) + e.y <= half_width_ + tol;
  }

  void require_ball(Point center, double r, const char* what = "ball") const {
    if (!(r > 0.0)) fail(ErrorKind::Domain, std::string(what) + " radius must be positive");
    if (!inside(center)) fail(ErrorKind::Domain, std::string(what) + " center outside the domain");
    if (!ball_inside(center, r))
      fail(ErrorKind::Domain, std::string(what) + " of radius " + std::to_string(r) + " leaves the domain");
  }

  /// Nodes y with r_in <= d(center, y) < r_out, in increasing index order.
  std::vector<int> annulus_nodes(Point center, double r_in, double r_out) const {
    require_ball(center, r_out, "annulus");
    if (!(r_in >= 0.0) || !(r_in < r_out)) fail(ErrorKind::Argument, "annulus needs 0 <= r_in < r_out");
    std::vector<int> out;
    const Point e = ball_extent(center, r_out);
    const auto [x0, x1] = index_range(center.x - e.x, center.x + e.x);
    if (dim_ == 1) {
      for (int i = x0; i <= x1; ++i) {
        const double dd = distance(center, node(i));
        if (dd >= r_in && dd < r_out) out.push_back(i);
      }
      return out;
    }
    const auto [y0, y1] = index_range(center.y - e.y, center.y + e.y);
    for (int j = y0; j <= y1; ++j)
      for (int i = x0; i <= x1; ++i) {
        const int id = index(i, j);
        const double dd = distance(center, node(id));
        if (dd >= r_in && dd < r_out) out.push_back(id);
      }
    return out;
  }

  std::vector<int> ball_nodes(Point center, double r) const { return annulus_nodes(center, 0.0, r); }

  /// Grid-graph neighbours (2 in 1D, up to 4 in 2D).
  template <class F>
  void for_each_neighbor(int node_id, F&& f) const {
    const int i = ix(node_id);
    if (i > 0) f(node_id - 1);
    if (i + 1 < side_) f(node_id + 1);
    if (dim_ == 2) {
      const int j = iy(node_id);
      if (j > 0) f(node_id - side_);
      if (j + 1 < side_) f(node_id + side_);
    }
  }

  int nearest_node(Point p) const {
    if (!inside(p)) fail(ErrorKind::Domain, "point outside the domain");
    auto snap = [&](double c) {
      return std::clamp(static_cast<int>(std::lround((c + half_width_) / h_)), 0, cells_);
    };
    return dim_ == 1 ? snap(p.x) : index(snap(p.x), snap(p.y));
  }

  double measure_of(std::span<const int> nodes) const {
    double s = 0.0;
    for (int i : nodes) s += lumped_[i];
    return s;
  }

 private:
  std::pair<int, int> index_range(double lo, double hi) const {
    const int a = std::max(0, static_cast<int>(std::floor((lo + half_width_) / h_)) - 1);
    const int b = std::min(cells_, static_cast<int>(std::ceil((hi + half_width_) / h_)) + 1);
    return {a, b};
  }

  int dim_;
  double half_width_;
  int cells_;
  MetricKind metric_;
  PowerWeight weight_;
  double h_ = 0.0;
  int side_ = 0;
  std::vector<double> lumped_;
};

/// m(B(center, r)) by the node-centred midpoint rule.
inline double ball_measure(const SpaceGrid& grid, Point center, double r) {
  return grid.measure_of(grid.ball_nodes(center, r));
}

inline std::vector<int> annulus_nodes(const SpaceGrid& grid, Point center, double r_in, double r_out) {
  return grid.annulus_nodes(center, r_in, r_out);
}

struct DoublingReport {
  double nu_hat = 0.0;
  double radius_ceiling = 0.0;  // R0
  std::vector<Point> centers;
  std::vector<double> c0;
  std::vector<double> tau;
  MetricKind metric = MetricKind::Euclidean;

  /// tau(x) = (sup of 1/c0 over sampled centers in B(x, 2 R0))^(1/2).
  double tau_at(Point x) const {
    double worst = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (metric_distance(metric, x, centers[i]) < 2.0 * radius_ceiling) {
        worst = std::max(worst, 1.0 / c0[i]);
        any = true;
      }
    }
    if (!any) fail(ErrorKind::Dependency, "no sampled doubling center within 2 R0 of the query point");
    return std::sqrt(worst);
  }

  /// c0 at the nearest sampled center.
  double c0_at(Point x) const {
    if (centers.empty()) fail(ErrorKind::Dependency, "empty doubling report");
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const double dd = metric_distance(metric, x, centers[i]);
      if (dd < bd) bd = dd, best = i;
    }
    return c0[best];
  }

  double sup_inv_c0() const {
    double s = 0.0;
    for (double c : c0) s = std::max(s, 1.0 / c);
    return s;
  }
};

/// Fits the homogeneous dimension and the local doubling constants.
///
/// nu_hat is the log-log least-squares slope of m(B(x, r)) against r with a
/// separate intercept per center; c0(x) is the worst pair ratio
/// min_{r < R} m(B(x,r)) / m(B(x,R)) * (R/r)^nu_hat, clamped to (0, 1].
inline DoublingReport estimate_doubling(const SpaceGrid& grid, std::span<const Point> centers,
                                        std::span<const double> radii, double radius_ceiling = 0.0) {
  if (radius_ceiling <= 0.0) radius_ceiling = grid.half_width() / 2.0;
  if (centers.empty()) fail(ErrorKind::Argument, "need at least one center");
  if (radii.size() < 4) fail(ErrorKind::InsufficientData, "need at least 4 radii");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (k > 0 && !(radii[k] > radii[k - 1])) fail(ErrorKind::Argument, "radii must increase strictly");
    if (radii[k] > radius_ceiling * (1 + 1e-12)) fail(ErrorKind::Argument, "radius above R0");
  }

  const std::size_t nr = radii.size();
  std::vector<std::vector<double>> logm(centers.size(), std::vector<double>(nr));
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t k = 0; k < nr; ++k) {
      const double m = ball_measure(grid, centers[c], radii[k]);
      if (!(m > 0.0)) fail(ErrorKind::DegenerateMeasure, "ball of zero measure");
      logm[c][k] = std::log(m);
    }

  double mean_logr = 0.0;
  for (double r : radii) mean_logr += std::log(r);
  mean_logr /= static_cast<double>(nr);
  double sxy = 0.0, sxx = 0.0;
  for (const auto& row : logm) {
    const double mean_m = std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(nr);
    for (std::size_t k = 0; k < nr; ++k) {
      const double dx = std::log(radii[k]) - mean_logr;
      sxy += dx * (row[k] - mean_m);
      sxx += dx * dx;
    }
  }

  DoublingReport rep;
  rep.nu_hat = sxy / sxx;
  rep.radius_ceiling = radius_ceiling;
  rep.metric = grid.metric();
  rep.centers.assign(centers.begin(), centers.end());
  for (const auto& row : logm) {
    double c0 = 1.0;
    for (std::size_t a = 0; a < nr; ++a)
      for (std::size_t b = a + 1; b < nr; ++b) {
        const double v = std::exp(row[a] - row[b] + rep.nu_hat * (std::log(radii[b]) - std::log(radii[a])));
        c0 = std::min(c0, v);
      }
    rep.c0.push_back(c0);
  }
  for (const Point& x : rep.centers) rep.tau.push_back(rep.tau_at(x));
  return rep;
}

}  // namespace hsg
