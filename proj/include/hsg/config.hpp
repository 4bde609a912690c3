#pragma once

// Declarative experiment configuration: parsing, defaults, cross-field validation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsg/dirichlet_form.hpp"
#include "hsg/error.hpp"
#include "hsg/space.hpp"

namespace hsg {

using json = nlohmann::ordered_json;

inline const std::vector<std::string>& campaign_order() {
  static const std::vector<std::string> order{"constants", "harnack", "capacity", "green", "decay"};
  return order;
}

struct ExperimentConfig {
  // grid
  int dimension = 2;
  double half_width = 1.0;
  int cells = 128;
  MetricKind metric = MetricKind::Euclidean;
  PowerWeight measure_weight{};
  // operator
  std::string operator_class = "laplacian";  // laplacian | weighted | grushin
  double operator_exponent = 0.0;
  double operator_scale = 1.0;

  std::vector<std::string> campaigns;  // in dependency order
  std::vector<std::string> prerequisites;  // added automatically
  std::vector<Point> centers;
  double R = 0.0;
  std::vector<double> fractions{1.0 / 16, 1.0 / 8, 1.0 / 4};
  std::vector<double> d{2.0, 4.0};
  std::vector<std::string> rho{"h", "r/4"};
  double q = 1.0 / 6.0;
  std::optional<double> s;

  std::vector<double> c1_radii;
  int poincare_trials = 50;

  std::vector<Point> harnack_centers;
  std::vector<double> harnack_radii;
  int harnack_samples = 8;
  int harnack_held_out_samples = 8;
  int harnack_probes = 16;
  double harnack_slack = 0.1;

  std::vector<double> green_inner;
  double green_R = 0.0;

  double decay_R0 = 0.0;
  int decay_rungs = 4;
  std::string decay_field = "x";  // x | y | x2-y2 | xy
  std::vector<double> caccioppoli_radii;
  bool allow_underresolved = false;

  double tolerance = 1e-10;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool refine = false;
  int threads = 1;

  double mesh_size() const { return 2.0 * half_width / cells; }
  std::vector<double> ladder() const {
    std::vector<double> r;
    for (double f : fractions) r.push_back(f * R);
    return r;
  }
  /// Geometric midpoints of consecutive Harnack radii; the held-out scales.
  std::vector<double> harnack_held_out_radii() const {
    std::vector<double> r(harnack_radii);
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    std::vector<double> mid;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) mid.push_back(std::sqrt(r[k] * r[k + 1]));
    return mid;
  }
  bool wants(const std::string& c) const { return std::find(campaigns.begin(), campaigns.end(), c) != campaigns.end(); }

  SpaceGrid make_grid() const { return SpaceGrid(dimension, half_width, cells, metric, measure_weight); }
  OperatorSpec make_operator() const {
    if (operator_class == "weighted") return OperatorSpec::weighted(operator_exponent, operator_scale);
    if (operator_class == "grushin") return OperatorSpec::grushin(operator_exponent);
    return OperatorSpec::laplacian();
  }
  double rho_value(const std::string& spec, double r) const {
    if (spec == "h") return mesh_size();
    if (spec == "r/4") return r / 4;
    return std::stod(spec);
  }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& msg) { fail(ErrorKind::Config, msg); }

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) config_error("unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    config_error(where + "." + key + " has the wrong type");
  }
}

inline Point parse_point(const json& j, int dim, const std::string& where) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(dim))
    config_error(where + " must be an array of " + std::to_string(dim) + " numbers");
  for (const auto& v : j)
    if (!v.is_number()) config_error(where + " must hold numbers");
  return {j[0].get<double>(), dim == 2 ? j[1].get<double>() : 0.0};
}

inline std::vector<Point> parse_points(const json& j, const char* key, int dim, const std::string& where) {
  std::vector<Point> out;
  if (!j.contains(key) || j.at(key).is_null()) return out;
  if (!j.at(key).is_array()) config_error(where + "." + key + " must be an array");
  for (std::size_t i = 0; i < j.at(key).size(); ++i)
    out.push_back(parse_point(j.at(key)[i], dim, where + "." + key + "[" + std::to_string(i) + "]"));
  return out;
}

inline json point_json(Point p, int dim) { return dim == 1 ? json::array({p.x}) : json::array({p.x, p.y}); }

/// Largest r in (0, cap] with g.ball_inside(c, factor * r), by bisection.
inline double largest_inside(const SpaceGrid& g, Point c, double factor, double cap) {
  if (g.ball_inside(c, factor * cap)) return cap;
  double lo = 0.0, hi = cap;
  for (int k = 0; k < 80; ++k) {
    const double mid = 0.5 * (lo + hi);
    (g.ball_inside(c, factor * mid) ? lo : hi) = mid;
  }
  return lo * (1 - 1e-9);
}

}  // namespace detail

/// Parses a config document. Defaults that depend on the grid are filled by resolve_config.
inline ExperimentConfig parse_config(const json& j) {
  using detail::config_error;
  using detail::get_or;
  detail::allow_keys(j, "config", {"grid", "operator", "campaigns", "centers", "ladder", "d", "rho", "q", "s",
                                   "constants", "harnack", "green", "decay", "solver", "seed", "out", "refine",
                                   "threads", "prerequisites"});
  ExperimentConfig c;
  if (!j.contains("grid")) config_error("missing grid block");
  const json& gj = j.at("grid");
  detail::allow_keys(gj, "grid", {"dimension", "half_width", "cells", "metric", "measure_weight"});
  c.dimension = get_or(gj, "dimension", 2, "grid");
  c.half_width = get_or(gj, "half_width", 1.0, "grid");
  c.cells = get_or(gj, "cells", 128, "grid");
  const auto metric = get_or<std::string>(gj, "metric", "euclidean", "grid");
  if (metric == "euclidean")
    c.metric = MetricKind::Euclidean;
  else if (metric == "grushin")
    c.metric = MetricKind::Grushin;
  else
    config_error("grid.metric must be 'euclidean' or 'grushin'");
  if (gj.contains("measure_weight")) {
    const json& w = gj.at("measure_weight");
    detail::allow_keys(w, "grid.measure_weight", {"exponent", "scale"});
    c.measure_weight = {get_or(w, "exponent", 0.0, "grid.measure_weight"), get_or(w, "scale", 1.0, "grid.measure_weight")};
  }

  if (j.contains("operator")) {
    const json& oj = j.at("operator");
    detail::allow_keys(oj, "operator", {"class", "exponent", "scale"});
    c.operator_class = get_or<std::string>(oj, "class", "laplacian", "operator");
    c.operator_exponent = get_or(oj, "exponent", 0.0, "operator");
    c.operator_scale = get_or(oj, "scale", 1.0, "operator");
  }

  std::vector<std::string> requested;
  if (j.contains("campaigns")) {
    const json& cj = j.at("campaigns");
    if (cj.is_string())
      requested.push_back(cj.get<std::string>());
    else if (cj.is_array())
      for (const auto& v : cj) {
        if (!v.is_string()) config_error("campaigns must be strings");
        requested.push_back(v.get<std::string>());
      }
    else
      config_error("campaigns must be a string or an array of strings");
  } else {
    requested.push_back("all");
  }
  for (const auto& r : requested) {
    if (r == "all") {
      c.campaigns = campaign_order();
      break;
    }
    if (std::find(campaign_order().begin(), campaign_order().end(), r) == campaign_order().end())
      config_error("unknown campaign '" + r + "'");
  }
  if (c.campaigns.empty())
    for (const auto& name : campaign_order())
      if (std::find(requested.begin(), requested.end(), name) != requested.end()) c.campaigns.push_back(name);

  c.centers = detail::parse_points(j, "centers", c.dimension == 1 ? 1 : 2, "config");
  if (j.contains("ladder")) {
    const json& lj = j.at("ladder");
    detail::allow_keys(lj, "ladder", {"R", "fractions"});
    c.R = get_or(lj, "R", 0.0, "ladder");
    c.fractions = get_or(lj, "fractions", c.fractions, "ladder");
  }
  c.d = get_or(j, "d", c.d, "config");
  if (j.contains("rho")) {
    c.rho.clear();
    if (!j.at("rho").is_array()) config_error("rho must be an array");
    for (const auto& v : j.at("rho")) {
      if (v.is_string()) {
        c.rho.push_back(v.get<std::string>());
      } else if (v.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        c.rho.push_back(os.str());
      } else {
        config_error("rho entries must be 'h', 'r/4' or numbers");
      }
    }
  }
  c.q = get_or(j, "q", c.q, "config");
  if (j.contains("s") && !j.at("s").is_null()) c.s = get_or(j, "s", 0.0, "config");

  if (j.contains("constants")) {
    const json& kj = j.at("constants");
    detail::allow_keys(kj, "constants", {"radii", "trials"});
    c.c1_radii = get_or(kj, "radii", c.c1_radii, "constants");
    c.poincare_trials = get_or(kj, "trials", c.poincare_trials, "constants");
  }
  if (j.contains("harnack")) {
    const json& hj = j.at("harnack");
    detail::allow_keys(hj, "harnack", {"centers", "radii", "samples", "held_out_samples", "probes", "slack"});
    c.harnack_centers = detail::parse_points(hj, "centers", c.dimension == 1 ? 1 : 2, "harnack");
    c.harnack_radii = get_or(hj, "radii", c.harnack_radii, "harnack");
    c.harnack_samples = get_or(hj, "samples", c.harnack_samples, "harnack");
    c.harnack_held_out_samples = get_or(hj, "held_out_samples", c.harnack_held_out_samples, "harnack");
    c.harnack_probes = get_or(hj, "probes", c.harnack_probes, "harnack");
    c.harnack_slack = get_or(hj, "slack", c.harnack_slack, "harnack");
  }
  if (j.contains("green")) {
    const json& gr = j.at("green");
    detail::allow_keys(gr, "green", {"R", "inner"});
    c.green_R = get_or(gr, "R", 0.0, "green");
    c.green_inner = get_or(gr, "inner", c.green_inner, "green");
  }
  if (j.contains("decay")) {
    const json& dj = j.at("decay");
    detail::allow_keys(dj, "decay", {"R0", "rungs", "field", "caccioppoli_radii", "allow_underresolved"});
    c.decay_R0 = get_or(dj, "R0", 0.0, "decay");
    c.decay_rungs = get_or(dj, "rungs", c.decay_rungs, "decay");
    c.decay_field = get_or(dj, "field", c.decay_field, "decay");
    c.caccioppoli_radii = get_or(dj, "caccioppoli_radii", c.caccioppoli_radii, "decay");
    c.allow_underresolved = get_or(dj, "allow_underresolved", false, "decay");
  }
  if (j.contains("solver")) {
    detail::allow_keys(j.at("solver"), "solver", {"tolerance"});
    c.tolerance = get_or(j.at("solver"), "tolerance", c.tolerance, "solver");
  }
  c.seed = get_or(j, "seed", c.seed, "config");
  c.out = get_or(j, "out", c.out, "config");
  c.refine = get_or(j, "refine", false, "config");
  c.threads = get_or(j, "threads", 1, "config");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

/// Fills derived defaults and validates every cross-field constraint. No solves.
inline void resolve_config(ExperimentConfig& c) {
  using detail::config_error;
  if (c.dimension != 1 && c.dimension != 2) config_error("grid.dimension must be 1 or 2");
  if (!(c.half_width > 0.0)) config_error("grid.half_width must be positive");
  if (c.cells < 8 || c.cells > (c.dimension == 1 ? 8192 : 512))
    config_error("grid.cells must lie in [8, " + std::to_string(c.dimension == 1 ? 8192 : 512) + "]");
  if (c.cells % 2) config_error("grid.cells must be even");
  if (c.metric == MetricKind::Grushin && c.dimension != 2) config_error("the Grushin metric needs dimension 2");
  if (c.measure_weight.exponent < 0.0 || !(c.measure_weight.scale > 0.0))
    config_error("grid.measure_weight needs exponent >= 0 and scale > 0");
  if (c.operator_class != "laplacian" && c.operator_class != "weighted" && c.operator_class != "grushin")
    config_error("operator.class must be laplacian, weighted or grushin");
  if ((c.operator_class == "grushin") != (c.metric == MetricKind::Grushin))
    config_error("operator.class grushin and grid.metric grushin go together");
  if (c.operator_class == "grushin" && c.dimension != 2) config_error("the Grushin operator needs dimension 2");
  if (!(c.operator_scale > 0.0)) config_error("operator.scale must be positive");
  if (!(c.tolerance > 0.0 && c.tolerance < 1.0)) config_error("solver.tolerance must lie in (0, 1)");
  if (c.threads < 1 || c.threads > 256) config_error("threads must lie in [1, 256]");
  if (c.out.empty()) config_error("out must be a directory path");
  if (c.campaigns.empty()) config_error("no campaigns requested");

  const SpaceGrid g = c.make_grid();
  const double h = g.mesh_size(), L = c.half_width;
  if (c.centers.empty()) c.centers.push_back(c.metric == MetricKind::Grushin ? Point{L / 2, 0.0} : Point{0.0, 0.0});
  for (const Point& p : c.centers)
    if (!g.inside(p)) config_error("center outside the domain");
  if (c.R == 0.0) {
    c.R = L / 2;
    for (const Point& p : c.centers) c.R = std::min(c.R, detail::largest_inside(g, p, 1.0, L / 2));
  }
  if (!(c.R > 0.0)) config_error("ladder.R must be positive");
  if (c.fractions.empty()) config_error("ladder.fractions must not be empty");
  for (std::size_t i = 0; i < c.fractions.size(); ++i) {
    if (!(c.fractions[i] > 0.0 && c.fractions[i] <= 1.0)) config_error("ladder.fractions must lie in (0, 1]");
    if (i && !(c.fractions[i] > c.fractions[i - 1])) config_error("ladder.fractions must increase");
  }
  for (const Point& p : c.centers)
    if (!g.ball_inside(p, c.R)) config_error("B(center, R) leaves the domain");
  const auto ladder = c.ladder();

  // Prerequisites: decay and green need the Harnack fit, which needs constants.
  if (c.wants("decay") || c.wants("green") || c.wants("capacity") || c.wants("harnack")) {
    std::vector<std::string> full;
    for (const auto& name : campaign_order()) {
      const bool needed = c.wants(name) || name == "constants" || (name == "harnack" && (c.wants("decay") || c.wants("green")));
      if (needed) full.push_back(name);
      if (needed && !c.wants(name)) c.prerequisites.push_back(name);
    }
    c.campaigns = full;
  }

  // Harnack defaults: two centers, four scales.
  if (c.harnack_centers.empty()) {
    c.harnack_centers = c.centers;
    if (c.harnack_centers.size() < 2) c.harnack_centers.push_back({c.centers[0].x + c.R / 8, c.centers[0].y});
  }
  if (c.harnack_radii.empty()) c.harnack_radii = {c.R / 16, c.R / 8, c.R / 4, c.R / 2};
  if (c.green_R == 0.0) c.green_R = c.R;
  if (c.green_inner.empty())
    for (double f : {1.0 / 32, 1.0 / 16})
      if (f * c.green_R / 2 >= 2 * h * (1 - 1e-12)) c.green_inner.push_back(f * c.green_R);

  if (c.wants("harnack")) {
    if (c.harnack_centers.size() < 2) config_error("harnack needs at least two centers");
    std::set<double> sc(c.harnack_radii.begin(), c.harnack_radii.end());
    if (sc.size() < 2) config_error("harnack needs at least two radii");
    if (c.harnack_centers.size() * c.harnack_radii.size() < 8) config_error("harnack needs at least eight rows");
    if (c.harnack_samples < 1 || c.harnack_held_out_samples < 1) config_error("harnack sample counts must be >= 1");
    if (c.harnack_probes < 0) config_error("harnack.probes must be >= 0");
    if (!(c.harnack_slack >= 0.0)) config_error("harnack.slack must be >= 0");
    for (const Point& p : c.harnack_centers) {
      if (!g.inside(p)) config_error("harnack center outside the domain");
      for (double r : c.harnack_radii) {
        if (!(r >= 2 * h)) config_error("harnack radii must be >= 2h");
        if (!g.ball_inside(p, r)) config_error("harnack ball leaves the domain");
      }
    }
  }
  if (c.wants("capacity")) {
    for (double dd : c.d)
      if (!(dd > 1.0)) config_error("every dilation d must exceed 1");
    if (c.d.empty()) config_error("d must not be empty");
    for (double r : ladder) {
      if (r < 4 * h * (1 - 1e-12)) config_error("capacity needs r >= 4h for every ladder radius");
      for (const Point& p : c.centers)
        for (double dd : c.d)
          if (!g.ball_inside(p, dd * r)) config_error("B(center, d r) leaves the domain");
      for (const auto& spec : c.rho) {
        double v = 0.0;
        try {
          v = c.rho_value(spec, r);
        } catch (const std::exception&) {
          config_error("rho entry '" + spec + "' is not 'h', 'r/4' or a number");
        }
        if (v < h * (1 - 1e-12) || !(v < r / 2)) config_error("rho must satisfy h <= rho < r/2");
      }
    }
  }
  if (c.wants("green")) {
    if (c.green_inner.empty()) config_error("green.inner is empty: the mesh cannot resolve R/32 or R/16 (need r/2 >= 2h)");
    for (double r : c.green_inner)
      if (!(r > 0.0) || r > c.green_R / 16 * (1 + 1e-12)) config_error("green.inner radii must lie in (0, R/16]");
    for (const Point& p : c.centers) {
      if (!g.ball_inside(p, c.green_R)) config_error("B(center, green.R) leaves the domain");
      for (double r : ladder)
        if (!g.ball_inside(p, 2 * r)) config_error("B(center, 2r) leaves the domain");
    }
  }

  // Poincare radii cover every lookup made by later campaigns.
  if (c.c1_radii.empty()) {
    double lo = ladder.front(), hi = ladder.back();
    if (c.wants("harnack"))
      for (double r : c.harnack_radii) lo = std::min(lo, r / 2), hi = std::max(hi, r / 2);
    if (c.wants("green")) {
      for (double r : c.green_inner) lo = std::min(lo, r / 2);
      for (double r : ladder) lo = std::min(lo, r / 2);
      hi = std::max(hi, c.green_R / 2);
    }
    for (double r = lo; r < hi * (1 - 1e-9); r *= 2) c.c1_radii.push_back(r);
    c.c1_radii.push_back(hi);
  }
  for (std::size_t i = 0; i < c.c1_radii.size(); ++i) {
    if (c.c1_radii[i] < 2 * h * (1 - 1e-12)) config_error("constants.radii must be >= 2h (a Poincare ball needs several nodes)");
    if (i && !(c.c1_radii[i] > c.c1_radii[i - 1])) config_error("constants.radii must increase");
  }
  std::vector<Point> profile_centers = c.centers;
  if (c.wants("harnack")) profile_centers.insert(profile_centers.end(), c.harnack_centers.begin(), c.harnack_centers.end());
  for (const Point& p : profile_centers)
    if (!g.ball_inside(p, c.c1_radii.back())) config_error("Poincare ball leaves the domain");
  if (c.poincare_trials < 1) config_error("constants.trials must be >= 1");
  if (c.s && !(*c.s > 2.0)) config_error("s must exceed 2");

  if (!(c.q > 0.0 && c.q <= 1.0 / 6.0 + 1e-15)) config_error("q must lie in (0, 1/6]");
  if (c.wants("decay")) {
    const Point x0 = c.centers.front();
    if (c.decay_R0 == 0.0) c.decay_R0 = detail::largest_inside(g, x0, 2.0 / c.q, c.R);
    if (!(c.decay_R0 > 0.0)) config_error("decay.R0 must be positive");
    if (!g.ball_inside(x0, 2 * c.decay_R0 / c.q)) config_error("B(x0, 2 R0 / q) leaves the domain");
    if (!g.ball_inside(x0, 4 * c.decay_R0)) config_error("B(x0, 4 R0) leaves the domain");
    if (c.decay_rungs < 4) config_error("decay.rungs must be >= 4");
    if (c.decay_field != "x" && c.decay_field != "y" && c.decay_field != "x2-y2" && c.decay_field != "xy")
      config_error("decay.field must be x, y, x2-y2 or xy");
    if (c.dimension == 1 && c.decay_field != "x") config_error("decay.field must be x in dimension 1");
    const double r_min = c.decay_R0 / std::pow(2.0, c.decay_rungs - 1);
    if (c.q * r_min < 4 * h * (1 - 1e-12) && !c.allow_underresolved)
      config_error("q r_min >= 4h fails for the decay ladder (q r_min = " + std::to_string(c.q * r_min) +
                   ", 4h = " + std::to_string(4 * h) + "); set decay.allow_underresolved to proceed");
    if (c.caccioppoli_radii.empty()) {
      const double a = detail::largest_inside(g, x0, 4.0, L / 4);
      c.caccioppoli_radii = {a / 4, a / 2, a};
    }
    for (std::size_t i = 0; i < c.caccioppoli_radii.size(); ++i) {
      const double r = c.caccioppoli_radii[i];
      if (i && !(r > c.caccioppoli_radii[i - 1])) config_error("decay.caccioppoli_radii must increase");
      if (!g.ball_inside(x0, 4 * r)) config_error("B(x0, 4r) leaves the domain for a Caccioppoli radius");
      if (c.q * r < h * (1 - 1e-12)) config_error("Caccioppoli inner ball q r must be >= h");
    }
  }
}

inline json config_to_json(const ExperimentConfig& c) {
  const int pd = c.dimension == 1 ? 1 : 2;
  json j;
  j["grid"] = {{"dimension", c.dimension},
               {"half_width", c.half_width},
               {"cells", c.cells},
               {"metric", to_string(c.metric)},
               {"measure_weight", {{"exponent", c.measure_weight.exponent}, {"scale", c.measure_weight.scale}}}};
  j["operator"] = {{"class", c.operator_class}, {"exponent", c.operator_exponent}, {"scale", c.operator_scale}};
  j["campaigns"] = c.campaigns;
  j["prerequisites"] = c.prerequisites;
  j["centers"] = json::array();
  for (const Point& p : c.centers) j["centers"].push_back(detail::point_json(p, pd));
  j["ladder"] = {{"R", c.R}, {"fractions", c.fractions}};
  j["d"] = c.d;
  j["rho"] = c.rho;
  j["q"] = c.q;
  j["s"] = c.s ? json(*c.s) : json(nullptr);
  j["constants"] = {{"radii", c.c1_radii}, {"trials", c.poincare_trials}};
  json hc = json::array();
  for (const Point& p : c.harnack_centers) hc.push_back(detail::point_json(p, pd));
  j["harnack"] = {{"centers", hc},
                  {"radii", c.harnack_radii},
                  {"samples", c.harnack_samples},
                  {"held_out_samples", c.harnack_held_out_samples},
                  {"probes", c.harnack_probes},
                  {"slack", c.harnack_slack}};
  j["green"] = {{"R", c.green_R}, {"inner", c.green_inner}};
  j["decay"] = {{"R0", c.decay_R0},
                {"rungs", c.decay_rungs},
                {"field", c.decay_field},
                {"caccioppoli_radii", c.caccioppoli_radii},
                {"allow_underresolved", c.allow_underresolved}};
  j["solver"] = {{"tolerance", c.tolerance}};
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["refine"] = c.refine;
  j["threads"] = c.threads;
  return j;
}

/// JSON Schema (draft 2020-12) of the config file.
inline json config_schema() {
  auto num = [](const char* desc) { return json{{"type", "number"}, {"description", desc}}; };
  auto nums = [](const char* desc) { return json{{"type", "array"}, {"items", {{"type", "number"}}}, {"description", desc}}; };
  auto points = [](const char* desc) {
    return json{{"type", "array"},
                {"items", {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 1}, {"maxItems", 2}}},
                {"description", desc}};
  };
  json s;
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "hsg-verify experiment config";
  s["type"] = "object";
  s["additionalProperties"] = false;
  s["required"] = json::array({"grid"});
  json p;
  p["grid"] = {{"type", "object"},
               {"additionalProperties", false},
               {"properties",
                {{"dimension", {{"enum", {1, 2}}}},
                 {"half_width", num("L; the domain is [-L, L]^n")},
                 {"cells", {{"type", "integer"}, {"description", "cells per side, even; h = 2L / cells"}}},
                 {"metric", {{"enum", {"euclidean", "grushin"}}}},
                 {"measure_weight",
                  {{"type", "object"},
                   {"properties", {{"exponent", num("v_m(x) = scale |x|^exponent, exponent >= 0")}, {"scale", num("")}}}}}}}};
  p["operator"] = {{"type", "object"},
                   {"additionalProperties", false},
                   {"properties",
                    {{"class", {{"enum", {"laplacian", "weighted", "grushin"}}}},
                     {"exponent", num("coefficient |x|^exponent")},
                     {"scale", num("coefficient scale")}}}};
  p["campaigns"] = {{"oneOf",
                     {{{"enum", {"all", "constants", "harnack", "capacity", "green", "decay"}}},
                      {{"type", "array"}, {"items", {{"enum", {"all", "constants", "harnack", "capacity", "green", "decay"}}}}}}}};
  p["prerequisites"] = {{"type", "array"}, {"items", {{"type", "string"}}}, {"description", "informational; filled by the tool"}};
  p["centers"] = points("ball centers; default origin (Grushin: (L/2, 0))");
  p["ladder"] = {{"type", "object"},
                 {"properties", {{"R", num("base radius")}, {"fractions", nums("r = fraction * R, increasing")}}}};
  p["d"] = nums("condenser dilations, each > 1");
  p["rho"] = {{"type", "array"},
              {"items", {{"oneOf", {{{"enum", {"h", "r/4"}}}, {{"type", "number"}}}}}},
              {"description", "Green smoothing radii, h <= rho < r/2"}};
  p["q"] = num("inner fraction, 0 < q <= 1/6");
  p["s"] = {{"type", {"number", "null"}}, {"description", "Sobolev exponent > 2; default 2nu/(nu-2) or 4"}};
  p["constants"] = {{"type", "object"},
                    {"properties", {{"radii", nums("Poincare radii; default covers all lookups")}, {"trials", {{"type", "integer"}}}}}};
  p["harnack"] = {{"type", "object"},
                  {"properties",
                   {{"centers", points("default: centers plus one shifted by R/8")},
                    {"radii", nums("default R/16, R/8, R/4, R/2")},
                    {"samples", {{"type", "integer"}}},
                    {"held_out_samples", {{"type", "integer"}}},
                    {"probes", {{"type", "integer"}, {"minimum", 0}, {"description", "half-ball poles for the point-mass scan, default 16"}}},
                    {"slack", num("held-out relative slack, default 0.1")}}}};
  p["green"] = {{"type", "object"}, {"properties", {{"R", num("outer radius")}, {"inner", nums("inner radii <= R/16")}}}};
  p["decay"] = {{"type", "object"},
                {"properties",
                 {{"R0", num("top rung; default largest with B(x0, 2R0/q) inside")},
                  {"rungs", {{"type", "integer"}, {"minimum", 4}}},
                  {"field", {{"enum", {"x", "y", "x2-y2", "xy"}}}},
                  {"caccioppoli_radii", nums("default a/4, a/2, a with B(x0, 4a) inside")},
                  {"allow_underresolved", {{"type", "boolean"}}}}}};
  p["solver"] = {{"type", "object"}, {"properties", {{"tolerance", num("CG relative residual")}}}};
  p["seed"] = {{"type", "integer"}, {"minimum", 0}};
  p["out"] = {{"type", "string"}};
  p["refine"] = {{"type", "boolean"}};
  p["threads"] = {{"type", "integer"}, {"minimum", 1}};
  s["properties"] = p;
  return s;
}

}  // namespace hsg
