#pragma once

// Campaign orchestration: runs the verification campaigns of a config in
// dependency order, writes one CSV per table plus a JSON summary.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "hsg/config.hpp"
#include "hsg/constants.hpp"
#include "hsg/covering_harnack.hpp"
#include "hsg/decay.hpp"
#include "hsg/dirichlet_form.hpp"
#include "hsg/green_capacity.hpp"
#include "hsg/space.hpp"

namespace hsg {

/// Evaluates f(0..n-1) on up to `threads` workers; results are stored by index,
/// so the output never depends on completion order. The lowest-index exception wins.
template <class F>
auto parallel_map(std::size_t n, int threads, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int t = static_cast<int>(std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1)));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  using Cell = std::variant<double, long long, std::string, bool, std::monostate>;

  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != header_.size()) fail(ErrorKind::Argument, "CSV row width mismatch");
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < header_.size(); ++i) s += (i ? "," : "") + header_[i];
    s += '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) s += ',';
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>)
                s += format_number(v);
              else if constexpr (std::is_same_v<T, long long>)
                s += std::to_string(v);
              else if constexpr (std::is_same_v<T, std::string>)
                s += v;
              else if constexpr (std::is_same_v<T, bool>)
                s += v ? "pass" : "fail";
            },
            row[i]);
      }
      s += '\n';
    }
    return s;
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

struct Failure {
  std::string campaign;
  std::string check;
  long long row = -1;
  double measured = 0.0;
  double bound = 0.0;
};

struct RunOutcome {
  json summary;
  std::map<std::string, CsvTable> tables;  // file stem -> table
  std::vector<Failure> failures;
  std::string error;                       // set when a campaign threw
  int exit_code() const { return error.empty() && failures.empty() ? 0 : 1; }
};

namespace detail {

inline double field_value(const std::string& name, Point p, Point x0) {
  const double x = p.x - x0.x, y = p.y - x0.y;
  if (name == "y") return y;
  if (name == "x2-y2") return x * x - y * y;
  if (name == "xy") return x * y;
  return x;
}

inline bool lebesgue(const ExperimentConfig& c) {
  return c.metric == MetricKind::Euclidean && c.measure_weight.exponent == 0.0 && c.measure_weight.scale == 1.0;
}

inline bool plain_laplacian(const ExperimentConfig& c) { return c.operator_class == "laplacian" && lebesgue(c); }

inline std::optional<double> capacity_oracle(const ExperimentConfig& c, double r, double d) {
  if (!plain_laplacian(c)) return std::nullopt;
  if (c.dimension == 1) return 2.0 / ((d - 1.0) * r);
  return 2.0 * std::numbers::pi / std::log(d);
}

inline std::optional<double> c1_oracle(const ExperimentConfig& c) {
  if (!plain_laplacian(c)) return std::nullopt;
  return c.dimension == 1 ? 2.0 / std::numbers::pi : 1.0 / 1.8411837818213656;
}

inline std::uint64_t job_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

/// Shared state threaded through the campaigns.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg)
      : cfg_(std::move(cfg)),
        grid_(std::make_shared<SpaceGrid>(cfg_.make_grid())),
        form_(assemble(std::shared_ptr<const SpaceGrid>(grid_), cfg_.make_operator())) {
    opts_.tolerance = cfg_.tolerance;
  }

  RunOutcome run() {
    RunOutcome out;
    out.summary["tool"] = "hsg-verify";
    out.summary["command"] = "run";
    out.summary["config"] = config_to_json(cfg_);
    out.summary["environment"] = environment();
    out.summary["prerequisites"] = cfg_.prerequisites;
    json campaigns = json::object();
    for (const auto& name : cfg_.campaigns) {
      try {
        json block;
        if (name == "constants") block = constants(out);
        if (name == "harnack") block = harnack(out);
        if (name == "capacity") block = capacity_campaign(out);
        if (name == "green") block = green_campaign(out);
        if (name == "decay") block = decay(out);
        bool ok = true;
        for (const auto& f : out.failures) ok = ok && f.campaign != name;
        block["verdict"] = ok;
        campaigns[name] = block;
      } catch (const Error& e) {
        out.error = name + ": " + e.what();
        campaigns[name] = {{"error", e.what()}, {"verdict", false}};
        break;
      }
    }
    out.summary["campaigns"] = campaigns;
    out.summary["fitted_constants"] = fitted_;
    json fails = json::array();
    for (const auto& f : out.failures)
      fails.push_back({{"campaign", f.campaign}, {"check", f.check}, {"row", f.row}, {"measured", f.measured}, {"bound", f.bound}});
    out.summary["failures"] = fails;
    out.summary["error"] = out.error.empty() ? json(nullptr) : json(out.error);
    out.summary["verdict"] = out.exit_code() == 0;
    return out;
  }

  const ExperimentConfig& config() const { return cfg_; }
  const FormAssembly& form() const { return form_; }
  const SpaceGrid& grid() const { return *grid_; }
  /// Available after run() has executed the constants campaign.
  const DoublingReport& doubling() const {
    if (!doubling_) fail(ErrorKind::Dependency, "constants campaign has not run");
    return *doubling_;
  }
  const ConstantsProfile& profile() const {
    if (!profile_) fail(ErrorKind::Dependency, "constants campaign has not run");
    return *profile_;
  }
  double gamma() const { return gamma_; }

 private:
  json environment() const {
    return {{"mesh_size", grid_->mesh_size()},
            {"nodes", grid_->node_count()},
            {"edges", static_cast<long long>(form_.edges().size())},
            {"seed", cfg_.seed},
            {"tolerance", cfg_.tolerance}};
  }

  json point(Point p) const { return detail::point_json(p, cfg_.dimension); }

  std::vector<Point> profile_centers() const {
    std::vector<Point> pts = cfg_.centers;
    if (cfg_.wants("harnack"))
      for (const Point& p : cfg_.harnack_centers) {
        bool seen = false;
        for (const Point& q : pts) seen = seen || (std::abs(p.x - q.x) < 1e-12 && std::abs(p.y - q.y) < 1e-12);
        if (!seen) pts.push_back(p);
      }
    return pts;
  }

  static void fail_row(RunOutcome& out, const std::string& campaign, const std::string& check, long long row,
                       double measured, double bound) {
    out.failures.push_back({campaign, check, row, measured, bound});
  }

  json constants(RunOutcome& out) {
    const SpaceGrid& g = *grid_;
    const auto centers = profile_centers();
    std::vector<double> dradii;
    for (double f = 1.0 / 32; f <= 1.0 + 1e-12; f *= 2) dradii.push_back(f * cfg_.R);
    doubling_ = estimate_doubling(g, centers, dradii, cfg_.R);

    CsvTable dt({"center_x", "center_y", "nu_hat", "c0", "tau"});
    for (std::size_t i = 0; i < centers.size(); ++i)
      dt.add({centers[i].x, centers[i].y, doubling_->nu_hat, doubling_->c0[i], doubling_->tau[i]});
    out.tables.emplace("doubling", std::move(dt));

    const auto& radii = cfg_.c1_radii;
    struct Job {
      PoincareResult pr;
      PoincareCheck check;
    };
    const std::size_t nr = radii.size();
    auto jobs = parallel_map(centers.size() * nr, cfg_.threads, [&](std::size_t k) {
      const Point c = centers[k / nr];
      const double r = radii[k % nr];
      Job j;
      j.pr = poincare_constant(form_, c, r, 1.0, opts_);
      j.check = poincare_direct_check(form_, c, r, j.pr, cfg_.poincare_trials, detail::job_seed(cfg_.seed, 1, k));
      j.pr.eigenvector.clear();
      return j;
    });
    C1Table table;
    table.centers = centers;
    table.radii = radii;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      std::vector<double> c1, lam;
      for (std::size_t k = 0; k < nr; ++k) c1.push_back(jobs[c * nr + k].pr.c1), lam.push_back(jobs[c * nr + k].pr.lambda1);
      table.c1.push_back(std::move(c1));
      table.lambda1.push_back(std::move(lam));
    }
    profile_ = mu_profile(*doubling_, table);

    CsvTable pt({"center_x", "center_y", "R", "lambda1", "c1", "c1_isotonic", "oracle", "max_ratio",
                 "eigenfunction_ratio", "verdict"});
    const auto oracle = detail::c1_oracle(cfg_);
    for (std::size_t c = 0; c < centers.size(); ++c)
      for (std::size_t k = 0; k < nr; ++k) {
        const auto& j = jobs[c * nr + k];
        const long long row = static_cast<long long>(pt.size());
        pt.add({centers[c].x, centers[c].y, radii[k], j.pr.lambda1, j.pr.c1, profile_->c1_row(c)[k],
                oracle ? CsvTable::Cell(*oracle) : CsvTable::Cell(std::monostate{}), j.check.max_ratio,
                j.check.eigenfunction_ratio, j.check.verdict});
        if (!j.check.verdict) {
          if (j.check.max_ratio > 1.0)
            fail_row(out, "constants", "poincare_random_field", row, j.check.max_ratio, 1.0);
          else
            fail_row(out, "constants", "poincare_eigenfunction_equality", row, j.check.eigenfunction_ratio, 1.0);
        }
      }
    out.tables.emplace("poincare", std::move(pt));

    CsvTable st({"center_x", "center_y", "R", "s", "max_ratio", "slack_multiplier"});
    const double s = cfg_.s ? *cfg_.s : default_sobolev_exponent(doubling_->nu_hat);
    double slack = 1.0;
    const double rs = cfg_.ladder().back();
    for (std::size_t c = 0; c < cfg_.centers.size(); ++c) {
      const Point p = cfg_.centers[c];
      const std::size_t ci = profile_->center_index(p);
      const auto rep = sobolev_check(form_, p, rs, s, doubling_->tau_at(p), profile_->c1(ci, std::clamp(rs, radii.front(), radii.back())),
                                     16, detail::job_seed(cfg_.seed, 2, c));
      slack = std::max(slack, rep.slack_multiplier);
      st.add({p.x, p.y, rs, s, rep.max_ratio, rep.slack_multiplier});
    }
    out.tables.emplace("sobolev", std::move(st));
    fitted_["nu_hat"] = doubling_->nu_hat;
    fitted_["sobolev_slack_multiplier"] = slack;
    return {{"centers", static_cast<long long>(centers.size())},
            {"c1_monotonicity_violation", profile_->monotonicity_violation()},
            {"files", {"doubling.csv", "poincare.csv", "sobolev.csv"}}};
  }

  json harnack(RunOutcome& out) {
    const SpaceGrid& g = *grid_;
    const auto& centers = cfg_.harnack_centers;
    const auto& radii = cfg_.harnack_radii;
    const auto held_radii = cfg_.harnack_held_out_radii();
    const std::size_t nr = radii.size(), nh = held_radii.size();
    const std::size_t cells = centers.size() * nr, total = cells + centers.size() * nh;
    auto rows = parallel_map(total, cfg_.threads, [&](std::size_t k) {
      const bool held = k >= cells;
      const std::size_t idx = held ? k - cells : k;
      const Point c = centers[idx / (held ? nh : nr)];
      const double r = held ? held_radii[idx % nh] : radii[idx % nr];
      auto row = measure_harnack(form_, c, r, held ? cfg_.harnack_held_out_samples : cfg_.harnack_samples,
                                 detail::job_seed(cfg_.seed, held ? 4 : 3, idx), opts_, cfg_.harnack_probes);
      row.mu = profile_->mu(profile_->center_index(c), r);
      return row;
    });
    std::vector<HarnackRow> fit_rows(rows.begin(), rows.begin() + cells), held(rows.begin() + cells, rows.end());
    const auto fit = fit_gamma(fit_rows);
    gamma_ = fit.gamma;
    const bool poisson = detail::plain_laplacian(cfg_) && cfg_.dimension == 2;
    CsvTable t({"role", "center_x", "center_y", "r", "ratio", "random_ratio", "point_mass_ratio", "mu", "gamma_mu_bound",
                "poisson_bound", "samples", "probes", "filtered", "verdict"});
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = rows[k];
      const bool is_held = k >= cells;
      const double bound = std::exp(gamma_ * row.mu) * (is_held ? 1.0 + cfg_.harnack_slack : 1.0);
      const double pb = 9.0 * (1.0 + 5.0 * g.mesh_size() / row.r);
      bool ok = row.ratio <= bound * (1 + 1e-12);
      if (!ok) fail_row(out, "harnack", "held_out_exp_gamma_mu", static_cast<long long>(k), row.ratio, bound);
      if (poisson && row.ratio > pb) {
        ok = false;
        fail_row(out, "harnack", "laplacian_worst_ratio", static_cast<long long>(k), row.ratio, pb);
      }
      t.add({std::string(is_held ? "held_out" : "fit"), row.center.x, row.center.y, row.r, row.ratio, row.random_ratio,
             row.point_mass_ratio, row.mu, bound, poisson ? CsvTable::Cell(pb) : CsvTable::Cell(std::monostate{}),
             static_cast<long long>(row.samples), static_cast<long long>(row.probes), static_cast<long long>(row.filtered),
             ok});
    }
    out.tables.emplace("harnack", std::move(t));
    fitted_["gamma"] = gamma_;
    return {{"gamma", gamma_},
            {"fit_residual", fit.residual},
            {"held_out_radii", held_radii},
            {"held_out_excess", held_out_excess(fit, held)},
            {"files", {"harnack.csv"}}};
  }

  json capacity_campaign(RunOutcome& out) {
    const auto ladder = cfg_.ladder();
    const std::size_t nr = ladder.size(), nd = cfg_.d.size();
    struct Cell {
      CapacityResult cap;
      CapacityBoundsRow bounds;
      std::vector<DualityReport> duality;
    };
    auto cells = parallel_map(cfg_.centers.size() * nr * nd, cfg_.threads, [&](std::size_t k) {
      const Point c = cfg_.centers[k / (nr * nd)];
      const double r = ladder[(k / nd) % nr], d = cfg_.d[k % nd];
      Cell cell;
      cell.cap = capacity(form_, c, r, d, opts_);
      cell.bounds = capacity_bounds_row(form_, *doubling_, *profile_, cell.cap);
      for (const auto& spec : cfg_.rho) {
        const auto gf = green(form_, c, cfg_.rho_value(spec, r), c, d * r, opts_);
        cell.duality.push_back(verify_duality(form_, cell.cap, gf));
      }
      cell.cap.potential.clear();
      return cell;
    });
    CsvTable ct({"center_x", "center_y", "r", "d", "capacity", "oracle", "relative_error", "inv_capacity",
                 "ball_measure", "lower_base", "c_hat", "lower_limit", "upper", "lower_ok", "upper_ok"});
    CsvTable dt({"center_x", "center_y", "r", "d", "rho", "pairing", "pairing_error", "inf_g", "inv_capacity",
                 "sup_g", "pairing_ok", "bracket_ok"});
    std::vector<CapacityBoundsRow> brows;
    double worst_pairing = 0.0;
    for (const auto& cell : cells) {
      const auto& b = cell.bounds;
      const auto oracle = detail::capacity_oracle(cfg_, b.r, b.d);
      const long long row = static_cast<long long>(ct.size());
      ct.add({b.center.x, b.center.y, b.r, b.d, cell.cap.capacity,
              oracle ? CsvTable::Cell(*oracle) : CsvTable::Cell(std::monostate{}),
              oracle ? CsvTable::Cell(cell.cap.capacity / *oracle - 1.0) : CsvTable::Cell(std::monostate{}),
              b.inv_capacity, b.ball_measure, b.lower_base, b.c_hat, b.lower_limit, b.upper, b.lower_ok, b.upper_ok});
      if (!b.lower_ok) fail_row(out, "capacity", "lower_bound_constant", row, b.c_hat, b.lower_limit);
      if (!b.upper_ok) fail_row(out, "capacity", "upper_bound", row, b.inv_capacity, b.upper);
      brows.push_back(b);
      for (std::size_t k = 0; k < cell.duality.size(); ++k) {
        const auto& du = cell.duality[k];
        const long long drow = static_cast<long long>(dt.size());
        const double rho = cfg_.rho_value(cfg_.rho[k], b.r);
        worst_pairing = std::max(worst_pairing, std::abs(du.pairing - 1.0));
        dt.add({b.center.x, b.center.y, b.r, b.d, rho, du.pairing, du.pairing - 1.0, du.inf_g, du.inv_capacity,
                du.sup_g, du.pairing_ok, du.bracket_ok});
        if (!du.pairing_ok) fail_row(out, "capacity", "duality_pairing", drow, du.pairing, 1.0);
        if (!du.bracket_ok)
          fail_row(out, "capacity", "duality_bracket", drow, du.inv_capacity,
                   du.inv_capacity < du.inf_g ? du.inf_g : du.sup_g);
      }
    }
    out.tables.emplace("capacity", std::move(ct));
    out.tables.emplace("duality", std::move(dt));
    const auto rep = capacity_bounds_check(std::move(brows));
    fitted_["capacity_lower_c"] = rep.fitted_c;
    return {{"max_pairing_error", worst_pairing}, {"fitted_c", rep.fitted_c}, {"files", {"capacity.csv", "duality.csv"}}};
  }

  BallChain chain_for(Point c, double r, Point from, Point to) const {
    return build_chain(*grid_, *doubling_, c, r, from, to);
  }

  int antipodal_l(Point c, double r) const {
    if (cfg_.dimension == 1) return 1;
    return chain_for(c, r, {c.x + r, c.y}, {c.x - r, c.y}).l;
  }

  json green_campaign(RunOutcome& out) {
    const SpaceGrid& g = *grid_;
    const auto ladder = cfg_.ladder();
    const std::size_t nr = ladder.size();
    struct Chained {
      BallChain chain;
      ChainedBoundReport rep;
    };
    auto chained = parallel_map(cfg_.centers.size() * nr, cfg_.threads, [&](std::size_t k) {
      const Point c = cfg_.centers[k / nr];
      const double r = ladder[k % nr];
      const auto gf = green(form_, c, g.mesh_size(), c, 2 * r, opts_);
      const auto [hi, lo] = layer_extremes(form_, c, r, gf);
      Chained out_row;
      out_row.chain = chain_for(c, r, hi, cfg_.dimension == 1 ? hi : lo);
      out_row.rep = chained_bound_check(form_, out_row.chain, gf, gamma_, profile_->mu(profile_->center_index(c), r));
      out_row.chain.annulus.clear();
      out_row.chain.owner.clear();
      return out_row;
    });
    CsvTable ct({"center_x", "center_y", "r", "l", "formula_l", "sup_g", "inf_g", "ratio", "bound", "verdict"});
    for (const auto& row : chained) {
      l_max_ = std::max(l_max_, row.chain.l);
      const long long idx = static_cast<long long>(ct.size());
      ct.add({row.chain.center.x, row.chain.center.y, row.chain.r, static_cast<long long>(row.chain.l),
              row.chain.formula_l, row.rep.sup_g, row.rep.inf_g, row.rep.ratio, row.rep.bound, row.rep.verdict});
      if (!row.rep.verdict) fail_row(out, "green", "chained_harnack_bound", idx, row.rep.ratio, row.rep.bound);
    }
    out.tables.emplace("chained", std::move(ct));

    const std::size_t ni = cfg_.green_inner.size();
    auto sizes = parallel_map(cfg_.centers.size() * ni, cfg_.threads, [&](std::size_t k) {
      const Point c = cfg_.centers[k / ni];
      const double r = cfg_.green_inner[k % ni];
      auto rep = green_size_bounds(form_, *doubling_, *profile_, c, r, cfg_.green_R, gamma_, antipodal_l(c, r), 32, opts_);
      rep.layer.clear();
      return rep;
    });
    CsvTable gt({"center_x", "center_y", "r", "R", "gamma", "l", "lower", "g_min", "g_max", "upper", "kernel", "verdict"});
    for (const auto& rep : sizes) {
      const long long idx = static_cast<long long>(gt.size());
      gt.add({rep.pole.x, rep.pole.y, rep.r, rep.R, rep.gamma, static_cast<long long>(rep.l), rep.lower, rep.g_min,
              rep.g_max, rep.upper, rep.kernel, rep.verdict});
      if (rep.lower > rep.g_min) fail_row(out, "green", "green_size_lower", idx, rep.g_min, rep.lower);
      if (rep.g_max > rep.upper) fail_row(out, "green", "green_size_upper", idx, rep.g_max, rep.upper);
    }
    out.tables.emplace("green_size", std::move(gt));
    fitted_["l"] = l_max_;
    return {{"l_max", l_max_}, {"files", {"chained.csv", "green_size.csv"}}};
  }

  json decay(RunOutcome& out) {
    const SpaceGrid& g = *grid_;
    const Point x0 = cfg_.centers.front();
    DecayConfig dc;
    dc.x0 = x0;
    dc.R0 = cfg_.decay_R0;
    dc.rungs = cfg_.decay_rungs;
    dc.q = cfg_.q;
    dc.gamma = gamma_;
    dc.l = antipodal_l(x0, dc.R0);

    auto extend = [&](double radius, auto&& f) {
      std::vector<double> b(g.node_count());
      for (int i = 0; i < g.node_count(); ++i) b[i] = f(g.node(i));
      return solve_local(form_, g.ball_nodes(x0, radius), b, opts_);
    };
    const auto u = extend(4 * dc.R0, [&](Point p) { return detail::field_value(cfg_.decay_field, p, x0); });
    const auto rep = saint_venant_check(form_, *profile_, dc, u, opts_);

    CsvTable t({"r", "psi_fresh", "psi_fixed", "osc", "mu", "c1_qr", "e1", "e2", "e2_proof", "envelope",
                "log_bound_next", "psi_ratio_next"});
    for (std::size_t k = 0; k < rep.radii.size(); ++k) {
      const bool pair = k + 1 < rep.radii.size();
      t.add({rep.radii[k], rep.psi_fresh[k], rep.psi_fixed[k], rep.osc[k], rep.mu[k], rep.c1q[k], rep.e1[k], rep.e2[k],
             rep.e2_proof[k], rep.envelope[k], pair ? CsvTable::Cell(rep.log_bound[k]) : CsvTable::Cell(std::monostate{}),
             pair ? CsvTable::Cell(rep.pair_ratio[k]) : CsvTable::Cell(std::monostate{})});
    }
    out.tables.emplace("decay", std::move(t));
    if (!rep.monotone_fixed) fail_row(out, "decay", "psi_fixed_monotone", -1, rep.psi_fixed.front(), rep.psi_fixed.back());
    if (!rep.envelope_ok) fail_row(out, "decay", "saint_venant_envelope", -1, rep.psi_fresh.front(), rep.envelope.front());
    if (rep.smooth)
      for (std::size_t k = 0; k < rep.pair_ratio.size(); ++k)
        if (rep.pair_ratio[k] > rep.log_bound[k])
          fail_row(out, "decay", "log_bound", static_cast<long long>(k), rep.pair_ratio[k], rep.log_bound[k]);

    const auto osc = oscillation_decay(g, x0, rep.radii, u);
    CsvTable ot({"r", "normalized_r", "osc"});
    for (std::size_t k = 0; k < osc.radii.size(); ++k) ot.add({osc.radii[k], osc.normalized[k], osc.osc[k]});
    out.tables.emplace("oscillation", std::move(ot));

    // Caccioppoli: affine calibration family, held-out quadratics and random affine data.
    std::vector<CaccioppoliRow> calib, held;
    std::vector<std::string> calib_tags, held_tags;
    std::mt19937_64 rng(detail::job_seed(cfg_.seed, 5, 0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool plane = cfg_.dimension == 2;
    for (double r : cfg_.caccioppoli_radii) {
      const double big = 4 * r;
      const auto X = extend(big, [&](Point p) { return p.x - x0.x; });
      const auto Y = plane ? extend(big, [&](Point p) { return p.y - x0.y; }) : std::vector<double>(g.node_count(), 0.0);
      const auto gf = caccioppoli_green(form_, dc, r, opts_);
      auto affine = [&](double a, double b, double th) {
        std::vector<double> v(g.node_count());
        for (int i = 0; i < g.node_count(); ++i) v[i] = a + b * (std::cos(th) * X[i] + std::sin(th) * Y[i]) / r;
        return v;
      };
      const std::vector<double> thetas = plane ? std::vector<double>{0.0, std::numbers::pi / 3, 2 * std::numbers::pi / 3}
                                               : std::vector<double>{0.0};
      for (double th : thetas)
        for (double tt : {0.0, 0.5, 1.0, 2.0, 4.0}) {
          if (tt == 0.0 && th != 0.0) continue;
          calib.push_back(caccioppoli_row(form_, *profile_, dc, r, gf, affine(1.0, tt, th)));
          calib_tags.push_back("affine t=" + format_number(tt) + " theta=" + format_number(th));
        }
      held.push_back(caccioppoli_row(form_, *profile_, dc, r, gf, X));
      held_tags.push_back("x");
      if (plane) {
        for (const char* name : {"x2-y2", "xy"}) {
          auto v = extend(big, [&](Point p) { return detail::field_value(name, p, x0) / (r * r); });
          held.push_back(caccioppoli_row(form_, *profile_, dc, r, gf, v));
          held_tags.push_back(name);
        }
      }
      for (int k = 0; k < 3; ++k) {
        const double a = 2 * unit(rng) - 1, b = 4 * unit(rng), th = plane ? 2 * std::numbers::pi * unit(rng) : 0.0;
        held.push_back(caccioppoli_row(form_, *profile_, dc, r, gf, affine(a, b, th)));
        held_tags.push_back("random-affine");
      }
    }
    const auto crep = caccioppoli_check(calib, held);
    CsvTable cc({"role", "family", "r", "q", "lhs", "base", "log_factor", "log_ratio", "log_cq", "verdict"});
    for (std::size_t k = 0; k < calib.size(); ++k) {
      const auto& row = calib[k];
      cc.add({std::string("calibration"), calib_tags[k], row.r, row.q, row.lhs, row.base, row.log_factor, row.log_ratio,
              crep.log_cq, true});
    }
    for (std::size_t k = 0; k < held.size(); ++k) {
      const auto& row = held[k];
      const long long idx = static_cast<long long>(cc.size());
      const bool ok = crep.held_out_pass[k];
      cc.add({std::string("held_out"), held_tags[k], row.r, row.q, row.lhs, row.base, row.log_factor, row.log_ratio,
              crep.log_cq, ok});
      if (!ok) fail_row(out, "decay", "caccioppoli_held_out", idx, row.log_ratio, crep.log_cq);
    }
    out.tables.emplace("caccioppoli", std::move(cc));

    fitted_["saint_venant_c"] = rep.fitted_c;
    fitted_["c_q"] = std::exp(crep.log_cq);
    fitted_["kappa"] = rep.kappa;
    return {{"x0", point(x0)},
            {"R0", dc.R0},
            {"l", dc.l},
            {"kappa", rep.kappa},
            {"fitted_c", rep.fitted_c},
            {"eta", rep.eta},
            {"mu_flatness", rep.mu_flatness},
            {"smooth", rep.smooth},
            {"resolution_ok", rep.resolution_ok},
            {"clamped", rep.clamped},
            {"monotone_fixed", rep.monotone_fixed},
            {"envelope_ok", rep.envelope_ok},
            {"log_bound_ok", rep.log_bound_ok},
            {"oscillation_c", osc.c},
            {"c_q", std::exp(crep.log_cq)},
            {"c_q_spread", crep.spread},
            {"c_q_scale_stable", crep.stable},
            {"files", {"decay.csv", "oscillation.csv", "caccioppoli.csv"}}};
  }

  ExperimentConfig cfg_;
  std::shared_ptr<SpaceGrid> grid_;
  FormAssembly form_;
  SolveOptions opts_;
  std::optional<DoublingReport> doubling_;
  std::optional<ConstantsProfile> profile_;
  double gamma_ = 0.0;
  int l_max_ = 0;
  json fitted_ = json::object();
};

struct RefineRow {
  std::string quantity;
  Point center;
  double r = 0.0, d = 0.0;
  double coarse = 0.0, fine = 0.0;
  std::optional<double> oracle;
  std::optional<double> min_order;
};

/// Quantities measured at h and h/2 with Richardson extrapolation (first order
/// assumed) and, where an oracle exists, the observed convergence order.
inline RunOutcome refine(const ExperimentConfig& cfg) {
  if (!cfg.refine) fail(ErrorKind::Config, "refine needs \"refine\": true in the config");
  if (cfg.cells * 2 > (cfg.dimension == 1 ? 8192 : 512))
    fail(ErrorKind::Config, "refine doubles cells; the fine grid would exceed the size limit");
  ExperimentConfig fine_cfg = cfg;
  fine_cfg.cells = cfg.cells * 2;
  std::vector<RefineRow> rows;
  const auto ladder = cfg.ladder();
  const bool leb = detail::lebesgue(cfg);
  for (const Point& c : cfg.centers)
    for (double r : ladder)
      rows.push_back({"ball_measure", c, r, 0.0, 0, 0,
                      leb ? std::optional<double>(cfg.dimension == 1 ? 2 * r : std::numbers::pi * r * r) : std::nullopt,
                      0.9});
  if (cfg.wants("constants"))
    for (const Point& c : cfg.centers)
      for (double r : ladder) rows.push_back({"c1", c, r, 0.0, 0, 0, detail::c1_oracle(cfg), std::nullopt});
  if (cfg.wants("capacity"))
    for (const Point& c : cfg.centers)
      for (double r : ladder)
        for (double d : cfg.d) rows.push_back({"capacity", c, r, d, 0, 0, detail::capacity_oracle(cfg, r, d), 0.9});
  if (cfg.wants("green"))
    for (const Point& c : cfg.centers) {
      std::optional<double> oracle;
      if (detail::plain_laplacian(cfg))
        oracle = cfg.dimension == 1 ? cfg.green_R / 4 : std::log(2.0) / (2 * std::numbers::pi);
      rows.push_back({"green_midpoint", c, cfg.green_R, 0.0, 0, 0, oracle, 0.9});
    }

  auto measure = [&](const ExperimentConfig& k, bool fine) {
    const auto grid = std::make_shared<SpaceGrid>(k.make_grid());
    const auto form = assemble(std::shared_ptr<const SpaceGrid>(grid), k.make_operator());
    SolveOptions opts;
    opts.tolerance = k.tolerance;
    auto values = parallel_map(rows.size(), k.threads, [&](std::size_t i) {
      const auto& row = rows[i];
      if (row.quantity == "ball_measure") return ball_measure(*grid, row.center, row.r);
      if (row.quantity == "c1") return poincare_constant(form, row.center, row.r, 1.0, opts).c1;
      if (row.quantity == "capacity") return capacity(form, row.center, row.r, row.d, opts).capacity;
      const auto gf = green(form, row.center, grid->mesh_size(), row.center, row.r, opts);
      return gf.values[grid->nearest_node({row.center.x + row.r / 2, row.center.y})];
    });
    for (std::size_t i = 0; i < rows.size(); ++i) (fine ? rows[i].fine : rows[i].coarse) = values[i];
  };
  measure(cfg, false);
  measure(fine_cfg, true);

  RunOutcome out;
  CsvTable t({"quantity", "center_x", "center_y", "r", "d", "value_h", "value_h2", "richardson", "oracle", "error_h",
              "error_h2", "observed_order", "min_order", "verdict"});
  json orders = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const double rich = 2 * row.fine - row.coarse;
    CsvTable::Cell oracle = std::monostate{}, e1 = std::monostate{}, e2 = std::monostate{}, order = std::monostate{},
                   minimum = std::monostate{};
    bool ok = true;
    if (row.oracle) {
      const double a = std::abs(row.coarse - *row.oracle), b = std::abs(row.fine - *row.oracle);
      oracle = *row.oracle;
      e1 = a;
      e2 = b;
      // Errors at roundoff level carry no order information.
      if (a > 1e-10 * std::abs(*row.oracle) && b > 0.0) {
        const double p = std::log2(a / b);
        order = p;
        if (row.min_order) {
          minimum = *row.min_order;
          ok = p >= *row.min_order;
          if (!ok) out.failures.push_back({"refine", row.quantity + "_order", static_cast<long long>(i), p, *row.min_order});
        }
        orders.push_back({{"quantity", row.quantity}, {"r", row.r}, {"d", row.d}, {"order", p}});
      }
    }
    t.add({row.quantity, row.center.x, row.center.y, row.r, row.d, row.coarse, row.fine, rich, oracle, e1, e2, order,
           minimum, ok});
  }
  out.tables.emplace("refine", std::move(t));
  out.summary["tool"] = "hsg-verify";
  out.summary["command"] = "refine";
  out.summary["config"] = config_to_json(cfg);
  out.summary["cells"] = {cfg.cells, fine_cfg.cells};
  out.summary["observed_orders"] = orders;
  json fails = json::array();
  for (const auto& f : out.failures)
    fails.push_back({{"campaign", f.campaign}, {"check", f.check}, {"row", f.row}, {"measured", f.measured}, {"bound", f.bound}});
  out.summary["failures"] = fails;
  out.summary["verdict"] = out.failures.empty();
  return out;
}

/// Writes every table as <out>/<stem>.csv and the summary as <out>/summary.json.
inline void write_outcome(const RunOutcome& out, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Config, "cannot create output directory '" + dir + "'");
  for (const auto& [stem, table] : out.tables) {
    std::ofstream f(std::filesystem::path(dir) / (stem + ".csv"), std::ios::binary);
    f << table.str();
  }
  std::ofstream f(std::filesystem::path(dir) / "summary.json", std::ios::binary);
  f << out.summary.dump(2) << '\n';
}

}  // namespace hsg
