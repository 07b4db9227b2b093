// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "codid/bootstrap.hpp"
#include "codid/bounds.hpp"
#include "codid/error.hpp"
#include "codid/estimator.hpp"
#include "codid/rng.hpp"
#include "codid/rum.hpp"
#include "codid/staggered.hpp"
#include "codid/synthetic.hpp"
#include "support/golden.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"

using namespace codid;
using oracle::Vec;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds; 0 when unbounded
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------------

Outcome aitchison() {
  double worst = 0;
  for (std::size_t p : {2, 3, 5, 8}) worst = std::max(worst, props::aitchison_axioms(p, 1000, 100 + p));
  return {worst <= 1e-10, fmt("max violation %.3g (tol 1e-10)", worst)};
}

// 2 ---------------------------------------------------------------------------

Outcome worked_example() {
  const auto pi00 = oracle::comp({0.7, 0.2, 0.1}), pi01 = oracle::comp({0.3, 0.3, 0.4});
  const auto pi10 = oracle::comp({0.2, 0.3, 0.5});
  const auto linear = linear_pt_counterfactual_shares(pi10, pi00, pi01);
  // The decimal inputs are not binary fractions; "exact" is read as within 4 ulp of each target.
  const Vec target{-0.2, 0.4, 0.8};
  double linear_ulps = 0;
  for (std::size_t k = 0; k < 3; ++k)
    linear_ulps = std::max(linear_ulps, std::abs(linear.values[k] - target[k]) /
                                            (std::nextafter(std::abs(target[k]), 1e9) - std::abs(target[k])));
  const auto codid = log_odds_counterfactual_shares(pi10, pi00, pi01);
  const Vec fig{0.03380, 0.17747, 0.78873};
  const double codid_gap = oracle::max_abs_diff(codid.shares(), fig);
  double sum = 0;
  bool positive = true;
  for (double s : codid.shares()) {
    sum += s;
    positive = positive && s > 0;
  }
  const bool pass = linear_ulps <= 4 && !linear.in_simplex && codid_gap <= 1e-4 && positive && std::abs(sum - 1) <= 1e-15;
  return {pass, fmt("linear (%.17g, %.17g, %.17g), %.0f ulp, flagged invalid: %s; codid (%.5f, %.5f, %.5f)",
                    linear.values[0], linear.values[1], linear.values[2], linear_ulps,
                    linear.in_simplex ? "no" : "yes", codid[0], codid[1], codid[2])};
}

// 3 ---------------------------------------------------------------------------

Outcome dual_path() {
  const auto w = props::dual_path(10000, 3);
  const bool pass = w.closure_vs_log_odds <= 1e-10 && w.compositional_equality <= 1e-10;
  return {pass, fmt("closure vs log-odds %.3g, compositional equality %.3g, ratio oracle %.3g",
                    w.closure_vs_log_odds, w.compositional_equality, w.ratio_oracle)};
}

// 4 ---------------------------------------------------------------------------

Outcome saturated() {
  const double worst = props::saturated_logit(10000, 4);
  return {worst <= 1e-10, fmt("max |CTT - inv_log_odds(beta)| %.3g", worst)};
}

// 5 ---------------------------------------------------------------------------

/// 2×2 logit spec whose cells carry the given quantities: μ = log q, S = Σ q.
UtilitySpec logit_spec(const std::map<std::pair<std::string, int>, Vec>& q, const Vec& treated11) {
  UtilitySpec s;
  s.labels = default_labels(treated11.size());
  s.periods = {0, 1};
  auto mu_total = [](const Vec& v) {
    Vec mu;
    double total = 0;
    for (double x : v) {
      mu.push_back(std::log(x));
      total += x;
    }
    return std::make_pair(mu, total);
  };
  for (const auto* id : {"control", "treated"}) {
    GroupUtility g;
    g.id = id;
    if (std::string(id) == "treated") g.first_treated = 1;
    for (int t : {0, 1}) {
      auto [mu, total] = mu_total(q.at({id, t}));
      g.mu.push_back(mu);
      g.totals.push_back(total);
    }
    if (std::string(id) == "treated") {
      auto [mu, total] = mu_total(treated11);
      g.mu_treated = std::vector<Vec>{g.mu[0], mu};
      g.totals_treated = Vec{g.totals[0], total};
    }
    s.groups.push_back(g);
  }
  return s;
}

Outcome rum_recovery() {
  oracle::Random rng(5);
  double recovery = 0, propagation = 0, identity = 0;
  for (std::size_t p : {2, 3, 5, 8}) {
    for (int i = 0; i < 250; ++i) {
      // Expected utilities E[U] = log q + γ are parallel by construction of the held-out cell.
      std::map<std::pair<std::string, int>, Vec> q;
      q[{"control", 0}] = rng.quantities(p);
      q[{"control", 1}] = rng.quantities(p);
      q[{"treated", 0}] = rng.quantities(p);
      q[{"treated", 1}] = oracle::ratio_counterfactual(q[{"treated", 0}], q[{"control", 0}], q[{"control", 1}]);
      const Vec effect = rng.quantities(p);
      const auto spec = logit_spec(q, effect);
      const auto cert = certify_prop1(spec);
      identity = std::max({identity, cert.identity_gap, cert.utility_residual});
      const auto r = estimate_2x2(generate_panel(spec, GenerationMode::population).observed_panel());
      recovery = std::max(recovery, oracle::max_rel_diff(r.counterfactual_q.values(), q[{"treated", 1}]));

      // A violation δ in one category of the control pre-period cell.
      const double delta = rng.normal(0.5);
      const std::size_t k = rng.index(p);
      auto bent = q;
      bent[{"control", 0}][k] *= std::exp(delta);
      const auto m = estimate_2x2(generate_panel(logit_spec(bent, effect), GenerationMode::population).observed_panel());
      for (std::size_t j = 0; j < p; ++j) {
        const double expected = j == k ? std::exp(-delta) : 1.0;
        propagation = std::max(propagation, std::abs(m.counterfactual_q[j] / r.counterfactual_q[j] / expected - 1));
      }
    }
  }
  const bool pass = recovery <= 1e-12 && propagation <= 1e-12 && identity <= 1e-12;
  return {pass, fmt("recovery rel err %.3g, violation propagation %.3g, utility identity %.3g", recovery, propagation,
                    identity)};
}

// 6 ---------------------------------------------------------------------------

Outcome gev() {
  oracle::Random rng(6);
  double nl_logit = 0, gnl_nl = 0;
  const auto labels = default_labels(5);
  for (int i = 0; i < 1000; ++i) {
    Vec mu(5);
    for (double& x : mu) x = rng.normal(1.0);
    GevSpec nl;
    nl.family = GevFamily::nested_logit;
    nl.nests = {{{0, 3}, 1.0}, {{1, 2, 4}, 1.0}};
    nl_logit = std::max(nl_logit, oracle::max_abs_diff(gev_shares(mu, nl, labels).shares(),
                                                       logit_shares(mu, labels).shares()));
    nl.nests[0].lambda = rng.uniform(0.05, 1);
    nl.nests[1].lambda = rng.uniform(0.05, 1);
    GevSpec g;
    g.family = GevFamily::gnl;
    g.nests = {{{}, nl.nests[0].lambda}, {{}, nl.nests[1].lambda}};
    g.alpha = {{1, 0}, {0, 1}, {0, 1}, {1, 0}, {0, 1}};
    gnl_nl = std::max(gnl_nl, oracle::max_abs_diff(gev_shares(mu, g, labels).shares(), gev_shares(mu, nl, labels).shares()));
  }
  Vec mu{0.3, -0.2, 0.9, 0.1};
  GevSpec logit;
  GevSpec nested;
  nested.family = GevFamily::nested_logit;
  nested.nests = {{{0, 1}, 0.4}, {{2, 3}, 0.7}};
  const auto a = monte_carlo_shares(mu, logit, 1000000, 61);
  const auto b = monte_carlo_shares(mu, nested, 1000000, 62);
  const bool pass = nl_logit <= 1e-12 && gnl_nl <= 1e-12 && a.max_abs_z <= 4 && b.max_abs_z <= 4;
  return {pass, fmt("NL(1) vs logit %.3g, GNL vs NL %.3g, max |z| logit %.2f, nested %.2f at 1e6 draws", nl_logit,
                    gnl_nl, a.max_abs_z, b.max_abs_z)};
}

// 7 ---------------------------------------------------------------------------

PanelDataset pre_panel(oracle::Random& rng, std::size_t p, int pre) {
  oracle::PanelSpec s;
  s.labels = default_labels(p);
  s.cohorts = {{"control", std::nullopt}, {"treated", 1}};
  for (int t = 1 - pre; t <= 1; ++t) {
    s.periods.push_back(t);
    s.cells[{"control", t}] = rng.quantities(p);
    s.cells[{"treated", t}] = rng.quantities(p);
  }
  return oracle::build(s);
}

Outcome bounds() {
  oracle::Random rng(7);
  double collapse = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto panel = pre_panel(rng, 2 + rng.index(5), 1);
    const auto point = estimate_2x2(panel);
    const auto r = compute_bounds(panel, WeightScheme::uniform());
    collapse = std::max({collapse, oracle::max_rel_diff(r.categories.b_min, point.counterfactual_q.values()),
                         oracle::max_rel_diff(r.categories.b_max, point.counterfactual_q.values()),
                         std::abs(r.gtt.total.lo - point.gtt_total) / (1 + point.gtt_total),
                         std::abs(r.gtt.total.hi - point.gtt_total) / (1 + point.gtt_total)});
  }
  std::size_t outside = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto panel = pre_panel(rng, 2 + rng.index(5), 2 + static_cast<int>(rng.index(4)));
    const std::map<int, double> w{{0, 1.0}, {-1, rng.uniform(0.2, 1.0)}, {-2, rng.uniform(0.2, 1.0)}};
    const auto b = category_bounds(panel, WeightScheme::explicit_weights(w));
    const auto point = counterfactual_quantities(panel.cell("treated", 0), panel.cell("control", 0),
                                                 panel.cell("control", 1));
    for (std::size_t k = 0; k < point.size(); ++k)
      if (point[k] < b.b_min[k] * (1 - 1e-12) || point[k] > b.b_max[k] * (1 + 1e-12)) ++outside;
  }
  double envelope = 0;
  for (int i = 0; i < 20; ++i) {
    const auto panel = pre_panel(rng, 3, 3);
    const auto r = compute_bounds(panel, WeightScheme::uniform(), rng.index(3));
    const auto& box = r.ctt.counterfactual_box();
    const std::size_t base = r.ctt.baseline();
    for (std::size_t k = 0; k < 3; ++k) {
      const auto [lo, hi] =
          oracle::grid_extrema({{box[0].lo, box[0].hi}, {box[1].lo, box[1].hi}}, 101, [&](const Vec& x) {
            Vec y(3, 1.0);
            std::size_t c = 0;
            for (std::size_t j = 0; j < 3; ++j)
              if (j != base) y[j] = std::exp(x[c++]);
            return oracle::normalize(y)[k];
          });
      envelope = std::max({envelope, std::abs(r.share_envelopes[k].lo - lo), std::abs(r.share_envelopes[k].hi - hi)});
    }
  }
  const bool pass = collapse <= 1e-12 && outside == 0 && envelope <= 1e-6;
  return {pass, fmt("collapse %.3g, sandwich violations %zu, envelope vs 101^2 grid %.3g", collapse, outside, envelope)};
}

// 8 ---------------------------------------------------------------------------

Outcome staggered() {
  oracle::Random rng(8);
  double reduction = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t p = 2 + rng.index(5);
    const auto panel = oracle::two_by_two(rng.quantities(p), rng.quantities(p), rng.quantities(p), rng.quantities(p));
    const auto point = estimate_2x2(panel);
    const auto e = cohort_effects(panel, ControlStrategy::never_treated).effects.at(0);
    reduction = std::max({reduction, oracle::max_rel_diff(e.counterfactual_q.values(), point.counterfactual_q.values()),
                          props::comp_gap(e.ctt, point.ctt)});
  }
  double recovery = 0;
  std::size_t cells = 0;
  for (std::size_t p : {2, 3, 5}) {
    for (int i = 0; i < 20; ++i) {
      const auto truth = oracle::additive_staggered(rng, p, {2, 4, 6}, 8, true);
      const CohortPanel cp(truth.observed);
      for (int g : cp.cohorts())
        for (int t = g; t < 8; ++t) {
          const Vec& u = truth.untreated.at({"g" + std::to_string(g), t});
          recovery = std::max(recovery, oracle::max_rel_diff(counterfactual_never_treated(cp, g, t).values(), u));
          ++cells;
          const auto valid = valid_control_cohorts(cp, g, t);
          for (int s : valid) {
            recovery = std::max(recovery, oracle::max_rel_diff(counterfactual_not_yet_treated(cp, g, t, s).values(), u));
            ++cells;
          }
          if (!valid.empty())
            recovery = std::max(
                recovery, oracle::max_rel_diff(counterfactual_not_yet_treated(cp, g, t, std::nullopt).values(), u));
        }
    }
  }
  const bool pass = reduction <= 1e-12 && recovery <= 1e-12;
  return {pass, fmt("2x2 reduction %.3g, recovery %.3g over %zu (g,t,control) cells", reduction, recovery, cells)};
}

// 9 ---------------------------------------------------------------------------

PanelDataset synth_panel(const std::map<std::string, std::vector<Vec>>& paths, int t0) {
  oracle::PanelSpec s;
  s.labels = default_labels(paths.begin()->second.front().size());
  for (int t = 1; t <= static_cast<int>(paths.begin()->second.size()); ++t) s.periods.push_back(t);
  for (const auto& [id, path] : paths) {
    s.cohorts[id] = id == "tr" ? std::optional<int>(t0 + 1) : std::nullopt;
    for (std::size_t i = 0; i < path.size(); ++i) s.cells[{id, static_cast<int>(i) + 1}] = path[i];
  }
  return oracle::build(s);
}

double unit_objective(const PanelDataset& panel, const SyntheticSetup& s, const Vec& w) {
  double sum = 0;
  for (int t : s.pre_periods)
    for (std::size_t k = 0; k < panel.num_categories(); ++k) {
      double fit = 0;
      for (std::size_t j = 0; j < s.controls.size(); ++j) fit += w[j] * std::log(panel.cell(s.controls[j], t)[k]);
      const double r = std::log(panel.cell(s.treated, t)[k]) - fit;
      sum += r * r;
    }
  return sum;
}

double time_objective(const PanelDataset& panel, const SyntheticSetup& s, const Vec& lambda) {
  double sum = 0;
  for (const auto& j : s.controls)
    for (std::size_t k = 0; k < panel.num_categories(); ++k) {
      double post = 0, fit = 0;
      for (int t : s.post_periods) post += std::log(panel.cell(j, t)[k]);
      post /= static_cast<double>(s.post_periods.size());
      for (std::size_t i = 0; i < s.pre_periods.size(); ++i) fit += lambda[i] * std::log(panel.cell(j, s.pre_periods[i])[k]);
      sum += (post - fit) * (post - fit);
    }
  return sum;
}

Outcome synthetic() {
  oracle::Random rng(9);
  auto path = [&](std::size_t periods) {
    std::vector<Vec> out;
    for (std::size_t i = 0; i < periods; ++i) out.push_back(rng.quantities(3));
    return out;
  };
  double zero_objective = 0, mass = 1;
  for (int i = 0; i < 50; ++i) {
    // Unit weights: control c3 reproduces the treated pre-path.
    std::map<std::string, std::vector<Vec>> paths{{"c1", path(7)}, {"c2", path(7)}, {"c4", path(7)}, {"tr", path(7)}};
    paths["c3"] = paths["tr"];
    paths["c3"][5] = rng.quantities(3);
    paths["c3"][6] = rng.quantities(3);
    const auto panel = synth_panel(paths, 5);
    const auto s = synthetic_setup(panel, 5);
    const auto w = solve_unit_weights(panel, s);
    zero_objective = std::max(zero_objective, w.objective);
    mass = std::min(mass, w.weights[2]);
    // Time weights: pre-period 3 equals the post mean of every control.
    for (const auto* id : {"c1", "c2", "c3", "c4"})
      for (std::size_t k = 0; k < 3; ++k) paths[id][2][k] = std::sqrt(paths[id][5][k] * paths[id][6][k]);
    const auto panel2 = synth_panel(paths, 5);
    const auto l = solve_time_weights(panel2, synthetic_setup(panel2, 5));
    zero_objective = std::max(zero_objective, l.objective);
    mass = std::min(mass, l.weights[2]);
  }
  std::size_t beaten = 0, probes = 0;
  for (int i = 0; i < 20; ++i) {
    std::map<std::string, std::vector<Vec>> paths;
    for (const auto* id : {"c1", "c2", "c3", "c4", "tr"}) paths[id] = path(7);
    const auto panel = synth_panel(paths, 5);
    const auto s = synthetic_setup(panel, 5);
    const double best_w = unit_objective(panel, s, solve_unit_weights(panel, s).weights);
    const double best_l = time_objective(panel, s, solve_time_weights(panel, s).weights);
    for (int j = 0; j < 10000; ++j) {
      probes += 2;
      if (unit_objective(panel, s, rng.simplex_point(4)) < best_w - 1e-12) ++beaten;
      if (time_objective(panel, s, rng.simplex_point(5)) < best_l - 1e-12) ++beaten;
    }
    probes += 9;
    for (std::size_t v = 0; v < 5; ++v) {
      Vec e(5, 0.0);
      e[v] = 1;
      if (time_objective(panel, s, e) < best_l - 1e-12) ++beaten;
      if (v < 4) {
        Vec u(4, 0.0);
        u[v] = 1;
        if (unit_objective(panel, s, u) < best_w - 1e-12) ++beaten;
      }
    }
  }
  const bool pass = zero_objective <= 1e-12 && mass >= 1 - 1e-6 && beaten == 0;
  return {pass, fmt("zero-residual objective %.3g, designated mass %.9f, %zu of %zu probes beat the solver on 20 random instances",
                    zero_objective, mass, beaten, probes)};
}

// 10 --------------------------------------------------------------------------

Outcome coverage() {
  const double S = 100000;
  const std::vector<Vec> pi{{0.5, 0.3, 0.2}, {0.45, 0.3, 0.25}, {0.4, 0.35, 0.25}, {0.42, 0.36, 0.22}};
  // True cells: control 0, control 1, treated 0, treated 1 (treated 1 carries the effect).
  auto cell = [&](std::size_t c) {
    Vec v = pi[c];
    for (double& x : v) x *= S;
    return v;
  };
  const Vec cf = oracle::ratio_counterfactual(cell(2), cell(0), cell(1));
  double cf_total = 0;
  for (double x : cf) cf_total += x;
  const double truth = S / cf_total - 1;

  auto run_all = [&] {
    std::vector<std::pair<double, double>> cis;
    for (std::uint32_t d = 0; d < 200; ++d) {
      std::vector<Vec> drawn;
      for (std::uint32_t c = 0; c < 4; ++c) {
        CounterRng rng(20240601, {d, c, 0xDA7A});
        const auto counts = sample_multinomial(static_cast<std::int64_t>(S), pi[c], rng);
        drawn.emplace_back(counts.begin(), counts.end());
      }
      const auto panel = oracle::two_by_two(drawn[0], drawn[1], drawn[2], drawn[3]);
      BootstrapConfig cfg;
      cfg.replicates = 500;
      cfg.seed = 1000 + d;
      cfg.threads = 0;
      const auto r = bootstrap(panel, cfg);
      cis.emplace_back(r.gtt_total.lo, r.gtt_total.hi);
    }
    return cis;
  };
  const auto first = run_all();
  std::size_t covered = 0;
  for (const auto& [lo, hi] : first) covered += lo <= truth && truth <= hi;
  const bool deterministic = run_all() == first;
  const double rate = static_cast<double>(covered) / static_cast<double>(first.size());
  return {rate >= 0.90 && deterministic,
          fmt("coverage %.3f of true GTT %.6f over 200 datasets; rerun identical: %s", rate, truth,
              deterministic ? "yes" : "no")};
}

// 11 --------------------------------------------------------------------------

Outcome goldens() {
  std::size_t unstable = 0, mismatched = 0;
  for (const auto& c : golden::cases()) {
    const auto a = golden::run(c.args, CODID_TEST_DATA);
    const auto b = golden::run(c.args, CODID_TEST_DATA);
    if (a.out != b.out || a.code != b.code) ++unstable;
    if (a.out != golden::read_file(std::filesystem::path(CODID_GOLDEN_DIR) / c.file) || a.code != c.exit_code)
      ++mismatched;
  }
  return {unstable == 0 && mismatched == 0, fmt("%zu commands, %zu unstable across runs, %zu differ from golden files",
                                                golden::cases().size(), unstable, mismatched)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "Aitchison axioms", 5, aitchison},
      {2, "three-category worked example", 0, worked_example},
      {3, "dual-path identification", 0, dual_path},
      {4, "saturated-logit equivalence", 0, saturated},
      {5, "RUM oracle recovery", 0, rum_recovery},
      {6, "GEV reductions and Monte Carlo", 60, gev},
      {7, "bounds collapse and sandwich", 0, bounds},
      {8, "staggered reduction and recovery", 0, staggered},
      {9, "synthetic solver", 30, synthetic},
      {10, "bootstrap coverage", 600, coverage},
      {11, "CLI golden files", 0, goldens},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2fs", secs);
    if (c.time_limit > 0) {
      timing += fmt(" (limit %.0fs)", c.time_limit);
      if (secs > c.time_limit) {
        o.pass = false;
        o.detail += "; over time limit";
      }
    }
    std::printf("%s  %2d  %-34s %s  [%s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(),
                timing.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
