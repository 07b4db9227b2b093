#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "codid/bootstrap.hpp"
#include "codid/bounds.hpp"
#include "codid/error.hpp"
#include "codid/estimator.hpp"
#include "codid/panel.hpp"
#include "codid/report.hpp"
#include "codid/rum.hpp"
#include "codid/staggered.hpp"
#include "codid/synthetic.hpp"

namespace codid::cli {

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kInvalid = 2;

struct PanelOptions {
  std::string path;
  std::optional<double> smooth;
  std::optional<std::string> treated;
  std::optional<std::string> baseline;
};

struct BootstrapOptions {
  std::size_t replicates = 0;  // 0: no bootstrap
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  unsigned threads = 1;
  bool smoothing = false;
  std::string replicates_out;
};

struct Options {
  PanelOptions panel;
  BootstrapOptions boot;
  std::string output;
  // estimate
  std::string strata_weights = "column";
  // bounds
  std::string weights = "uniform";
  // staggered
  std::string cohorts;
  std::string strategy = "pooled";
  std::optional<std::string> cell;
  // synthetic
  int t0 = 0;
  double ridge = 0.0;
  std::size_t max_iter = 50000;
  double tol = 1e-8;
  // simulate
  std::string spec;
  std::string mode = "population";
  std::uint64_t sim_seed = 0;
  std::string untreated_out;
  std::string cohorts_out;
};

void add_panel_options(CLI::App* sub, PanelOptions& p, bool treated, bool baseline) {
  sub->add_option("panel", p.path, "Panel CSV (group,time,category,count[,stratum,stratum_weight])")
      ->required();
  sub->add_option("--smooth", p.smooth, "Add this pseudo-count to every category of a group-time cell holding a zero");
  if (treated) sub->add_option("--treated", p.treated, "Id of the treated group (default: 'treated' or '1')");
  if (baseline) sub->add_option("--baseline", p.baseline, "Baseline category label (default: last)");
}

void add_bootstrap_options(CLI::App* sub, BootstrapOptions& b) {
  sub->add_option("--bootstrap", b.replicates, "Parametric bootstrap replicates (0 disables)");
  sub->add_option("--seed", b.seed, "Bootstrap seed");
  sub->add_option("--ci-level", b.ci_level, "Percentile interval level")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--threads", b.threads, "Bootstrap worker threads (0: all cores)");
  sub->add_flag("--boot-smooth", b.smoothing, "Add 0.5 to replicate cells that draw a zero instead of redrawing");
  sub->add_option("--replicates-out", b.replicates_out, "Write per-replicate estimates as CSV");
}

PanelDataset load(const PanelOptions& p) {
  LoadOptions options;
  options.smooth = p.smooth;
  return load_csv(std::filesystem::path(p.path), options);
}

std::optional<std::size_t> resolve_baseline(const PanelDataset& panel, const PanelOptions& p) {
  if (!p.baseline) return std::nullopt;
  return baseline_index(panel.labels(), *p.baseline);
}

std::string baseline_label(const PanelDataset& panel, const PanelOptions& p) {
  return p.baseline ? *p.baseline : panel.labels().back();
}

Json envelope(const std::string& command, Json config) {
  Json o;
  o["schema"] = kSchemaVersion;
  o["command"] = command;
  o["config"] = std::move(config);
  return o;
}

Json panel_config(const PanelOptions& p) {
  Json c;
  c["panel"] = p.path;
  c["smooth"] = p.smooth ? Json(*p.smooth) : Json(nullptr);
  return c;
}

Json bootstrap_config(const BootstrapOptions& b) {
  return Json{{"replicates", b.replicates}, {"seed", b.seed},        {"ci_level", b.ci_level},
              {"threads", b.threads},       {"smoothing", b.smoothing}, {"max_redraws", 100}};
}

BootstrapConfig make_bootstrap(const BootstrapOptions& b, BootstrapTarget target) {
  BootstrapConfig c;
  c.replicates = b.replicates;
  c.seed = b.seed;
  c.ci_level = b.ci_level;
  c.threads = b.threads;
  c.smoothing = b.smoothing;
  c.target = target;
  return c;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw Error(Errc::IoError, "cannot write " + path);
  file << text;
}

void maybe_write_replicates(const BootstrapOptions& b, const BootstrapResult& r, const Labels& labels) {
  if (b.replicates_out.empty()) return;
  std::ostringstream s;
  write_replicates(r, labels, s);
  std::ofstream file(b.replicates_out, std::ios::binary);
  if (!file) throw Error(Errc::IoError, "cannot write " + b.replicates_out);
  file << s.str();
}

Json issue_json(const SupportIssue& i) {
  Json e;
  e["group"] = i.cell.group;
  e["t"] = i.cell.period;
  if (!i.cell.stratum.empty()) e["stratum"] = i.cell.stratum;
  e["category"] = i.category;
  e["reason"] = i.reason;
  return e;
}

// ---------------------------------------------------------------------------

int cmd_validate(const Options& o, std::ostream& out) {
  Json config = panel_config(o.panel);
  Json doc = envelope("validate", config);
  const PanelTable table = read_panel_table(std::filesystem::path(o.panel.path));
  Json issues = Json::array();
  for (const auto& i : validate_common_support(table)) issues.push_back(issue_json(i));
  int code = kOk;
  try {
    LoadOptions options;
    options.smooth = o.panel.smooth;
    const PanelDataset panel = build_panel(table, options);
    doc["valid"] = true;
    doc["panel"] = panel_summary(panel);
  } catch (const Error& e) {
    if (!is_validation_error(e.code())) throw;
    doc["valid"] = false;
    doc["error"] = {{"code", e.qualified_code()}, {"message", e.what()}};
    code = kInvalid;
  }
  doc["issues"] = std::move(issues);
  emit(dump_json(doc), o.output, out);
  return code;
}

int cmd_estimate(const Options& o, std::ostream& out) {
  PanelDataset panel = load(o.panel);
  const std::string treated = resolve_treated_group(panel, o.panel.treated);
  panel = panel.with_treated_group(treated);
  if (panel.stratified() && o.strata_weights == "treated-period0")
    panel = weights_from_group_totals(panel, treated, 0);
  const auto baseline = resolve_baseline(panel, o.panel);

  Json config = panel_config(o.panel);
  config["treated"] = treated;
  config["baseline"] = baseline_label(panel, o.panel);
  if (panel.stratified()) config["strata_weights"] = o.strata_weights;
  config["bootstrap"] = bootstrap_config(o.boot);
  Json doc = envelope("estimate", std::move(config));
  doc["panel"] = panel_summary(panel);

  BootstrapTarget target = BootstrapTarget::two_by_two;
  if (panel.stratified()) {
    target = BootstrapTarget::stratified;
    doc["result"] = to_json(estimate_stratified(panel, baseline));
  } else {
    const auto cells = extract_2x2(panel);
    doc["result"] = to_json(estimate_2x2(cells, baseline));
    const auto pi10 = closure(cells.q10), pi00 = closure(cells.q00), pi01 = closure(cells.q01);
    const auto logit = saturated_logit_ctt(cells, baseline);
    const auto linear = linear_pt_counterfactual_shares(pi10, pi00, pi01);
    Json diag;
    diag["pi_counterfactual_log_odds_route"] = to_json(log_odds_counterfactual_shares(pi10, pi00, pi01, baseline));
    diag["saturated_logit"] = {{"baseline", panel.labels()[logit.beta.baseline()]},
                               {"beta", std::vector<double>(logit.beta.values().begin(), logit.beta.values().end())},
                               {"ctt", to_json(logit.ctt)}};
    diag["linear_parallel_trends"] = {{"pi_counterfactual", labelled(panel.labels(), linear.values)},
                                      {"valid_composition", linear.in_simplex}};
    doc["diagnostics"] = std::move(diag);
  }
  if (o.boot.replicates > 0) {
    const auto r = bootstrap(panel, make_bootstrap(o.boot, target));
    doc["bootstrap"] = to_json(r, panel.labels());
    maybe_write_replicates(o.boot, r, panel.labels());
  }
  emit(dump_json(doc), o.output, out);
  return kOk;
}

int cmd_bounds(const Options& o, std::ostream& out) {
  PanelDataset panel = load(o.panel);
  const std::string treated = resolve_treated_group(panel, o.panel.treated);
  panel = panel.with_treated_group(treated);
  const auto scheme = WeightScheme::parse(o.weights);
  Json config = panel_config(o.panel);
  config["treated"] = treated;
  config["baseline"] = baseline_label(panel, o.panel);
  config["weights"] = scheme.describe();
  Json doc = envelope("bounds", std::move(config));
  doc["result"] = to_json(compute_bounds(panel, scheme, resolve_baseline(panel, o.panel)));
  emit(dump_json(doc), o.output, out);
  return kOk;
}

std::pair<int, int> parse_cell(const std::string& text) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const int g = std::stoi(text.substr(0, comma), &used);
    const int t = std::stoi(text.substr(comma + 1));
    return {g, t};
  } catch (const std::exception&) {
    throw Error(Errc::InvalidConfig, "--cell takes G,T, got '" + text + "'");
  }
}

int cmd_staggered(const Options& o, std::ostream& out) {
  PanelDataset panel = load(o.panel);
  panel = panel.with_cohorts(read_cohorts(std::filesystem::path(o.cohorts)));
  const auto strategy = parse_control_strategy(o.strategy);
  Json config = panel_config(o.panel);
  config["cohorts"] = o.cohorts;
  config["strategy"] = o.strategy;
  config["baseline"] = baseline_label(panel, o.panel);
  if (o.boot.replicates > 0) {
    Json b = bootstrap_config(o.boot);
    b["cell"] = o.cell ? Json(*o.cell) : Json(nullptr);
    config["bootstrap"] = std::move(b);
  }
  Json doc = envelope("staggered", std::move(config));
  doc["panel"] = panel_summary(panel);
  doc["result"] = to_json(cohort_effects(panel, strategy, resolve_baseline(panel, o.panel)), panel.labels());
  if (o.boot.replicates > 0) {
    if (!o.cell) throw Error(Errc::InvalidConfig, "staggered bootstrap needs --cell G,T");
    auto c = make_bootstrap(o.boot, BootstrapTarget::staggered_cell);
    const auto [g, t] = parse_cell(*o.cell);
    c.cell = StaggeredCell{g, t, strategy == ControlStrategy::not_yet_treated ? ControlStrategy::pooled : strategy, {}};
    const auto r = bootstrap(panel, c);
    doc["bootstrap"] = to_json(r, panel.labels());
    maybe_write_replicates(o.boot, r, panel.labels());
  }
  emit(dump_json(doc), o.output, out);
  return kOk;
}

int cmd_synthetic(const Options& o, std::ostream& out) {
  const PanelDataset panel = load(o.panel);
  SimplexQpOptions qp;
  qp.ridge = o.ridge;
  qp.max_iter = o.max_iter;
  qp.tol = o.tol;
  const auto result = synthetic_effects(panel, o.t0, o.panel.treated, qp);
  Json config = panel_config(o.panel);
  config["treated"] = result.setup.treated;
  config["t0"] = o.t0;
  config["solver"] = {{"method", "accelerated projected gradient, step 1/L, adaptive restart"}, {"tol", o.tol}, {"max_iter", o.max_iter},
                      {"ridge", o.ridge}};
  Json doc = envelope("synthetic", std::move(config));
  doc["result"] = to_json(result, panel.labels());
  emit(dump_json(doc), o.output, out);
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto spec = read_utility_spec(std::filesystem::path(o.spec));
  GenerationMode mode;
  if (o.mode == "population") mode = GenerationMode::population;
  else if (o.mode == "sampled") mode = GenerationMode::sampled;
  else throw Error(Errc::InvalidSpec, "--mode must be population or sampled");
  const auto generated = generate_panel(spec, mode, o.sim_seed);
  std::ostringstream panel;
  write_csv(generated.observed, panel);
  emit(panel.str(), o.output, out);
  if (!o.untreated_out.empty()) {
    std::ostringstream s;
    write_csv(generated.untreated, s);
    emit(s.str(), o.untreated_out, out);
  }
  if (!o.cohorts_out.empty()) {
    std::ostringstream s;
    s << "group,first_treated\n";
    for (const auto& g : spec.groups)
      s << g.id << ',' << (g.first_treated ? std::to_string(*g.first_treated) : "inf") << '\n';
    emit(s.str(), o.cohorts_out, out);
  }
  return kOk;
}

int cmd_plotdata(const Options& o, std::ostream& out) {
  const PanelDataset panel = load(o.panel);
  const std::size_t base = resolve_baseline(panel, o.panel).value_or(panel.num_categories() - 1);
  const bool strata = panel.stratified();
  std::ostringstream s;
  s << "group,time," << (strata ? "stratum," : "") << "category,quantity,log_quantity,share,log_ratio\n";
  for (const auto& [address, q] : panel.cells()) {
    const auto pi = closure(q);
    for (std::size_t k = 0; k < q.size(); ++k) {
      s << address.group << ',' << address.period << ',';
      if (strata) s << address.stratum << ',';
      s << panel.labels()[k] << ',' << format_double(q[k]) << ',' << format_double(std::log(q[k])) << ','
        << format_double(pi[k]) << ',' << format_double(std::log(pi[k] / pi[base])) << '\n';
    }
  }
  emit(s.str(), o.output, out);
  return kOk;
}

int cmd_demo_fig1(const Options& o, std::ostream& out) {
  const Labels labels{"c1", "c2", "c3"};
  const Composition pi00({0.7, 0.2, 0.1}, labels);
  const Composition pi01({0.3, 0.3, 0.4}, labels);
  const Composition pi10({0.2, 0.3, 0.5}, labels);
  const auto linear = linear_pt_counterfactual_shares(pi10, pi00, pi01);
  const auto codid = log_odds_counterfactual_shares(pi10, pi00, pi01);
  Json doc = envelope("demo-fig1", Json::object());
  doc["pi_00"] = to_json(pi00);
  doc["pi_01"] = to_json(pi01);
  doc["pi_10"] = to_json(pi10);
  doc["linear_parallel_trends"] = {{"pi_counterfactual", linear.values},
                                   {"valid_composition", linear.in_simplex},
                                   {"note", linear.in_simplex ? "inside the simplex" : "outside the probability simplex"}};
  doc["codid"] = {{"pi_counterfactual", std::vector<double>(codid.shares().begin(), codid.shares().end())},
                  {"valid_composition", true}};
  emit(dump_json(doc), o.output, out);
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compositional difference-in-differences for categorical count panels", "codid"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "codid 0.1.0 (codid.v1)");
  Options o;

  auto* validate = app.add_subcommand("validate", "Check a panel CSV for balance and common support");
  add_panel_options(validate, o.panel, false, false);

  auto* estimate = app.add_subcommand("estimate", "Point estimates for a 2x2 (optionally stratified) panel");
  add_panel_options(estimate, o.panel, true, true);
  estimate->add_option("--strata-weights", o.strata_weights, "Stratum weights: column or treated-period0")
      ->check(CLI::IsMember({"column", "treated-period0"}));
  add_bootstrap_options(estimate, o.boot);

  auto* bounds = app.add_subcommand("bounds", "Bounds under bounded growth deviations");
  add_panel_options(bounds, o.panel, true, true);
  bounds->add_option("--weights", o.weights, "uniform, uniform:K, decay:RHO or explicit:T=W;T=W");

  auto* staggered = app.add_subcommand("staggered", "Cohort effects under staggered adoption");
  add_panel_options(staggered, o.panel, false, true);
  staggered->add_option("--cohorts", o.cohorts, "Cohort CSV (group,first_treated; inf for never)")->required();
  staggered->add_option("--strategy", o.strategy, "Control strategy")
      ->check(CLI::IsMember({"never", "notyet", "pooled"}));
  staggered->add_option("--cell", o.cell, "Cohort and period G,T for the bootstrap");
  add_bootstrap_options(staggered, o.boot);

  auto* synthetic = app.add_subcommand("synthetic", "Synthetic CoDiD with unit and time weights");
  add_panel_options(synthetic, o.panel, true, false);
  synthetic->add_option("--t0", o.t0, "Last pre-treatment period")->required();
  synthetic->add_option("--ridge", o.ridge, "Ridge penalty on the weights")->check(CLI::NonNegativeNumber);
  synthetic->add_option("--max-iter", o.max_iter, "Solver iteration cap");
  synthetic->add_option("--tol", o.tol, "Gradient-mapping stopping tolerance");

  auto* simulate = app.add_subcommand("simulate", "Generate a panel from a random utility specification");
  simulate->add_option("spec", o.spec, "Utility spec JSON")->required();
  simulate->add_option("--mode", o.mode, "population or sampled")->check(CLI::IsMember({"population", "sampled"}));
  simulate->add_option("--seed", o.sim_seed, "Seed for sampled mode");
  simulate->add_option("--untreated-output", o.untreated_out, "Also write untreated potential outcomes");
  simulate->add_option("--cohorts-output", o.cohorts_out, "Also write the cohort sidecar");

  auto* plotdata = app.add_subcommand("plotdata", "Long CSV of quantities, shares and log-ratios");
  add_panel_options(plotdata, o.panel, false, true);

  auto* demo = app.add_subcommand("demo-fig1", "Linear parallel trends versus CoDiD on a three-category example");

  for (auto* sub : {validate, estimate, bounds, staggered, synthetic, simulate, plotdata, demo})
    sub->add_option("-o,--output", o.output, "Write output here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInvalid;
  }

  try {
    if (*validate) return cmd_validate(o, out);
    if (*estimate) return cmd_estimate(o, out);
    if (*bounds) return cmd_bounds(o, out);
    if (*staggered) return cmd_staggered(o, out);
    if (*synthetic) return cmd_synthetic(o, out);
    if (*simulate) return cmd_simulate(o, out);
    if (*plotdata) return cmd_plotdata(o, out);
    if (*demo) return cmd_demo_fig1(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? kInvalid : kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}

}  // namespace codid::cli
