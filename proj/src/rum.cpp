#include "codid/rum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "codid/error.hpp"
#include "codid/rng.hpp"

namespace codid {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log Σ exp(x) over the finite entries; −inf when there are none.
double log_sum_exp(std::span<const double> x) {
  double m = kNegInf;
  for (double v : x) m = std::max(m, v);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

void require_lambda(double lambda, const std::string& what) {
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw Error(Errc::InvalidNestStructure, what + " must lie in (0, 1], got " + std::to_string(lambda));
}

/// A_m = log Σ_{j∈B_m} (α_jm y_j)^{1/λ_m}, in log terms, for gnl.
std::vector<double> gnl_inclusive(const GevSpec& spec, std::span<const double> mu) {
  std::vector<double> out(spec.nests.size());
  for (std::size_t m = 0; m < spec.nests.size(); ++m) {
    std::vector<double> terms;
    for (std::size_t j = 0; j < mu.size(); ++j)
      if (spec.alpha[j][m] > 0.0) terms.push_back((std::log(spec.alpha[j][m]) + mu[j]) / spec.nests[m].lambda);
    out[m] = log_sum_exp(terms);
  }
  return out;
}

std::vector<double> nested_inclusive(const GevSpec& spec, std::span<const double> mu) {
  std::vector<double> out;
  for (const auto& nest : spec.nests) {
    std::vector<double> terms;
    for (std::size_t j : nest.members) terms.push_back(mu[j] / nest.lambda);
    out.push_back(log_sum_exp(terms));
  }
  return out;
}

}  // namespace

std::string_view to_string(GevFamily family) {
  switch (family) {
    case GevFamily::logit: return "logit";
    case GevFamily::nested_logit: return "nested_logit";
    case GevFamily::pcl: return "pcl";
    case GevFamily::gnl: return "gnl";
  }
  return "logit";
}

GevFamily parse_gev_family(std::string_view text) {
  for (auto f : {GevFamily::logit, GevFamily::nested_logit, GevFamily::pcl, GevFamily::gnl})
    if (to_string(f) == text) return f;
  throw Error(Errc::InvalidSpec, "unknown GEV family '" + std::string(text) + "'");
}

void GevSpec::validate(std::size_t p) const {
  switch (family) {
    case GevFamily::logit:
      return;
    case GevFamily::nested_logit: {
      if (nests.empty()) throw Error(Errc::InvalidNestStructure, "nested logit needs at least one nest");
      std::vector<int> seen(p, 0);
      for (std::size_t m = 0; m < nests.size(); ++m) {
        require_lambda(nests[m].lambda, "lambda of nest " + std::to_string(m));
        if (nests[m].members.empty())
          throw Error(Errc::InvalidNestStructure, "nest " + std::to_string(m) + " is empty");
        for (std::size_t j : nests[m].members) {
          if (j >= p) throw Error(Errc::InvalidNestStructure, "nest member out of range");
          ++seen[j];
        }
      }
      for (std::size_t j = 0; j < p; ++j)
        if (seen[j] != 1)
          throw Error(Errc::InvalidNestStructure,
                      "category " + std::to_string(j) + (seen[j] ? " is in several nests" : " is in no nest"));
      return;
    }
    case GevFamily::pcl: {
      if (pair_lambda.size() != p)
        throw Error(Errc::InvalidNestStructure, "pcl needs a p × p pair_lambda matrix");
      for (std::size_t r = 0; r < p; ++r) {
        if (pair_lambda[r].size() != p)
          throw Error(Errc::InvalidNestStructure, "pcl needs a p × p pair_lambda matrix");
        for (std::size_t s = 0; s < p; ++s) {
          if (r == s) continue;
          require_lambda(pair_lambda[r][s], "pair lambda");
          if (pair_lambda[s].size() == p && pair_lambda[r][s] != pair_lambda[s][r])
            throw Error(Errc::InvalidNestStructure, "pair_lambda must be symmetric");
        }
      }
      return;
    }
    case GevFamily::gnl: {
      if (nests.empty()) throw Error(Errc::InvalidNestStructure, "gnl needs at least one nest");
      for (std::size_t m = 0; m < nests.size(); ++m) require_lambda(nests[m].lambda, "lambda of nest " + std::to_string(m));
      if (alpha.size() != p) throw Error(Errc::InvalidNestStructure, "gnl needs a p × M alpha matrix");
      for (std::size_t j = 0; j < p; ++j) {
        if (alpha[j].size() != nests.size())
          throw Error(Errc::InvalidNestStructure, "gnl needs a p × M alpha matrix");
        double sum = 0.0;
        for (double a : alpha[j]) {
          if (!(a >= 0.0) || !std::isfinite(a))
            throw Error(Errc::InvalidNestStructure, "allocations must be nonnegative");
          sum += a;
        }
        if (std::abs(sum - 1.0) > 1e-9)
          throw Error(Errc::InvalidNestStructure,
                      "allocations of category " + std::to_string(j) + " must sum to 1");
      }
      return;
    }
  }
}

GeneratingFunction make_generating_function(const GevSpec& spec, std::size_t p) {
  spec.validate(p);
  switch (spec.family) {
    case GevFamily::logit:
      return {[](std::span<const double> mu) { return log_sum_exp(mu); },
              [](std::span<const double> mu) { return std::vector<double>(mu.size(), 0.0); }};
    case GevFamily::nested_logit:
      return {[spec](std::span<const double> mu) {
                const auto a = nested_inclusive(spec, mu);
                std::vector<double> terms;
                for (std::size_t m = 0; m < a.size(); ++m) terms.push_back(spec.nests[m].lambda * a[m]);
                return log_sum_exp(terms);
              },
              [spec](std::span<const double> mu) {
                const auto a = nested_inclusive(spec, mu);
                std::vector<double> out(mu.size());
                for (std::size_t m = 0; m < a.size(); ++m) {
                  const double lam = spec.nests[m].lambda;
                  for (std::size_t k : spec.nests[m].members)
                    out[k] = (1.0 / lam - 1.0) * mu[k] + (lam - 1.0) * a[m];
                }
                return out;
              }};
    case GevFamily::pcl: {
      auto pair_inclusive = [spec](std::span<const double> mu, std::size_t r, std::size_t s) {
        const double lam = spec.pair_lambda[r][s];
        const double t[2] = {mu[r] / lam, mu[s] / lam};
        return log_sum_exp(t);
      };
      return {[spec, pair_inclusive](std::span<const double> mu) {
                std::vector<double> terms;
                for (std::size_t r = 0; r < mu.size(); ++r)
                  for (std::size_t s = r + 1; s < mu.size(); ++s)
                    terms.push_back(spec.pair_lambda[r][s] * pair_inclusive(mu, r, s));
                return log_sum_exp(terms);
              },
              [spec, pair_inclusive](std::span<const double> mu) {
                std::vector<double> out(mu.size());
                for (std::size_t k = 0; k < mu.size(); ++k) {
                  std::vector<double> terms;
                  for (std::size_t j = 0; j < mu.size(); ++j) {
                    if (j == k) continue;
                    const double lam = spec.pair_lambda[k][j];
                    terms.push_back((1.0 / lam - 1.0) * mu[k] + (lam - 1.0) * pair_inclusive(mu, k, j));
                  }
                  out[k] = log_sum_exp(terms);
                }
                return out;
              }};
    }
    case GevFamily::gnl:
      return {[spec](std::span<const double> mu) {
                const auto a = gnl_inclusive(spec, mu);
                std::vector<double> terms;
                for (std::size_t m = 0; m < a.size(); ++m)
                  if (a[m] != kNegInf) terms.push_back(spec.nests[m].lambda * a[m]);
                return log_sum_exp(terms);
              },
              [spec](std::span<const double> mu) {
                const auto a = gnl_inclusive(spec, mu);
                std::vector<double> out(mu.size());
                for (std::size_t k = 0; k < mu.size(); ++k) {
                  std::vector<double> terms;
                  for (std::size_t m = 0; m < a.size(); ++m) {
                    if (!(spec.alpha[k][m] > 0.0)) continue;
                    const double lam = spec.nests[m].lambda;
                    terms.push_back(std::log(spec.alpha[k][m]) / lam + (1.0 / lam - 1.0) * mu[k] +
                                    (lam - 1.0) * a[m]);
                  }
                  out[k] = log_sum_exp(terms);
                }
                return out;
              }};
  }
  throw Error(Errc::InvalidSpec, "unknown GEV family");
}

Composition logit_shares(std::span<const double> mu, const Labels& labels) {
  for (double x : mu)
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteInput, "utilities must be finite");
  return Composition::from_log_weights(mu, labels);
}

Composition shares_from_generator(std::span<const double> mu, const GeneratingFunction& g, const Labels& labels) {
  for (double x : mu)
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteInput, "utilities must be finite");
  const double log_g = g.log_g(mu);
  const auto log_gk = g.log_g_k(mu);
  std::vector<double> w(mu.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = mu[k] + log_gk[k] - log_g;
  return Composition::from_log_weights(w, labels);
}

Composition gev_shares(std::span<const double> mu, const GevSpec& spec, const Labels& labels) {
  if (spec.family == GevFamily::logit) return logit_shares(mu, labels);
  return shares_from_generator(mu, make_generating_function(spec, mu.size()), labels);
}

std::vector<double> expected_utilities(std::span<const double> mu, double total, const GevSpec& spec) {
  const auto g = make_generating_function(spec, mu.size());
  const double log_g = g.log_g(mu);
  const auto log_gk = g.log_g_k(mu);
  std::vector<double> out(mu.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = mu[k] + log_gk[k] - log_g + std::log(total) + kEulerGamma;
  return out;
}

// ---------------------------------------------------------------------------
// Utility specifications

std::size_t UtilitySpec::period_index(int period) const {
  const auto it = std::find(periods.begin(), periods.end(), period);
  if (it == periods.end()) throw Error(Errc::InvalidSpec, "period " + std::to_string(period) + " not in spec");
  return static_cast<std::size_t>(it - periods.begin());
}

void UtilitySpec::validate() const {
  const std::size_t p = labels.size();
  if (p < 2) throw Error(Errc::InvalidSpec, "need at least two categories");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != p)
    throw Error(Errc::InvalidSpec, "category labels must be distinct");
  if (periods.empty()) throw Error(Errc::InvalidSpec, "need at least one period");
  for (std::size_t i = 1; i < periods.size(); ++i)
    if (periods[i] <= periods[i - 1]) throw Error(Errc::InvalidSpec, "periods must be strictly increasing");
  if (groups.empty()) throw Error(Errc::InvalidSpec, "need at least one group");
  std::set<std::string> ids;
  auto check_grid = [&](const std::vector<std::vector<double>>& mu, const std::vector<double>& totals,
                        const std::string& what) {
    if (mu.size() != periods.size() || totals.size() != periods.size())
      throw Error(Errc::InvalidSpec, what + ": need one row per period");
    for (const auto& row : mu) {
      if (row.size() != p) throw Error(Errc::InvalidSpec, what + ": need one utility per category");
      for (double x : row)
        if (!std::isfinite(x)) throw Error(Errc::InvalidSpec, what + ": utilities must be finite");
    }
    for (double s : totals)
      if (!(s > 0.0) || !std::isfinite(s)) throw Error(Errc::InvalidSpec, what + ": totals must be positive");
  };
  for (const auto& g : groups) {
    if (g.id.empty() || !ids.insert(g.id).second)
      throw Error(Errc::InvalidSpec, "group ids must be non-empty and distinct");
    check_grid(g.mu, g.totals, "group " + g.id);
    if (g.first_treated && (*g.first_treated <= periods.front() || *g.first_treated > periods.back()))
      throw Error(Errc::InvalidSpec, "group " + g.id + ": first_treated must fall after the first period");
    if (g.mu_treated || g.totals_treated)
      check_grid(g.mu_treated.value_or(g.mu), g.totals_treated.value_or(g.totals), "group " + g.id + " treated");
  }
  gev.validate(p);
}

namespace {

using nlohmann::json;

std::vector<std::vector<double>> read_matrix(const json& j) { return j.get<std::vector<std::vector<double>>>(); }

std::size_t label_index(const Labels& labels, const json& member) {
  if (member.is_number_unsigned()) return member.get<std::size_t>();
  const auto name = member.get<std::string>();
  const auto it = std::find(labels.begin(), labels.end(), name);
  if (it == labels.end()) throw Error(Errc::InvalidNestStructure, "nest member '" + name + "' is not a category");
  return static_cast<std::size_t>(it - labels.begin());
}

std::optional<int> read_first_treated(const json& g) {
  if (!g.contains("first_treated") || g["first_treated"].is_null()) return std::nullopt;
  const auto& v = g["first_treated"];
  if (v.is_string()) {
    if (v.get<std::string>() == "inf") return std::nullopt;
    throw Error(Errc::InvalidSpec, "first_treated must be an integer, null or \"inf\"");
  }
  return v.get<int>();
}

}  // namespace

UtilitySpec parse_utility_spec(const std::string& text) {
  UtilitySpec spec;
  try {
    const json j = json::parse(text);
    spec.labels = j.at("labels").get<Labels>();
    spec.periods = j.at("periods").get<std::vector<int>>();
    for (const auto& g : j.at("groups")) {
      GroupUtility gu;
      gu.id = g.at("id").get<std::string>();
      gu.first_treated = read_first_treated(g);
      gu.mu = read_matrix(g.at("mu"));
      gu.totals = g.at("totals").get<std::vector<double>>();
      if (g.contains("mu_treated")) gu.mu_treated = read_matrix(g["mu_treated"]);
      if (g.contains("totals_treated")) gu.totals_treated = g["totals_treated"].get<std::vector<double>>();
      spec.groups.push_back(std::move(gu));
    }
    if (j.contains("gev")) {
      const auto& gev = j["gev"];
      spec.gev.family = parse_gev_family(gev.value("family", std::string("logit")));
      if (gev.contains("nests"))
        for (const auto& n : gev["nests"]) {
          Nest nest;
          nest.lambda = n.value("lambda", 1.0);
          if (n.contains("members"))
            for (const auto& m : n["members"]) nest.members.push_back(label_index(spec.labels, m));
          spec.gev.nests.push_back(std::move(nest));
        }
      if (gev.contains("pair_lambda")) spec.gev.pair_lambda = read_matrix(gev["pair_lambda"]);
      if (gev.contains("alpha")) spec.gev.alpha = read_matrix(gev["alpha"]);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidSpec, std::string("malformed utility spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

UtilitySpec read_utility_spec(std::istream& in) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_utility_spec(buffer.str());
}

UtilitySpec read_utility_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return read_utility_spec(in);
}

// ---------------------------------------------------------------------------
// Panel generation

PanelDataset GeneratedPanel::observed_panel(const LoadOptions& options) const {
  return build_panel(observed, options).with_cohorts(cohorts);
}

PanelDataset GeneratedPanel::untreated_panel(const LoadOptions& options) const {
  return build_panel(untreated, options).with_cohorts(cohorts);
}

GeneratedPanel generate_panel(const UtilitySpec& spec, GenerationMode mode, std::uint64_t seed) {
  spec.validate();
  GeneratedPanel out;
  std::uint32_t cell = 0;
  auto emit = [&](PanelTable& table, const std::string& group, int period, const std::vector<double>& mu,
                  double total, std::uint32_t variant) {
    const auto pi = gev_shares(mu, spec.gev, spec.labels);
    std::vector<double> q(pi.size());
    if (mode == GenerationMode::population) {
      for (std::size_t k = 0; k < q.size(); ++k) q[k] = pi[k] * total;
    } else {
      CounterRng rng(seed, {cell, variant, 0});
      const std::vector<double> probs(pi.shares().begin(), pi.shares().end());
      const auto counts = sample_multinomial(std::llround(total), probs, rng);
      q.assign(counts.begin(), counts.end());
    }
    for (std::size_t k = 0; k < q.size(); ++k) table.rows.push_back({group, period, spec.labels[k], q[k], {}, {}, 0});
  };
  for (const auto& g : spec.groups) {
    out.cohorts[g.id] = g.first_treated;
    for (std::size_t i = 0; i < spec.periods.size(); ++i, ++cell) {
      const int t = spec.periods[i];
      emit(out.untreated, g.id, t, g.mu[i], g.totals[i], 0);
      const bool on = g.first_treated && t >= *g.first_treated;
      if (on && (g.mu_treated || g.totals_treated)) {
        const auto& mu = g.mu_treated ? (*g.mu_treated)[i] : g.mu[i];
        const double total = g.totals_treated ? (*g.totals_treated)[i] : g.totals[i];
        emit(out.observed, g.id, t, mu, total, 1);
      } else {
        emit(out.observed, g.id, t, g.mu[i], g.totals[i], 0);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Proposition checks

namespace {

struct Sides {
  std::vector<std::vector<std::vector<double>>> eu;     // [group][period][k]
  std::vector<std::vector<std::vector<double>>> log_q;  // from closed-form shares
};

Sides evaluate_sides(const UtilitySpec& spec) {
  Sides s;
  for (const auto& g : spec.groups) {
    auto& eu = s.eu.emplace_back();
    auto& lq = s.log_q.emplace_back();
    for (std::size_t i = 0; i < spec.periods.size(); ++i) {
      eu.push_back(expected_utilities(g.mu[i], g.totals[i], spec.gev));
      const auto pi = gev_shares(g.mu[i], spec.gev, spec.labels);
      std::vector<double> row(pi.size());
      for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::log(pi[k] * g.totals[i]);
      lq.push_back(std::move(row));
    }
  }
  return s;
}

double did(const std::vector<std::vector<std::vector<double>>>& x, std::size_t g, std::size_t ref, std::size_t i,
           std::size_t k) {
  return (x[g][i][k] - x[g][i - 1][k]) - (x[ref][i][k] - x[ref][i - 1][k]);
}

}  // namespace

Prop1Report certify_prop1(const UtilitySpec& spec) {
  spec.validate();
  std::size_t ref = spec.groups.size();
  for (std::size_t g = 0; g < spec.groups.size(); ++g)
    if (!spec.groups[g].first_treated) {
      ref = g;
      break;
    }
  if (ref == spec.groups.size()) throw Error(Errc::InvalidSpec, "certification needs a never-treated group");
  const std::size_t p = spec.labels.size();
  const std::size_t T = spec.periods.size();

  const Sides base = evaluate_sides(spec);
  std::vector<std::vector<std::vector<double>>> mu;
  for (const auto& g : spec.groups) mu.push_back(g.mu);

  Prop1Report report{0.0, 0.0, 0.0, 0.0, true, spec.groups[ref].id};
  for (std::size_t g = 0; g < spec.groups.size(); ++g)
    for (std::size_t i = 1; i < T; ++i)
      for (std::size_t k = 0; k < p; ++k) {
        const double d_eu = base.eu[g][i][k] - base.eu[g][i - 1][k];
        const double d_lq = base.log_q[g][i][k] - base.log_q[g][i - 1][k];
        report.identity_gap = std::max(report.identity_gap, std::abs(d_eu - d_lq));
        if (g == ref) continue;
        report.utility_residual = std::max(report.utility_residual, std::abs(did(base.eu, g, ref, i, k)));
        report.log_quantity_residual = std::max(report.log_quantity_residual, std::abs(did(base.log_q, g, ref, i, k)));
        report.mu_residual = std::max(report.mu_residual, std::abs(did(mu, g, ref, i, k)));
      }

  if (T >= 2) {
    constexpr double delta = 1e-3;
    for (std::size_t g = 0; g < spec.groups.size() && report.perturbation_consistent; ++g) {
      if (g == ref) continue;
      for (std::size_t k = 0; k < p; ++k) {
        UtilitySpec shifted = spec;
        shifted.groups[g].mu[T - 1][k] += delta;
        const Sides s = evaluate_sides(shifted);
        double moved = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
          const double eu = did(s.eu, g, ref, T - 1, j);
          const double lq = did(s.log_q, g, ref, T - 1, j);
          if (std::abs(eu - lq) > 1e-9) report.perturbation_consistent = false;
          moved = std::max(moved, std::abs(eu - did(base.eu, g, ref, T - 1, j)));
        }
        if (moved < 1e-6) report.perturbation_consistent = false;
      }
    }
  }
  return report;
}

MonteCarloReport monte_carlo_shares(std::span<const double> mu, const GevSpec& spec, std::size_t draws,
                                    std::uint64_t seed) {
  const std::size_t p = mu.size();
  const Labels labels = default_labels(p);
  const auto closed = gev_shares(mu, spec, labels);
  CounterRng rng(seed, {0x4d43u, 0, 0});
  auto gumbel = [&rng] {
    double u = 0.0;
    while (u == 0.0) u = rng.uniform01();
    return -std::log(-std::log(u));
  };
  std::vector<std::size_t> hits(p, 0);
  std::string method;
  switch (spec.family) {
    case GevFamily::logit:
      method = "argmax of utility plus independent Gumbel errors";
      for (std::size_t n = 0; n < draws; ++n) {
        std::size_t best = 0;
        double best_u = kNegInf;
        for (std::size_t k = 0; k < p; ++k) {
          const double u = mu[k] + gumbel();
          if (u > best_u) best_u = u, best = k;
        }
        ++hits[best];
      }
      break;
    case GevFamily::nested_logit: {
      method = "two-stage Gumbel: nest by inclusive value, then alternative within nest";
      const auto a = nested_inclusive(spec, mu);
      for (std::size_t n = 0; n < draws; ++n) {
        std::size_t nest = 0;
        double best = kNegInf;
        for (std::size_t m = 0; m < a.size(); ++m) {
          const double u = spec.nests[m].lambda * a[m] + gumbel();
          if (u > best) best = u, nest = m;
        }
        const auto& members = spec.nests[nest].members;
        std::size_t pick = members.front();
        best = kNegInf;
        for (std::size_t j : members) {
          const double u = mu[j] / spec.nests[nest].lambda + gumbel();
          if (u > best) best = u, pick = j;
        }
        ++hits[pick];
      }
      break;
    }
    case GevFamily::pcl:
    case GevFamily::gnl: {
      method = "inverse-CDF draws from the closed-form shares (internal consistency only)";
      std::vector<double> cdf(p);
      std::partial_sum(closed.shares().begin(), closed.shares().end(), cdf.begin());
      for (std::size_t n = 0; n < draws; ++n) {
        const double u = rng.uniform01() * cdf.back();
        const auto k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        ++hits[std::min(k, p - 1)];
      }
      break;
    }
  }
  MonteCarloReport report{{}, {}, {}, 0.0, draws, method};
  for (std::size_t k = 0; k < p; ++k) {
    const double pi = closed[k];
    const double f = static_cast<double>(hits[k]) / static_cast<double>(draws);
    const double z = (f - pi) / std::sqrt(pi * (1.0 - pi) / static_cast<double>(draws));
    report.closed_form.push_back(pi);
    report.frequency.push_back(f);
    report.z_scores.push_back(z);
    report.max_abs_z = std::max(report.max_abs_z, std::abs(z));
  }
  return report;
}

}  // namespace codid
