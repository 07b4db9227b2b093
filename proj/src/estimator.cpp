#include "codid/estimator.hpp"

#include <cmath>

#include "codid/error.hpp"

namespace codid {

namespace {

std::size_t resolve_baseline(std::optional<std::size_t> baseline, std::size_t p) {
  const std::size_t b = baseline.value_or(p - 1);
  if (b >= p) throw Error(Errc::BadBaseline, "baseline index out of range");
  return b;
}

std::vector<double> effects(const QuantityVector& observed, const QuantityVector& counterfactual) {
  std::vector<double> gtt(observed.size());
  for (std::size_t k = 0; k < gtt.size(); ++k) gtt[k] = observed[k] / counterfactual[k] - 1.0;
  return gtt;
}

Composition weighted_average(const std::vector<std::pair<double, Composition>>& terms) {
  const auto& labels = terms.front().second.labels();
  std::vector<double> shares(labels.size(), 0.0);
  for (const auto& [w, pi] : terms)
    for (std::size_t k = 0; k < shares.size(); ++k) shares[k] += w * pi[k];
  return Composition(std::move(shares), labels);
}

}  // namespace

TwoByTwoCells extract_2x2(const PanelDataset& panel, std::string_view stratum) {
  if (panel.groups().size() != 2)
    throw Error(Errc::BadPanelShape, "2×2 design needs exactly two groups");
  const auto treated = panel.treated_groups();
  const auto control = panel.never_treated_groups();
  if (treated.size() != 1 || control.size() != 1)
    throw Error(Errc::BadPanelShape, "2×2 design needs one treated and one control group");
  if (!panel.has_period(0) || !panel.has_period(1))
    throw Error(Errc::BadPanelShape, "2×2 design needs periods 0 and 1");
  if (panel.periods().back() != 1)
    throw Error(Errc::BadPanelShape, "2×2 design has a single post period, t = 1");
  if (!treated.front()->treated_at(1) || treated.front()->treated_at(0))
    throw Error(Errc::BadPanelShape, "treated group must switch on at period 1");
  const auto& t = treated.front()->id;
  const auto& c = control.front()->id;
  return TwoByTwoCells{panel.cell(c, 0, stratum), panel.cell(c, 1, stratum),
                       panel.cell(t, 0, stratum), panel.cell(t, 1, stratum)};
}

QuantityVector counterfactual_quantities(const QuantityVector& q10, const QuantityVector& q00,
                                         const QuantityVector& q01) {
  require_same_labels(q10.labels(), q00.labels());
  require_same_labels(q10.labels(), q01.labels());
  std::vector<double> out(q10.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::exp(std::log(q10[k]) + std::log(q01[k]) - std::log(q00[k]));
  return QuantityVector(std::move(out), q10.labels());
}

CodidResult estimate_2x2(const TwoByTwoCells& cells, std::optional<std::size_t> baseline) {
  require_same_labels(cells.q11.labels(), cells.q10.labels());
  const std::size_t b = resolve_baseline(baseline, cells.q11.size());
  QuantityVector counterfactual = counterfactual_quantities(cells.q10, cells.q00, cells.q01);
  const double total = counterfactual.total();
  Composition shares = closure(counterfactual);
  std::vector<double> gtt = effects(cells.q11, counterfactual);
  const double gtt_total = cells.q11.total() / total - 1.0;
  Composition ctt = comp_diff(closure(cells.q11), shares);
  LogOdds ctt_lo = log_odds(ctt, b);
  return CodidResult{cells.q11,        std::move(counterfactual), total,
                     std::move(shares), std::move(gtt),           gtt_total,
                     std::move(ctt),    std::move(ctt_lo)};
}

CodidResult estimate_2x2(const PanelDataset& panel, std::optional<std::size_t> baseline) {
  if (panel.strata().size() > 1)
    throw Error(Errc::BadPanelShape, "panel is stratified; use estimate_stratified");
  return estimate_2x2(extract_2x2(panel), baseline);
}

Composition log_odds_counterfactual_shares(const Composition& pi10, const Composition& pi00,
                                           const Composition& pi01,
                                           std::optional<std::size_t> baseline) {
  const std::size_t b = resolve_baseline(baseline, pi10.size());
  return inv_log_odds(log_odds(pi10, b) + log_odds(pi01, b) - log_odds(pi00, b));
}

LinearPtShares linear_pt_counterfactual_shares(const Composition& pi10, const Composition& pi00,
                                               const Composition& pi01) {
  require_same_labels(pi10.labels(), pi00.labels());
  require_same_labels(pi10.labels(), pi01.labels());
  LinearPtShares out{std::vector<double>(pi10.size()), true};
  for (std::size_t k = 0; k < pi10.size(); ++k) {
    out.values[k] = pi10[k] + pi01[k] - pi00[k];
    if (!(out.values[k] > 0.0 && out.values[k] < 1.0)) out.in_simplex = false;
  }
  return out;
}

SaturatedLogit saturated_logit_ctt(const TwoByTwoCells& cells, std::optional<std::size_t> baseline) {
  const std::size_t b = resolve_baseline(baseline, cells.q11.size());
  LogOdds beta = log_odds(closure(cells.q11), b) - log_odds(closure(cells.q10), b) -
                 log_odds(closure(cells.q01), b) + log_odds(closure(cells.q00), b);
  Composition ctt = inv_log_odds(beta);
  return SaturatedLogit{std::move(beta), std::move(ctt)};
}

SaturatedLogit saturated_logit_ctt(const PanelDataset& panel, std::optional<std::size_t> baseline) {
  return saturated_logit_ctt(extract_2x2(panel), baseline);
}

StratifiedResult estimate_stratified(const PanelDataset& panel, std::optional<std::size_t> baseline) {
  const std::size_t p = panel.num_categories();
  const std::size_t b = resolve_baseline(baseline, p);
  std::vector<StratumResult> strata;
  std::vector<double> observed(p, 0.0), counterfactual(p, 0.0);
  std::vector<std::pair<double, Composition>> shares_terms, observed_terms;
  for (const auto& s : panel.strata()) {
    if (!s.weight)
      throw Error(Errc::MissingStratumWeight, "stratum '" + s.name + "' has no weight P(X=x)");
    CodidResult r = estimate_2x2(extract_2x2(panel, s.name), b);
    for (std::size_t k = 0; k < p; ++k) {
      observed[k] += *s.weight * r.observed[k];
      counterfactual[k] += *s.weight * r.counterfactual_q[k];
    }
    shares_terms.emplace_back(*s.weight, r.counterfactual_shares);
    observed_terms.emplace_back(*s.weight, closure(r.observed));
    strata.push_back(StratumResult{s.name, *s.weight, std::move(r)});
  }
  QuantityVector observed_q(std::move(observed), panel.labels());
  QuantityVector counterfactual_q(std::move(counterfactual), panel.labels());
  const double total = counterfactual_q.total();
  Composition shares_weighted = weighted_average(shares_terms);
  Composition shares_qc = closure(counterfactual_q);
  Composition observed_weighted = weighted_average(observed_terms);
  std::vector<double> gtt = effects(observed_q, counterfactual_q);
  const double gtt_total = observed_q.total() / total - 1.0;
  Composition ctt_weighted = comp_diff(observed_weighted, shares_weighted);
  Composition ctt_qc = comp_diff(closure(observed_q), shares_qc);
  return StratifiedResult{std::move(strata),       std::move(observed_q),   std::move(counterfactual_q),
                          total,                   std::move(shares_weighted), std::move(shares_qc),
                          std::move(observed_weighted), std::move(gtt),        gtt_total,
                          std::move(ctt_weighted),    std::move(ctt_qc)};
}

std::vector<double> parallel_growth_residual(const QuantityVector& q11, const QuantityVector& q10,
                                             const QuantityVector& q01, const QuantityVector& q00) {
  std::vector<double> r(q11.size());
  for (std::size_t k = 0; k < r.size(); ++k)
    r[k] = std::log(q11[k]) - std::log(q10[k]) - std::log(q01[k]) + std::log(q00[k]);
  return r;
}

}  // namespace codid
