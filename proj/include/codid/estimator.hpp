#pragma once

// Point identification in the 2×2 design under parallel growths: the treated
// group's untreated log-quantities would have moved by the same amount as the
// control group's, category by category.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codid/panel.hpp"
#include "codid/simplex.hpp"

namespace codid {

/// Observed cells of a 2×2 design; q11 is the treated group's treated outcome.
struct TwoByTwoCells {
  QuantityVector q00;  // control, pre
  QuantityVector q01;  // control, post
  QuantityVector q10;  // treated, pre
  QuantityVector q11;  // treated, post (treated potential outcome)
};

/// Requires exactly one treated and one never-treated group and periods 0 and
/// 1; earlier pre-periods are ignored, later periods are rejected.
TwoByTwoCells extract_2x2(const PanelDataset& panel, std::string_view stratum = {});

struct CodidResult {
  QuantityVector observed;  // q^I_{1,1}
  QuantityVector counterfactual_q;
  double counterfactual_total;
  Composition counterfactual_shares;
  std::vector<double> gtt_per_category;
  double gtt_total;
  Composition ctt;
  LogOdds ctt_log_odds;  // ℓ(ctt), the saturated-logit interaction reading
};

/// q10 · q01 / q00 componentwise, evaluated as exp(log q10 + log q01 − log q00).
QuantityVector counterfactual_quantities(const QuantityVector& q10, const QuantityVector& q00,
                                         const QuantityVector& q01);

CodidResult estimate_2x2(const TwoByTwoCells& cells, std::optional<std::size_t> baseline = {});
CodidResult estimate_2x2(const PanelDataset& panel, std::optional<std::size_t> baseline = {});

/// Counterfactual shares through log-odds: ℓ⁻¹(ℓ(π10) + ℓ(π01) − ℓ(π00)).
Composition log_odds_counterfactual_shares(const Composition& pi10, const Composition& pi00,
                                           const Composition& pi01,
                                           std::optional<std::size_t> baseline = {});

/// Linear parallel trends on shares, kept only as a diagnostic comparator.
struct LinearPtShares {
  std::vector<double> values;  // π10 + π01 − π00, not normalized
  bool in_simplex;             // every entry strictly inside (0,1)
};

LinearPtShares linear_pt_counterfactual_shares(const Composition& pi10, const Composition& pi00,
                                               const Composition& pi01);

/// Saturated two-way multinomial logit: the interaction coefficients are the
/// difference-in-differences of cell log-odds, and CTT = ℓ⁻¹(β).
struct SaturatedLogit {
  LogOdds beta;
  Composition ctt;
};

SaturatedLogit saturated_logit_ctt(const TwoByTwoCells& cells,
                                   std::optional<std::size_t> baseline = {});
SaturatedLogit saturated_logit_ctt(const PanelDataset& panel,
                                   std::optional<std::size_t> baseline = {});

struct StratumResult {
  std::string name;
  double weight;
  CodidResult result;
};

/// Conditional parallel growths over discrete strata. Two share aggregates are
/// reported: the weighted average of per-stratum shares ("weighted") and the
/// closure of the weighted quantities ("quantity-consistent"). They agree only
/// when stratum totals are proportional.
struct StratifiedResult {
  std::vector<StratumResult> strata;
  QuantityVector observed;          // Σ_x P(x) q^I_x
  QuantityVector counterfactual_q;  // Σ_x P(x) q^N_x
  double counterfactual_total;
  Composition shares_weighted;
  Composition shares_quantity_consistent;
  Composition observed_shares_weighted;  // Σ_x P(x) π^I_x
  std::vector<double> gtt_per_category;
  double gtt_total;
  Composition ctt_weighted;                // observed_shares_weighted ⊖ shares_weighted
  Composition ctt_quantity_consistent;  // closure(observed) ⊖ shares_quantity_consistent
};

StratifiedResult estimate_stratified(const PanelDataset& panel,
                                     std::optional<std::size_t> baseline = {});

/// Componentwise log q11 − log q10 − log q01 + log q00.
std::vector<double> parallel_growth_residual(const QuantityVector& q11, const QuantityVector& q10,
                                             const QuantityVector& q01, const QuantityVector& q00);

}  // namespace codid
