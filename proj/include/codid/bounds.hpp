#pragma once

// Partial identification when parallel growths only holds approximately:
// the post-period treated-vs-control log gap of each category is assumed to
// lie within the range of the weighted pre-period log gaps ω_t·Δ_t, t ≤ 0.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codid/panel.hpp"
#include "codid/simplex.hpp"

namespace codid {

struct Interval {
  double lo;
  double hi;

  bool contains(double x, double tol = 0.0) const noexcept { return x >= lo - tol && x <= hi + tol; }
  double width() const noexcept { return hi - lo; }
};

/// Per-period weights ω_t on pre-periods. Periods without a weight are left
/// out of the min/max altogether; a zero weight would instead add a spurious
/// "no gap" candidate.
class WeightScheme {
 public:
  /// ω_t = 1 on the `last` most recent pre-periods (all when unset).
  static WeightScheme uniform(std::optional<std::size_t> last = {});
  /// ω_t = rho^|t| on every pre-period, rho ∈ (0, 1].
  static WeightScheme decay(double rho);
  static WeightScheme explicit_weights(std::map<int, double> weights);

  /// "uniform", "uniform:K", "decay:RHO" or "explicit:T=W;T=W;...".
  static WeightScheme parse(std::string_view text);

  /// (period, ω) pairs for the pre-periods this scheme uses, ascending period.
  std::vector<std::pair<int, double>> resolve(std::span<const int> pre_periods) const;

  std::string describe() const;

 private:
  enum class Kind { uniform, decay, explicit_weights };
  Kind kind_ = Kind::uniform;
  std::optional<std::size_t> last_;
  double rho_ = 1.0;
  std::map<int, double> weights_;
};

struct CategoryBounds {
  std::vector<int> periods;      // pre-periods used
  std::vector<double> weights;   // ω_t for those periods
  std::vector<double> log_gap_min;  // min_t ω_t·Δ_t per category
  std::vector<double> log_gap_max;
  std::vector<double> b_min;
  std::vector<double> b_max;
};

/// The panel must hold one treated and one control group, pre-periods t ≤ 0
/// and the post period t = 1.
CategoryBounds category_bounds(const PanelDataset& panel, const WeightScheme& scheme);

struct GttBounds {
  std::vector<Interval> per_category;
  Interval total;
};

GttBounds gtt_bounds(const CategoryBounds& bounds, const QuantityVector& observed);
GttBounds gtt_bounds(const PanelDataset& panel, const WeightScheme& scheme);

/// The CTT identified set {π^I ⊖ s : ℓ(s) ∈ B}. B is a box over the p−1
/// non-baseline log-odds coordinates of the counterfactual shares s:
///   r_k ∈ [log b_min(c_k) − log b_max(c_base), log b_max(c_k) − log b_min(c_base)],
/// the smallest box holding ℓ(closure(q)) for every q between the bounds.
class CttIdentifiedSet {
 public:
  CttIdentifiedSet(const CategoryBounds& bounds, Composition observed_shares, std::size_t baseline);

  std::size_t baseline() const noexcept { return baseline_; }
  const Labels& labels() const noexcept { return observed_shares_.labels(); }
  const Composition& observed_shares() const noexcept { return observed_shares_; }

  /// Box on ℓ(s), s the counterfactual shares.
  const std::vector<Interval>& counterfactual_box() const noexcept { return box_; }
  /// Box on ℓ(CTT) = ℓ(π^I) − ℓ(s).
  std::vector<Interval> ctt_box() const;

  /// ℓ(π^I ⊖ ctt) ∈ B.
  bool contains(const Composition& ctt, double tol = 1e-10) const;

  /// Exact membership: some q between the bounds has π^I ⊖ closure(q) = ctt.
  bool contains_sharp(const Composition& ctt, double tol = 1e-10) const;

  /// [min, max] of each counterfactual share over ℓ⁻¹(B). Softmax share k
  /// increases in r_k and decreases in every other coordinate, so extremes
  /// sit at box corners.
  std::vector<Interval> share_envelopes() const;

 private:
  std::vector<double> log_b_min_;
  std::vector<double> log_b_max_;
  Composition observed_shares_;
  std::size_t baseline_;
  std::vector<Interval> box_;
};

struct BoundsResult {
  CategoryBounds categories;
  GttBounds gtt;
  CttIdentifiedSet ctt;
  std::vector<Interval> share_envelopes;
};

BoundsResult compute_bounds(const PanelDataset& panel, const WeightScheme& scheme,
                            std::optional<std::size_t> baseline = {});

}  // namespace codid
