#pragma once

// Staggered adoption: cohorts are defined by first treatment period g, with
// treatment absorbing. Groups sharing a first-treatment period are summed
// into one cohort. Counterfactuals extrapolate each cohort's last untreated
// quantities (period g−1) along the growth of a never-treated or a
// not-yet-treated comparison cohort.

#include <optional>
#include <string_view>
#include <vector>

#include "codid/panel.hpp"
#include "codid/simplex.hpp"

namespace codid {

enum class ControlStrategy { never_treated, not_yet_treated, pooled };

std::string_view to_string(ControlStrategy strategy);
/// "never", "notyet" or "pooled".
ControlStrategy parse_control_strategy(std::string_view text);

class CohortPanel {
 public:
  explicit CohortPanel(const PanelDataset& panel);

  const Labels& labels() const noexcept { return labels_; }
  const std::vector<int>& periods() const noexcept { return periods_; }
  /// Treated cohorts in ascending order of first treatment.
  const std::vector<int>& cohorts() const noexcept { return cohorts_; }
  bool has_never_treated() const noexcept { return has_never_; }
  /// ḡ, the last first-treatment period.
  int last_cohort() const;
  bool has_period(int period) const noexcept;

  /// Summed quantities; nullopt cohort is the never-treated group.
  const QuantityVector& quantity(std::optional<int> cohort, int period) const;

 private:
  Labels labels_;
  std::vector<int> periods_;
  std::vector<int> cohorts_;
  bool has_never_ = false;
  std::vector<std::pair<std::pair<std::optional<int>, int>, QuantityVector>> cells_;
};

/// q_{g,g−1} · q_{∞,t} / q_{∞,g−1}, allowed for every cohort g and t ≥ g.
QuantityVector counterfactual_never_treated(const CohortPanel& panel, int cohort, int period);

/// Comparison cohorts s with t < s ≤ ḡ; empty for the last cohort.
std::vector<int> valid_control_cohorts(const CohortPanel& panel, int cohort, int period);

/// q_{g,g−1} · q_{s,t} / q_{s,g−1} for a specific s, or with the log growth
/// averaged across every valid s when `control` is nullopt (pooled).
QuantityVector counterfactual_not_yet_treated(const CohortPanel& panel, int cohort, int period,
                                              std::optional<int> control);

struct CohortEffect {
  int cohort;
  int period;
  int event_time;
  ControlStrategy strategy;
  std::vector<int> controls;  // comparison cohorts; empty for never-treated
  QuantityVector observed;
  QuantityVector counterfactual_q;
  double counterfactual_total;
  Composition counterfactual_shares;
  std::vector<double> gtt;
  double gtt_total;
  Composition ctt;
};

/// Cohort-size weighted average of log(1 + GTT) over cells sharing a key,
/// reported back as exp(·) − 1. Weights are cohort totals at g − 1.
struct AggregatePoint {
  int key;
  double gtt_total;
  std::vector<double> gtt;
  double weight;
  std::size_t cells;
};

struct SkippedCell {
  int cohort;
  int period;
  std::string reason;
};

struct StaggeredResult {
  ControlStrategy strategy;
  std::vector<CohortEffect> effects;
  std::vector<AggregatePoint> event_time;
  std::vector<AggregatePoint> calendar_time;
  std::vector<SkippedCell> skipped;
};

/// Every (g, t ≥ g) the strategy identifies. `not_yet_treated` emits one row
/// per valid comparison cohort; cells without a valid comparison are skipped.
StaggeredResult cohort_effects(const PanelDataset& panel, ControlStrategy strategy,
                               std::optional<std::size_t> baseline = {});

}  // namespace codid
