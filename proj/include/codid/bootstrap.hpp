#pragma once

// Parametric bootstrap: every (group, period[, stratum]) cell is redrawn from
// Multinomial(round(S_gt), π̂_gt), the wrapped estimator is re-run, and
// percentile intervals are read off the replicate distribution.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "codid/panel.hpp"
#include "codid/staggered.hpp"

namespace codid {

enum class BootstrapTarget { two_by_two, stratified, staggered_cell };

std::string_view to_string(BootstrapTarget target);

struct StaggeredCell {
  int cohort = 0;
  int period = 0;
  ControlStrategy strategy = ControlStrategy::never_treated;
  std::optional<int> control;  // a specific not-yet-treated cohort
};

struct BootstrapConfig {
  std::size_t replicates = 999;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  unsigned threads = 1;  // 0: hardware concurrency
  bool smoothing = false;  // +0.5 to a replicate cell that drew a zero
  std::size_t max_redraws = 100;
  BootstrapTarget target = BootstrapTarget::two_by_two;
  StaggeredCell cell;

  void validate() const;
};

struct EffectSummary {
  std::vector<double> gtt;
  double gtt_total = 0.0;
  std::vector<double> ctt;
};

/// Runs the configured estimator on one panel.
EffectSummary evaluate_target(const PanelDataset& panel, const BootstrapConfig& config);

struct PercentileCi {
  double point;
  double lo;
  double hi;
};

struct BootstrapResult {
  EffectSummary point;
  std::vector<EffectSummary> replicates;
  std::vector<PercentileCi> gtt;
  PercentileCi gtt_total;
  std::vector<PercentileCi> ctt;
  std::size_t redraws = 0;             // zero-cell redraws across all replicates
  std::size_t smoothed_cells = 0;      // replicate cells that received +0.5
  bool totals_rounded = false;         // some S_gt was not an integer
};

/// Linear interpolation between order statistics at position (n − 1)·q.
double percentile(std::vector<double> values, double q);

/// Draws replicate `index` of the panel; exposed for tests.
PanelDataset draw_replicate(const PanelDataset& panel, const BootstrapConfig& config,
                            std::size_t index, std::size_t* redraws = nullptr,
                            std::size_t* smoothed = nullptr);

BootstrapResult bootstrap(const PanelDataset& panel, const BootstrapConfig& config);

/// One row per replicate: replicate, gtt_total, gtt_<label>..., ctt_<label>...
void write_replicates(const BootstrapResult& result, const Labels& labels, std::ostream& out);

}  // namespace codid
