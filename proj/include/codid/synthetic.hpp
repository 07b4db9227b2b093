#pragma once

// Synthetic CoDiD. Unit weights ω match the treated group's pre-period
// log-quantity path with a convex combination of control paths; time weights
// λ match each control's post-period mean log-quantity with a convex
// combination of its pre-period values. Both are least-squares problems over
// the probability simplex, solved by projected gradient.

#include <optional>
#include <string>
#include <vector>

#include "codid/panel.hpp"
#include "codid/simplex.hpp"

namespace codid {

struct SimplexQpOptions {
  double tol = 1e-8;  // gradient-mapping norm
  std::size_t max_iter = 50000;
  double ridge = 0.0;
};

struct SimplexQpSolution {
  std::vector<double> weights;
  double objective;  // ‖Aw − y‖² + ridge·‖w‖²
  std::size_t iterations;
  bool converged;
  double gradient_mapping_norm;
};

/// Euclidean projection onto {w ≥ 0, Σw = 1}.
std::vector<double> project_to_simplex(std::vector<double> v);

/// min over the simplex of ‖Σ_j w_j columns[j] − target‖² (+ ridge ‖w‖²).
SimplexQpSolution solve_simplex_least_squares(const std::vector<std::vector<double>>& columns,
                                              const std::vector<double>& target,
                                              const SimplexQpOptions& options = {});

struct SyntheticSetup {
  std::string treated;
  std::vector<std::string> controls;
  std::vector<int> pre_periods;   // t ≤ T0
  std::vector<int> post_periods;  // t > T0
};

/// Treated group: the only group with treatment timing, else the usual
/// "treated"/"1" convention or `treated` when given. Every other group is a
/// control.
SyntheticSetup synthetic_setup(const PanelDataset& panel, int t0,
                               const std::optional<std::string>& treated = {});

SimplexQpSolution solve_unit_weights(const PanelDataset& panel, const SyntheticSetup& setup,
                                     const SimplexQpOptions& options = {});
SimplexQpSolution solve_time_weights(const PanelDataset& panel, const SyntheticSetup& setup,
                                     const SimplexQpOptions& options = {});

struct SyntheticResult {
  SyntheticSetup setup;
  SimplexQpSolution unit_weights;
  SimplexQpSolution time_weights;
  QuantityVector treated_pre;
  QuantityVector treated_post;
  QuantityVector control_pre;
  QuantityVector control_post;
  std::vector<double> counterfactual_q;  // treated_pre + control_post − control_pre
  std::vector<double> gtt;
  double gtt_total;
  std::vector<double> gtt_log;  // treated_post·control_pre / (treated_pre·control_post) − 1
  Composition pi_treated_pre;
  Composition pi_treated_post;
  Composition pi_control_pre;
  Composition pi_control_post;
  Composition ctt;      // (π_tr,post ⊖ π_ctl,post) ⊕ (π_tr,pre ⊖ π_ctl,pre)
  Composition ctt_alt;  // (π_tr,post ⊖ π_ctl,post) ⊖ (π_tr,pre ⊖ π_ctl,pre)
};

/// Aggregates and effects for given weights (ω over controls, λ over pre-periods).
SyntheticResult synthetic_effects(const PanelDataset& panel, const SyntheticSetup& setup,
                                  SimplexQpSolution unit_weights, SimplexQpSolution time_weights);

SyntheticResult synthetic_effects(const PanelDataset& panel, int t0,
                                  const std::optional<std::string>& treated = {},
                                  const SimplexQpOptions& options = {});

}  // namespace codid
