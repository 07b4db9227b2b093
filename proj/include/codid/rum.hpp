#pragma once

// Random utility oracle. Choice probabilities for logit and the GEV families
// nested logit, paired combinatorial logit (PCL) and generalized nested logit
// (GNL), generation of panels from utility specifications, and numerical
// checks that parallel expected utilities and parallel growths coincide.
//
// GEV shares are π_k = y_k G_k(y) / G(y) with y = exp(μ); everything is
// evaluated in log space.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "codid/panel.hpp"
#include "codid/simplex.hpp"

namespace codid {

inline constexpr double kEulerGamma = 0.57721566490153286061;

enum class GevFamily { logit, nested_logit, pcl, gnl };

std::string_view to_string(GevFamily family);
GevFamily parse_gev_family(std::string_view text);

struct Nest {
  std::vector<std::size_t> members;  // category indices; unused by gnl
  double lambda = 1.0;
};

struct GevSpec {
  GevFamily family = GevFamily::logit;
  std::vector<Nest> nests;                       // nested_logit: a partition; gnl: λ_m per nest
  std::vector<std::vector<double>> pair_lambda;  // pcl: p × p, symmetric off the diagonal
  std::vector<std::vector<double>> alpha;        // gnl: p × M allocations, rows sum to 1

  /// Throws InvalidNestStructure.
  void validate(std::size_t p) const;
};

/// log G and log G_k as functions of log y (= μ). Any pair supplied here
/// must describe a GEV generating function homogeneous of degree one.
struct GeneratingFunction {
  std::function<double(std::span<const double>)> log_g;
  std::function<std::vector<double>(std::span<const double>)> log_g_k;
};

GeneratingFunction make_generating_function(const GevSpec& spec, std::size_t p);

Composition logit_shares(std::span<const double> mu, const Labels& labels);
Composition gev_shares(std::span<const double> mu, const GevSpec& spec, const Labels& labels);
Composition shares_from_generator(std::span<const double> mu, const GeneratingFunction& g,
                                  const Labels& labels);

/// E[U_k] = μ_k + log G_k(μ) − log G(μ) + log S + γ.
std::vector<double> expected_utilities(std::span<const double> mu, double total, const GevSpec& spec);

struct GroupUtility {
  std::string id;
  std::optional<int> first_treated;
  std::vector<std::vector<double>> mu;  // [period][category], untreated
  std::vector<double> totals;           // [period], untreated
  std::optional<std::vector<std::vector<double>>> mu_treated;
  std::optional<std::vector<double>> totals_treated;
};

struct UtilitySpec {
  Labels labels;
  std::vector<int> periods;
  std::vector<GroupUtility> groups;
  GevSpec gev;

  /// Throws InvalidSpec / InvalidNestStructure.
  void validate() const;
  std::size_t period_index(int period) const;
};

UtilitySpec read_utility_spec(std::istream& in);
UtilitySpec read_utility_spec(const std::filesystem::path& path);
UtilitySpec parse_utility_spec(const std::string& json_text);

enum class GenerationMode { population, sampled };

struct GeneratedPanel {
  PanelTable observed;   // treated potential outcomes where treatment is on
  PanelTable untreated;  // untreated potential outcomes everywhere
  std::map<std::string, std::optional<int>> cohorts;

  PanelDataset observed_panel(const LoadOptions& options = {}) const;
  PanelDataset untreated_panel(const LoadOptions& options = {}) const;
};

/// Population mode writes π·S exactly; sampled mode draws Multinomial(round(S), π)
/// per cell from the counter-based generator keyed by `seed`.
GeneratedPanel generate_panel(const UtilitySpec& spec, GenerationMode mode, std::uint64_t seed = 0);

struct Prop1Report {
  double identity_gap;            // max |ΔE[U] − Δlog q| over groups, periods, categories
  double utility_residual;        // max |DiD of E[U]| against the reference control
  double log_quantity_residual;   // max |DiD of log q|
  double mu_residual;             // max |DiD of μ|, the alternative GEV reading
  bool perturbation_consistent;   // every single-category injection moves both sides alike
  std::string reference_group;
};

/// Compares each group against the first never-treated group over
/// consecutive periods, using untreated utilities throughout.
Prop1Report certify_prop1(const UtilitySpec& spec);

struct MonteCarloReport {
  std::vector<double> closed_form;
  std::vector<double> frequency;
  std::vector<double> z_scores;
  double max_abs_z;
  std::size_t draws;
  std::string method;
};

/// logit: argmax of μ + Gumbel; nested logit: two-stage Gumbel (nest by
/// inclusive value, then alternative within nest); pcl and gnl: inverse-CDF
/// draws from the closed-form shares, which only checks internal consistency.
MonteCarloReport monte_carlo_shares(std::span<const double> mu, const GevSpec& spec, std::size_t draws,
                                    std::uint64_t seed);

}  // namespace codid
