#pragma once

// Group × period × category [× stratum] count panels.
//
// CSV schema (header names are exact): group,time,category,count with the
// optional columns stratum,stratum_weight. Treatment timing for staggered
// designs lives in a sidecar CSV: group,first_treated, where "inf" marks a
// never-treated group.
//
// A PanelDataset is balanced, carries identical category labels in every
// cell, and holds strictly positive quantities. Rows are canonicalized on
// load: groups, categories and strata sort lexicographically and periods
// numerically, so the dataset does not depend on row order.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codid/simplex.hpp"

namespace codid {

struct CellAddress {
  std::string group;
  int period = 0;
  std::string stratum;  // empty for unstratified panels

  auto operator<=>(const CellAddress&) const = default;
};

std::string to_string(const CellAddress& cell);

struct GroupInfo {
  std::string id;
  std::optional<int> first_treated;  // nullopt: never treated

  bool treated_at(int period) const noexcept {
    return first_treated.has_value() && period >= *first_treated;
  }
};

struct Stratum {
  std::string name;
  std::optional<double> weight;  // P(X = x)
};

enum class WeightSource { none, explicit_column, treated_period0 };
std::string_view to_string(WeightSource source);

struct SmoothingRecord {
  CellAddress cell;
  double amount = 0.0;
};

class PanelDataset {
 public:
  PanelDataset(Labels labels, std::vector<int> periods, std::vector<GroupInfo> groups,
               std::vector<Stratum> strata, std::map<CellAddress, QuantityVector> cells,
               std::vector<SmoothingRecord> smoothing = {},
               WeightSource weight_source = WeightSource::none);

  const Labels& labels() const noexcept { return labels_; }
  const std::vector<int>& periods() const noexcept { return periods_; }
  const std::vector<GroupInfo>& groups() const noexcept { return groups_; }
  const std::vector<Stratum>& strata() const noexcept { return strata_; }
  const std::map<CellAddress, QuantityVector>& cells() const noexcept { return cells_; }
  const std::vector<SmoothingRecord>& smoothing() const noexcept { return smoothing_; }
  WeightSource weight_source() const noexcept { return weight_source_; }

  bool smoothed() const noexcept { return !smoothing_.empty(); }
  bool stratified() const noexcept;
  std::size_t num_categories() const noexcept { return labels_.size(); }

  const GroupInfo& group(std::string_view id) const;
  bool has_period(int period) const noexcept;
  const QuantityVector& cell(const CellAddress& address) const;
  const QuantityVector& cell(std::string_view group, int period,
                             std::string_view stratum = {}) const;

  /// Groups that are treated at some observed period.
  std::vector<const GroupInfo*> treated_groups() const;
  std::vector<const GroupInfo*> never_treated_groups() const;

  /// 2×2 roles: `id` is first treated at period 1, every other group never.
  PanelDataset with_treated_group(std::string_view id) const;

  /// Staggered roles. Every group must be listed; first treatment must come
  /// after the first observed period and no later than the last one.
  PanelDataset with_cohorts(const std::map<std::string, std::optional<int>>& first_treated) const;

  PanelDataset with_stratum_weights(const std::map<std::string, double>& weights,
                                    WeightSource source) const;

  PanelDataset with_cells(std::map<CellAddress, QuantityVector> cells) const;

 private:
  Labels labels_;
  std::vector<int> periods_;
  std::vector<GroupInfo> groups_;
  std::vector<Stratum> strata_;
  std::map<CellAddress, QuantityVector> cells_;
  std::vector<SmoothingRecord> smoothing_;
  WeightSource weight_source_;
};

// --- raw CSV rows ---------------------------------------------------------

struct PanelRow {
  std::string group;
  int time = 0;
  std::string category;
  double count = 0.0;
  std::string stratum;
  std::optional<double> stratum_weight;
  std::size_t line = 0;
};

struct PanelTable {
  std::vector<PanelRow> rows;
  bool has_stratum = false;
  bool has_stratum_weight = false;
};

PanelTable read_panel_table(std::istream& in);
PanelTable read_panel_table(const std::filesystem::path& path);

struct LoadOptions {
  /// Pseudo-count added to every category of a cell containing a zero.
  std::optional<double> smooth;
};

PanelDataset build_panel(const PanelTable& table, const LoadOptions& options = {});
PanelDataset load_csv(std::istream& in, const LoadOptions& options = {});
PanelDataset load_csv(const std::filesystem::path& path, const LoadOptions& options = {});

// --- diagnostics ----------------------------------------------------------

struct SupportIssue {
  enum class Kind { missing, non_positive, duplicate, non_finite };
  Kind kind;
  CellAddress cell;
  std::string category;
  std::string reason;
};

/// Every cell violating positivity or category consistency; empty iff the
/// rows build a valid panel without smoothing.
std::vector<SupportIssue> validate_common_support(const PanelTable& table);
std::vector<SupportIssue> validate_common_support(const PanelDataset& panel);

// --- strata ---------------------------------------------------------------

PanelDataset stratify(const PanelDataset& panel, std::string_view stratum);

/// Σ_x P(X=x)·q_x per (group, period); requires stratum weights.
PanelDataset pool_strata(const PanelDataset& panel);

/// P(X=x) proportional to the treated group's totals at `period`.
PanelDataset weights_from_group_totals(const PanelDataset& panel, std::string_view group,
                                       int period = 0);

// --- sidecar and export ---------------------------------------------------

std::map<std::string, std::optional<int>> read_cohorts(std::istream& in);
std::map<std::string, std::optional<int>> read_cohorts(const std::filesystem::path& path);

/// Counts printed with 17 significant digits; round-trips bit-exactly.
void write_csv(const PanelDataset& panel, std::ostream& out);
/// Raw rows, in table order; may hold counts a PanelDataset would reject.
void write_csv(const PanelTable& table, std::ostream& out);
void write_cohorts(const PanelDataset& panel, std::ostream& out);

/// Resolve the treated group of a two-group panel: `requested` if given,
/// else a group named "treated" or "1".
std::string resolve_treated_group(const PanelDataset& panel,
                                  const std::optional<std::string>& requested);

/// `%.17g` formatting used by every writer.
std::string format_double(double value);

}  // namespace codid
