#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace codid {

// Error codes, grouped by the module that raises them.
enum class Errc {
  // simplex
  NonPositiveEntry,
  LabelMismatch,
  BadBaseline,
  NonFiniteInput,
  InvalidComposition,
  // panel
  MissingColumn,
  DuplicateCell,
  UnbalancedPanel,
  NonPositiveCount,
  InconsistentCategories,
  UnknownStratum,
  UnknownGroup,
  UnknownCell,
  InvalidStratumWeight,
  InvalidTiming,
  ParseError,
  IoError,
  // estimator
  MissingStratumWeight,
  BadPanelShape,
  // bounds
  NoPrePeriods,
  InvalidWeights,
  // staggered
  NoNeverTreatedGroup,
  BadPeriod,
  NoValidControlCohort,
  UnknownCohort,
  // synthetic
  NoControls,
  NonPositiveDenominator,
  InvalidPeriodSplit,
  // bootstrap
  ZeroReplicateFailure,
  EmptySample,
  InvalidConfig,
  // rum
  InvalidNestStructure,
  InvalidSpec,
};

std::string_view module_of(Errc code) noexcept;
std::string_view name_of(Errc code) noexcept;

/// True for errors caused by malformed input data (the CLI maps these to
/// exit code 2); everything else is a runtime failure.
bool is_validation_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

  /// "module.Name", e.g. "panel.UnbalancedPanel".
  std::string qualified_code() const;

 private:
  Errc code_;
};

}  // namespace codid
