#include "codid/error.hpp"

namespace codid {

std::string_view module_of(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveEntry:
    case Errc::LabelMismatch:
    case Errc::BadBaseline:
    case Errc::NonFiniteInput:
    case Errc::InvalidComposition:
      return "simplex";
    case Errc::MissingColumn:
    case Errc::DuplicateCell:
    case Errc::UnbalancedPanel:
    case Errc::NonPositiveCount:
    case Errc::InconsistentCategories:
    case Errc::UnknownStratum:
    case Errc::UnknownGroup:
    case Errc::UnknownCell:
    case Errc::InvalidStratumWeight:
    case Errc::InvalidTiming:
    case Errc::ParseError:
    case Errc::IoError:
      return "panel";
    case Errc::MissingStratumWeight:
    case Errc::BadPanelShape:
      return "estimator";
    case Errc::NoPrePeriods:
    case Errc::InvalidWeights:
      return "bounds";
    case Errc::NoNeverTreatedGroup:
    case Errc::BadPeriod:
    case Errc::NoValidControlCohort:
    case Errc::UnknownCohort:
      return "staggered";
    case Errc::NoControls:
    case Errc::NonPositiveDenominator:
    case Errc::InvalidPeriodSplit:
      return "synthetic";
    case Errc::ZeroReplicateFailure:
    case Errc::EmptySample:
    case Errc::InvalidConfig:
      return "bootstrap";
    case Errc::InvalidNestStructure:
    case Errc::InvalidSpec:
      return "rum";
  }
  return "codid";
}

std::string_view name_of(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveEntry: return "NonPositiveEntry";
    case Errc::LabelMismatch: return "LabelMismatch";
    case Errc::BadBaseline: return "BadBaseline";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::InvalidComposition: return "InvalidComposition";
    case Errc::MissingColumn: return "MissingColumn";
    case Errc::DuplicateCell: return "DuplicateCell";
    case Errc::UnbalancedPanel: return "UnbalancedPanel";
    case Errc::NonPositiveCount: return "NonPositiveCount";
    case Errc::InconsistentCategories: return "InconsistentCategories";
    case Errc::UnknownStratum: return "UnknownStratum";
    case Errc::UnknownGroup: return "UnknownGroup";
    case Errc::UnknownCell: return "UnknownCell";
    case Errc::InvalidStratumWeight: return "InvalidStratumWeight";
    case Errc::InvalidTiming: return "InvalidTiming";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::MissingStratumWeight: return "MissingStratumWeight";
    case Errc::BadPanelShape: return "BadPanelShape";
    case Errc::NoPrePeriods: return "NoPrePeriods";
    case Errc::InvalidWeights: return "InvalidWeights";
    case Errc::NoNeverTreatedGroup: return "NoNeverTreatedGroup";
    case Errc::BadPeriod: return "BadPeriod";
    case Errc::NoValidControlCohort: return "NoValidControlCohort";
    case Errc::UnknownCohort: return "UnknownCohort";
    case Errc::NoControls: return "NoControls";
    case Errc::NonPositiveDenominator: return "NonPositiveDenominator";
    case Errc::InvalidPeriodSplit: return "InvalidPeriodSplit";
    case Errc::ZeroReplicateFailure: return "ZeroReplicateFailure";
    case Errc::EmptySample: return "EmptySample";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidNestStructure: return "InvalidNestStructure";
    case Errc::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

bool is_validation_error(Errc code) noexcept {
  switch (code) {
    case Errc::MissingColumn:
    case Errc::DuplicateCell:
    case Errc::UnbalancedPanel:
    case Errc::NonPositiveCount:
    case Errc::InconsistentCategories:
    case Errc::InvalidStratumWeight:
    case Errc::InvalidTiming:
    case Errc::ParseError:
      return true;
    default:
      return false;
  }
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(module_of(code)) + "." + std::string(name_of(code)) +
                         (detail.empty() ? "" : ": " + detail)),
      code_(code) {}

std::string Error::qualified_code() const {
  return std::string(module_of(code_)) + "." + std::string(name_of(code_));
}

}  // namespace codid
