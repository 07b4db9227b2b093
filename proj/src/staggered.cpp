#include "codid/staggered.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "codid/error.hpp"
#include "codid/estimator.hpp"

namespace codid {

std::string_view to_string(ControlStrategy strategy) {
  switch (strategy) {
    case ControlStrategy::never_treated: return "never";
    case ControlStrategy::not_yet_treated: return "notyet";
    case ControlStrategy::pooled: return "pooled";
  }
  return "never";
}

ControlStrategy parse_control_strategy(std::string_view text) {
  if (text == "never") return ControlStrategy::never_treated;
  if (text == "notyet") return ControlStrategy::not_yet_treated;
  if (text == "pooled") return ControlStrategy::pooled;
  throw Error(Errc::InvalidConfig, "unknown control strategy '" + std::string(text) + "'");
}

CohortPanel::CohortPanel(const PanelDataset& panel)
    : labels_(panel.labels()), periods_(panel.periods()) {
  if (panel.strata().size() > 1)
    throw Error(Errc::BadPanelShape, "staggered estimation takes an unstratified panel");
  std::map<std::optional<int>, std::vector<const GroupInfo*>> members;
  for (const auto& g : panel.groups()) members[g.first_treated].push_back(&g);
  for (const auto& [cohort, groups] : members) {
    if (cohort) {
      if (*cohort <= periods_.front())
        throw Error(Errc::InvalidTiming, "cohort treated at the first period");
      cohorts_.push_back(*cohort);
    } else {
      has_never_ = true;
    }
    for (int t : periods_) {
      std::vector<double> sum(labels_.size(), 0.0);
      for (const auto* g : groups) {
        const auto& q = panel.cell(g->id, t);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += q[k];
      }
      cells_.push_back({{cohort, t}, QuantityVector(std::move(sum), labels_)});
    }
  }
  if (cohorts_.empty()) throw Error(Errc::InvalidTiming, "no treated cohort; attach first_treated timing");
}

int CohortPanel::last_cohort() const { return cohorts_.back(); }

bool CohortPanel::has_period(int period) const noexcept {
  return std::binary_search(periods_.begin(), periods_.end(), period);
}

const QuantityVector& CohortPanel::quantity(std::optional<int> cohort, int period) const {
  for (const auto& [key, q] : cells_)
    if (key.first == cohort && key.second == period) return q;
  if (!cohort) throw Error(Errc::NoNeverTreatedGroup, "panel has no never-treated group");
  if (!std::binary_search(cohorts_.begin(), cohorts_.end(), *cohort))
    throw Error(Errc::UnknownCohort, "no cohort first treated at " + std::to_string(*cohort));
  throw Error(Errc::BadPeriod, "period " + std::to_string(period) + " not observed");
}

namespace {

void check_cell(const CohortPanel& panel, int cohort, int period) {
  if (!std::binary_search(panel.cohorts().begin(), panel.cohorts().end(), cohort))
    throw Error(Errc::UnknownCohort, "no cohort first treated at " + std::to_string(cohort));
  if (period < cohort)
    throw Error(Errc::BadPeriod, "period " + std::to_string(period) + " precedes treatment of cohort " +
                                     std::to_string(cohort));
  if (!panel.has_period(period))
    throw Error(Errc::BadPeriod, "period " + std::to_string(period) + " not observed");
  if (!panel.has_period(cohort - 1))
    throw Error(Errc::BadPeriod, "period " + std::to_string(cohort - 1) + " (g−1) not observed");
}

QuantityVector extrapolate(const QuantityVector& base, const std::vector<double>& log_growth) {
  std::vector<double> out(base.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::exp(std::log(base[k]) + log_growth[k]);
  return QuantityVector(std::move(out), base.labels());
}

std::vector<double> log_growth(const QuantityVector& to, const QuantityVector& from) {
  std::vector<double> out(to.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::log(to[k]) - std::log(from[k]);
  return out;
}

}  // namespace

QuantityVector counterfactual_never_treated(const CohortPanel& panel, int cohort, int period) {
  if (!panel.has_never_treated()) throw Error(Errc::NoNeverTreatedGroup, "panel has no never-treated group");
  check_cell(panel, cohort, period);
  return extrapolate(panel.quantity(cohort, cohort - 1),
                     log_growth(panel.quantity(std::nullopt, period),
                                panel.quantity(std::nullopt, cohort - 1)));
}

std::vector<int> valid_control_cohorts(const CohortPanel& panel, int cohort, int period) {
  std::vector<int> out;
  if (cohort == panel.last_cohort()) return out;
  for (int s : panel.cohorts())
    if (s > period && s != cohort) out.push_back(s);
  return out;
}

QuantityVector counterfactual_not_yet_treated(const CohortPanel& panel, int cohort, int period,
                                              std::optional<int> control) {
  check_cell(panel, cohort, period);
  if (cohort == panel.last_cohort())
    throw Error(Errc::NoValidControlCohort, "the last cohort has no not-yet-treated comparison");
  const auto valid = valid_control_cohorts(panel, cohort, period);
  std::vector<int> used;
  if (control) {
    if (std::find(valid.begin(), valid.end(), *control) == valid.end())
      throw Error(Errc::NoValidControlCohort, "cohort " + std::to_string(*control) +
                                                  " is treated by period " + std::to_string(period));
    used.push_back(*control);
  } else {
    used = valid;
  }
  if (used.empty())
    throw Error(Errc::NoValidControlCohort,
                "no cohort is still untreated at period " + std::to_string(period));
  std::vector<double> growth(panel.labels().size(), 0.0);
  for (int s : used) {
    const auto g = log_growth(panel.quantity(s, period), panel.quantity(s, cohort - 1));
    for (std::size_t k = 0; k < growth.size(); ++k) growth[k] += g[k];
  }
  for (double& x : growth) x /= static_cast<double>(used.size());
  return extrapolate(panel.quantity(cohort, cohort - 1), growth);
}

namespace {

CohortEffect make_effect(const CohortPanel& panel, int g, int t, ControlStrategy strategy,
                         std::vector<int> controls, QuantityVector counterfactual) {
  const auto& observed = panel.quantity(g, t);
  const double total = counterfactual.total();
  Composition shares = closure(counterfactual);
  std::vector<double> gtt(observed.size());
  for (std::size_t k = 0; k < gtt.size(); ++k) gtt[k] = observed[k] / counterfactual[k] - 1.0;
  Composition ctt = comp_diff(closure(observed), shares);
  return CohortEffect{g,         t,           t - g,          strategy,          std::move(controls),
                      observed,  std::move(counterfactual), total, std::move(shares), std::move(gtt),
                      observed.total() / total - 1.0, std::move(ctt)};
}

struct Accumulator {
  double weight = 0.0;
  double log_total = 0.0;
  std::vector<double> log_gtt;
  std::set<std::pair<int, int>> cells;
};

std::vector<AggregatePoint> aggregate(const std::vector<CohortEffect>& effects,
                                      const std::map<std::pair<int, int>, std::size_t>& rows_per_cell,
                                      const CohortPanel& panel, bool by_event_time) {
  std::map<int, Accumulator> acc;
  for (const auto& e : effects) {
    const double w = panel.quantity(e.cohort, e.cohort - 1).total() /
                     static_cast<double>(rows_per_cell.at({e.cohort, e.period}));
    auto& a = acc[by_event_time ? e.event_time : e.period];
    if (a.log_gtt.empty()) a.log_gtt.assign(e.gtt.size(), 0.0);
    a.weight += w;
    a.log_total += w * std::log1p(e.gtt_total);
    for (std::size_t k = 0; k < e.gtt.size(); ++k) a.log_gtt[k] += w * std::log1p(e.gtt[k]);
    a.cells.insert({e.cohort, e.period});
  }
  std::vector<AggregatePoint> out;
  for (const auto& [key, a] : acc) {
    AggregatePoint point{key, std::expm1(a.log_total / a.weight), {}, a.weight, a.cells.size()};
    for (double x : a.log_gtt) point.gtt.push_back(std::expm1(x / a.weight));
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace

StaggeredResult cohort_effects(const PanelDataset& data, ControlStrategy strategy,
                               std::optional<std::size_t> baseline) {
  const CohortPanel panel(data);
  const std::size_t b = baseline.value_or(panel.labels().size() - 1);
  if (b >= panel.labels().size()) throw Error(Errc::BadBaseline, "baseline index out of range");
  if (strategy == ControlStrategy::never_treated && !panel.has_never_treated())
    throw Error(Errc::NoNeverTreatedGroup, "panel has no never-treated group");

  StaggeredResult result{strategy, {}, {}, {}, {}};
  std::map<std::pair<int, int>, std::size_t> rows_per_cell;
  for (int g : panel.cohorts()) {
    for (int t : panel.periods()) {
      if (t < g) continue;
      if (!panel.has_period(g - 1)) {
        result.skipped.push_back({g, t, "period g-1 not observed"});
        continue;
      }
      switch (strategy) {
        case ControlStrategy::never_treated:
          result.effects.push_back(make_effect(panel, g, t, strategy, {},
                                               counterfactual_never_treated(panel, g, t)));
          rows_per_cell[{g, t}] = 1;
          break;
        case ControlStrategy::pooled: {
          auto valid = valid_control_cohorts(panel, g, t);
          if (valid.empty()) {
            result.skipped.push_back({g, t, "no not-yet-treated cohort"});
            break;
          }
          auto q = counterfactual_not_yet_treated(panel, g, t, std::nullopt);
          result.effects.push_back(make_effect(panel, g, t, strategy, std::move(valid), std::move(q)));
          rows_per_cell[{g, t}] = 1;
          break;
        }
        case ControlStrategy::not_yet_treated: {
          const auto valid = valid_control_cohorts(panel, g, t);
          if (valid.empty()) {
            result.skipped.push_back({g, t, "no not-yet-treated cohort"});
            break;
          }
          for (int s : valid)
            result.effects.push_back(make_effect(panel, g, t, strategy, {s},
                                                 counterfactual_not_yet_treated(panel, g, t, s)));
          rows_per_cell[{g, t}] = valid.size();
          break;
        }
      }
    }
  }
  result.event_time = aggregate(result.effects, rows_per_cell, panel, true);
  result.calendar_time = aggregate(result.effects, rows_per_cell, panel, false);
  return result;
}

}  // namespace codid
