#include "codid/bounds.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "codid/error.hpp"

namespace codid {

namespace {

struct BoundsCells {
  std::string treated;
  std::string control;
  std::vector<int> pre_periods;
};

BoundsCells bounds_cells(const PanelDataset& panel) {
  if (panel.strata().size() > 1)
    throw Error(Errc::BadPanelShape, "bounds take an unstratified panel");
  const auto treated = panel.treated_groups();
  const auto control = panel.never_treated_groups();
  if (panel.groups().size() != 2 || treated.size() != 1 || control.size() != 1)
    throw Error(Errc::BadPanelShape, "bounds need one treated and one control group");
  if (!panel.has_period(1) || panel.periods().back() != 1)
    throw Error(Errc::BadPanelShape, "bounds need the single post period t = 1");
  BoundsCells out{treated.front()->id, control.front()->id, {}};
  for (int t : panel.periods())
    if (t <= 0) out.pre_periods.push_back(t);
  if (out.pre_periods.empty()) throw Error(Errc::NoPrePeriods, "panel has no period t <= 0");
  return out;
}

double parse_number(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw Error(Errc::InvalidWeights, "not a number: '" + std::string(text) + "'");
  return v;
}

/// Shortest round-trip text, for scheme descriptions that echo user input.
std::string short_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

WeightScheme WeightScheme::uniform(std::optional<std::size_t> last) {
  if (last && *last == 0) throw Error(Errc::InvalidWeights, "uniform scheme needs at least one period");
  WeightScheme s;
  s.kind_ = Kind::uniform;
  s.last_ = last;
  return s;
}

WeightScheme WeightScheme::decay(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(Errc::InvalidWeights, "decay rate must lie in (0, 1]");
  WeightScheme s;
  s.kind_ = Kind::decay;
  s.rho_ = rho;
  return s;
}

WeightScheme WeightScheme::explicit_weights(std::map<int, double> weights) {
  for (const auto& [t, w] : weights) {
    if (t > 0) throw Error(Errc::InvalidWeights, "weights apply to pre-periods t <= 0");
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(Errc::InvalidWeights, "weights must be positive");
  }
  WeightScheme s;
  s.kind_ = Kind::explicit_weights;
  s.weights_ = std::move(weights);
  return s;
}

WeightScheme WeightScheme::parse(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view head = text.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "uniform") {
    if (arg.empty()) return uniform();
    const double k = parse_number(arg);
    if (k < 1 || k != std::floor(k)) throw Error(Errc::InvalidWeights, "uniform:K needs a positive integer");
    return uniform(static_cast<std::size_t>(k));
  }
  if (head == "decay") {
    if (arg.empty()) throw Error(Errc::InvalidWeights, "decay needs a rate, e.g. decay:0.8");
    return decay(parse_number(arg));
  }
  if (head == "explicit") {
    std::map<int, double> weights;
    std::string_view rest = arg;
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const std::string_view item = rest.substr(0, semi);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw Error(Errc::InvalidWeights, "expected T=W in '" + std::string(item) + "'");
      const double t = parse_number(item.substr(0, eq));
      weights[static_cast<int>(t)] = parse_number(item.substr(eq + 1));
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
    }
    return explicit_weights(std::move(weights));
  }
  throw Error(Errc::InvalidWeights, "unknown weight scheme '" + std::string(text) + "'");
}

std::vector<std::pair<int, double>> WeightScheme::resolve(std::span<const int> pre_periods) const {
  std::vector<int> periods(pre_periods.begin(), pre_periods.end());
  std::sort(periods.begin(), periods.end());
  std::vector<std::pair<int, double>> out;
  switch (kind_) {
    case Kind::uniform: {
      const std::size_t n = last_ ? std::min(*last_, periods.size()) : periods.size();
      for (std::size_t i = periods.size() - n; i < periods.size(); ++i) out.emplace_back(periods[i], 1.0);
      break;
    }
    case Kind::decay:
      for (int t : periods) out.emplace_back(t, std::pow(rho_, std::abs(t)));
      break;
    case Kind::explicit_weights:
      for (int t : periods)
        if (auto it = weights_.find(t); it != weights_.end()) out.emplace_back(t, it->second);
      break;
  }
  return out;
}

std::string WeightScheme::describe() const {
  switch (kind_) {
    case Kind::uniform:
      return last_ ? "uniform:" + std::to_string(*last_) : "uniform";
    case Kind::decay:
      return "decay:" + short_number(rho_);
    case Kind::explicit_weights: {
      std::string s = "explicit:";
      bool first = true;
      for (const auto& [t, w] : weights_) {
        if (!first) s += ';';
        s += std::to_string(t) + "=" + short_number(w);
        first = false;
      }
      return s;
    }
  }
  return "uniform";
}

CategoryBounds category_bounds(const PanelDataset& panel, const WeightScheme& scheme) {
  const BoundsCells cells = bounds_cells(panel);
  const auto used = scheme.resolve(cells.pre_periods);
  if (used.empty()) throw Error(Errc::NoPrePeriods, "weight scheme selects no pre-period");
  const std::size_t p = panel.num_categories();
  const auto& q01 = panel.cell(cells.control, 1);

  CategoryBounds out;
  out.log_gap_min.assign(p, std::numeric_limits<double>::infinity());
  out.log_gap_max.assign(p, -std::numeric_limits<double>::infinity());
  for (const auto& [t, w] : used) {
    out.periods.push_back(t);
    out.weights.push_back(w);
    const auto& q1 = panel.cell(cells.treated, t);
    const auto& q0 = panel.cell(cells.control, t);
    for (std::size_t k = 0; k < p; ++k) {
      const double gap = w * (std::log(q1[k]) - std::log(q0[k]));
      out.log_gap_min[k] = std::min(out.log_gap_min[k], gap);
      out.log_gap_max[k] = std::max(out.log_gap_max[k], gap);
    }
  }
  out.b_min.resize(p);
  out.b_max.resize(p);
  for (std::size_t k = 0; k < p; ++k) {
    out.b_min[k] = std::exp(out.log_gap_min[k] + std::log(q01[k]));
    out.b_max[k] = std::exp(out.log_gap_max[k] + std::log(q01[k]));
  }
  return out;
}

GttBounds gtt_bounds(const CategoryBounds& bounds, const QuantityVector& observed) {
  GttBounds out;
  double sum_min = 0.0, sum_max = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    out.per_category.push_back(
        Interval{observed[k] / bounds.b_max[k] - 1.0, observed[k] / bounds.b_min[k] - 1.0});
    sum_min += bounds.b_min[k];
    sum_max += bounds.b_max[k];
  }
  const double total = observed.total();
  out.total = Interval{total / sum_max - 1.0, total / sum_min - 1.0};
  return out;
}

GttBounds gtt_bounds(const PanelDataset& panel, const WeightScheme& scheme) {
  const BoundsCells cells = bounds_cells(panel);
  return gtt_bounds(category_bounds(panel, scheme), panel.cell(cells.treated, 1));
}

CttIdentifiedSet::CttIdentifiedSet(const CategoryBounds& bounds, Composition observed_shares,
                                   std::size_t baseline)
    : observed_shares_(std::move(observed_shares)), baseline_(baseline) {
  const std::size_t p = observed_shares_.size();
  if (baseline_ >= p) throw Error(Errc::BadBaseline, "baseline index out of range");
  if (bounds.b_min.size() != p) throw Error(Errc::LabelMismatch, "bounds and shares differ in size");
  for (std::size_t k = 0; k < p; ++k) {
    log_b_min_.push_back(std::log(bounds.b_min[k]));
    log_b_max_.push_back(std::log(bounds.b_max[k]));
  }
  for (std::size_t k = 0; k < p; ++k) {
    if (k == baseline_) continue;
    box_.push_back(Interval{log_b_min_[k] - log_b_max_[baseline_], log_b_max_[k] - log_b_min_[baseline_]});
  }
}

std::vector<Interval> CttIdentifiedSet::ctt_box() const {
  const LogOdds observed = log_odds(observed_shares_, baseline_);
  std::vector<Interval> out;
  for (std::size_t c = 0; c < box_.size(); ++c)
    out.push_back(Interval{observed[c] - box_[c].hi, observed[c] - box_[c].lo});
  return out;
}

bool CttIdentifiedSet::contains(const Composition& ctt, double tol) const {
  const LogOdds r = log_odds(comp_diff(observed_shares_, ctt), baseline_);
  for (std::size_t c = 0; c < box_.size(); ++c)
    if (!box_[c].contains(r[c], tol)) return false;
  return true;
}

bool CttIdentifiedSet::contains_sharp(const Composition& ctt, double tol) const {
  // s = π^I ⊖ ctt; need a baseline log-quantity a ∈ [log b_min, log b_max]
  // with r_k + a inside every non-baseline category's log bounds.
  const LogOdds r = log_odds(comp_diff(observed_shares_, ctt), baseline_);
  double lower = log_b_min_[baseline_];
  double upper = log_b_max_[baseline_];
  for (std::size_t c = 0; c < r.size(); ++c) {
    const std::size_t k = r.category_of(c);
    lower = std::max(lower, log_b_min_[k] - r[c]);
    upper = std::min(upper, log_b_max_[k] - r[c]);
  }
  return lower <= upper + tol;
}

std::vector<Interval> CttIdentifiedSet::share_envelopes() const {
  const std::size_t p = observed_shares_.size();
  const auto& labels = observed_shares_.labels();
  auto corner = [&](auto pick_upper) {
    std::vector<double> r(box_.size());
    for (std::size_t c = 0; c < r.size(); ++c) r[c] = pick_upper(c) ? box_[c].hi : box_[c].lo;
    return inv_log_odds(LogOdds(std::move(r), baseline_, labels));
  };
  std::vector<Interval> out(p);
  for (std::size_t c = 0; c < box_.size(); ++c) {
    const std::size_t k = c < baseline_ ? c : c + 1;
    out[k].hi = corner([&](std::size_t j) { return j == c; })[k];
    out[k].lo = corner([&](std::size_t j) { return j != c; })[k];
  }
  out[baseline_].hi = corner([](std::size_t) { return false; })[baseline_];
  out[baseline_].lo = corner([](std::size_t) { return true; })[baseline_];
  return out;
}

BoundsResult compute_bounds(const PanelDataset& panel, const WeightScheme& scheme,
                            std::optional<std::size_t> baseline) {
  const BoundsCells cells = bounds_cells(panel);
  const std::size_t b = baseline.value_or(panel.num_categories() - 1);
  CategoryBounds categories = category_bounds(panel, scheme);
  const auto& observed = panel.cell(cells.treated, 1);
  GttBounds gtt = gtt_bounds(categories, observed);
  CttIdentifiedSet ctt(categories, closure(observed), b);
  auto envelopes = ctt.share_envelopes();
  return BoundsResult{std::move(categories), std::move(gtt), std::move(ctt), std::move(envelopes)};
}

}  // namespace codid
