#include "codid/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "codid/error.hpp"
#include "codid/estimator.hpp"
#include "codid/rng.hpp"

namespace codid {

std::string_view to_string(BootstrapTarget target) {
  switch (target) {
    case BootstrapTarget::two_by_two: return "2x2";
    case BootstrapTarget::stratified: return "stratified";
    case BootstrapTarget::staggered_cell: return "staggered_cell";
  }
  return "2x2";
}

void BootstrapConfig::validate() const {
  if (replicates < 1) throw Error(Errc::InvalidConfig, "replicates must be at least 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw Error(Errc::InvalidConfig, "ci_level must lie in (0, 1)");
}

EffectSummary evaluate_target(const PanelDataset& panel, const BootstrapConfig& config) {
  auto shares = [](const Composition& c) { return std::vector<double>(c.shares().begin(), c.shares().end()); };
  switch (config.target) {
    case BootstrapTarget::two_by_two: {
      const auto r = estimate_2x2(panel);
      return {r.gtt_per_category, r.gtt_total, shares(r.ctt)};
    }
    case BootstrapTarget::stratified: {
      const auto r = estimate_stratified(panel);
      return {r.gtt_per_category, r.gtt_total, shares(r.ctt_weighted)};
    }
    case BootstrapTarget::staggered_cell: {
      const CohortPanel cohorts(panel);
      const int g = config.cell.cohort;
      const int t = config.cell.period;
      QuantityVector cf = [&] {
        switch (config.cell.strategy) {
          case ControlStrategy::never_treated: return counterfactual_never_treated(cohorts, g, t);
          case ControlStrategy::not_yet_treated:
            return counterfactual_not_yet_treated(cohorts, g, t, config.cell.control);
          case ControlStrategy::pooled: break;
        }
        return counterfactual_not_yet_treated(cohorts, g, t, std::nullopt);
      }();
      const auto& observed = cohorts.quantity(g, t);
      EffectSummary s;
      for (std::size_t k = 0; k < observed.size(); ++k) s.gtt.push_back(observed[k] / cf[k] - 1.0);
      s.gtt_total = observed.total() / cf.total() - 1.0;
      s.ctt = shares(comp_diff(closure(observed), closure(cf)));
      return s;
    }
  }
  throw Error(Errc::InvalidConfig, "unknown bootstrap target");
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(Errc::EmptySample, "percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::InvalidConfig, "quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

PanelDataset draw_replicate(const PanelDataset& panel, const BootstrapConfig& config, std::size_t index,
                            std::size_t* redraws, std::size_t* smoothed) {
  std::map<CellAddress, QuantityVector> cells;
  std::uint32_t cell_index = 0;
  for (const auto& [address, q] : panel.cells()) {
    const auto n = static_cast<std::int64_t>(std::llround(q.total()));
    const std::vector<double> probs(q.values().begin(), q.values().end());
    std::vector<double> drawn;
    for (std::size_t attempt = 0;; ++attempt) {
      CounterRng rng(config.seed, {static_cast<std::uint32_t>(attempt), cell_index,
                                   static_cast<std::uint32_t>(index)});
      const auto counts = sample_multinomial(n, probs, rng);
      const bool has_zero = std::find(counts.begin(), counts.end(), 0) != counts.end();
      drawn.assign(counts.begin(), counts.end());
      if (!has_zero) break;
      if (config.smoothing) {
        for (double& x : drawn) x += 0.5;
        if (smoothed) ++*smoothed;
        break;
      }
      if (attempt >= config.max_redraws)
        throw Error(Errc::ZeroReplicateFailure,
                    "replicate " + std::to_string(index) + " kept drawing a zero count in cell " +
                        to_string(address) + " after " + std::to_string(config.max_redraws) + " redraws");
      if (redraws) ++*redraws;
    }
    cells.emplace(address, QuantityVector(std::move(drawn), panel.labels()));
    ++cell_index;
  }
  return panel.with_cells(std::move(cells));
}

BootstrapResult bootstrap(const PanelDataset& panel, const BootstrapConfig& config) {
  config.validate();
  BootstrapResult result;
  result.point = evaluate_target(panel, config);
  for (const auto& [address, q] : panel.cells())
    if (q.total() != std::round(q.total())) result.totals_rounded = true;

  const std::size_t B = config.replicates;
  result.replicates.resize(B);
  std::vector<std::size_t> redraws(B, 0), smoothed(B, 0);
  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, B));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failure_index = B;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t b = next++; b < B; b = next++) {
      try {
        result.replicates[b] = evaluate_target(draw_replicate(panel, config, b, &redraws[b], &smoothed[b]), config);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        // Keep the lowest failing replicate so the reported error is schedule independent.
        if (b < failure_index) {
          failure_index = b;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t b = 0; b < B; ++b) {
    result.redraws += redraws[b];
    result.smoothed_cells += smoothed[b];
  }
  const double lo_q = (1.0 - config.ci_level) / 2.0;
  const double hi_q = 1.0 - lo_q;
  auto interval = [&](double point, auto&& pick) {
    std::vector<double> values(B);
    for (std::size_t b = 0; b < B; ++b) values[b] = pick(result.replicates[b]);
    return PercentileCi{point, percentile(values, lo_q), percentile(std::move(values), hi_q)};
  };
  result.gtt_total = interval(result.point.gtt_total, [](const EffectSummary& s) { return s.gtt_total; });
  for (std::size_t k = 0; k < result.point.gtt.size(); ++k) {
    result.gtt.push_back(interval(result.point.gtt[k], [k](const EffectSummary& s) { return s.gtt[k]; }));
    result.ctt.push_back(interval(result.point.ctt[k], [k](const EffectSummary& s) { return s.ctt[k]; }));
  }
  return result;
}

void write_replicates(const BootstrapResult& result, const Labels& labels, std::ostream& out) {
  out << "replicate,gtt_total";
  for (const auto& l : labels) out << ",gtt_" << l;
  for (const auto& l : labels) out << ",ctt_" << l;
  out << '\n';
  for (std::size_t b = 0; b < result.replicates.size(); ++b) {
    const auto& s = result.replicates[b];
    out << b << ',' << format_double(s.gtt_total);
    for (double x : s.gtt) out << ',' << format_double(x);
    for (double x : s.ctt) out << ',' << format_double(x);
    out << '\n';
  }
}

}  // namespace codid
