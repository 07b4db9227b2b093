#include "codid/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace codid {

namespace {

void write(const Json& v, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string close_pad(static_cast<std::size_t>(depth) * 2, ' ');
  switch (v.type()) {
    case Json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        write(it.value(), out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case Json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::none_of(v.begin(), v.end(), [](const Json& e) { return e.is_structured(); });
      if (flat) {
        out += "[";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          write(v[i], out, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        write(v[i], out, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case Json::value_t::number_float: {
      const double x = v.get<double>();
      if (!std::isfinite(x)) {
        out += "null";
        return;
      }
      out += format_double(x);
      return;
    }
    default:
      out += v.dump();
  }
}

Json doubles(std::span<const double> values) {
  Json a = Json::array();
  for (double x : values) a.push_back(x);
  return a;
}

}  // namespace

std::string dump_json(const Json& value) {
  std::string out;
  write(value, out, 0);
  out += '\n';
  return out;
}

Json labelled(const Labels& labels, std::span<const double> values) {
  Json o = Json::object();
  for (std::size_t k = 0; k < labels.size(); ++k) o[labels[k]] = values[k];
  return o;
}

Json to_json(const QuantityVector& q) { return labelled(q.labels(), q.values()); }
Json to_json(const Composition& c) { return labelled(c.labels(), c.shares()); }
Json to_json(const Interval& interval) { return Json::array({interval.lo, interval.hi}); }

Json to_json(const CodidResult& r) {
  Json o;
  o["q_observed"] = to_json(r.observed);
  o["q_counterfactual"] = to_json(r.counterfactual_q);
  o["S_counterfactual"] = r.counterfactual_total;
  o["pi_counterfactual"] = to_json(r.counterfactual_shares);
  o["gtt"] = labelled(r.observed.labels(), r.gtt_per_category);
  o["gtt_total"] = r.gtt_total;
  o["ctt"] = to_json(r.ctt);
  o["ctt_log_odds"] = {{"baseline", r.ctt.labels()[r.ctt_log_odds.baseline()]},
                       {"values", doubles(r.ctt_log_odds.values())}};
  return o;
}

Json to_json(const StratifiedResult& r) {
  Json o;
  Json strata = Json::array();
  for (const auto& s : r.strata) {
    Json e;
    e["stratum"] = s.name;
    e["weight"] = s.weight;
    e["result"] = to_json(s.result);
    strata.push_back(std::move(e));
  }
  o["strata"] = std::move(strata);
  o["q_observed"] = to_json(r.observed);
  o["q_counterfactual"] = to_json(r.counterfactual_q);
  o["S_counterfactual"] = r.counterfactual_total;
  o["pi_counterfactual"] = to_json(r.shares_weighted);
  o["pi_counterfactual_quantity_consistent"] = to_json(r.shares_quantity_consistent);
  o["pi_observed"] = to_json(r.observed_shares_weighted);
  o["gtt"] = labelled(r.observed.labels(), r.gtt_per_category);
  o["gtt_total"] = r.gtt_total;
  o["ctt"] = to_json(r.ctt_weighted);
  o["ctt_quantity_consistent"] = to_json(r.ctt_quantity_consistent);
  return o;
}

Json to_json(const BoundsResult& r) {
  const Labels& labels = r.ctt.labels();
  Json o;
  o["pre_periods"] = r.categories.periods;
  o["omega"] = doubles(r.categories.weights);
  o["b_min"] = labelled(labels, r.categories.b_min);
  o["b_max"] = labelled(labels, r.categories.b_max);
  Json gtt = Json::object();
  for (std::size_t k = 0; k < labels.size(); ++k) gtt[labels[k]] = to_json(r.gtt.per_category[k]);
  o["gtt"] = std::move(gtt);
  o["gtt_total"] = to_json(r.gtt.total);
  Json box = Json::object();
  const auto ctt_box = r.ctt.ctt_box();
  const auto cf_box = r.ctt.counterfactual_box();
  std::size_t coord = 0;
  Json cf = Json::object();
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (k == r.ctt.baseline()) continue;
    box[labels[k]] = to_json(ctt_box[coord]);
    cf[labels[k]] = to_json(cf_box[coord]);
    ++coord;
  }
  o["ctt_box"] = {{"baseline", labels[r.ctt.baseline()]}, {"log_odds", std::move(box)},
                  {"counterfactual_log_odds", std::move(cf)}};
  Json env = Json::object();
  for (std::size_t k = 0; k < labels.size(); ++k) env[labels[k]] = to_json(r.share_envelopes[k]);
  o["pi_counterfactual_envelopes"] = std::move(env);
  return o;
}

Json to_json(const StaggeredResult& r, const Labels& labels) {
  Json o;
  o["strategy"] = std::string(to_string(r.strategy));
  Json rows = Json::array();
  for (const auto& e : r.effects) {
    Json row;
    row["g"] = e.cohort;
    row["t"] = e.period;
    row["event_time"] = e.event_time;
    row["controls"] = e.controls;
    row["gtt_total"] = e.gtt_total;
    row["gtt"] = labelled(labels, e.gtt);
    row["ctt"] = to_json(e.ctt);
    row["q_counterfactual"] = to_json(e.counterfactual_q);
    row["S_counterfactual"] = e.counterfactual_total;
    row["pi_counterfactual"] = to_json(e.counterfactual_shares);
    rows.push_back(std::move(row));
  }
  o["effects"] = std::move(rows);
  auto aggregate = [&](const std::vector<AggregatePoint>& points, const char* key) {
    Json a = Json::array();
    for (const auto& p : points) {
      Json row;
      row[key] = p.key;
      row["gtt_total"] = p.gtt_total;
      row["gtt"] = labelled(labels, p.gtt);
      row["weight"] = p.weight;
      row["cells"] = p.cells;
      a.push_back(std::move(row));
    }
    return a;
  };
  o["aggregation"] = "artifact choice, not part of the identification result: cohort weights are "
                     "cohort totals at g-1, averaging is on log(1 + gtt)";
  o["event_time"] = aggregate(r.event_time, "event_time");
  o["calendar_time"] = aggregate(r.calendar_time, "t");
  Json skipped = Json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"g", s.cohort}, {"t", s.period}, {"reason", s.reason}});
  o["skipped"] = std::move(skipped);
  return o;
}

Json to_json(const SyntheticResult& r, const Labels& labels) {
  auto weights_json = [](const SimplexQpSolution& s, auto&& names) {
    Json w = Json::object();
    for (std::size_t i = 0; i < s.weights.size(); ++i) w[names(i)] = s.weights[i];
    return Json{{"weights", std::move(w)},
                {"objective", s.objective},
                {"iterations", s.iterations},
                {"converged", s.converged},
                {"gradient_mapping_norm", s.gradient_mapping_norm}};
  };
  Json o;
  o["treated"] = r.setup.treated;
  o["controls"] = r.setup.controls;
  o["pre_periods"] = r.setup.pre_periods;
  o["post_periods"] = r.setup.post_periods;
  o["omega"] = weights_json(r.unit_weights, [&](std::size_t i) { return r.setup.controls[i]; });
  o["lambda"] = weights_json(r.time_weights, [&](std::size_t i) { return std::to_string(r.setup.pre_periods[i]); });
  o["q_treated_pre"] = to_json(r.treated_pre);
  o["q_treated_post"] = to_json(r.treated_post);
  o["q_control_pre"] = to_json(r.control_pre);
  o["q_control_post"] = to_json(r.control_post);
  o["q_counterfactual"] = labelled(labels, r.counterfactual_q);
  o["gtt"] = labelled(labels, r.gtt);
  o["gtt_total"] = r.gtt_total;
  o["gtt_log_ratio"] = labelled(labels, r.gtt_log);
  o["pi_treated_pre"] = to_json(r.pi_treated_pre);
  o["pi_treated_post"] = to_json(r.pi_treated_post);
  o["pi_control_pre"] = to_json(r.pi_control_pre);
  o["pi_control_post"] = to_json(r.pi_control_post);
  o["ctt"] = to_json(r.ctt);
  o["ctt_alt"] = to_json(r.ctt_alt);
  o["ctt_forms"] = {{"ctt", "(pi_tr_post - pi_ctl_post) + (pi_tr_pre - pi_ctl_pre), perturbation form"},
                    {"ctt_alt", "(pi_tr_post - pi_ctl_post) - (pi_tr_pre - pi_ctl_pre), difference form"}};
  return o;
}

Json to_json(const BootstrapResult& r, const Labels& labels) {
  auto ci = [](const PercentileCi& c) { return Json{{"point", c.point}, {"lo", c.lo}, {"hi", c.hi}}; };
  Json o;
  Json gtt = Json::object(), ctt = Json::object();
  for (std::size_t k = 0; k < labels.size(); ++k) {
    gtt[labels[k]] = ci(r.gtt[k]);
    ctt[labels[k]] = ci(r.ctt[k]);
  }
  o["gtt"] = std::move(gtt);
  o["gtt_total"] = ci(r.gtt_total);
  o["ctt"] = std::move(ctt);
  o["replicates"] = r.replicates.size();
  o["zero_cell_redraws"] = r.redraws;
  o["smoothed_cells"] = r.smoothed_cells;
  o["totals_rounded"] = r.totals_rounded;
  return o;
}

Json panel_summary(const PanelDataset& panel) {
  Json o;
  o["labels"] = panel.labels();
  o["periods"] = panel.periods();
  Json groups = Json::array();
  for (const auto& g : panel.groups()) {
    Json e{{"id", g.id}};
    e["first_treated"] = g.first_treated ? Json(*g.first_treated) : Json("inf");
    groups.push_back(std::move(e));
  }
  o["groups"] = std::move(groups);
  if (panel.stratified()) {
    Json strata = Json::array();
    for (const auto& s : panel.strata())
      strata.push_back({{"name", s.name}, {"weight", s.weight ? Json(*s.weight) : Json(nullptr)}});
    o["strata"] = std::move(strata);
    o["stratum_weight_source"] = std::string(to_string(panel.weight_source()));
  }
  Json smoothing = Json::array();
  for (const auto& s : panel.smoothing())
    smoothing.push_back({{"group", s.cell.group}, {"t", s.cell.period}, {"stratum", s.cell.stratum}, {"amount", s.amount}});
  o["smoothing"] = std::move(smoothing);
  return o;
}

}  // namespace codid
