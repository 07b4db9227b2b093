#pragma once

// JSON rendering of estimator results. Field names follow the usual symbols
// (q_counterfactual, S_counterfactual, pi_counterfactual, gtt, ctt, b_min,
// b_max, omega, lambda). Floats are written with 17 significant digits and
// keys keep insertion order, so equal inputs give byte-identical output.

#include <string>

#include <json.hpp>

#include "codid/bootstrap.hpp"
#include "codid/bounds.hpp"
#include "codid/estimator.hpp"
#include "codid/panel.hpp"
#include "codid/simplex.hpp"
#include "codid/staggered.hpp"
#include "codid/synthetic.hpp"

namespace codid {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "codid.v1";

/// Two-space indented JSON with %.17g floats and a trailing newline.
std::string dump_json(const Json& value);

Json labelled(const Labels& labels, std::span<const double> values);
Json to_json(const QuantityVector& q);
Json to_json(const Composition& c);
Json to_json(const Interval& interval);
Json to_json(const CodidResult& result);
Json to_json(const StratifiedResult& result);
Json to_json(const BoundsResult& result);
Json to_json(const StaggeredResult& result, const Labels& labels);
Json to_json(const SyntheticResult& result, const Labels& labels);
Json to_json(const BootstrapResult& result, const Labels& labels);
Json panel_summary(const PanelDataset& panel);

}  // namespace codid
