#include <doctest.h>

#include <cmath>
#include <sstream>

#include "codid/error.hpp"
#include "codid/estimator.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"

using namespace codid;
using oracle::comp;
using oracle::qv;

namespace {

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidSpec;
}

void check_near(std::span<const double> got, std::initializer_list<double> expected, double tol) {
  REQUIRE(got.size() == expected.size());
  std::size_t k = 0;
  for (double e : expected) {
    CAPTURE(k);
    CHECK(std::abs(got[k++] - e) <= tol);
  }
}

TwoByTwoCells cells(oracle::Vec q00, oracle::Vec q01, oracle::Vec q10, oracle::Vec q11) {
  return {qv(q00), qv(q01), qv(q10), qv(q11)};
}

PanelDataset load(const std::string& text) {
  std::istringstream in(text);
  return load_csv(in);
}

const std::string kStrata =
    "group,time,category,count,stratum,stratum_weight\n"
    "c,0,a,10,x1,0.6\nc,0,b,20,x1,0.6\nc,1,a,12,x1,0.6\nc,1,b,18,x1,0.6\n"
    "t,0,a,5,x1,0.6\nt,0,b,8,x1,0.6\nt,1,a,9,x1,0.6\nt,1,b,6,x1,0.6\n"
    "c,0,a,30,x2,0.4\nc,0,b,10,x2,0.4\nc,1,a,33,x2,0.4\nc,1,b,11,x2,0.4\n"
    "t,0,a,7,x2,0.4\nt,0,b,3,x2,0.4\nt,1,a,8,x2,0.4\nt,1,b,4,x2,0.4\n";

}  // namespace

TEST_CASE("counterfactual quantities") {
  check_near(counterfactual_quantities(qv({30, 40, 10}), qv({10, 20, 40}), qv({20, 10, 40})).values(), {60, 20, 10},
             1e-12);
  // No time trend in the control group returns the treated pre-period.
  check_near(counterfactual_quantities(qv({3, 4}), qv({7, 9}), qv({7, 9})).values(), {3, 4}, 1e-14);
  // Identical groups return the control post-period.
  check_near(counterfactual_quantities(qv({7, 9}), qv({7, 9}), qv({2, 5})).values(), {2, 5}, 1e-14);
  const QuantityVector other({1, 2}, {"x", "y"});
  CHECK(code_of([&] { counterfactual_quantities(qv({1, 2}), other, qv({1, 2})); }) == Errc::LabelMismatch);
}

TEST_CASE("2x2 estimate with a proportional effect") {
  const auto r = estimate_2x2(cells({10, 20, 40}, {20, 10, 40}, {30, 40, 10}, {66, 22, 11}));
  check_near(r.counterfactual_q.values(), {60, 20, 10}, 1e-12);
  CHECK(std::abs(r.counterfactual_total - 90) <= 1e-12);
  check_near(r.counterfactual_shares.shares(), {2.0 / 3, 2.0 / 9, 1.0 / 9}, 1e-15);
  check_near(r.gtt_per_category, {0.1, 0.1, 0.1}, 1e-13);
  CHECK(std::abs(r.gtt_total - 0.1) <= 1e-13);
  check_near(r.ctt.shares(), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-14);
}

TEST_CASE("2x2 estimate on the minimal panel") {
  std::istringstream in(
      "group,time,category,count\ncontrol,0,a,100\ncontrol,0,b,200\ncontrol,0,c,300\ncontrol,1,a,120\n"
      "control,1,b,180\ncontrol,1,c,330\ntreated,0,a,50\ntreated,0,b,80\ntreated,0,c,70\ntreated,1,a,90\n"
      "treated,1,b,60\ntreated,1,c,75\n");
  const auto panel = load_csv(in).with_treated_group("treated");
  const auto r = estimate_2x2(panel);
  check_near(r.counterfactual_q.values(), {60, 72, 77}, 1e-12);
  check_near(r.gtt_per_category, {0.5, 60.0 / 72 - 1, 75.0 / 77 - 1}, 1e-13);
  CHECK(std::abs(r.gtt_total - (225.0 / 209 - 1)) <= 1e-13);
  const auto expected = oracle::comp_diff(oracle::normalize({90, 60, 75}), oracle::normalize({60, 72, 77}));
  CHECK(oracle::max_abs_diff(r.ctt.shares(), expected) <= 1e-14);
  CHECK(r.ctt.labels() == Labels{"a", "b", "c"});
}

TEST_CASE("result invariants on random panels") {
  oracle::Random rng(31);
  for (int i = 0; i < 500; ++i) {
    const std::size_t p = 2 + rng.index(6);
    const double scale = std::pow(10.0, rng.uniform(0, 7));
    const auto c = cells(rng.quantities(p, scale), rng.quantities(p, scale), rng.quantities(p, scale),
                         rng.quantities(p, scale));
    const auto r = estimate_2x2(c);
    double sum = 0;
    for (double x : r.counterfactual_q.values()) sum += x;
    CHECK(std::abs(r.counterfactual_total - sum) <= 1e-12 * sum);
    CHECK(props::comp_gap(r.counterfactual_shares, closure(r.counterfactual_q)) <= 1e-15);
    for (double x : parallel_growth_residual(r.counterfactual_q, c.q10, c.q01, c.q00)) CHECK(std::abs(x) <= 1e-12);
    // Corrected treatment-effect identity.
    const auto pi10 = closure(c.q10), pi01 = closure(c.q01), pi00 = closure(c.q00);
    CHECK(props::comp_gap(r.ctt, comp_diff(closure(c.q11), perturb(pi10, comp_diff(pi01, pi00)))) <= 1e-12);
  }
}

TEST_CASE("quantity path and log-odds path agree") {
  const auto worst = props::dual_path(2000, 77);
  CHECK(worst.closure_vs_log_odds <= 1e-10);
  CHECK(worst.compositional_equality <= 1e-10);
  CHECK(worst.ratio_oracle <= 1e-12);
}

TEST_CASE("scale invariance") {
  oracle::Random rng(4);
  for (int i = 0; i < 100; ++i) {
    const std::size_t p = 2 + rng.index(5);
    auto q00 = rng.quantities(p), q01 = rng.quantities(p);
    const auto q10 = rng.quantities(p);
    const double c = rng.uniform(0.01, 100);
    const auto base = counterfactual_quantities(qv(q10), qv(q00), qv(q01));
    auto s00 = q00, s01 = q01;
    for (auto& x : s00) x *= c;
    for (auto& x : s01) x *= c;
    CHECK(oracle::max_rel_diff(counterfactual_quantities(qv(q10), qv(s00), qv(s01)).values(), base.values()) <= 1e-13);
    const auto scaled = counterfactual_quantities(qv(q10), qv(q00), qv(s01));
    for (std::size_t k = 0; k < p; ++k) CHECK(std::abs(scaled[k] / base[k] - c) <= 1e-12 * c);
  }
}

TEST_CASE("null effect is exact") {
  oracle::Random rng(9);
  for (int i = 0; i < 100; ++i) {
    const std::size_t p = 2 + rng.index(5);
    const auto q00 = qv(rng.quantities(p)), q01 = qv(rng.quantities(p)), q10 = qv(rng.quantities(p));
    const auto cf = counterfactual_quantities(q10, q00, q01);
    const auto r = estimate_2x2(TwoByTwoCells{q00, q01, q10, cf});
    for (double g : r.gtt_per_category) CHECK(g == 0.0);
    CHECK(r.gtt_total == 0.0);
    for (double s : r.ctt.shares()) CHECK(s == 1.0 / static_cast<double>(p));
    const auto logit = saturated_logit_ctt(TwoByTwoCells{q00, q01, q10, cf});
    for (double b : logit.beta.values()) CHECK(std::abs(b) <= 1e-12);
  }
}

TEST_CASE("linear parallel trends on shares") {
  const auto pi00 = comp({0.7, 0.2, 0.1}), pi01 = comp({0.3, 0.3, 0.4}), pi10 = comp({0.2, 0.3, 0.5});
  const auto linear = linear_pt_counterfactual_shares(pi10, pi00, pi01);
  check_near(linear.values, {-0.2, 0.4, 0.8}, 1e-15);
  CHECK_FALSE(linear.in_simplex);
  const auto codid = log_odds_counterfactual_shares(pi10, pi00, pi01);
  check_near(codid.shares(), {0.03380, 0.17747, 0.78873}, 1e-4);
  // 0.2·0.3/0.7 : 0.3·0.3/0.2 : 0.5·0.4/0.1, normalized.
  const auto direct = oracle::normalize({0.2 * 0.3 / 0.7, 0.3 * 0.3 / 0.2, 0.5 * 0.4 / 0.1});
  CHECK(oracle::max_abs_diff(codid.shares(), direct) <= 1e-15);

  const auto same = linear_pt_counterfactual_shares(pi10, pi00, pi00);
  check_near(same.values, {0.2, 0.3, 0.5}, 1e-15);
  CHECK(same.in_simplex);
  const auto u = Composition::uniform(default_labels(3));
  const auto flat = linear_pt_counterfactual_shares(u, u, u);
  check_near(flat.values, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-15);
  CHECK(flat.in_simplex);
}

TEST_CASE("saturated logit reading of the treatment effect") {
  CHECK(props::saturated_logit(1000, 12) <= 1e-10);
  // Three-category worked-example shares as pre-period cells, arbitrary treated outcome.
  const auto r = saturated_logit_ctt(cells({7, 2, 1}, {3, 3, 4}, {2, 3, 5}, {1, 1, 8}));
  for (double b : r.beta.values()) CHECK(std::isfinite(b));
  CHECK(props::comp_gap(inv_log_odds(log_odds(r.ctt)), r.ctt) <= 1e-15);
}

TEST_CASE("stratified estimate") {
  const auto panel = load(kStrata).with_treated_group("t");
  const auto r = estimate_stratified(panel);
  REQUIRE(r.strata.size() == 2);
  // Per stratum, by hand: x1 counterfactual (6, 7.2); x2 counterfactual (7.7, 3.3).
  check_near(r.strata[0].result.counterfactual_q.values(), {6, 7.2}, 1e-13);
  check_near(r.strata[1].result.counterfactual_q.values(), {7.7, 3.3}, 1e-13);
  check_near(r.counterfactual_q.values(), {0.6 * 6 + 0.4 * 7.7, 0.6 * 7.2 + 0.4 * 3.3}, 1e-13);
  check_near(r.shares_weighted.shares(), {0.6 * 6 / 13.2 + 0.4 * 0.7, 0.6 * 7.2 / 13.2 + 0.4 * 0.3}, 1e-14);
  check_near(r.shares_quantity_consistent.shares(), {6.68 / 12.32, 5.64 / 12.32}, 1e-14);
  check_near(r.observed.values(), {8.6, 5.2}, 1e-13);
  check_near(r.gtt_per_category, {8.6 / 6.68 - 1, 5.2 / 5.64 - 1}, 1e-13);
  CHECK(std::abs(r.gtt_total - (13.8 / 12.32 - 1)) <= 1e-13);
  const oracle::Vec observed_weighted{0.6 * 0.6 + 0.4 * 8 / 12.0, 0.6 * 0.4 + 0.4 * 4 / 12.0};
  const oracle::Vec cf_weighted{0.6 * 6 / 13.2 + 0.4 * 0.7, 0.6 * 7.2 / 13.2 + 0.4 * 0.3};
  CHECK(oracle::max_abs_diff(r.ctt_weighted.shares(), oracle::comp_diff(observed_weighted, cf_weighted)) <= 1e-14);
  CHECK(oracle::max_abs_diff(r.ctt_quantity_consistent.shares(),
                             oracle::comp_diff(oracle::normalize({8.6, 5.2}), oracle::normalize({6.68, 5.64}))) <=
        1e-14);
}

TEST_CASE("stratified reductions") {
  oracle::Random rng(2);
  const auto q00 = rng.quantities(3), q01 = rng.quantities(3), q10 = rng.quantities(3), q11 = rng.quantities(3);
  const auto plain = estimate_2x2(oracle::two_by_two(q00, q01, q10, q11));

  // A single stratum with weight 1 is the plain estimate; so are two identical strata at 0.5 each.
  std::string one = "group,time,category,count,stratum,stratum_weight\n";
  std::string two = one;
  auto rows = [&](const std::string& g, int t, const oracle::Vec& q, const std::string& s, const std::string& w) {
    std::string out;
    for (std::size_t k = 0; k < q.size(); ++k)
      out += g + "," + std::to_string(t) + ",c" + std::to_string(k + 1) + "," + format_double(q[k]) + "," + s + "," +
             w + "\n";
    return out;
  };
  for (const auto& [g, t, q] : std::vector<std::tuple<std::string, int, oracle::Vec>>{
           {"control", 0, q00}, {"control", 1, q01}, {"treated", 0, q10}, {"treated", 1, q11}}) {
    one += rows(g, t, q, "all", "1");
    two += rows(g, t, q, "x", "0.5") + rows(g, t, q, "y", "0.5");
  }
  for (const auto* text : {&one, &two}) {
    const auto r = estimate_stratified(load(*text).with_treated_group("treated"));
    CHECK(oracle::max_rel_diff(r.counterfactual_q.values(), plain.counterfactual_q.values()) <= 1e-14);
    CHECK(props::comp_gap(r.shares_weighted, plain.counterfactual_shares) <= 1e-14);
    CHECK(props::comp_gap(r.ctt_weighted, plain.ctt) <= 1e-14);
    CHECK(std::abs(r.gtt_total - plain.gtt_total) <= 1e-14);
  }

  std::string unweighted = "group,time,category,count,stratum\n";
  for (const auto& [g, t, q] : std::vector<std::tuple<std::string, int, oracle::Vec>>{
           {"control", 0, q00}, {"control", 1, q01}, {"treated", 0, q10}, {"treated", 1, q11}})
    for (std::size_t k = 0; k < 3; ++k)
      unweighted += g + "," + std::to_string(t) + ",c" + std::to_string(k + 1) + "," + format_double(q[k]) + ",x\n";
  CHECK(code_of([&] { estimate_stratified(load(unweighted).with_treated_group("treated")); }) ==
        Errc::MissingStratumWeight);
}

TEST_CASE("panel shape checks") {
  oracle::PanelSpec s;
  s.labels = default_labels(2);
  s.periods = {0, 1};
  s.cohorts = {{"a", std::nullopt}, {"b", std::nullopt}, {"t", 1}};
  for (const auto& g : {"a", "b", "t"})
    for (int t : {0, 1}) s.cells[{g, t}] = {1, 2};
  CHECK(code_of([&] { extract_2x2(oracle::build(s)); }) == Errc::BadPanelShape);
  s.cohorts = {{"a", std::nullopt}, {"b", std::nullopt}};
  s.cells.clear();
  for (const auto& g : {"a", "b"})
    for (int t : {0, 1}) s.cells[{g, t}] = {1, 2};
  CHECK(code_of([&] { extract_2x2(oracle::build(s)); }) == Errc::BadPanelShape);
}
