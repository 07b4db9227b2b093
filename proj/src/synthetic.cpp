#include "codid/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "codid/error.hpp"

namespace codid {

std::vector<double> project_to_simplex(std::vector<double> v) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) theta = candidate;
  }
  for (double& x : v) x = std::max(x - theta, 0.0);
  return v;
}

SimplexQpSolution solve_simplex_least_squares(const std::vector<std::vector<double>>& columns,
                                              const std::vector<double>& target,
                                              const SimplexQpOptions& options) {
  const auto n = static_cast<Eigen::Index>(columns.size());
  const auto m = static_cast<Eigen::Index>(target.size());
  if (n == 0) throw Error(Errc::NoControls, "no columns to weight");
  Eigen::MatrixXd A(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (columns[j].size() != target.size()) throw Error(Errc::BadPanelShape, "column length mismatch");
    for (Eigen::Index i = 0; i < m; ++i) A(i, j) = columns[j][i];
  }
  const Eigen::Map<const Eigen::VectorXd> y(target.data(), m);
  Eigen::MatrixXd gram = A.transpose() * A;
  gram.diagonal().array() += options.ridge;
  const Eigen::VectorXd c = A.transpose() * y;

  auto objective = [&](const Eigen::VectorXd& w) {
    return (A * w - y).squaredNorm() + options.ridge * w.squaredNorm();
  };
  auto to_vector = [](const Eigen::VectorXd& w) { return std::vector<double>(w.data(), w.data() + w.size()); };

  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  if (n == 1) return {{1.0}, objective(w), 0, true, 0.0};

  const double L = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .maxCoeff();
  if (!(L > 0.0)) return {to_vector(w), objective(w), 0, true, 0.0};

  // Projected gradient with Nesterov momentum, restarted whenever the step
  // stops pointing downhill. Convergence is judged at the unextrapolated
  // iterate, so the stopping rule is the plain gradient-mapping norm.
  auto project = [&](const Eigen::VectorXd& v) {
    const auto p = project_to_simplex(to_vector(v));
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p.data(), n));
  };
  auto gradient = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(2.0 * (gram * v - c)); };
  double mapping_norm = 0.0;
  Eigen::VectorXd z = w;
  double momentum = 1.0;
  for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
    mapping_norm = L * (w - project(w - gradient(w) / L)).norm();
    if (mapping_norm <= options.tol) return {to_vector(w), objective(w), iter - 1, true, mapping_norm};
    const Eigen::VectorXd next = project(z - gradient(z) / L);
    if ((z - next).dot(next - w) > 0.0) {
      momentum = 1.0;
      z = w;
      continue;
    }
    const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    z = next + ((momentum - 1.0) / m_next) * (next - w);
    momentum = m_next;
    w = next;
  }
  mapping_norm = L * (w - project(w - gradient(w) / L)).norm();
  if (mapping_norm <= options.tol) return {to_vector(w), objective(w), options.max_iter, true, mapping_norm};
  return {to_vector(w), objective(w), options.max_iter, false, mapping_norm};
}

SyntheticSetup synthetic_setup(const PanelDataset& panel, int t0, const std::optional<std::string>& treated) {
  if (panel.stratified()) throw Error(Errc::BadPanelShape, "synthetic estimation takes an unstratified panel");
  SyntheticSetup setup;
  if (treated) {
    setup.treated = resolve_treated_group(panel, treated);
  } else if (const auto timed = panel.treated_groups(); timed.size() == 1) {
    setup.treated = timed.front()->id;
  } else {
    setup.treated = resolve_treated_group(panel, std::nullopt);
  }
  for (const auto& g : panel.groups())
    if (g.id != setup.treated) setup.controls.push_back(g.id);
  if (setup.controls.empty()) throw Error(Errc::NoControls, "panel has no control group");
  for (int t : panel.periods()) (t <= t0 ? setup.pre_periods : setup.post_periods).push_back(t);
  if (setup.pre_periods.empty() || setup.post_periods.empty())
    throw Error(Errc::InvalidPeriodSplit,
                "T0 = " + std::to_string(t0) + " must leave at least one pre and one post period");
  return setup;
}

namespace {

double log_q(const PanelDataset& panel, const std::string& group, int t, std::size_t k) {
  return std::log(panel.cell(group, t)[k]);
}

double post_mean_log(const PanelDataset& panel, const SyntheticSetup& s, const std::string& group,
                     std::size_t k) {
  double sum = 0.0;
  for (int t : s.post_periods) sum += log_q(panel, group, t, k);
  return sum / static_cast<double>(s.post_periods.size());
}

QuantityVector exp_vector(const std::vector<double>& logs, const Labels& labels) {
  std::vector<double> out(logs.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::exp(logs[k]);
  return QuantityVector(std::move(out), labels);
}

}  // namespace

SimplexQpSolution solve_unit_weights(const PanelDataset& panel, const SyntheticSetup& s,
                                     const SimplexQpOptions& options) {
  const std::size_t p = panel.num_categories();
  std::vector<std::vector<double>> columns;
  for (const auto& j : s.controls) {
    std::vector<double> col;
    for (int t : s.pre_periods)
      for (std::size_t k = 0; k < p; ++k) col.push_back(log_q(panel, j, t, k));
    columns.push_back(std::move(col));
  }
  std::vector<double> target;
  for (int t : s.pre_periods)
    for (std::size_t k = 0; k < p; ++k) target.push_back(log_q(panel, s.treated, t, k));
  return solve_simplex_least_squares(columns, target, options);
}

SimplexQpSolution solve_time_weights(const PanelDataset& panel, const SyntheticSetup& s,
                                     const SimplexQpOptions& options) {
  const std::size_t p = panel.num_categories();
  std::vector<std::vector<double>> columns;
  for (int t : s.pre_periods) {
    std::vector<double> col;
    for (const auto& j : s.controls)
      for (std::size_t k = 0; k < p; ++k) col.push_back(log_q(panel, j, t, k));
    columns.push_back(std::move(col));
  }
  std::vector<double> target;
  for (const auto& j : s.controls)
    for (std::size_t k = 0; k < p; ++k) target.push_back(post_mean_log(panel, s, j, k));
  return solve_simplex_least_squares(columns, target, options);
}

SyntheticResult synthetic_effects(const PanelDataset& panel, const SyntheticSetup& s,
                                  SimplexQpSolution omega, SimplexQpSolution lambda) {
  const std::size_t p = panel.num_categories();
  const Labels& labels = panel.labels();
  if (omega.weights.size() != s.controls.size() || lambda.weights.size() != s.pre_periods.size())
    throw Error(Errc::BadPanelShape, "weight vectors do not match the panel");
  std::vector<double> tr_pre(p, 0.0), tr_post(p), ctl_pre(p, 0.0), ctl_post(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < s.pre_periods.size(); ++i)
      tr_pre[k] += lambda.weights[i] * log_q(panel, s.treated, s.pre_periods[i], k);
    tr_post[k] = post_mean_log(panel, s, s.treated, k);
    for (std::size_t j = 0; j < s.controls.size(); ++j) {
      for (std::size_t i = 0; i < s.pre_periods.size(); ++i)
        ctl_pre[k] += omega.weights[j] * lambda.weights[i] * log_q(panel, s.controls[j], s.pre_periods[i], k);
      ctl_post[k] += omega.weights[j] * post_mean_log(panel, s, s.controls[j], k);
    }
  }
  QuantityVector q_tr_pre = exp_vector(tr_pre, labels);
  QuantityVector q_tr_post = exp_vector(tr_post, labels);
  QuantityVector q_ctl_pre = exp_vector(ctl_pre, labels);
  QuantityVector q_ctl_post = exp_vector(ctl_post, labels);

  std::vector<double> denominator(p), gtt(p), gtt_log(p);
  std::string bad;
  for (std::size_t k = 0; k < p; ++k) {
    denominator[k] = q_tr_pre[k] + q_ctl_post[k] - q_ctl_pre[k];
    if (!(denominator[k] > 0.0)) bad += (bad.empty() ? "" : ", ") + labels[k];
    gtt[k] = q_tr_post[k] / denominator[k] - 1.0;
    gtt_log[k] = std::expm1((tr_post[k] - tr_pre[k]) - (ctl_post[k] - ctl_pre[k]));
  }
  if (!bad.empty())
    throw Error(Errc::NonPositiveDenominator, "counterfactual quantity not positive for: " + bad);
  const double total_cf = std::accumulate(denominator.begin(), denominator.end(), 0.0);

  Composition pi_tr_pre = closure(q_tr_pre);
  Composition pi_tr_post = closure(q_tr_post);
  Composition pi_ctl_pre = closure(q_ctl_pre);
  Composition pi_ctl_post = closure(q_ctl_post);
  const Composition post_gap = comp_diff(pi_tr_post, pi_ctl_post);
  const Composition pre_gap = comp_diff(pi_tr_pre, pi_ctl_pre);
  Composition ctt = perturb(post_gap, pre_gap);
  Composition ctt_alt = comp_diff(post_gap, pre_gap);

  return SyntheticResult{s,
                         std::move(omega),
                         std::move(lambda),
                         std::move(q_tr_pre),
                         q_tr_post,
                         std::move(q_ctl_pre),
                         std::move(q_ctl_post),
                         denominator,
                         std::move(gtt),
                         q_tr_post.total() / total_cf - 1.0,
                         std::move(gtt_log),
                         std::move(pi_tr_pre),
                         std::move(pi_tr_post),
                         std::move(pi_ctl_pre),
                         std::move(pi_ctl_post),
                         std::move(ctt),
                         std::move(ctt_alt)};
}

SyntheticResult synthetic_effects(const PanelDataset& panel, int t0, const std::optional<std::string>& treated,
                                  const SimplexQpOptions& options) {
  const auto setup = synthetic_setup(panel, t0, treated);
  auto omega = solve_unit_weights(panel, setup, options);
  auto lambda = solve_time_weights(panel, setup, options);
  return synthetic_effects(panel, setup, std::move(omega), std::move(lambda));
}

}  // namespace codid
