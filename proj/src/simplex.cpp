#include "codid/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "codid/error.hpp"

namespace codid {

namespace {

constexpr double kSumTolerance = 1e-9;

void require_size(std::size_t values, std::size_t labels) {
  if (values < 2) throw Error(Errc::InvalidComposition, "need at least two categories");
  if (values != labels)
    throw Error(Errc::LabelMismatch, std::to_string(values) + " values but " +
                                         std::to_string(labels) + " labels");
}

std::vector<double> logs_of(std::span<const double> x) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [](double v) { return std::log(v); });
  return out;
}

}  // namespace

Labels default_labels(std::size_t p) {
  Labels labels;
  labels.reserve(p);
  for (std::size_t k = 0; k < p; ++k) labels.push_back("c" + std::to_string(k + 1));
  return labels;
}

void require_same_labels(const Labels& a, const Labels& b) {
  if (a != b) throw Error(Errc::LabelMismatch, "category labels differ");
}

QuantityVector::QuantityVector(std::vector<double> values, Labels labels)
    : values_(std::move(values)), labels_(std::move(labels)) {
  require_size(values_.size(), labels_.size());
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k]))
      throw Error(Errc::NonFiniteInput, "quantity for '" + labels_[k] + "' is not finite");
    if (!(values_[k] > 0.0))
      throw Error(Errc::NonPositiveEntry, "quantity for '" + labels_[k] + "' is not positive");
  }
}

double QuantityVector::total() const noexcept {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

Composition::Composition(std::vector<double> shares, Labels labels)
    : shares_(std::move(shares)), labels_(std::move(labels)) {
  require_size(shares_.size(), labels_.size());
  double sum = 0.0;
  for (double s : shares_) {
    if (!std::isfinite(s)) throw Error(Errc::NonFiniteInput, "share is not finite");
    if (!(s > 0.0 && s < 1.0))
      throw Error(Errc::InvalidComposition, "share outside the open interval (0,1)");
    sum += s;
  }
  if (std::abs(sum - 1.0) > kSumTolerance)
    throw Error(Errc::InvalidComposition, "shares do not sum to one");
  // Values that already sum to one up to rounding are kept bit-for-bit.
  if (std::abs(sum - 1.0) > 4.0 * std::numeric_limits<double>::epsilon())
    for (double& s : shares_) s /= sum;
}

Composition::Composition(std::vector<double> shares, Labels labels, bool)
    : shares_(std::move(shares)), labels_(std::move(labels)) {}

Composition Composition::uniform(Labels labels) {
  const std::size_t p = labels.size();
  require_size(p, p);
  return Composition(std::vector<double>(p, 1.0 / static_cast<double>(p)), std::move(labels),
                     true);
}

Composition Composition::from_log_weights(std::span<const double> log_weights, Labels labels) {
  require_size(log_weights.size(), labels.size());
  double top = -INFINITY;
  for (double w : log_weights) {
    if (!std::isfinite(w)) throw Error(Errc::NonFiniteInput, "log weight is not finite");
    top = std::max(top, w);
  }
  std::vector<double> shares(log_weights.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    shares[k] = std::exp(log_weights[k] - top);
    sum += shares[k];
  }
  for (double& s : shares) {
    s /= sum;
    if (!(s > 0.0 && s < 1.0))
      throw Error(Errc::InvalidComposition, "share underflows the open simplex");
  }
  return Composition(std::move(shares), std::move(labels), true);
}

LogOdds::LogOdds(std::vector<double> values, std::size_t baseline, Labels labels)
    : values_(std::move(values)), baseline_(baseline), labels_(std::move(labels)) {
  if (labels_.size() < 2) throw Error(Errc::InvalidComposition, "need at least two categories");
  if (baseline_ >= labels_.size()) throw Error(Errc::BadBaseline, "baseline index out of range");
  if (values_.size() + 1 != labels_.size())
    throw Error(Errc::LabelMismatch, "log-odds vector must have p-1 entries");
}

namespace {

void require_compatible(const LogOdds& a, const LogOdds& b) {
  require_same_labels(a.labels(), b.labels());
  if (a.baseline() != b.baseline()) throw Error(Errc::BadBaseline, "baselines differ");
}

}  // namespace

LogOdds operator+(const LogOdds& a, const LogOdds& b) {
  require_compatible(a, b);
  std::vector<double> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[k] + b[k];
  return LogOdds(std::move(v), a.baseline(), a.labels());
}

LogOdds operator-(const LogOdds& a, const LogOdds& b) {
  require_compatible(a, b);
  std::vector<double> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = a[k] - b[k];
  return LogOdds(std::move(v), a.baseline(), a.labels());
}

LogOdds operator*(double alpha, const LogOdds& a) {
  std::vector<double> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = alpha * a[k];
  return LogOdds(std::move(v), a.baseline(), a.labels());
}

Composition closure(const QuantityVector& q) {
  const double total = q.total();
  std::vector<double> shares(q.size());
  for (std::size_t k = 0; k < shares.size(); ++k) shares[k] = q[k] / total;
  return Composition(std::move(shares), q.labels());
}

Composition perturb(const Composition& a, const Composition& b) {
  require_same_labels(a.labels(), b.labels());
  std::vector<double> w(a.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::log(a[k]) + std::log(b[k]);
  return Composition::from_log_weights(w, a.labels());
}

Composition power(double alpha, const Composition& a) {
  if (!std::isfinite(alpha)) throw Error(Errc::NonFiniteInput, "power exponent is not finite");
  std::vector<double> w = logs_of(a.shares());
  for (double& x : w) x *= alpha;
  return Composition::from_log_weights(w, a.labels());
}

Composition comp_diff(const Composition& a, const Composition& b) {
  require_same_labels(a.labels(), b.labels());
  std::vector<double> w(a.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::log(a[k]) - std::log(b[k]);
  return Composition::from_log_weights(w, a.labels());
}

LogOdds log_odds(const Composition& a, std::size_t baseline) {
  if (baseline >= a.size()) throw Error(Errc::BadBaseline, "baseline index out of range");
  const double base = std::log(a[baseline]);
  std::vector<double> v;
  v.reserve(a.size() - 1);
  for (std::size_t k = 0; k < a.size(); ++k)
    if (k != baseline) v.push_back(std::log(a[k]) - base);
  return LogOdds(std::move(v), baseline, a.labels());
}

LogOdds log_odds(const Composition& a) { return log_odds(a, a.size() - 1); }

Composition inv_log_odds(const LogOdds& v) {
  std::vector<double> w(v.labels().size(), 0.0);
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (!std::isfinite(v[c])) throw Error(Errc::NonFiniteInput, "log-odds entry is not finite");
    w[v.category_of(c)] = v[c];
  }
  return Composition::from_log_weights(w, v.labels());
}

std::size_t baseline_index(const Labels& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(Errc::BadBaseline, "unknown baseline category '" + label + "'");
  return static_cast<std::size_t>(it - labels.begin());
}

}  // namespace codid
