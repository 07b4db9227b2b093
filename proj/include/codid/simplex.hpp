#pragma once

// Aitchison geometry of the open probability simplex.
//
// Compositions form a (p-1)-dimensional real vector space under perturbation
// (a ⊕ b), powering (α ⊙ a) and their difference (a ⊖ b); the uniform
// composition is the zero element. The log-odds map against a baseline
// category is a linear isomorphism onto R^{p-1}, with softmax as inverse.
//
// All operations are pure and evaluated in log space with max-shifted
// softmax normalization, so inputs built from counts of order 1e7 or shares
// near the boundary do not overflow.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace codid {

using Labels = std::vector<std::string>;

/// Default labels "c1".."cp".
Labels default_labels(std::size_t p);

/// Strictly positive quantity per category for one (group, time) cell.
class QuantityVector {
 public:
  QuantityVector(std::vector<double> values, Labels labels);

  std::span<const double> values() const noexcept { return values_; }
  const Labels& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double total() const noexcept;

 private:
  std::vector<double> values_;
  Labels labels_;
};

/// A point in the open simplex; stored renormalized to sum exactly to one.
class Composition {
 public:
  /// Shares must lie in (0,1) and sum to 1 within 1e-9.
  Composition(std::vector<double> shares, Labels labels);

  static Composition uniform(Labels labels);

  /// softmax(log_weights); the normalizing constant is irrelevant.
  static Composition from_log_weights(std::span<const double> log_weights, Labels labels);

  std::span<const double> shares() const noexcept { return shares_; }
  const Labels& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return shares_.size(); }
  double operator[](std::size_t k) const { return shares_[k]; }

 private:
  Composition(std::vector<double> shares, Labels labels, bool /*trusted*/);

  std::vector<double> shares_;
  Labels labels_;
};

/// ℓ(π): log share ratios of every non-baseline category against the baseline,
/// in original category order.
class LogOdds {
 public:
  LogOdds(std::vector<double> values, std::size_t baseline, Labels labels);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t baseline() const noexcept { return baseline_; }
  const Labels& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }

  /// Category index of the k-th coordinate.
  std::size_t category_of(std::size_t coord) const noexcept {
    return coord < baseline_ ? coord : coord + 1;
  }

 private:
  std::vector<double> values_;
  std::size_t baseline_;
  Labels labels_;
};

LogOdds operator+(const LogOdds& a, const LogOdds& b);
LogOdds operator-(const LogOdds& a, const LogOdds& b);
LogOdds operator*(double alpha, const LogOdds& a);

Composition closure(const QuantityVector& q);

/// a ⊕ b
Composition perturb(const Composition& a, const Composition& b);

/// alpha ⊙ a
Composition power(double alpha, const Composition& a);

/// a ⊖ b = a ⊕ ((-1) ⊙ b)
Composition comp_diff(const Composition& a, const Composition& b);

/// Baseline is a 0-based category index.
LogOdds log_odds(const Composition& a, std::size_t baseline);
LogOdds log_odds(const Composition& a);

Composition inv_log_odds(const LogOdds& v);

/// Index of `label` in `labels`; throws BadBaseline if absent.
std::size_t baseline_index(const Labels& labels, const std::string& label);

void require_same_labels(const Labels& a, const Labels& b);

}  // namespace codid
