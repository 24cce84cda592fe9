#pragma once

// One-dimensional empirical measures and the exact distances between them.
//
// A measure is a sorted list of atoms with positive weights summing to one.
// Every distance below is evaluated in closed form on the merged breakpoint
// grid of the two step-function CDFs; nothing is sampled or discretized.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mfdist/errors.hpp"

namespace mfdist {

template <typename Scalar>
class EmpiricalMeasure {
public:
  using value_type = Scalar;

  EmpiricalMeasure() = default;

  /// Uniform weights 1/N; duplicates are kept as repeated atoms.
  explicit EmpiricalMeasure(std::vector<Scalar> samples) : atoms_(std::move(samples)) {
    if (atoms_.empty()) throw InsufficientSamples("empirical measure needs at least one atom");
    std::sort(atoms_.begin(), atoms_.end());
    const Scalar w = Scalar(1) / static_cast<Scalar>(atoms_.size());
    weights_.assign(atoms_.size(), w);
    build_cumulative(/*uniform=*/true);
  }

  template <typename Derived>
  static EmpiricalMeasure from_samples(const Eigen::DenseBase<Derived>& samples) {
    return EmpiricalMeasure(std::vector<Scalar>(samples.derived().data(),
                                                samples.derived().data() + samples.size()));
  }

  /// Weighted atoms. Weights must be positive; they are renormalized to sum to one.
  EmpiricalMeasure(std::vector<Scalar> atoms, std::vector<Scalar> weights) {
    if (atoms.empty()) throw InsufficientSamples("empirical measure needs at least one atom");
    if (atoms.size() != weights.size())
      throw std::invalid_argument("atom and weight counts differ");
    Scalar total = 0;
    for (Scalar w : weights) {
      if (!(w > 0) || !std::isfinite(static_cast<double>(w)))
        throw std::invalid_argument("weights must be positive and finite");
      total += w;
    }
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return atoms[i] < atoms[j]; });
    atoms_.reserve(atoms.size());
    weights_.reserve(atoms.size());
    for (std::size_t i : order) {
      atoms_.push_back(atoms[i]);
      weights_.push_back(weights[i] / total);
    }
    build_cumulative(/*uniform=*/false);
  }

  std::size_t size() const noexcept { return atoms_.size(); }
  std::span<const Scalar> atoms() const noexcept { return atoms_; }
  std::span<const Scalar> weights() const noexcept { return weights_; }
  /// cumulative()[i] = total weight of atoms 0..i; the last entry is exactly 1.
  std::span<const Scalar> cumulative() const noexcept { return cumulative_; }

  Scalar min() const { return atoms_.front(); }
  Scalar max() const { return atoms_.back(); }

  /// Copy with equal atoms merged into one weighted atom.
  EmpiricalMeasure merged() const {
    std::vector<Scalar> a, w;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!a.empty() && a.back() == atoms_[i]) {
        w.back() += weights_[i];
      } else {
        a.push_back(atoms_[i]);
        w.push_back(weights_[i]);
      }
    }
    return EmpiricalMeasure(std::move(a), std::move(w));
  }

private:
  void build_cumulative(bool uniform) {
    const std::size_t n = atoms_.size();
    cumulative_.resize(n);
    if (uniform) {
      // i/N is exact to one rounding, no drift from repeated summation.
      for (std::size_t i = 0; i < n; ++i)
        cumulative_[i] = static_cast<Scalar>(i + 1) / static_cast<Scalar>(n);
    } else {
      Scalar acc = 0;
      for (std::size_t i = 0; i < n; ++i) cumulative_[i] = (acc += weights_[i]);
    }
    cumulative_.back() = Scalar(1);
  }

  std::vector<Scalar> atoms_;
  std::vector<Scalar> weights_;
  std::vector<Scalar> cumulative_;
};

using Measure = EmpiricalMeasure<double>;

/// Right-continuous CDF: total weight of atoms <= x.
template <typename Scalar>
Scalar cdf_at(const EmpiricalMeasure<Scalar>& m, Scalar x) {
  const auto atoms = m.atoms();
  const auto it = std::upper_bound(atoms.begin(), atoms.end(), x);
  if (it == atoms.begin()) return Scalar(0);
  return m.cumulative()[static_cast<std::size_t>(it - atoms.begin()) - 1];
}

/// Generalized inverse inf{x : F(x) >= t} for t in (0, 1].
///
/// Cumulative weights are compared with a 1e-12 slack so that t = k/N lands
/// on atom k rather than k+1 when k/N is not representable.
template <typename Scalar>
Scalar quantile(const EmpiricalMeasure<Scalar>& m, Scalar t) {
  if (!(t > 0) || t > 1) throw std::domain_error("quantile level must lie in (0, 1]");
  const auto cum = m.cumulative();
  const Scalar target = t - Scalar(1e-12);
  const auto it = std::lower_bound(cum.begin(), cum.end(), target);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), m.size() - 1);
  return m.atoms()[idx];
}

/// Inverse-transform draw: feeding u ~ Unif(0,1] reproduces m in law.
template <typename Scalar>
Scalar sample_inverse_transform(const EmpiricalMeasure<Scalar>& m, Scalar u) {
  return quantile(m, u);
}

namespace detail {

// Walks the merged breakpoints of two measures in increasing order and calls
// visit(x, Fa(x), Fb(x), next_x) where F values are right limits at x and
// next_x is the following breakpoint (or x itself at the end).
template <typename Scalar, typename Visit>
void sweep_breakpoints(const EmpiricalMeasure<Scalar>& a, const EmpiricalMeasure<Scalar>& b,
                       Visit&& visit) {
  const auto xa = a.atoms(), xb = b.atoms();
  const auto ca = a.cumulative(), cb = b.cumulative();
  std::size_t i = 0, j = 0;
  Scalar fa = 0, fb = 0;
  while (i < xa.size() || j < xb.size()) {
    Scalar x;
    if (j == xb.size() || (i < xa.size() && xa[i] <= xb[j]))
      x = xa[i];
    else
      x = xb[j];
    while (i < xa.size() && xa[i] == x) fa = ca[i++];
    while (j < xb.size() && xb[j] == x) fb = cb[j++];
    Scalar next = x;
    if (i < xa.size() && j < xb.size())
      next = std::min(xa[i], xb[j]);
    else if (i < xa.size())
      next = xa[i];
    else if (j < xb.size())
      next = xb[j];
    visit(x, fa, fb, next);
  }
}

}  // namespace detail

/// Exact W1 = integral of |Fa - Fb| over the merged breakpoint grid.
template <typename Scalar>
Scalar wasserstein1(const EmpiricalMeasure<Scalar>& a, const EmpiricalMeasure<Scalar>& b) {
  Scalar total = 0;
  detail::sweep_breakpoints(a, b, [&](Scalar x, Scalar fa, Scalar fb, Scalar next) {
    total += std::abs(fa - fb) * (next - x);
  });
  return total;
}

/// sup_x |Fa(x) - Fb(x)|. Left limits at a breakpoint equal the right limits
/// at the previous one, so checking right limits covers both sides.
template <typename Scalar>
Scalar kolmogorov(const EmpiricalMeasure<Scalar>& a, const EmpiricalMeasure<Scalar>& b) {
  Scalar sup = 0;
  detail::sweep_breakpoints(a, b, [&](Scalar, Scalar fa, Scalar fb, Scalar) {
    sup = std::max(sup, std::abs(fa - fb));
  });
  return sup;
}

template <typename Scalar>
struct JFunctionals {
  Scalar j0;  ///< integral of F(1-F)
  Scalar j1;  ///< integral of sqrt(F(1-F))
};

/// Both J integrals, exact for the step CDF (constant between atoms).
template <typename Scalar>
JFunctionals<Scalar> j_functionals(const EmpiricalMeasure<Scalar>& m) {
  const auto x = m.atoms();
  const auto cum = m.cumulative();
  JFunctionals<Scalar> out{0, 0};
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const Scalar gap = x[i + 1] - x[i];
    if (gap == 0) continue;
    const Scalar p = std::max(Scalar(0), cum[i] * (Scalar(1) - cum[i]));
    out.j0 += gap * p;
    out.j1 += gap * std::sqrt(p);
  }
  return out;
}

/// Sample moments of a measure.
///
/// variance is unbiased (reliability-weight correction 1/(1 - sum w^2), which
/// is N/(N-1) for uniform weights). skewness m3/m2^1.5 and kurtosis m4/m2^2 use
/// biased central moments; kurtosis is non-excess, so a normal sample gives 3.
/// skewness needs 3 atoms and kurtosis 4; below that they are left empty.
template <typename Scalar>
struct MomentSummary {
  Scalar mean;
  Scalar variance;
  std::optional<Scalar> skewness;
  std::optional<Scalar> kurtosis;
};

template <typename Scalar>
MomentSummary<Scalar> moment_summary(const EmpiricalMeasure<Scalar>& m) {
  if (m.size() < 2) throw InsufficientSamples("moment summary needs at least 2 atoms");
  const auto x = m.atoms();
  const auto w = m.weights();
  Scalar mean = 0, sum_w2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean += w[i] * x[i];
    sum_w2 += w[i] * w[i];
  }
  Scalar m2 = 0, m3 = 0, m4 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Scalar d = x[i] - mean;
    const Scalar d2 = d * d;
    m2 += w[i] * d2;
    m3 += w[i] * d2 * d;
    m4 += w[i] * d2 * d2;
  }
  MomentSummary<Scalar> s{mean, m2 / (Scalar(1) - sum_w2), std::nullopt, std::nullopt};
  // A point mass has no defined shape; report the degenerate limits 0 and 1.
  if (m.size() >= 3) s.skewness = m2 > 0 ? m3 / std::pow(m2, Scalar(1.5)) : Scalar(0);
  if (m.size() >= 4) s.kurtosis = m2 > 0 ? m4 / (m2 * m2) : Scalar(1);
  return s;
}

}  // namespace mfdist
