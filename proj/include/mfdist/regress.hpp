#pragma once

// Least-squares and quantile-regression fits on exploration data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mfdist/errors.hpp"

namespace mfdist {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Regression design: an intercept column of ones followed by the features.
template <typename Scalar>
class DesignMatrix {
public:
  /// Takes a full design whose first column must be all ones.
  explicit DesignMatrix(Matrix<Scalar> z) : z_(std::move(z)) {
    if (z_.cols() < 1) throw std::invalid_argument("design needs an intercept column");
    for (Eigen::Index i = 0; i < z_.rows(); ++i)
      if (z_(i, 0) != Scalar(1)) throw std::invalid_argument("first design column must be ones");
  }

  /// Prepends the intercept to a feature block (rows = samples).
  template <typename Derived>
  static DesignMatrix with_intercept(const Eigen::MatrixBase<Derived>& features) {
    Matrix<Scalar> z(features.rows(), features.cols() + 1);
    z.col(0).setOnes();
    z.rightCols(features.cols()) = features;
    return DesignMatrix(std::move(z));
  }

  static DesignMatrix intercept_only(Eigen::Index rows) {
    return DesignMatrix(Matrix<Scalar>::Ones(rows, 1));
  }

  Eigen::Index rows() const noexcept { return z_.rows(); }
  Eigen::Index cols() const noexcept { return z_.cols(); }
  const Matrix<Scalar>& matrix() const noexcept { return z_; }

private:
  Matrix<Scalar> z_;
};

template <typename Scalar>
struct FitResult {
  Vector<Scalar> beta_hat;
  Vector<Scalar> residuals;  ///< y - Z beta_hat
  Scalar sigma2_hat;         ///< |residuals|^2 / (rows - cols)
  bool rank_ok;
};

namespace detail {

template <typename Scalar>
void check_shapes(const DesignMatrix<Scalar>& z, Eigen::Index y_size) {
  if (y_size != z.rows())
    throw std::invalid_argument("response length " + std::to_string(y_size) +
                                " does not match design rows " + std::to_string(z.rows()));
  if (z.rows() <= z.cols())
    throw InsufficientSamples("fit needs more rows (" + std::to_string(z.rows()) +
                              ") than design columns (" + std::to_string(z.cols()) + ")");
}

}  // namespace detail

/// Ordinary least squares through a thin SVD (QR-preconditioned Jacobi).
///
/// rank_ok is false when the smallest singular value falls below
/// rows * eps * largest; the returned beta is then the minimum-norm solution.
template <typename Scalar, typename Derived>
FitResult<Scalar> ols_fit(const DesignMatrix<Scalar>& z, const Eigen::MatrixBase<Derived>& y) {
  detail::check_shapes(z, y.size());
  Eigen::JacobiSVD<Matrix<Scalar>> svd(z.matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Scalar threshold =
      static_cast<Scalar>(z.rows()) * std::numeric_limits<Scalar>::epsilon() * sv(0);
  svd.setThreshold(static_cast<Scalar>(z.rows()) * std::numeric_limits<Scalar>::epsilon());

  FitResult<Scalar> fit;
  fit.rank_ok = sv(sv.size() - 1) > threshold;
  fit.beta_hat = svd.solve(y.template cast<Scalar>());
  fit.residuals = y.template cast<Scalar>() - z.matrix() * fit.beta_hat;
  fit.sigma2_hat = fit.residuals.squaredNorm() / static_cast<Scalar>(z.rows() - z.cols());
  return fit;
}

/// rho_tau(x) = x (tau - 1{x < 0}).
template <typename Scalar>
constexpr Scalar pinball_loss(Scalar x, Scalar tau) {
  return x * (tau - (x < 0 ? Scalar(1) : Scalar(0)));
}

template <typename Scalar>
struct QuantileFit {
  std::vector<Scalar> taus;  ///< strictly increasing levels in (0, 1)
  Matrix<Scalar> betas;      ///< column j holds the coefficients for taus[j]
};

struct QuantileSolverOptions {
  /// Iteration cap per level is max_iterations_per_row * rows + 1000.
  int max_iterations_per_row = 50;
};

namespace detail {

// Exact minimizer of sum_i rho_tau(y_i - z_i beta) by descent along the
// edges of the polyhedral objective (the Barrodale-Roberts scheme for the
// primal LP). A vertex is fixed by p rows with zero residual; each pass
// evaluates the 2p edge directions, picks the steepest descent edge, and
// line-searches exactly over its sorted kink points. The returned vertex is
// then moved along flat edges toward the lexicographically smallest beta, so
// the answer is unique and deterministic when the argmin is a face.
template <typename Scalar>
class PinballVertexSolver {
public:
  PinballVertexSolver(const Matrix<Scalar>& z, const Vector<Scalar>& y, int max_iter_per_row)
      : z_(z), y_(y), m_(z.rows()), p_(z.cols()),
        max_iter_(static_cast<long>(max_iter_per_row) * static_cast<long>(z.rows()) + 1000) {
    const Scalar ymax = y_.size() ? y_.cwiseAbs().maxCoeff() : Scalar(0);
    r_tol_ = Scalar(1e-11) * (Scalar(1) + ymax);
  }

  /// Picks p independent rows, preferring those listed first in `preferred`.
  void initial_basis(const std::vector<Eigen::Index>& preferred) {
    basis_.clear();
    Matrix<Scalar> rows(0, p_);
    auto try_add = [&](Eigen::Index i) {
      if (static_cast<Eigen::Index>(basis_.size()) == p_) return;
      if (std::find(basis_.begin(), basis_.end(), i) != basis_.end()) return;
      Matrix<Scalar> cand(rows.rows() + 1, p_);
      cand.topRows(rows.rows()) = rows;
      cand.row(rows.rows()) = z_.row(i);
      Eigen::FullPivLU<Matrix<Scalar>> lu(cand.transpose());
      lu.setThreshold(Scalar(1e-10));
      if (lu.rank() == cand.rows()) {
        rows = std::move(cand);
        basis_.push_back(i);
      }
    };
    for (Eigen::Index i : preferred) try_add(i);
    for (Eigen::Index i = 0; i < m_ && static_cast<Eigen::Index>(basis_.size()) < p_; ++i) try_add(i);
    if (static_cast<Eigen::Index>(basis_.size()) < p_)
      throw SolverFailure("quantile fit: design has deficient column rank");
  }

  void set_basis(std::vector<Eigen::Index> basis) { basis_ = std::move(basis); }
  const std::vector<Eigen::Index>& basis() const { return basis_; }

  Vector<Scalar> solve(Scalar tau) {
    tau_ = tau;
    long iter = 0;
    refresh();
    while (true) {
      if (++iter > max_iter_)
        throw SolverFailure("quantile fit did not converge within " + std::to_string(max_iter_) +
                            " pivots (tau = " + std::to_string(static_cast<double>(tau)) + ")");
      Edge e = steepest_edge(/*flat=*/false);
      if (e.k < 0) break;
      pivot(e);
    }
    // Slide along zero-slope edges toward the lexicographically smallest vertex.
    while (true) {
      if (++iter > max_iter_) break;
      Edge e = steepest_edge(/*flat=*/true);
      if (e.k < 0) break;
      pivot(e);
    }
    return beta_;
  }

private:
  struct Edge {
    int k = -1;
    int sign = 0;
    Scalar slope = 0;
  };

  void refresh() {
    Matrix<Scalar> zb(p_, p_);
    Vector<Scalar> yb(p_);
    for (Eigen::Index k = 0; k < p_; ++k) {
      zb.row(k) = z_.row(basis_[static_cast<std::size_t>(k)]);
      yb(k) = y_(basis_[static_cast<std::size_t>(k)]);
    }
    Eigen::PartialPivLU<Matrix<Scalar>> lu(zb);
    binv_ = lu.inverse();
    beta_ = binv_ * yb;
    h_ = z_ * binv_;
    r_ = y_ - z_ * beta_;
    in_basis_.assign(static_cast<std::size_t>(m_), false);
    for (Eigen::Index b : basis_) {
      in_basis_[static_cast<std::size_t>(b)] = true;
      r_(b) = 0;
    }
    if (!beta_.allFinite()) throw SolverFailure("quantile fit: singular vertex basis");
  }

  // Directional derivative of the objective along sign * h_k.
  Scalar edge_slope(Eigen::Index k, int sign) const {
    // Leaving basis row: its residual moves at rate -sign.
    Scalar slope = pinball_loss(-Scalar(sign), tau_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (in_basis_[static_cast<std::size_t>(i)]) continue;
      const Scalar rate = -Scalar(sign) * h_(i, k);
      if (rate == 0) continue;
      if (r_(i) > r_tol_)
        slope += tau_ * rate;
      else if (r_(i) < -r_tol_)
        slope += (tau_ - 1) * rate;
      else
        slope += pinball_loss(rate, tau_);
    }
    return slope;
  }

  bool lex_decreasing(Eigen::Index k, int sign) const {
    for (Eigen::Index j = 0; j < p_; ++j) {
      const Scalar c = Scalar(sign) * binv_(j, k);
      if (std::abs(c) > Scalar(1e-12) * (Scalar(1) + binv_.col(k).cwiseAbs().maxCoeff()))
        return c < 0;
    }
    return false;
  }

  Edge steepest_edge(bool flat) const {
    const Scalar tol = Scalar(1e-10) * static_cast<Scalar>(m_) *
                       std::max(Scalar(1), h_.cwiseAbs().maxCoeff());
    Edge best;
    for (Eigen::Index k = 0; k < p_; ++k) {
      for (int sign : {+1, -1}) {
        const Scalar s = edge_slope(k, sign);
        if (flat) {
          if (std::abs(s) <= tol && lex_decreasing(k, sign) && has_breakpoint(k, sign)) {
            return Edge{static_cast<int>(k), sign, s};
          }
        } else if (s < -tol && (best.k < 0 || s < best.slope)) {
          best = Edge{static_cast<int>(k), sign, s};
        }
      }
    }
    return best;
  }

  bool has_breakpoint(Eigen::Index k, int sign) const {
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (in_basis_[static_cast<std::size_t>(i)]) continue;
      const Scalar a = Scalar(sign) * h_(i, k);
      if (a != 0 && std::abs(r_(i)) > r_tol_ && r_(i) / a > 0) return true;
    }
    return false;
  }

  // Exact line search along the edge, then swap the entering row in.
  void pivot(const Edge& e) {
    struct Kink {
      Scalar step;
      Eigen::Index row;
      Scalar jump;
    };
    std::vector<Kink> kinks;
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (in_basis_[static_cast<std::size_t>(i)]) continue;
      const Scalar a = Scalar(e.sign) * h_(i, e.k);
      if (a == 0 || std::abs(r_(i)) <= r_tol_) continue;
      const Scalar step = r_(i) / a;
      if (step > 0) kinks.push_back({step, i, std::abs(a)});
    }
    std::sort(kinks.begin(), kinks.end(), [](const Kink& x, const Kink& y) {
      return x.step < y.step || (x.step == y.step && x.row < y.row);
    });
    Scalar slope = e.slope;
    for (const Kink& kink : kinks) {
      slope += kink.jump;
      // On flat edges any kink ends the face; on descent edges stop where the
      // slope turns nonnegative.
      if (slope >= 0 || e.slope >= 0) {
        basis_[static_cast<std::size_t>(e.k)] = kink.row;
        refresh();
        return;
      }
    }
    throw SolverFailure("quantile fit: objective unbounded along an edge");
  }

  const Matrix<Scalar>& z_;
  const Vector<Scalar>& y_;
  Eigen::Index m_, p_;
  long max_iter_;
  Scalar r_tol_ = 0;
  Scalar tau_ = 0;
  std::vector<Eigen::Index> basis_;
  std::vector<bool> in_basis_;
  Matrix<Scalar> binv_, h_;
  Vector<Scalar> beta_, r_;
};

}  // namespace detail

/// Pinball-loss regression at each level in `taus`.
///
/// Levels are solved in increasing order, each warm-started from the previous
/// vertex. When the argmin is not unique, the lexicographically smallest
/// optimal vertex is returned (the lower median for tau = 0.5 on an
/// intercept-only design with an even sample count).
template <typename Scalar, typename Derived>
QuantileFit<Scalar> quantile_fit(const DesignMatrix<Scalar>& z, const Eigen::MatrixBase<Derived>& y,
                                 std::span<const Scalar> taus, QuantileSolverOptions opts = {}) {
  detail::check_shapes(z, y.size());
  for (std::size_t j = 0; j < taus.size(); ++j) {
    if (!(taus[j] > 0 && taus[j] < 1)) throw std::domain_error("quantile levels must lie in (0, 1)");
    if (j > 0 && !(taus[j] > taus[j - 1]))
      throw std::invalid_argument("quantile levels must be strictly increasing");
  }
  const Vector<Scalar> yv = y.template cast<Scalar>();
  QuantileFit<Scalar> out;
  out.taus.assign(taus.begin(), taus.end());
  out.betas.resize(z.cols(), static_cast<Eigen::Index>(taus.size()));

  detail::PinballVertexSolver<Scalar> solver(z.matrix(), yv, opts.max_iterations_per_row);
  // Start from the rows closest to the least-squares fit.
  {
    const Vector<Scalar> resid = yv - z.matrix() * ols_fit(z, yv).beta_hat;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(z.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::abs(resid(a)) < std::abs(resid(b));
    });
    solver.initial_basis(order);
  }
  for (std::size_t j = 0; j < taus.size(); ++j)
    out.betas.col(static_cast<Eigen::Index>(j)) = solver.solve(taus[j]);
  return out;
}

template <typename Scalar, typename Derived>
QuantileFit<Scalar> quantile_fit(const DesignMatrix<Scalar>& z, const Eigen::MatrixBase<Derived>& y,
                                 const std::vector<Scalar>& taus, QuantileSolverOptions opts = {}) {
  return quantile_fit(z, y, std::span<const Scalar>(taus), opts);
}

/// Mean pinball loss of beta on (z, y).
template <typename Scalar, typename DerivedY, typename DerivedB>
Scalar mean_pinball_loss(const DesignMatrix<Scalar>& z, const Eigen::MatrixBase<DerivedY>& y,
                         const Eigen::MatrixBase<DerivedB>& beta, Scalar tau) {
  const Vector<Scalar> r = y.template cast<Scalar>() - z.matrix() * beta;
  Scalar total = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += pinball_loss(r(i), tau);
  return total / static_cast<Scalar>(r.size());
}

/// K equispaced levels j / (K + 1), j = 1..K.
inline std::vector<double> uniform_quantile_grid(int k) {
  std::vector<double> taus(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) taus[static_cast<std::size_t>(j - 1)] = double(j) / double(k + 1);
  return taus;
}

}  // namespace mfdist
