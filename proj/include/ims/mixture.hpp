#pragma once

// Pointwise algebra of the Maxwell-Stefan matrix A(c).
//
//   A(c)_ij = c_i c_j / Delta_ij              (i != j)
//   A(c)_ii = -sum_{k != i} c_i c_k / Delta_ik
//
// A(c) is symmetric, nonpositive, and its kernel is Span(1) whenever c > 0.
// All solves happen on the orthogonal complement of Span(1).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "ims/errors.hpp"

namespace ims {

template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Symmetric table of binary coefficients Delta_ij > 0 (i != j). The diagonal
/// is unused and stored as zero.
template <class Scalar = double>
class DiffusionTable {
 public:
  DiffusionTable() = default;

  explicit DiffusionTable(Mat<Scalar> delta) : delta_(std::move(delta)) {
    const auto n = delta_.rows();
    if (n != delta_.cols()) fail(ErrorCode::DimensionMismatch, "diffusion table must be square");
    if (n < 2) fail(ErrorCode::InvalidArgument, "at least two species are required");
    for (Eigen::Index i = 0; i < n; ++i) {
      delta_(i, i) = Scalar(0);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        if (!(delta_(i, j) > Scalar(0)) || !std::isfinite(static_cast<double>(delta_(i, j))))
          fail(ErrorCode::InvalidArgument, "Delta_ij must be positive and finite");
        if (delta_(i, j) != delta_(j, i))
          fail(ErrorCode::InvalidArgument, "Delta_ij must be symmetric");
      }
    }
    max_ = Scalar(0);
    min_ = delta_(0, 1);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) {
          max_ = std::max(max_, delta_(i, j));
          min_ = std::min(min_, delta_(i, j));
        }
  }

  static DiffusionTable uniform(int n_species, Scalar value) {
    Mat<Scalar> d = Mat<Scalar>::Constant(n_species, n_species, value);
    return DiffusionTable(std::move(d));
  }

  int n_species() const { return static_cast<int>(delta_.rows()); }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return delta_(i, j); }
  const Mat<Scalar>& matrix() const { return delta_; }
  Scalar max_off_diagonal() const { return max_; }
  Scalar min_off_diagonal() const { return min_; }

  template <class Other>
  DiffusionTable<Other> cast() const {
    return DiffusionTable<Other>(delta_.template cast<Other>());
  }

 private:
  Mat<Scalar> delta_;
  Scalar max_{0};
  Scalar min_{0};
};

template <class Scalar>
bool is_physical(const Vec<Scalar>& c) {
  return (c.array() >= Scalar(0)).all();
}

template <class Scalar>
bool is_strict(const Vec<Scalar>& c) {
  return (c.array() > Scalar(0)).all();
}

/// A(c) together with the concentrations it was assembled from.
template <class Scalar>
struct MsMatrix {
  Mat<Scalar> entries;
  Vec<Scalar> concentrations;

  Eigen::Index size() const { return entries.rows(); }
};

/// Off-diagonals are computed once per pair and mirrored, and the diagonal is
/// the negated sum of the computed off-diagonals, so A is exactly symmetric and
/// A*1 vanishes to rounding.
template <class Scalar>
MsMatrix<Scalar> build_ms_matrix(const Vec<Scalar>& c, const DiffusionTable<Scalar>& d) {
  const auto n = c.size();
  if (n != d.n_species())
    fail(ErrorCode::DimensionMismatch, "concentration vector and diffusion table disagree on N");
  if (!is_physical(c)) fail(ErrorCode::NonPositiveConcentration, "negative concentration");
  MsMatrix<Scalar> a{Mat<Scalar>::Zero(n, n), c};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar v = c(i) * c(j) / d(i, j);
      a.entries(i, j) = v;
      a.entries(j, i) = v;
    }
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar s = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) s += a.entries(i, j);
    a.entries(i, i) = -s;
  }
  return a;
}

/// <X, A X>.
template <class Scalar>
Scalar quadratic_form(const MsMatrix<Scalar>& a, const Vec<Scalar>& x) {
  if (x.size() != a.size()) fail(ErrorCode::DimensionMismatch, "vector length differs from N");
  return x.dot(a.entries * x);
}

/// -1/2 sum_ij (c_i c_j / Delta_ij) (X_i - X_j)^2, the pair-sum form of <X, A X>.
template <class Scalar>
Scalar pair_sum_form(const Vec<Scalar>& c, const DiffusionTable<Scalar>& d, const Vec<Scalar>& x) {
  if (x.size() != c.size() || c.size() != d.n_species())
    fail(ErrorCode::DimensionMismatch, "vector length differs from N");
  Scalar s = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      if (i == j) continue;
      const Scalar diff = x(i) - x(j);
      s += c(i) * c(j) / d(i, j) * diff * diff;
    }
  return -s / 2;
}

/// lambda_A = 1 / max Delta_ij,  mu_A = 2 C / min Delta_ij with C = sqrt(N) the
/// sup-to-Euclidean norm equivalence constant in R^N.
template <class Scalar>
struct GapConstants {
  Scalar lambda_A;
  Scalar mu_A;
  Scalar norm_equiv_C;
};

template <class Scalar>
GapConstants<Scalar> gap_constants(const DiffusionTable<Scalar>& d) {
  using std::sqrt;
  const Scalar c = sqrt(static_cast<Scalar>(d.n_species()));
  return {Scalar(1) / d.max_off_diagonal(), Scalar(2) * c / d.min_off_diagonal(), c};
}

template <class Scalar>
struct InequalityCheck {
  Scalar lhs;
  Scalar rhs;
  bool holds;
};

namespace detail {
template <class Scalar>
bool leq_with_slack(Scalar lhs, Scalar rhs, Scalar slack = Scalar(1e-12)) {
  using std::abs;
  const Scalar scale = std::max({Scalar(1), abs(lhs), abs(rhs)});
  return lhs <= rhs + slack * scale;
}
}  // namespace detail

/// <X, A X> <= -lambda_A (min c)^2 [ |X|^2 - <X,1>^2 ].
/// Only meaningful for X orthogonal to 1; for other X the bracket is negative
/// and the statement degenerates.
template <class Scalar>
InequalityCheck<Scalar> check_spectral_gap(const Vec<Scalar>& c, const DiffusionTable<Scalar>& d,
                                           const Vec<Scalar>& x) {
  const auto a = build_ms_matrix(c, d);
  const auto k = gap_constants(d);
  const Scalar lhs = quadratic_form(a, x);
  const Scalar ones = x.sum();
  const Scalar cmin = c.minCoeff();
  const Scalar rhs = -k.lambda_A * cmin * cmin * (x.squaredNorm() - ones * ones);
  return {lhs, rhs, detail::leq_with_slack(lhs, rhs)};
}

/// |A X| <= mu_A <c,1>^2 |X|.
template <class Scalar>
InequalityCheck<Scalar> check_operator_bound(const Vec<Scalar>& c, const DiffusionTable<Scalar>& d,
                                             const Vec<Scalar>& x) {
  const auto a = build_ms_matrix(c, d);
  const auto k = gap_constants(d);
  const Scalar total = c.sum();
  const Scalar lhs = (a.entries * x).norm();
  const Scalar rhs = k.mu_A * total * total * x.norm();
  return {lhs, rhs, detail::leq_with_slack(lhs, rhs)};
}

/// X - (<X,1>/N) 1.
template <class Scalar>
Vec<Scalar> project_orth_ones(const Vec<Scalar>& x) {
  if (x.size() == 0) return x;
  return (x.array() - x.mean()).matrix();
}

/// Factorization of the constrained system [A; 1^T] X = [b; 0], reusable for
/// many right-hand sides at one point. Householder QR of the (N+1) x N stack.
template <class Scalar>
class PseudoInverse {
 public:
  PseudoInverse() = default;

  explicit PseudoInverse(const MsMatrix<Scalar>& a) { factor(a); }

  void factor(const MsMatrix<Scalar>& a) {
    if (!is_strict(a.concentrations))
      fail(ErrorCode::SingularBeyondKernel, "zero concentration enlarges the kernel of A(c)");
    const auto n = a.size();
    stacked_.resize(n + 1, n);
    stacked_.topRows(n) = a.entries;
    stacked_.row(n).setOnes();
    qr_.compute(stacked_);
    n_ = n;
  }

  Eigen::Index size() const { return n_; }

  /// Solves for each column of `rhs` (assumed orthogonal to 1).
  template <class Derived>
  Mat<Scalar> solve_block(const Eigen::MatrixBase<Derived>& rhs) const {
    Mat<Scalar> b(n_ + 1, rhs.cols());
    b.topRows(n_) = rhs;
    b.row(n_).setZero();
    return qr_.solve(b);
  }

  Vec<Scalar> solve(const Vec<Scalar>& rhs) const { return solve_block(rhs); }

  /// Explicit N x N matrix G with G b = pseudo-solve(b) for b orthogonal to 1
  /// and G 1 = 0.
  Mat<Scalar> matrix() const {
    Mat<Scalar> p = Mat<Scalar>::Identity(n_, n_);
    p.array() -= Scalar(1) / static_cast<Scalar>(n_);
    return solve_block(p);
  }

 private:
  Mat<Scalar> stacked_;
  Eigen::HouseholderQR<Mat<Scalar>> qr_;
  Eigen::Index n_{0};
};

/// The unique X with A X = rhs and <X,1> = 0.
template <class Scalar>
Vec<Scalar> pseudo_solve(const MsMatrix<Scalar>& a, const Vec<Scalar>& rhs, Scalar tol) {
  using std::abs;
  if (rhs.size() != a.size()) fail(ErrorCode::DimensionMismatch, "rhs length differs from N");
  if (!is_strict(a.concentrations))
    fail(ErrorCode::SingularBeyondKernel, "zero concentration enlarges the kernel of A(c)");
  const Scalar rn = rhs.norm();
  if (rn == Scalar(0)) return Vec<Scalar>::Zero(rhs.size());
  if (abs(rhs.sum()) > tol * rn)
    fail(ErrorCode::RhsNotOrthogonal, "rhs has a component along Span(1)");
  return PseudoInverse<Scalar>(a).solve(rhs);
}

/// Both bounds on the pseudoinverse for U orthogonal to 1:
///   |A^{-1} U|      <= |U| / (lambda_A (min c)^2)
///   <A^{-1} U, U>   <= -lambda_A (min c)^2 / (mu_A^2 <c,1>^4) |U|^2
template <class Scalar>
struct PseudoInverseBounds {
  InequalityCheck<Scalar> norm_bound;
  InequalityCheck<Scalar> coercivity;
  bool holds() const { return norm_bound.holds && coercivity.holds; }
};

template <class Scalar>
PseudoInverseBounds<Scalar> check_pseudo_inverse_bounds(const Vec<Scalar>& c,
                                                        const DiffusionTable<Scalar>& d,
                                                        const Vec<Scalar>& u, Scalar tol = Scalar(1e-10)) {
  const auto a = build_ms_matrix(c, d);
  const auto k = gap_constants(d);
  const Vec<Scalar> x = pseudo_solve(a, u, tol);
  const Scalar cmin = c.minCoeff();
  const Scalar total = c.sum();
  const Scalar gap = k.lambda_A * cmin * cmin;
  PseudoInverseBounds<Scalar> out;
  out.norm_bound.lhs = x.norm();
  out.norm_bound.rhs = u.norm() / gap;
  out.norm_bound.holds = detail::leq_with_slack(out.norm_bound.lhs, out.norm_bound.rhs);
  const Scalar t2 = total * total;
  out.coercivity.lhs = x.dot(u);
  out.coercivity.rhs = -gap / (k.mu_A * k.mu_A * t2 * t2) * u.squaredNorm();
  out.coercivity.holds = detail::leq_with_slack(out.coercivity.lhs, out.coercivity.rhs);
  return out;
}

}  // namespace ims
