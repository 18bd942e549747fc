#pragma once

// Orthogonal reformulation of the flux-incompressible Maxwell-Stefan system.
//
// The per-species velocity splits as u = u_bar 1 + V_U with
//   grad c = A(c) U,           U ⟂ 1 pointwise,
//   V_U    = U - <c,U>/<c,1> 1 (so <c, V_U> = 0),
//   div u_bar = 0.
// For c = c_bar + eps c~ the fluctuation obeys
//   d_t c~ + div( c V_U~ ) + div( c~ u_bar ) = 0,   grad c~ = A(c) U~,
// which is the perturbed mass equation once c_bar is constant and u_bar is
// solenoidal.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "ims/errors.hpp"
#include "ims/grid.hpp"
#include "ims/mixture.hpp"

namespace ims {

template <class Scalar>
struct OrthogonalState {
  SpeciesField<Scalar> c;
  SpeciesVelocityField<Scalar> U;
  VectorField<Scalar> u_bar;
  Scalar C0{0};
};

namespace detail {

template <class Scalar>
Scalar max_abs(std::span<const Scalar> f) {
  Scalar m = 0;
  for (auto v : f) m = std::max(m, std::abs(v));
  return m;
}

/// Rounding floor for a spectral derivative of a field of magnitude `scale`.
template <class Scalar>
Scalar derivative_noise(const TorusGrid& g, Scalar scale) {
  return Scalar(100) * std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(g.points_per_axis()) * scale;
}

/// Rejects gradients whose species sum drifted beyond 1e-8 of their size.
template <class Scalar>
void require_gradient_orthogonal(const SpeciesVelocityField<Scalar>& grad, Scalar field_scale, const TorusGrid& g) {
  const int n = grad.n_species();
  const int dim = grad.dim();
  Scalar gmax = 0;
  Scalar smax = 0;
  for (int a = 0; a < dim; ++a)
    for (std::size_t p = 0; p < grad.points(); ++p) {
      Scalar s = 0, sq = 0;
      for (int i = 0; i < n; ++i) {
        const Scalar v = grad(i, a, p);
        s += v;
        sq += v * v;
      }
      gmax = std::max(gmax, std::sqrt(sq));
      smax = std::max(smax, std::abs(s));
    }
  if (smax > Scalar(1e-8) * gmax + derivative_noise(g, field_scale))
    fail(ErrorCode::GradientNotOrthogonal, "species gradients do not sum to zero");
}

template <class Scalar>
void concentration_at(const SpeciesField<Scalar>& c, std::size_t p, Vec<Scalar>& out) {
  const int n = c.n_species();
  out.resize(n);
  for (int i = 0; i < n; ++i) out(i) = c(static_cast<std::size_t>(i), p);
}

/// Pointwise U = A(c)^{-1} grad on 1^⟂, one constrained solve per grid point
/// covering all spatial directions. The gradient is projected onto 1^⟂ first;
/// callers check that the discarded part is rounding only.
template <class Scalar>
SpeciesVelocityField<Scalar> pointwise_pseudo_solve(const SpeciesField<Scalar>& c,
                                                    const DiffusionTable<Scalar>& d,
                                                    const SpeciesVelocityField<Scalar>& grad,
                                                    const TorusGrid& g) {
  const int n = c.n_species();
  const int dim = grad.dim();
  SpeciesVelocityField<Scalar> u(n, g);
  Vec<Scalar> cp;
  Mat<Scalar> rhs(n, dim);
  PseudoInverse<Scalar> pinv;
  for (std::size_t p = 0; p < g.size(); ++p) {
    concentration_at(c, p, cp);
    if (!is_strict(cp)) fail(ErrorCode::NonPositiveConcentration, "concentration must be positive");
    bool zero = true;
    for (int a = 0; a < dim; ++a) {
      Scalar mean = 0;
      for (int i = 0; i < n; ++i) mean += grad(i, a, p);
      mean /= static_cast<Scalar>(n);
      for (int i = 0; i < n; ++i) {
        rhs(i, a) = grad(i, a, p) - mean;
        if (rhs(i, a) != Scalar(0)) zero = false;
      }
    }
    if (zero) continue;
    pinv.factor(build_ms_matrix(cp, d));
    const Mat<Scalar> x = pinv.solve_block(rhs);
    for (int a = 0; a < dim; ++a)
      for (int i = 0; i < n; ++i) u(i, a, p) = x(i, a);
  }
  return u;
}

template <class Scalar>
SpeciesVelocityField<Scalar> species_gradient(const Spectral<Scalar>& sp, const SpeciesField<Scalar>& f) {
  const int n = f.n_species();
  const int dim = sp.grid().dim();
  SpeciesVelocityField<Scalar> grad(n, sp.grid());
  for (int i = 0; i < n; ++i) sp.gradient_into(f[static_cast<std::size_t>(i)], grad, static_cast<std::size_t>(i * dim));
  return grad;
}

}  // namespace detail

/// U solving A(c) U = grad c with U ⟂ 1 at every point and direction.
template <class Scalar>
SpeciesVelocityField<Scalar> compute_orthogonal_velocity(const Spectral<Scalar>& sp, const SpeciesField<Scalar>& c,
                                                         const DiffusionTable<Scalar>& d) {
  if (c.n_species() != d.n_species()) fail(ErrorCode::DimensionMismatch, "species count differs from table");
  for (auto v : c.data())
    if (!(v > Scalar(0))) fail(ErrorCode::NonPositiveConcentration, "concentration must be positive");
  const auto grad = detail::species_gradient(sp, c);
  detail::require_gradient_orthogonal(grad, c.max_abs(), sp.grid());
  return detail::pointwise_pseudo_solve(c, d, grad, sp.grid());
}

/// V_U = U - <c,U>/<c,1> 1, using the pointwise total concentration.
template <class Scalar>
SpeciesVelocityField<Scalar> equimolar_velocity(const SpeciesField<Scalar>& c, const SpeciesVelocityField<Scalar>& U) {
  const int n = U.n_species();
  const int dim = U.dim();
  if (c.n_species() != n || c.points() != U.points()) fail(ErrorCode::DimensionMismatch, "field shapes differ");
  SpeciesVelocityField<Scalar> v = U;
  for (std::size_t p = 0; p < U.points(); ++p) {
    Scalar total = 0;
    for (int i = 0; i < n; ++i) total += c(static_cast<std::size_t>(i), p);
    for (int a = 0; a < dim; ++a) {
      Scalar cu = 0;
      for (int i = 0; i < n; ++i) cu += c(static_cast<std::size_t>(i), p) * U(i, a, p);
      const Scalar shift = cu / total;
      for (int i = 0; i < n; ++i) v(i, a, p) -= shift;
    }
  }
  return v;
}

/// u_i = u_bar + (V_U)_i.
template <class Scalar>
SpeciesVelocityField<Scalar> reconstruct_full_velocity(const OrthogonalState<Scalar>& state) {
  auto u = equimolar_velocity(state.c, state.U);
  const int dim = u.dim();
  for (int i = 0; i < u.n_species(); ++i)
    for (int a = 0; a < dim; ++a)
      for (std::size_t p = 0; p < u.points(); ++p) u(i, a, p) += state.u_bar(static_cast<std::size_t>(a), p);
  return u;
}

/// Inverse of the reconstruction: U = u - (<u,1>/N) 1 and the molar average
/// velocity u_bar = <c,u>/<c,1>.
template <class Scalar>
std::pair<SpeciesVelocityField<Scalar>, VectorField<Scalar>> split_velocity(const SpeciesField<Scalar>& c,
                                                                           const SpeciesVelocityField<Scalar>& u,
                                                                           const TorusGrid& g) {
  const int n = u.n_species();
  const int dim = u.dim();
  SpeciesVelocityField<Scalar> U = u;
  VectorField<Scalar> ubar(g);
  for (std::size_t p = 0; p < u.points(); ++p) {
    Scalar total = 0;
    for (int i = 0; i < n; ++i) total += c(static_cast<std::size_t>(i), p);
    for (int a = 0; a < dim; ++a) {
      Scalar mean = 0, cu = 0;
      for (int i = 0; i < n; ++i) {
        mean += u(i, a, p);
        cu += c(static_cast<std::size_t>(i), p) * u(i, a, p);
      }
      mean /= static_cast<Scalar>(n);
      for (int i = 0; i < n; ++i) U(i, a, p) -= mean;
      ubar(static_cast<std::size_t>(a), p) = cu / total;
    }
  }
  return {std::move(U), std::move(ubar)};
}

/// Checks the invariants of an OrthogonalState; throws on the first breach.
template <class Scalar>
void validate(const Spectral<Scalar>& sp, const OrthogonalState<Scalar>& s) {
  const int n = s.c.n_species();
  for (auto v : s.c.data())
    if (!(v > Scalar(0))) fail(ErrorCode::NonPositiveConcentration, "concentration must be positive");
  for (std::size_t p = 0; p < s.c.points(); ++p) {
    Scalar total = 0;
    for (int i = 0; i < n; ++i) total += s.c(static_cast<std::size_t>(i), p);
    if (std::abs(total - s.C0) > Scalar(1e-10) * std::abs(s.C0))
      fail(ErrorCode::MassCompatibilityViolated, "total concentration is not constant");
  }
  const Scalar uscale = std::max(Scalar(1), s.U.max_abs());
  for (int a = 0; a < s.U.dim(); ++a)
    for (std::size_t p = 0; p < s.U.points(); ++p) {
      Scalar sum = 0;
      for (int i = 0; i < n; ++i) sum += s.U(i, a, p);
      if (std::abs(sum) > Scalar(1e-12) * uscale) fail(ErrorCode::InvalidArgument, "U is not orthogonal to 1");
    }
  const auto div = sp.divergence(s.u_bar);
  if (detail::max_abs<Scalar>(div) > Scalar(1e-10)) fail(ErrorCode::InvalidArgument, "u_bar is not solenoidal");
}

/// Right-hand side of the perturbed mass equation,
///   d_t c~ = -[ div(c V_U~) + div(c~ u_bar) ],   c = c_bar + eps c~,
/// with the 2/3 rule applied to the flux before the divergence. The flux
/// c V_U~ sums to zero over species pointwise, hence so does the result.
template <class Scalar>
class OrthogonalSystem {
 public:
  OrthogonalSystem(const Spectral<Scalar>& sp, DiffusionTable<Scalar> table, Vec<Scalar> c_bar, Scalar eps,
                   VectorField<Scalar> u_bar)
      : sp_(&sp), table_(std::move(table)), c_bar_(std::move(c_bar)), eps_(eps), u_bar_(std::move(u_bar)) {
    if (c_bar_.size() != table_.n_species()) fail(ErrorCode::DimensionMismatch, "c_bar length differs from N");
    if (u_bar_.components() != static_cast<std::size_t>(sp.grid().dim()) || u_bar_.points() != sp.grid().size())
      fail(ErrorCode::DimensionMismatch, "u_bar does not live on the grid");
    has_flow_ = u_bar_.max_abs() > Scalar(0);
  }

  const Spectral<Scalar>& spectral() const { return *sp_; }
  const TorusGrid& grid() const { return sp_->grid(); }
  const DiffusionTable<Scalar>& table() const { return table_; }
  const Vec<Scalar>& c_bar() const { return c_bar_; }
  Scalar eps() const { return eps_; }
  const VectorField<Scalar>& u_bar() const { return u_bar_; }
  int n_species() const { return table_.n_species(); }
  Scalar C0() const { return c_bar_.sum(); }

  /// c = c_bar + eps c~ (no positivity check).
  SpeciesField<Scalar> concentrations(const SpeciesField<Scalar>& c_tilde) const {
    SpeciesField<Scalar> c = c_tilde;
    for (int i = 0; i < n_species(); ++i)
      for (auto& v : c[static_cast<std::size_t>(i)]) v = c_bar_(i) + eps_ * v;
    return c;
  }

  /// U~ = A(c)^{-1} grad c~ on 1^⟂.
  SpeciesVelocityField<Scalar> orthogonal_velocity(const SpeciesField<Scalar>& c_tilde) const {
    const auto c = concentrations(c_tilde);
    return orthogonal_velocity(c, c_tilde);
  }

  SpeciesVelocityField<Scalar> orthogonal_velocity(const SpeciesField<Scalar>& c,
                                                   const SpeciesField<Scalar>& c_tilde) const {
    const auto grad = detail::species_gradient(*sp_, c_tilde);
    detail::require_gradient_orthogonal(grad, c_tilde.max_abs(), grid());
    return detail::pointwise_pseudo_solve(c, table_, grad, grid());
  }

  SpeciesField<Scalar> rhs(const SpeciesField<Scalar>& c_tilde) const {
    const auto c = concentrations(c_tilde);
    const auto v = equimolar_velocity(c, orthogonal_velocity(c, c_tilde));
    return divergence_of_flux(c, v, c_tilde);
  }

  /// -div F(c V + c~ u_bar) per species, F the 2/3-rule mask.
  SpeciesField<Scalar> divergence_of_flux(const SpeciesField<Scalar>& c, const SpeciesVelocityField<Scalar>& v,
                                          const SpeciesField<Scalar>& advected) const {
    const int n = n_species();
    const int dim = grid().dim();
    SpeciesVelocityField<Scalar> flux(n, grid());
    for (int i = 0; i < n; ++i)
      for (int a = 0; a < dim; ++a)
        for (std::size_t p = 0; p < grid().size(); ++p) {
          Scalar j = c(static_cast<std::size_t>(i), p) * v(i, a, p);
          if (has_flow_) j += advected(static_cast<std::size_t>(i), p) * u_bar_(static_cast<std::size_t>(a), p);
          flux(i, a, p) = j;
        }
    SpeciesField<Scalar> out(n, grid());
    for (int i = 0; i < n; ++i) {
      auto dst = out[static_cast<std::size_t>(i)];
      sp_->divergence_into(flux, static_cast<std::size_t>(i * dim), true, dst);
      for (auto& x : dst) x = -x;
    }
    return out;
  }

 private:
  const Spectral<Scalar>* sp_;
  DiffusionTable<Scalar> table_;
  Vec<Scalar> c_bar_;
  Scalar eps_;
  VectorField<Scalar> u_bar_;
  bool has_flow_{false};
};

template <class Scalar>
SpeciesField<Scalar> rhs_orthogonal(const Spectral<Scalar>& sp, const SpeciesField<Scalar>& c_tilde,
                                    const DiffusionTable<Scalar>& d, const VectorField<Scalar>& u_bar, Scalar eps,
                                    const Vec<Scalar>& c_bar) {
  return OrthogonalSystem<Scalar>(sp, d, c_bar, eps, u_bar).rhs(c_tilde);
}

/// Diffusion operator with coefficients frozen at c:
///   K w = div F( c V_c(w) ),   V_c(w) = P_c G_c grad w,
/// where G_c is the pointwise pseudoinverse of A(c) and P_c the equimolar
/// projection Y -> Y - <c,Y>/<c,1> 1. K maps sum-zero fields to sum-zero,
/// mean-zero fields.
template <class Scalar>
class FrozenDiffusion {
 public:
  FrozenDiffusion(const Spectral<Scalar>& sp, const DiffusionTable<Scalar>& d, SpeciesField<Scalar> c)
      : sp_(&sp), c_(std::move(c)), n_(d.n_species()) {
    const auto& g = sp.grid();
    const std::size_t nn = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    pinv_.resize(g.size() * nn);
    total_.resize(g.size());
    Vec<Scalar> cp;
    PseudoInverse<Scalar> pinv;
    for (std::size_t p = 0; p < g.size(); ++p) {
      detail::concentration_at(c_, p, cp);
      if (!is_strict(cp)) fail(ErrorCode::NonPositiveConcentration, "concentration must be positive");
      pinv.factor(build_ms_matrix(cp, d));
      const Mat<Scalar> m = pinv.matrix();
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) pinv_[p * nn + static_cast<std::size_t>(i * n_ + j)] = m(i, j);
      total_[p] = cp.sum();
    }
  }

  const SpeciesField<Scalar>& concentrations() const { return c_; }

  /// V_c(w) for a sum-zero field w.
  SpeciesVelocityField<Scalar> velocity(const SpeciesField<Scalar>& w) const {
    const auto& g = sp_->grid();
    const int dim = g.dim();
    const auto grad = detail::species_gradient(*sp_, w);
    SpeciesVelocityField<Scalar> v(n_, g);
    const std::size_t nn = static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    std::vector<Scalar> y(static_cast<std::size_t>(n_));
    for (std::size_t p = 0; p < g.size(); ++p) {
      const Scalar* m = pinv_.data() + p * nn;
      for (int a = 0; a < dim; ++a) {
        Scalar cy = 0;
        for (int i = 0; i < n_; ++i) {
          Scalar s = 0;
          for (int j = 0; j < n_; ++j) s += m[i * n_ + j] * grad(j, a, p);
          y[static_cast<std::size_t>(i)] = s;
          cy += c_(static_cast<std::size_t>(i), p) * s;
        }
        const Scalar shift = cy / total_[p];
        for (int i = 0; i < n_; ++i) v(i, a, p) = y[static_cast<std::size_t>(i)] - shift;
      }
    }
    return v;
  }

  SpeciesField<Scalar> apply(const SpeciesField<Scalar>& w) const {
    const auto& g = sp_->grid();
    const int dim = g.dim();
    auto flux = velocity(w);
    for (int i = 0; i < n_; ++i)
      for (int a = 0; a < dim; ++a)
        for (std::size_t p = 0; p < g.size(); ++p) flux(i, a, p) *= c_(static_cast<std::size_t>(i), p);
    SpeciesField<Scalar> out(n_, g);
    for (int i = 0; i < n_; ++i)
      sp_->divergence_into(flux, static_cast<std::size_t>(i * dim), true, out[static_cast<std::size_t>(i)]);
    return out;
  }

 private:
  const Spectral<Scalar>* sp_;
  SpeciesField<Scalar> c_;
  int n_;
  std::vector<Scalar> pinv_;
  std::vector<Scalar> total_;
};

}  // namespace ims
