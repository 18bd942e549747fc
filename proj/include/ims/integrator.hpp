#pragma once

// Time stepping for the fluctuation c~.
//
// Explicit: classical RK4 on d_t c~ = rhs(c~).
// SemiImplicit: backward Euler with the diffusion operator frozen at
//   c^n = c_bar + eps c~^n and explicit transport by u_bar,
//     (I + dt K_n) c~^{n+1} = c~^n - dt div F(c~^n u_bar),
//   K_n w = div F( c^n V_n(w) ),
// solved with matrix-free BiCGSTAB. K_n is not symmetric unless c^n is
// uniform, and it maps the sum-zero, mean-zero subspace to itself.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ims/errors.hpp"
#include "ims/grid.hpp"
#include "ims/mixture.hpp"
#include "ims/orthogonal.hpp"
#include "ims/state.hpp"

namespace ims {

enum class Scheme { Explicit, SemiImplicit };

inline std::string_view to_string(Scheme s) { return s == Scheme::Explicit ? "explicit" : "semi-implicit"; }

template <class Scalar>
struct StepperConfig {
  Scheme scheme{Scheme::Explicit};
  Scalar dt{0};
  Scalar t_end{1};
  Scalar cfl_safety{1};
  Scalar linear_solver_tol{1e-10};
  int max_linear_iters{500};
};

/// Largest explicit step: cfl_safety dx^2 / (2 d D_max) with
/// D_max = 2 max Delta_ij / C0.
template <class Scalar>
Scalar cfl_limit(const TorusGrid& g, const DiffusionTable<Scalar>& d, Scalar C0, Scalar cfl_safety) {
  const Scalar dx = g.dx<Scalar>();
  const Scalar d_max = Scalar(2) * d.max_off_diagonal() / C0;
  return cfl_safety * dx * dx / (Scalar(2) * static_cast<Scalar>(g.dim()) * d_max);
}

template <class Scalar>
OrthogonalSystem<Scalar> make_system(const Spectral<Scalar>& sp, const DiffusionTable<Scalar>& d,
                                     const SimulationState<Scalar>& s) {
  return OrthogonalSystem<Scalar>(sp, d, s.c_bar, s.eps, s.u_bar);
}

namespace detail {

template <class Scalar>
void require_positive(const SimulationState<Scalar>& s) {
  if (!(min_concentration(s) > Scalar(0)))
    fail(ErrorCode::PositivityViolated, "c_bar + eps c~ lost positivity at t = " + std::to_string(double(s.t)));
}

// Runs f, reporting lost positivity inside a stage as PositivityViolated.
template <class F>
auto positivity_guard(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonPositiveConcentration)
      fail(ErrorCode::PositivityViolated, "intermediate stage lost positivity");
    throw;
  }
}

template <class Scalar>
Scalar dot(const std::vector<Scalar>& a, const std::vector<Scalar>& b) {
  Scalar s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

template <class Scalar>
void require_cfl(const OrthogonalSystem<Scalar>& sys, const StepperConfig<Scalar>& cfg, Scalar dt) {
  if (!(dt > Scalar(0))) fail(ErrorCode::InvalidArgument, "dt must be positive");
  if (cfg.scheme != Scheme::Explicit) return;
  const Scalar limit = cfl_limit(sys.grid(), sys.table(), sys.C0(), cfg.cfl_safety);
  if (dt > limit * (Scalar(1) + Scalar(1e-12)))
    fail(ErrorCode::CflViolated,
         "dt = " + std::to_string(double(dt)) + " exceeds the explicit limit " + std::to_string(double(limit)));
}

/// One RK4 step of size dt.
template <class Scalar>
SimulationState<Scalar> step_explicit(const OrthogonalSystem<Scalar>& sys, const SimulationState<Scalar>& s,
                                      const StepperConfig<Scalar>& cfg, Scalar dt) {
  require_cfl(sys, cfg, dt);
  return detail::positivity_guard([&] {
    const auto& c0 = s.c_tilde;
    const auto k1 = sys.rhs(c0);
    auto y = c0;
    y.axpy(dt / 2, k1);
    const auto k2 = sys.rhs(y);
    y = c0;
    y.axpy(dt / 2, k2);
    const auto k3 = sys.rhs(y);
    y = c0;
    y.axpy(dt, k3);
    const auto k4 = sys.rhs(y);
    SimulationState<Scalar> out = s;
    out.c_tilde.axpy(dt / 6, k1);
    out.c_tilde.axpy(dt / 3, k2);
    out.c_tilde.axpy(dt / 3, k3);
    out.c_tilde.axpy(dt / 6, k4);
    out.t = s.t + dt;
    detail::require_positive(out);
    return out;
  });
}

template <class Scalar>
SimulationState<Scalar> step_explicit(const OrthogonalSystem<Scalar>& sys, const SimulationState<Scalar>& s,
                                      const StepperConfig<Scalar>& cfg) {
  return step_explicit(sys, s, cfg, cfg.dt);
}

struct LinearSolveReport {
  int iterations{0};
  double relative_residual{0};
};

/// BiCGSTAB for (I + dt K) x = b with x0 = b.
template <class Scalar>
SpeciesField<Scalar> solve_shifted(const FrozenDiffusion<Scalar>& k, Scalar dt, const SpeciesField<Scalar>& b,
                                   Scalar tol, int max_iters, LinearSolveReport* report = nullptr) {
  using V = std::vector<Scalar>;
  SpeciesField<Scalar> x = b;
  SpeciesField<Scalar> tmp = b;
  auto apply = [&](const V& in, V& out) {
    tmp.data() = in;
    const auto kw = k.apply(tmp);
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + dt * kw.data()[i];
  };
  const V& bv = b.data();
  const Scalar bnorm = std::sqrt(detail::dot(bv, bv));
  if (report) *report = {};
  if (bnorm == Scalar(0)) return x;

  V& xv = x.data();
  V r, ax;
  apply(xv, ax);
  r.resize(bv.size());
  for (std::size_t i = 0; i < bv.size(); ++i) r[i] = bv[i] - ax[i];
  const V r0 = r;
  V p(bv.size(), Scalar(0)), v(bv.size(), Scalar(0)), sv(bv.size()), t;
  Scalar rho = 1, alpha = 1, omega = 1;
  Scalar rn = std::sqrt(detail::dot(r, r));
  int it = 0;
  while (rn > tol * bnorm) {
    if (it >= max_iters)
      fail(ErrorCode::LinearSolveFailed, "BiCGSTAB did not converge in " + std::to_string(max_iters) + " iterations");
    ++it;
    const Scalar rho_new = detail::dot(r0, r);
    if (rho_new == Scalar(0) || omega == Scalar(0)) fail(ErrorCode::LinearSolveFailed, "BiCGSTAB breakdown");
    const Scalar beta = (rho_new / rho) * (alpha / omega);
    rho = rho_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    apply(p, v);
    const Scalar r0v = detail::dot(r0, v);
    if (r0v == Scalar(0)) fail(ErrorCode::LinearSolveFailed, "BiCGSTAB breakdown");
    alpha = rho / r0v;
    for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = r[i] - alpha * v[i];
    const Scalar sn = std::sqrt(detail::dot(sv, sv));
    if (sn <= tol * bnorm) {
      for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += alpha * p[i];
      rn = sn;
      break;
    }
    apply(sv, t);
    const Scalar tt = detail::dot(t, t);
    omega = tt > Scalar(0) ? detail::dot(t, sv) / tt : Scalar(0);
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += alpha * p[i] + omega * sv[i];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = sv[i] - omega * t[i];
    rn = std::sqrt(detail::dot(r, r));
  }
  if (report) *report = {it, static_cast<double>(rn / bnorm)};
  return x;
}

/// One frozen-coefficient backward-Euler step of size dt.
template <class Scalar>
SimulationState<Scalar> step_semi_implicit(const OrthogonalSystem<Scalar>& sys, const SimulationState<Scalar>& s,
                                           const StepperConfig<Scalar>& cfg, Scalar dt,
                                           LinearSolveReport* report = nullptr) {
  if (!(dt > Scalar(0))) fail(ErrorCode::InvalidArgument, "dt must be positive");
  return detail::positivity_guard([&] {
    const auto c = sys.concentrations(s.c_tilde);
    FrozenDiffusion<Scalar> k(sys.spectral(), sys.table(), c);
    SpeciesField<Scalar> b = s.c_tilde;
    const SpeciesVelocityField<Scalar> no_diffusion(sys.n_species(), sys.grid());
    b.axpy(dt, sys.divergence_of_flux(c, no_diffusion, s.c_tilde));
    SimulationState<Scalar> out = s;
    out.c_tilde = solve_shifted(k, dt, b, cfg.linear_solver_tol, cfg.max_linear_iters, report);
    out.t = s.t + dt;
    detail::require_positive(out);
    return out;
  });
}

template <class Scalar>
SimulationState<Scalar> step_semi_implicit(const OrthogonalSystem<Scalar>& sys, const SimulationState<Scalar>& s,
                                           const StepperConfig<Scalar>& cfg) {
  return step_semi_implicit(sys, s, cfg, cfg.dt);
}

template <class Scalar>
SimulationState<Scalar> step(const OrthogonalSystem<Scalar>& sys, const SimulationState<Scalar>& s,
                             const StepperConfig<Scalar>& cfg, Scalar dt) {
  return cfg.scheme == Scheme::Explicit ? step_explicit(sys, s, cfg, dt) : step_semi_implicit(sys, s, cfg, dt);
}

template <class Scalar>
long step_count(Scalar t0, Scalar t_end, Scalar dt) {
  if (!(dt > Scalar(0))) fail(ErrorCode::InvalidArgument, "dt must be positive");
  if (t_end <= t0) return 0;
  return static_cast<long>(std::ceil((t_end - t0) / dt - Scalar(1e-9)));
}

/// Advances without monitoring to t_end with fixed steps of cfg.dt (the last
/// one shortened to land on t_end).
template <class Scalar>
SimulationState<Scalar> advance(const OrthogonalSystem<Scalar>& sys, SimulationState<Scalar> s,
                                const StepperConfig<Scalar>& cfg) {
  const Scalar t0 = s.t;
  const long n = step_count(t0, cfg.t_end, cfg.dt);
  for (long k = 0; k < n; ++k) {
    const Scalar next = k + 1 == n ? cfg.t_end : t0 + static_cast<Scalar>(k + 1) * cfg.dt;
    s = step(sys, s, cfg, next - s.t);
    s.t = next;
  }
  return s;
}

}  // namespace ims
