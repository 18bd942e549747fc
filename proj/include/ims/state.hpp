#pragma once

// Simulation state c = c_bar + eps c~ and builders for initial perturbations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "ims/errors.hpp"
#include "ims/grid.hpp"
#include "ims/mixture.hpp"

namespace ims {

template <class Scalar>
struct SimulationState {
  Scalar t{0};
  SpeciesField<Scalar> c_tilde;
  Scalar eps{1};
  Vec<Scalar> c_bar;
  VectorField<Scalar> u_bar;

  int n_species() const { return c_tilde.n_species(); }
};

/// max_x | sum_i c~_i(x) |
template <class Scalar>
Scalar species_sum_residual(const SpeciesField<Scalar>& f) {
  Scalar r = 0;
  for (std::size_t p = 0; p < f.points(); ++p) {
    Scalar s = 0;
    for (std::size_t i = 0; i < f.components(); ++i) s += f(i, p);
    r = std::max(r, std::abs(s));
  }
  return r;
}

/// max_i | grid average of f_i |
template <class Scalar>
Scalar mean_residual(const SpeciesField<Scalar>& f) {
  Scalar r = 0;
  for (std::size_t i = 0; i < f.components(); ++i) {
    Scalar s = 0;
    for (auto v : f[i]) s += v;
    r = std::max(r, std::abs(s / static_cast<Scalar>(f.points())));
  }
  return r;
}

template <class Scalar>
Scalar min_concentration(const SimulationState<Scalar>& s) {
  Scalar m = std::numeric_limits<Scalar>::infinity();
  for (int i = 0; i < s.n_species(); ++i)
    for (auto v : s.c_tilde[static_cast<std::size_t>(i)]) m = std::min(m, s.c_bar(i) + s.eps * v);
  return m;
}

/// Validates mass compatibility (species sum and spatial mean vanish) and
/// positivity of c_bar + eps c~.
template <class Scalar>
SimulationState<Scalar> init_state(const TorusGrid& g, Vec<Scalar> c_bar, Scalar eps, SpeciesField<Scalar> c_tilde_in,
                                   VectorField<Scalar> u_bar, Scalar t0 = Scalar(0)) {
  const int n = static_cast<int>(c_bar.size());
  if (n < 2) fail(ErrorCode::InvalidArgument, "at least two species are required");
  if (c_tilde_in.n_species() != n || c_tilde_in.points() != g.size())
    fail(ErrorCode::DimensionMismatch, "initial perturbation does not match N and the grid");
  if (u_bar.components() != static_cast<std::size_t>(g.dim()) || u_bar.points() != g.size())
    fail(ErrorCode::DimensionMismatch, "u_bar does not live on the grid");
  if (!is_strict(c_bar)) fail(ErrorCode::NonPositiveConcentration, "c_bar must be strictly positive");
  if (!(eps > Scalar(0))) fail(ErrorCode::InvalidArgument, "eps must be positive");
  const Scalar scale = std::max(Scalar(1), c_tilde_in.max_abs());
  if (species_sum_residual(c_tilde_in) > Scalar(1e-10) * scale)
    fail(ErrorCode::MassCompatibilityViolated, "initial perturbation does not sum to zero over species");
  if (mean_residual(c_tilde_in) > Scalar(1e-10) * scale)
    fail(ErrorCode::MassCompatibilityViolated, "initial perturbation has nonzero spatial mean");
  SimulationState<Scalar> s{t0, std::move(c_tilde_in), eps, std::move(c_bar), std::move(u_bar)};
  if (!(min_concentration(s) > Scalar(0)))
    fail(ErrorCode::PositivityViolated, "c_bar + eps c~ is not positive");
  return s;
}

/// amplitude * pattern_i * sin(k . x); the pattern should sum to zero.
template <class Scalar>
SpeciesField<Scalar> mode_perturbation(const TorusGrid& g, const Vec<Scalar>& pattern, const MultiIndex& k,
                                       Scalar amplitude) {
  SpeciesField<Scalar> f(static_cast<int>(pattern.size()), g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto x = g.coordinate<Scalar>(p);
    Scalar phase = 0;
    for (int a = 0; a < g.dim(); ++a) phase += static_cast<Scalar>(k[a]) * x[a];
    const Scalar s = amplitude * std::sin(phase);
    for (int i = 0; i < pattern.size(); ++i) f(static_cast<std::size_t>(i), p) = pattern(i) * s;
  }
  return f;
}

/// Removes the species average at every point, then each species' spatial
/// mean, leaving a field that satisfies mass compatibility.
template <class Scalar>
void project_mass_compatible(SpeciesField<Scalar>& f) {
  const std::size_t n = f.components();
  for (std::size_t p = 0; p < f.points(); ++p) {
    Scalar s = 0;
    for (std::size_t i = 0; i < n; ++i) s += f(i, p);
    s /= static_cast<Scalar>(n);
    for (std::size_t i = 0; i < n; ++i) f(i, p) -= s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Scalar m = 0;
    for (auto v : f[i]) m += v;
    m /= static_cast<Scalar>(f.points());
    for (auto& v : f[i]) v -= m;
  }
}

/// Sum of low Fourier modes 1 <= max_a |k_a| <= kmax with seeded uniform
/// amplitudes in [-1, 1], projected to mass compatibility and scaled so that
/// max |c~| = amplitude.
template <class Scalar>
SpeciesField<Scalar> random_perturbation(const TorusGrid& g, int n_species, int kmax, Scalar amplitude,
                                         std::uint64_t seed) {
  if (kmax < 1 || 3 * kmax >= g.points_per_axis())
    fail(ErrorCode::InvalidArgument, "random perturbation modes must satisfy 1 <= kmax < M/3");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const int dim = g.dim();
  std::vector<MultiIndex> modes;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = (dim > 1 ? -kmax : 0); b <= (dim > 1 ? kmax : 0); ++b)
      for (int c = (dim > 2 ? -kmax : 0); c <= (dim > 2 ? kmax : 0); ++c) {
        const MultiIndex k{a, b, c};
        // one representative of each +-k pair
        bool positive = false;
        for (int ax = 0; ax < 3 && !positive; ++ax) {
          if (k[ax] > 0) positive = true;
          if (k[ax] != 0) break;
        }
        if (positive) modes.push_back(k);
      }
  SpeciesField<Scalar> f(n_species, g);
  for (int i = 0; i < n_species; ++i)
    for (const auto& k : modes) {
      const Scalar ca = static_cast<Scalar>(uni(rng));
      const Scalar sa = static_cast<Scalar>(uni(rng));
      for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinate<Scalar>(p);
        Scalar phase = 0;
        for (int a = 0; a < dim; ++a) phase += static_cast<Scalar>(k[a]) * x[a];
        f(static_cast<std::size_t>(i), p) += ca * std::cos(phase) + sa * std::sin(phase);
      }
    }
  project_mass_compatible(f);
  const Scalar m = f.max_abs();
  if (m > Scalar(0)) f.scale(amplitude / m);
  return f;
}

}  // namespace ims
