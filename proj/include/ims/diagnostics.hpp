#pragma once

// Invariant monitors, decay-rate fitting and the explicit regime constants.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ims/errors.hpp"
#include "ims/grid.hpp"
#include "ims/mixture.hpp"
#include "ims/orthogonal.hpp"
#include "ims/state.hpp"

namespace ims {

/// One row of a run's time series. Norms of c~ are H^s with the configured s;
/// `weighted` uses the weight c_bar^{-1/2} per species.
struct Sample {
  double t{0};
  double h_s_norm{0};
  double h_s_weighted{0};
  double l2_norm{0};
  double u_tilde_hs_norm{0};
  double mass_residual{0};
  double sum_zero_residual{0};
  double equimolar_residual{0};
  double min_concentration{0};
  double incompressibility_residual{0};
};

enum class NormKind { L2, Hs, HsWeighted };

inline double norm_of(const Sample& s, NormKind kind) {
  switch (kind) {
    case NormKind::L2: return s.l2_norm;
    case NormKind::Hs: return s.h_s_norm;
    case NormKind::HsWeighted: return s.h_s_weighted;
  }
  return s.h_s_norm;
}

struct Termination {
  ErrorCode code;
  std::string message;
  double t{0};
};

struct RunRecord {
  std::vector<Sample> samples;
  std::optional<double> fitted_rate;
  std::optional<double> r_squared;
  std::optional<Termination> termination;
  long steps{0};
  int s_norm{2};
  std::string config_echo;

  bool completed() const { return !termination.has_value(); }
};

/// Weights c_bar_i^{-1/2}, one per species.
template <class Scalar>
std::vector<Scalar> energy_weights(const Vec<Scalar>& c_bar) {
  std::vector<Scalar> w(static_cast<std::size_t>(c_bar.size()));
  for (Eigen::Index i = 0; i < c_bar.size(); ++i) w[static_cast<std::size_t>(i)] = Scalar(1) / std::sqrt(c_bar(i));
  return w;
}

/// Evaluates every residual of a Sample for the state. The physical
/// velocity is u = u_bar + eps V_U~, since grad c = A(c) (eps U~).
template <class Scalar>
Sample monitor_invariants(const OrthogonalSystem<Scalar>& sys, const SimulationState<Scalar>& s, int s_norm = 2) {
  const auto& sp = sys.spectral();
  const auto& g = sp.grid();
  const int n = s.n_species();
  const int dim = g.dim();
  const SobolevOrder order(s_norm);
  Sample out;
  out.t = static_cast<double>(s.t);
  out.h_s_norm = static_cast<double>(sp.sobolev_norm(s.c_tilde, order));
  const auto w = energy_weights(s.c_bar);
  out.h_s_weighted = static_cast<double>(sp.sobolev_norm(s.c_tilde, order, w));
  out.l2_norm = static_cast<double>(sp.sobolev_norm(s.c_tilde, SobolevOrder(0)));
  out.mass_residual = static_cast<double>(mean_residual(s.c_tilde));
  out.sum_zero_residual = static_cast<double>(species_sum_residual(s.c_tilde));
  out.min_concentration = static_cast<double>(min_concentration(s));

  const auto c = sys.concentrations(s.c_tilde);
  const auto U = sys.orthogonal_velocity(c, s.c_tilde);
  out.u_tilde_hs_norm = static_cast<double>(sp.sobolev_norm(U, order));
  auto v = equimolar_velocity(c, U);
  v.scale(s.eps);

  Scalar equimolar = 0;
  VectorField<Scalar> flux(g);
  for (int a = 0; a < dim; ++a)
    for (std::size_t p = 0; p < g.size(); ++p) {
      Scalar cv = 0, cu = 0;
      for (int i = 0; i < n; ++i) {
        const Scalar ci = c(static_cast<std::size_t>(i), p);
        cv += ci * v(i, a, p);
        cu += ci * (s.u_bar(static_cast<std::size_t>(a), p) + v(i, a, p));
      }
      equimolar = std::max(equimolar, std::abs(cv));
      flux(static_cast<std::size_t>(a), p) = cu;
    }
  out.equimolar_residual = static_cast<double>(equimolar);
  out.incompressibility_residual = static_cast<double>(detail::max_abs<Scalar>(sp.divergence(flux)));
  return out;
}

struct DecayFit {
  double rate{0};
  double r_squared{1};
};

/// Least-squares slope of log(norm) against t over samples with t in
/// [t0, t1], negated.
inline DecayFit fit_decay_rate(const std::vector<Sample>& samples, double t0, double t1,
                               NormKind kind = NormKind::Hs) {
  std::vector<double> ts, ys;
  for (const auto& s : samples) {
    if (s.t < t0 || s.t > t1) continue;
    const double v = norm_of(s, kind);
    if (!(v > 0)) fail(ErrorCode::NonPositiveNorm, "norm must be positive to fit a decay rate");
    ts.push_back(s.t);
    ys.push_back(std::log(v));
  }
  if (ts.size() < 10) fail(ErrorCode::InsufficientSamples, "at least 10 samples are needed in the window");
  const double n = static_cast<double>(ts.size());
  double mt = 0, my = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    my += ys[i];
  }
  mt /= n;
  my /= n;
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    sty += (ts[i] - mt) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (stt == 0) fail(ErrorCode::InsufficientSamples, "samples in the window share one time");
  const double slope = sty / stt;
  const double r2 = syy == 0 ? 1.0 : (sty * sty) / (stt * syy);
  return {-slope, r2};
}

inline DecayFit fit_decay_rate(const RunRecord& record, double t0, double t1, NormKind kind = NormKind::Hs) {
  return fit_decay_rate(record.samples, t0, t1, kind);
}

/// Explicit constants of the small-data decay theorem. C_s and the Poincare
/// constant are proof constants without known values, so the certified rate
/// is relative to the supplied parameters.
struct RegimeCertificate {
  double lambda_A{0};
  double mu_A{0};
  double C0{0};
  double min_c_bar{0};
  double C_s_param{1};
  double C_poincare_param{1};
  double delta_s{0};
  double lambda_s{0};
  /// C_s delta [(1+delta)^4 + (1+delta)^3] - lambda_A (min c_bar)^2 / 2 at delta_s
  double delta_residual{0};
};

/// C_s x [(1+x)^4 + (1+x)^3].
inline double delta_lhs(double C_s, double x) {
  const double y = 1 + x;
  return C_s * x * (y * y * y * y + y * y * y);
}

/// lambda_A (min c_bar)^3 / (4 C_p^2 C_s^2 (1 + delta^2)^2).
inline double lambda_s_formula(double lambda_A, double min_c_bar, double C_s, double C_p, double delta) {
  const double q = 1 + delta * delta;
  return lambda_A * min_c_bar * min_c_bar * min_c_bar / (4 * C_p * C_p * C_s * C_s * q * q);
}

/// delta_s is the largest delta found by bisection with the left side still
/// below lambda_A (min c_bar)^2 / 2.
template <class Scalar>
RegimeCertificate compute_certificate(const Vec<Scalar>& c_bar, const DiffusionTable<Scalar>& d, double C_s_param = 1,
                                      double C_poincare_param = 1) {
  if (!(C_s_param > 0) || !(C_poincare_param > 0))
    fail(ErrorCode::InvalidArgument, "certificate parameters must be positive");
  if (c_bar.size() != d.n_species()) fail(ErrorCode::DimensionMismatch, "c_bar length differs from N");
  if (!is_strict(c_bar)) fail(ErrorCode::NonPositiveConcentration, "c_bar must be strictly positive");
  const auto k = gap_constants(d);
  RegimeCertificate out;
  out.lambda_A = static_cast<double>(k.lambda_A);
  out.mu_A = static_cast<double>(k.mu_A);
  out.C0 = static_cast<double>(c_bar.sum());
  out.min_c_bar = static_cast<double>(c_bar.minCoeff());
  out.C_s_param = C_s_param;
  out.C_poincare_param = C_poincare_param;
  const double target = out.lambda_A * out.min_c_bar * out.min_c_bar / 2;
  double lo = 0, hi = 1;
  while (delta_lhs(C_s_param, hi) < target) hi *= 2;
  for (int it = 0; it < 2000 && hi - lo > 0; ++it) {
    const double mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;
    if (delta_lhs(C_s_param, mid) <= target)
      lo = mid;
    else
      hi = mid;
  }
  out.delta_s = lo;
  out.delta_residual = delta_lhs(C_s_param, lo) - target;
  out.lambda_s = lambda_s_formula(out.lambda_A, out.min_c_bar, C_s_param, C_poincare_param, lo);
  return out;
}

/// Both sides of the energy inequality between two samples,
///   (E(t2) - E(t1)) / (t2 - t1) <= -(lambda_A (min c_bar)^2 / 2) avg |U~|^2_{H^s},
/// with E the squared weighted H^s norm and the average by the trapezoid rule.
struct EnergyStep {
  double lhs{0};
  double rhs{0};
  bool holds{true};
};

inline EnergyStep check_energy_step(const Sample& a, const Sample& b, double lambda_A, double min_c_bar,
                                    double rel_tol = 1e-10) {
  const double dt = b.t - a.t;
  const double e1 = a.h_s_weighted * a.h_s_weighted;
  const double e2 = b.h_s_weighted * b.h_s_weighted;
  const double u2 = 0.5 * (a.u_tilde_hs_norm * a.u_tilde_hs_norm + b.u_tilde_hs_norm * b.u_tilde_hs_norm);
  EnergyStep out;
  out.lhs = (e2 - e1) / dt;
  out.rhs = -(lambda_A * min_c_bar * min_c_bar / 2) * u2;
  out.holds = out.lhs <= out.rhs + rel_tol * std::max(e1, e2) / dt;
  return out;
}

/// First index i with norm(i+1) > norm(i) + tol * max(1, norm(i)), or -1.
inline long first_increase(const std::vector<Sample>& samples, NormKind kind, double tol = 1e-10) {
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double prev = norm_of(samples[i - 1], kind);
    if (norm_of(samples[i], kind) > prev + tol * std::max(1.0, prev)) return static_cast<long>(i - 1);
  }
  return -1;
}

/// Trapezoid value of int_0^T exp(2 lambda (T - tau)) |U~(tau)|^2_{H^s} dtau.
inline double velocity_integral(const std::vector<Sample>& samples, double lambda) {
  if (samples.size() < 2) return 0;
  const double T = samples.back().t;
  double acc = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& a = samples[i - 1];
    const auto& b = samples[i];
    const double fa = std::exp(2 * lambda * (T - a.t)) * a.u_tilde_hs_norm * a.u_tilde_hs_norm;
    const double fb = std::exp(2 * lambda * (T - b.t)) * b.u_tilde_hs_norm * b.u_tilde_hs_norm;
    acc += 0.5 * (b.t - a.t) * (fa + fb);
  }
  return acc;
}

/// |f|_{H^s} <= C_p |grad f|_{H^s} for a mean-zero field.
template <class Scalar>
InequalityCheck<Scalar> check_poincare(const Spectral<Scalar>& sp, std::span<const Scalar> f, int s, Scalar C_p = 1) {
  const Scalar lhs = std::sqrt(sp.sobolev_norm_squared(f, s));
  const auto grad = sp.gradient(f);
  const Scalar rhs = C_p * sp.sobolev_norm(grad, SobolevOrder(s));
  return {lhs, rhs, detail::leq_with_slack(lhs, rhs)};
}

namespace detail {

inline double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double multinomial(const MultiIndex& alpha, const MultiIndex& a1, const MultiIndex& a2) {
  double m = 1;
  for (int k = 0; k < 3; ++k)
    m *= factorial(alpha[k]) / (factorial(a1[k]) * factorial(a2[k]) * factorial(alpha[k] - a1[k] - a2[k]));
  return m;
}

inline MultiIndex minus(const MultiIndex& a, const MultiIndex& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

template <class Scalar>
std::vector<SpeciesField<Scalar>> derivatives_by_index(const Spectral<Scalar>& sp, const SpeciesField<Scalar>& f,
                                                       const std::vector<MultiIndex>& betas) {
  std::vector<SpeciesField<Scalar>> out;
  for (const auto& beta : betas) {
    SpeciesField<Scalar> d(f.n_species(), sp.grid());
    for (std::size_t i = 0; i < f.components(); ++i) d.assign(i, sp.partial(f[i], beta));
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace detail

/// Pointwise product y = A(c) U for species fields c and U (one spatial
/// direction).
template <class Scalar>
SpeciesField<Scalar> apply_ms_matrix(const SpeciesField<Scalar>& c, const DiffusionTable<Scalar>& d,
                                     const SpeciesField<Scalar>& U) {
  const int n = c.n_species();
  SpeciesField<Scalar> y(c.components(), c.points());
  for (std::size_t p = 0; p < c.points(); ++p)
    for (int i = 0; i < n; ++i) {
      Scalar s = 0;
      for (int j = 0; j < n; ++j)
        if (j != i)
          s += c(static_cast<std::size_t>(i), p) * c(static_cast<std::size_t>(j), p) / d(i, j) *
               (U(static_cast<std::size_t>(j), p) - U(static_cast<std::size_t>(i), p));
      y(static_cast<std::size_t>(i), p) = s;
    }
  return y;
}

/// d^alpha [A(c) U] by the multinomial Leibniz expansion
///   sum_{a1+a2+a3=alpha} (alpha; a1,a2,a3) d^a1 c_i d^a2 c_j / Delta_ij (d^a3 U_j - d^a3 U_i).
template <class Scalar>
SpeciesField<Scalar> leibniz_expansion(const Spectral<Scalar>& sp, const SpeciesField<Scalar>& c,
                                       const DiffusionTable<Scalar>& d, const SpeciesField<Scalar>& U,
                                       const MultiIndex& alpha) {
  const int n = c.n_species();
  const auto betas = sub_indices(alpha);
  const auto dc = detail::derivatives_by_index(sp, c, betas);
  const auto du = detail::derivatives_by_index(sp, U, betas);
  auto at = [&](const MultiIndex& b) {
    return static_cast<std::size_t>(std::find(betas.begin(), betas.end(), b) - betas.begin());
  };
  SpeciesField<Scalar> out(c.components(), c.points());
  for (const auto& a1 : betas)
    for (const auto& a2 : sub_indices(detail::minus(alpha, a1))) {
      const auto a3 = detail::minus(detail::minus(alpha, a1), a2);
      const Scalar m = static_cast<Scalar>(detail::multinomial(alpha, a1, a2));
      const auto& c1 = dc[at(a1)];
      const auto& c2 = dc[at(a2)];
      const auto& u3 = du[at(a3)];
      for (std::size_t p = 0; p < c.points(); ++p)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
            out(si, p) += m * c1(si, p) * c2(sj, p) / d(i, j) * (u3(sj, p) - u3(si, p));
          }
    }
  return out;
}

/// Worst grid point of the derivative estimate
///   <d^a[A(c)U], X> <= <A(c) d^a U, X>
///       + 2 3^|a| N^2 mu_A <c,1> |X| sum_{a1+a3=a, |a1|>=1} |d^a1 c| |d^a3 U|
///       + 3^|a| N^2 mu_A |X| sum_{a1+a2+a3=a, |a1|,|a2|>=1} |d^a1 c| |d^a2 c| |d^a3 U|,
/// norms taken pointwise over species. Reports the point maximizing lhs - rhs.
template <class Scalar>
InequalityCheck<Scalar> check_derivative_estimate(const Spectral<Scalar>& sp, const SpeciesField<Scalar>& c,
                                                  const DiffusionTable<Scalar>& d, const SpeciesField<Scalar>& U,
                                                  const MultiIndex& alpha, const Vec<Scalar>& X) {
  if (order(alpha) > 3) fail(ErrorCode::InvalidArgument, "derivative order must be at most 3");
  const int n = c.n_species();
  if (U.n_species() != n || X.size() != n || d.n_species() != n)
    fail(ErrorCode::DimensionMismatch, "species counts differ");
  const auto betas = sub_indices(alpha);
  const auto dc = detail::derivatives_by_index(sp, c, betas);
  const auto du = detail::derivatives_by_index(sp, U, betas);
  auto at = [&](const MultiIndex& b) {
    return static_cast<std::size_t>(std::find(betas.begin(), betas.end(), b) - betas.begin());
  };
  const auto prod = apply_ms_matrix(c, d, U);
  SpeciesField<Scalar> lhs_field(prod.components(), prod.points());
  for (std::size_t i = 0; i < prod.components(); ++i) lhs_field.assign(i, sp.partial(prod[i], alpha));
  const auto main = apply_ms_matrix(c, d, du[at(alpha)]);

  const Scalar mu = gap_constants(d).mu_A;
  const Scalar three = std::pow(Scalar(3), static_cast<Scalar>(order(alpha)));
  const Scalar nn = static_cast<Scalar>(n * n);
  const Scalar xnorm = X.norm();

  auto pnorm = [&](const SpeciesField<Scalar>& f, std::size_t p) {
    Scalar s = 0;
    for (int i = 0; i < n; ++i) s += f(static_cast<std::size_t>(i), p) * f(static_cast<std::size_t>(i), p);
    return std::sqrt(s);
  };

  InequalityCheck<Scalar> worst{0, 0, true};
  Scalar worst_gap = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t p = 0; p < c.points(); ++p) {
    Scalar lhs = 0, rhs = 0, total = 0;
    for (int i = 0; i < n; ++i) {
      lhs += lhs_field(static_cast<std::size_t>(i), p) * X(i);
      rhs += main(static_cast<std::size_t>(i), p) * X(i);
      total += c(static_cast<std::size_t>(i), p);
    }
    Scalar single = 0, pair = 0;
    for (const auto& a1 : betas) {
      if (order(a1) == 0) continue;
      const auto rest = detail::minus(alpha, a1);
      single += pnorm(dc[at(a1)], p) * pnorm(du[at(rest)], p);
      for (const auto& a2 : sub_indices(rest)) {
        if (order(a2) == 0) continue;
        pair += pnorm(dc[at(a1)], p) * pnorm(dc[at(a2)], p) * pnorm(du[at(detail::minus(rest, a2))], p);
      }
    }
    rhs += 2 * three * nn * mu * total * xnorm * single + three * nn * mu * xnorm * pair;
    if (lhs - rhs > worst_gap) {
      worst_gap = lhs - rhs;
      worst = {lhs, rhs, true};
    }
  }
  worst.holds = worst.lhs <= worst.rhs + Scalar(1e-8) * std::max({Scalar(1), std::abs(worst.lhs), std::abs(worst.rhs)});
  return worst;
}

}  // namespace ims
