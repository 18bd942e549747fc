#pragma once

// Monitored time loop producing a RunRecord.

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ims/diagnostics.hpp"
#include "ims/integrator.hpp"

namespace ims {

/// Residual levels beyond which a run stops with InvariantViolated or
/// MassCompatibilityViolated.
struct BreachThresholds {
  double mass{1e-8};
  double sum_zero{1e-8};
  double equimolar{1e-8};
  double incompressibility{1e-6};
};

template <class Scalar>
struct RunOptions {
  /// Steps between samples; 0 picks the largest cadence giving at least 200.
  int cadence{0};
  int s_norm{2};
  double fit_t0{0};
  double fit_t1{std::numeric_limits<double>::infinity()};
  NormKind fit_norm{NormKind::Hs};
  BreachThresholds thresholds{};
  std::function<void(const SimulationState<Scalar>&, const Sample&)> on_sample;
  /// Snapshots are taken at t0 and every `snapshot_every` time units after it;
  /// the step containing a snapshot time is split there.
  Scalar snapshot_every{0};
  std::function<void(const SimulationState<Scalar>&)> on_snapshot;
  /// Optional time-dependent u_bar, evaluated at the start of each step and held
  /// fixed within it.
  std::function<VectorField<Scalar>(Scalar)> u_bar_at;
};

template <class Scalar>
struct RunResult {
  RunRecord record;
  SimulationState<Scalar> state;
};

inline int default_cadence(long steps) { return static_cast<int>(std::max(1L, steps / 200)); }

namespace detail {

inline std::optional<Termination> breach(const Sample& s, const BreachThresholds& th) {
  if (!(s.min_concentration > 0))
    return Termination{ErrorCode::PositivityViolated, "minimum concentration " + std::to_string(s.min_concentration), s.t};
  if (s.mass_residual > th.mass)
    return Termination{ErrorCode::MassCompatibilityViolated, "mass residual " + std::to_string(s.mass_residual), s.t};
  if (s.sum_zero_residual > th.sum_zero)
    return Termination{ErrorCode::MassCompatibilityViolated,
                       "species-sum residual " + std::to_string(s.sum_zero_residual), s.t};
  if (s.equimolar_residual > th.equimolar)
    return Termination{ErrorCode::InvariantViolated, "equimolar residual " + std::to_string(s.equimolar_residual), s.t};
  if (s.incompressibility_residual > th.incompressibility)
    return Termination{ErrorCode::InvariantViolated,
                       "incompressibility residual " + std::to_string(s.incompressibility_residual), s.t};
  return std::nullopt;
}

}  // namespace detail

/// Advances `state` to cfg.t_end, sampling every cadence steps and at the end.
/// Any failure stops the loop and is recorded as the termination reason
/// instead of being thrown.
template <class Scalar>
RunResult<Scalar> run(const Spectral<Scalar>& sp, const DiffusionTable<Scalar>& d, SimulationState<Scalar> state,
                      const StepperConfig<Scalar>& cfg, const RunOptions<Scalar>& opt = {}) {
  RunResult<Scalar> out{{}, std::move(state)};
  auto& rec = out.record;
  auto& s = out.state;
  rec.s_norm = opt.s_norm;
  if (opt.u_bar_at) s.u_bar = opt.u_bar_at(s.t);
  auto sys = make_system(sp, d, s);

  auto record_sample = [&]() -> bool {
    const Sample smp = monitor_invariants(sys, s, opt.s_norm);
    rec.samples.push_back(smp);
    if (opt.on_sample) opt.on_sample(s, smp);
    if (auto b = detail::breach(smp, opt.thresholds)) {
      rec.termination = *b;
      return false;
    }
    return true;
  };

  const Scalar t0 = s.t;
  const long n = step_count(t0, cfg.t_end, cfg.dt);
  const int cadence = opt.cadence > 0 ? opt.cadence : default_cadence(n);
  const Scalar slack = Scalar(1e-9) * cfg.dt;
  const bool snapshots = opt.on_snapshot && opt.snapshot_every > Scalar(0);
  long next_snapshot = 0;
  auto snapshot_time = [&] { return t0 + static_cast<Scalar>(next_snapshot) * opt.snapshot_every; };
  auto snapshot = [&] {
    if (!snapshots) return;
    while (snapshot_time() <= s.t + slack) {
      opt.on_snapshot(s);
      ++next_snapshot;
    }
  };

  try {
    if (!record_sample()) return out;
    snapshot();
    if (n > 0) require_cfl(sys, cfg, cfg.dt);
    // k counts steps on the fixed grid t0 + k dt; a step is shortened to land
    // on a snapshot time that falls inside it
    long k = 0;
    bool first = true;
    while (k < n) {
      if (opt.u_bar_at && !first) {
        s.u_bar = opt.u_bar_at(s.t);
        sys = make_system(sp, d, s);
      }
      first = false;
      Scalar next = k + 1 == n ? cfg.t_end : t0 + static_cast<Scalar>(k + 1) * cfg.dt;
      bool on_grid = true;
      if (snapshots && snapshot_time() < next - slack) {
        next = snapshot_time();
        on_grid = false;
      }
      s = step(sys, s, cfg, next - s.t);
      s.t = next;
      ++rec.steps;
      if (on_grid) {
        ++k;
        if (k % cadence == 0 || k == n)
          if (!record_sample()) return out;
      }
      snapshot();
    }
  } catch (const Error& e) {
    rec.termination = Termination{e.code(), e.message(), static_cast<double>(s.t)};
    return out;
  }

  try {
    const auto fit = fit_decay_rate(rec.samples, opt.fit_t0, opt.fit_t1, opt.fit_norm);
    rec.fitted_rate = fit.rate;
    rec.r_squared = fit.r_squared;
  } catch (const Error&) {
    // too few samples or a vanishing norm: the rate stays undefined
  }
  return out;
}

}  // namespace ims
