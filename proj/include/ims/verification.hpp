#pragma once

// Measurements behind the built-in verification suite. Each routine runs one
// scenario and reports raw numbers; judging them is left to the caller.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ims/diagnostics.hpp"
#include "ims/integrator.hpp"
#include "ims/io.hpp"
#include "ims/mixture.hpp"
#include "ims/orthogonal.hpp"
#include "ims/run.hpp"
#include "ims/state.hpp"

namespace ims::verify {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// --------------------------------------------------------------------------
// Single-mode binary decay

struct ModeDecay {
  double rate{0};
  double r_squared{0};
  long steps{0};
  bool completed{false};
  double seconds{0};
};

/// N=2, d=1, M=64, c_bar=(1,1), Delta_12=1, u_bar=0, eps=1e-3,
/// c~ = (sin kx, -sin kx); L^2 decay fitted over the whole run.
inline ModeDecay mode_decay(int k, Scheme scheme = Scheme::Explicit, double dt_factor = 1) {
  Stopwatch sw;
  auto cfg = *find_preset(k == 1 ? "two-species-mode-1" : "two-species-mode-2");
  cfg.perturbation.modes = {{k, 0, 0}};
  cfg.stepper.t_end = 4.0 / (k * k);
  cfg.stepper.scheme = scheme;
  const TorusGrid g(1, 64);
  cfg.stepper.dt = dt_factor * cfl_limit(g, diffusion_table(cfg.species), 2.0, 1.0);
  cfg.diagnostics.fit_norm = NormKind::L2;
  ScenarioOverrides ov;
  ov.write_files = false;
  const auto res = run_scenario(cfg, ov);
  ModeDecay out;
  out.completed = res.record.completed();
  out.rate = res.record.fitted_rate.value_or(0);
  out.r_squared = res.record.r_squared.value_or(0);
  out.steps = res.record.steps;
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Pointwise matrix properties

struct MatrixSuite {
  long samples{0};
  long kernel_failures{0};
  long symmetry_failures{0};
  long identity_failures{0};
  long gap_failures{0};
  long operator_failures{0};
  long pinv_norm_failures{0};
  long pinv_coercivity_failures{0};
  double max_identity_error{0};
  double max_kernel_residual{0};
  double seconds{0};

  long failures() const {
    return kernel_failures + symmetry_failures + identity_failures + gap_failures + operator_failures +
           pinv_norm_failures + pinv_coercivity_failures;
  }
};

/// A random diffusion table, concentration and test vector per sample. N in
/// [2, 6]; c log-uniform over four decades; Delta uniform in [0.1, 10].
struct MatrixSample {
  DiffusionTable<double> table;
  Vec<double> c;
  Vec<double> x;
};

inline MatrixSample random_matrix_sample(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nd(2, 6);
  std::uniform_real_distribution<double> uni(0, 1);
  const int n = nd(rng);
  Mat<double> d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) d(i, j) = d(j, i) = i == j ? 0.0 : 0.1 + 9.9 * uni(rng);
  Vec<double> c(n), x(n);
  for (int i = 0; i < n; ++i) {
    c(i) = std::pow(10.0, -2 + 4 * uni(rng));
    x(i) = 2 * uni(rng) - 1;
  }
  return {DiffusionTable<double>(d), c, x};
}

/// Runs every pointwise property on `n_samples` samples. `extra` lets a
/// caller add checks against an independent construction; it returns the
/// number of failures it found.
inline MatrixSuite matrix_property_suite(long n_samples, std::uint64_t seed,
                                         const std::function<long(const MatrixSample&, const MsMatrix<double>&)>& extra = {}) {
  Stopwatch sw;
  std::mt19937_64 rng(seed);
  MatrixSuite out;
  for (long s = 0; s < n_samples; ++s) {
    const auto smp = random_matrix_sample(rng);
    const auto a = build_ms_matrix(smp.c, smp.table);
    const double scale = a.entries.cwiseAbs().maxCoeff();
    const double kernel = (a.entries * Vec<double>::Ones(smp.c.size())).cwiseAbs().maxCoeff();
    out.max_kernel_residual = std::max(out.max_kernel_residual, kernel / scale);
    if (kernel > 1e-12 * scale) ++out.kernel_failures;
    if (a.entries != a.entries.transpose()) ++out.symmetry_failures;
    const double q = quadratic_form(a, smp.x);
    const double ps = pair_sum_form(smp.c, smp.table, smp.x);
    const double rel = std::abs(q - ps) / std::max(std::abs(ps), 1e-300);
    out.max_identity_error = std::max(out.max_identity_error, rel);
    if (rel > 1e-12) ++out.identity_failures;
    const Vec<double> xo = project_orth_ones(smp.x);
    if (!check_spectral_gap(smp.c, smp.table, xo).holds) ++out.gap_failures;
    if (!check_operator_bound(smp.c, smp.table, smp.x).holds) ++out.operator_failures;
    const auto pb = check_pseudo_inverse_bounds(smp.c, smp.table, xo);
    if (!pb.norm_bound.holds) ++out.pinv_norm_failures;
    if (!pb.coercivity.holds) ++out.pinv_coercivity_failures;
    if (extra) out.identity_failures += extra(smp, a);
    ++out.samples;
  }
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Conservation run

struct ConservationRun {
  RunRecord record;
  Maxima maxima;
  long hs_increase_at{-1};
  long weighted_increase_at{-1};
  long energy_failures{0};
  double worst_energy_margin{0};
  double max_u_bar{0};
  double seconds{0};
};

/// The three-species-2d preset: 1000 explicit steps with a small stream-function
/// flow.
inline ConservationRun conservation_run() {
  Stopwatch sw;
  auto cfg = *find_preset("three-species-2d");
  ScenarioOverrides ov;
  ov.write_files = false;
  const auto res = run_scenario(cfg, ov);
  ConservationRun out;
  out.record = res.record;
  out.maxima = invariant_maxima(res.record);
  out.hs_increase_at = first_increase(res.record.samples, NormKind::Hs);
  out.weighted_increase_at = first_increase(res.record.samples, NormKind::HsWeighted);
  out.worst_energy_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < res.record.samples.size(); ++i) {
    const auto e = check_energy_step(res.record.samples[i - 1], res.record.samples[i], res.certificate.lambda_A,
                                     res.certificate.min_c_bar);
    if (!e.holds) ++out.energy_failures;
    out.worst_energy_margin = std::max(out.worst_energy_margin, e.lhs - e.rhs);
  }
  out.max_u_bar = res.final_state.u_bar.max_abs();
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Equivalence round trip

struct RoundTrip {
  long states{0};
  double max_U_error{0};
  double max_u_bar_error{0};
  double max_equimolar{0};
  double max_pseudo_solve_error{0};
  double seconds{0};
};

/// Random admissible states (c, U, u_bar): c = c_bar + eps c~ with random
/// low modes, U = A(c)^{-1} grad c, u_bar from random stream functions or a
/// random constant in d=1. Reconstruct u, split it again and compare.
inline RoundTrip round_trip(long n_states, std::uint64_t seed) {
  Stopwatch sw;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0, 1);
  RoundTrip out;
  for (long s = 0; s < n_states; ++s) {
    const int dim = 1 + static_cast<int>(s % 2);
    const int n = 2 + static_cast<int>(s % 3);
    const TorusGrid g(dim, dim == 1 ? 32 : 16);
    const Spectral<double> sp(g);
    Mat<double> d(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) d(i, j) = d(j, i) = i == j ? 0.0 : 0.2 + 2 * uni(rng);
    const DiffusionTable<double> table(d);
    Vec<double> cb(n);
    for (int i = 0; i < n; ++i) cb(i) = 0.5 + uni(rng);
    auto ct = random_perturbation<double>(g, n, 2, 1.0, rng());
    const double eps = 0.3 * cb.minCoeff();
    SpeciesField<double> c = ct;
    for (int i = 0; i < n; ++i)
      for (auto& v : c[static_cast<std::size_t>(i)]) v = cb(i) + eps * v;
    SolenoidalSpec<double> fs;
    if (dim == 1) {
      fs.constant[0] = 2 * uni(rng) - 1;
    } else {
      fs.modes.push_back({{1, 1, 0}, 2 * uni(rng) - 1, 6 * uni(rng), 2});
      fs.modes.push_back({{2, -1, 0}, 2 * uni(rng) - 1, 6 * uni(rng), 2});
    }
    OrthogonalState<double> st{c, compute_orthogonal_velocity(sp, c, table), make_solenoidal(sp, fs), cb.sum()};
    validate(sp, st);
    const auto u = reconstruct_full_velocity(st);
    const auto [U2, ub2] = split_velocity(st.c, u, g);
    auto dU = U2;
    dU.axpy(-1, st.U);
    auto du = ub2;
    du.axpy(-1, st.u_bar);
    out.max_U_error = std::max(out.max_U_error, dU.max_abs());
    out.max_u_bar_error = std::max(out.max_u_bar_error, du.max_abs());

    // recovered U solves A(c) U = grad c through an independent pointwise solve
    const auto grad = detail::species_gradient(sp, c);
    Vec<double> cp(n), rhs(n);
    for (std::size_t p = 0; p < g.size(); ++p) {
      for (int i = 0; i < n; ++i) cp(i) = c(static_cast<std::size_t>(i), p);
      const auto a = build_ms_matrix(cp, table);
      for (int ax = 0; ax < dim; ++ax) {
        double cu = 0;
        for (int i = 0; i < n; ++i) {
          rhs(i) = grad(i, ax, p);
          cu += cp(i) * (u(i, ax, p) - st.u_bar(static_cast<std::size_t>(ax), p));
        }
        out.max_equimolar = std::max(out.max_equimolar, std::abs(cu));
        const Vec<double> x = pseudo_solve(a, project_orth_ones(rhs), 1e-8);
        for (int i = 0; i < n; ++i)
          out.max_pseudo_solve_error = std::max(out.max_pseudo_solve_error, std::abs(x(i) - U2(i, ax, p)));
      }
    }
    ++out.states;
  }
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Temporal order

struct OrderMeasurement {
  double error_dt{0};
  double error_half{0};
  double order{0};
  double dt{0};
  double seconds{0};
};

/// Observed order on the single-mode binary scenario from errors at dt and
/// dt/2 against a dt/64 reference of the same scheme, up to t_end. Run in
/// long double so the fourth-order errors stay above rounding.
inline OrderMeasurement temporal_order(Scheme scheme, double t_end = 1.0, double dt_factor = 1.0) {
  using L = long double;
  Stopwatch sw;
  const TorusGrid g(1, 64);
  const Spectral<L> sp(g);
  const auto table = DiffusionTable<L>::uniform(2, 1.0L);
  Vec<L> cb(2), pattern(2);
  cb << 1, 1;
  pattern << 1, -1;
  const auto s0 = init_state<L>(g, cb, 1e-3L, mode_perturbation<L>(g, pattern, {1, 0, 0}, 1.0L), VectorField<L>(g));
  const auto sys = make_system(sp, table, s0);
  const L dt = static_cast<L>(dt_factor) * cfl_limit(g, table, 2.0L, 1.0L);
  StepperConfig<L> cfg;
  cfg.scheme = scheme;
  cfg.t_end = static_cast<L>(t_end);
  cfg.linear_solver_tol = 1e-17L;
  cfg.max_linear_iters = 1000;
  auto solve = [&](L h) {
    auto c = cfg;
    c.dt = h;
    return advance(sys, s0, c).c_tilde;
  };
  const auto ref = solve(dt / 64);
  auto error = [&](L h) {
    auto x = solve(h);
    x.axpy(-1, ref);
    return sp.sobolev_norm(x, SobolevOrder(0));
  };
  OrderMeasurement out;
  const L e1 = error(dt), e2 = error(dt / 2);
  out.error_dt = static_cast<double>(e1);
  out.error_half = static_cast<double>(e2);
  out.order = static_cast<double>(std::log2(e1 / e2));
  out.dt = static_cast<double>(dt);
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Stationarity

struct Stationarity {
  double max_U{0};
  double max_c_tilde{0};
  double max_rhs{0};
  bool completed{false};
  double seconds{0};
};

/// Uniform data: c = c_bar constant (c~ = 0) for an N=3, d=2 mixture with a
/// nonzero solenoidal flow, under both schemes.
inline Stationarity stationarity() {
  Stopwatch sw;
  Stationarity out;
  out.completed = true;
  auto cfg = *find_preset("three-species-2d");
  cfg.perturbation.init = InitKind::Zero;
  const TorusGrid g(2, 32);
  const Spectral<double> sp(g);
  const auto table = diffusion_table(cfg.species);
  const auto state = build_initial_state(cfg, sp);
  const auto sys = make_system(sp, table, state);
  const auto c = sys.concentrations(state.c_tilde);
  out.max_U = compute_orthogonal_velocity(sp, c, table).max_abs();
  out.max_rhs = sys.rhs(state.c_tilde).max_abs();
  for (auto scheme : {Scheme::Explicit, Scheme::SemiImplicit}) {
    auto sc = stepper_config(cfg, cfl_limit(g, table, 3.0, cfg.stepper.cfl_safety));
    sc.scheme = scheme;
    sc.t_end = 200 * sc.dt;
    RunOptions<double> opt;
    opt.cadence = 1;
    opt.on_sample = [&](const SimulationState<double>& s, const Sample&) {
      out.max_c_tilde = std::max(out.max_c_tilde, s.c_tilde.max_abs());
    };
    const auto r = run(sp, table, state, sc, opt);
    out.completed = out.completed && r.record.completed();
  }
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Certificate coherence

struct CertificateRuns {
  RegimeCertificate certificate;
  long runs{0};
  long incomplete{0};
  long positivity_failures{0};
  long hs_monotonicity_failures{0};
  long weighted_monotonicity_failures{0};
  double max_initial_norm{0};
  double seconds{0};
};

/// The random-small preset with seeds 1..n_runs: eps=1 and data rescaled to
/// |c~|_{H^2} = delta_s.
inline CertificateRuns certificate_runs(int n_runs) {
  Stopwatch sw;
  CertificateRuns out;
  const auto base = *find_preset("random-small");
  out.certificate = certificate_for(base);
  for (int seed = 1; seed <= n_runs; ++seed) {
    ScenarioOverrides ov;
    ov.write_files = false;
    ov.seed = static_cast<std::uint64_t>(seed);
    const auto res = run_scenario(base, ov);
    ++out.runs;
    if (!res.record.completed()) {
      ++out.incomplete;
      if (res.record.termination->code == ErrorCode::PositivityViolated) ++out.positivity_failures;
    }
    for (const auto& s : res.record.samples)
      if (!(s.min_concentration > 0)) {
        ++out.positivity_failures;
        break;
      }
    if (first_increase(res.record.samples, NormKind::Hs) >= 0) ++out.hs_monotonicity_failures;
    if (first_increase(res.record.samples, NormKind::HsWeighted) >= 0) ++out.weighted_monotonicity_failures;
    if (!res.record.samples.empty())
      out.max_initial_norm = std::max(out.max_initial_norm, res.record.samples.front().h_s_norm);
  }
  out.seconds = sw.seconds();
  return out;
}

// --------------------------------------------------------------------------
// Verdicts

struct Verdict {
  std::string id;
  std::string title;
  bool passed{false};
  std::string detail;
};

inline std::string line(const Verdict& v) {
  return std::string(v.passed ? "PASS " : "FAIL ") + v.id + "  " + v.title + "  [" + v.detail + "]";
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Linearized binary decay rate Delta_12 k^2 / C0.
inline double linearized_binary_rate(double delta12, double C0, int k) { return delta12 * k * k / C0; }

/// The suite run by `ims verify`, judged against closed-form expectations.
inline std::vector<Verdict> run_builtin_suite(const std::function<void(const Verdict&)>& report = {}) {
  std::vector<Verdict> out;
  auto add = [&](Verdict v) {
    if (report) report(v);
    out.push_back(std::move(v));
  };
  for (int k : {1, 2}) {
    const auto m = mode_decay(k);
    const double expect = linearized_binary_rate(1, 2, k);
    const double rel = std::abs(m.rate - expect) / expect;
    add({k == 1 ? "A1" : "A2", "single-mode decay rate, k=" + std::to_string(k),
         m.completed && rel <= 0.05 && m.seconds < 10,
         "rate " + fmt(m.rate) + " vs " + fmt(expect) + ", rel " + fmt(rel) + ", " + fmt(m.seconds) + " s"});
  }
  {
    const auto s = matrix_property_suite(10000, 2024);
    add({"A3", "pointwise matrix properties", s.failures() == 0 && s.seconds < 5,
         std::to_string(s.samples) + " samples, " + std::to_string(s.failures()) + " failures, identity err " +
             fmt(s.max_identity_error) + ", " + fmt(s.seconds) + " s"});
  }
  {
    const auto c = conservation_run();
    const auto& m = c.maxima;
    const bool ok = c.record.completed() && c.record.steps == 1000 && m.mass <= 1e-10 && m.sum_zero <= 1e-9 &&
                    m.equimolar <= 1e-10 && m.incompressibility <= 1e-9 && m.min_concentration > 0 && c.seconds < 60;
    add({"A4", "conservation over 1000 steps, N=3, d=2", ok,
         "mass " + fmt(m.mass) + ", sum " + fmt(m.sum_zero) + ", equimolar " + fmt(m.equimolar) + ", incompr " +
             fmt(m.incompressibility) + ", min c " + fmt(m.min_concentration) + ", " + fmt(c.seconds) + " s"});
    add({"A5", "monotone H^2 norm and energy inequality", c.hs_increase_at < 0 && c.energy_failures == 0,
         "first increase " + std::to_string(c.hs_increase_at) + ", energy failures " +
             std::to_string(c.energy_failures) + ", worst margin " + fmt(c.worst_energy_margin)});
  }
  {
    const auto r = round_trip(100, 99);
    add({"A6", "velocity reconstruction round trip",
         r.max_U_error <= 1e-9 && r.max_u_bar_error <= 1e-9 && r.max_pseudo_solve_error <= 1e-9 && r.seconds < 5,
         "U err " + fmt(r.max_U_error) + ", u_bar err " + fmt(r.max_u_bar_error) + ", solve err " +
             fmt(r.max_pseudo_solve_error) + ", " + fmt(r.seconds) + " s"});
  }
  {
    const auto e = temporal_order(Scheme::Explicit);
    const auto s = temporal_order(Scheme::SemiImplicit);
    add({"A7", "temporal order (RK4, backward Euler)", e.order >= 3.8 && s.order >= 0.9,
         "explicit " + fmt(e.order) + ", semi-implicit " + fmt(s.order)});
  }
  {
    const auto s = stationarity();
    add({"A8", "stationarity of uniform data", s.completed && s.max_U <= 1e-13 && s.max_c_tilde <= 1e-13,
         "max U " + fmt(s.max_U) + ", max c~ " + fmt(s.max_c_tilde)});
  }
  {
    const auto c = certificate_runs(20);
    const auto& cert = c.certificate;
    const bool ok = std::abs(cert.delta_residual) <= 1e-12 && cert.delta_residual <= 0 && c.incomplete == 0 &&
                    c.positivity_failures == 0 && c.hs_monotonicity_failures == 0;
    add({"A9", "certificate coherence over 20 seeds", ok,
         "delta_s " + fmt(cert.delta_s) + ", residual " + fmt(cert.delta_residual) + ", incomplete " +
             std::to_string(c.incomplete) + ", monotonicity failures " + std::to_string(c.hs_monotonicity_failures)});
  }
  return out;
}

}  // namespace ims::verify
