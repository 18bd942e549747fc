// Acceptance criteria A1-A9, one PASS/FAIL line each. Expected values come
// from oracles.hpp, never from the library under test.

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ims/io.hpp"
#include "ims/verification.hpp"
#include "oracles.hpp"

namespace {

using namespace ims;
using ims::verify::fmt;

int failures = 0;

void report(const std::string& id, const std::string& title, bool ok, const std::string& detail) {
  std::printf("%s %s  %s  [%s]\n", ok ? "PASS" : "FAIL", id.c_str(), title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

oracle::MatX to_mat(const std::vector<std::vector<double>>& rows) {
  oracle::MatX m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void decay(int k) {
  const auto cfg = *find_preset("two-species-mode-1");
  const oracle::VecX cb = Eigen::Map<const oracle::VecX>(cfg.species.c_bar.data(), 2);
  const double expect = oracle::linear_rates(cb, to_mat(cfg.species.delta), k * k).front();
  const auto m = verify::mode_decay(k);
  const double rel = std::abs(m.rate - expect) / expect;
  report(k == 1 ? "A1" : "A2", "linearized decay rate, k=" + std::to_string(k),
         m.completed && rel <= 0.05 && m.seconds < 10,
         "fitted " + fmt(m.rate) + ", oracle " + fmt(expect) + ", rel " + fmt(rel) + ", r^2 " + fmt(m.r_squared) +
             ", " + fmt(m.seconds) + " s");
}

void matrix_suite() {
  double worst_entry = 0, worst_pair = 0;
  const auto s = verify::matrix_property_suite(10000, 31337, [&](const verify::MatrixSample& smp, const MsMatrix<double>& a) {
    const oracle::MatX ref = oracle::ms_matrix(smp.c, smp.table.matrix());
    const double scale = ref.cwiseAbs().maxCoeff();
    const double de = (a.entries - ref).cwiseAbs().maxCoeff() / scale;
    const double ps = oracle::pair_sum(smp.c, smp.table.matrix(), smp.x);
    const double dp = std::abs(quadratic_form(a, smp.x) - ps) / std::max(std::abs(ps), 1e-300);
    worst_entry = std::max(worst_entry, de);
    worst_pair = std::max(worst_pair, dp);
    return static_cast<long>(de > 1e-14) + static_cast<long>(dp > 1e-12);
  });
  report("A3", "matrix property suite", s.samples == 10000 && s.failures() == 0 && s.seconds < 5,
         std::to_string(s.samples) + " samples; failures kernel " + std::to_string(s.kernel_failures) + ", symmetry " +
             std::to_string(s.symmetry_failures) + ", identity " + std::to_string(s.identity_failures) + ", gap " +
             std::to_string(s.gap_failures) + ", operator " + std::to_string(s.operator_failures) + ", pinv norm " +
             std::to_string(s.pinv_norm_failures) + ", pinv coercivity " + std::to_string(s.pinv_coercivity_failures) +
             "; oracle entry err " + fmt(worst_entry) + ", pair-sum err " + fmt(worst_pair) + ", " + fmt(s.seconds) +
             " s");
}

void conservation() {
  const auto cfg = *find_preset("three-species-2d");
  const auto c = verify::conservation_run();
  const auto& m = c.maxima;
  const bool a4 = c.record.completed() && c.record.steps == 1000 && c.max_u_bar > 0 && m.mass <= 1e-10 &&
                  m.sum_zero <= 1e-9 && m.equimolar <= 1e-10 && m.incompressibility <= 1e-9 &&
                  m.min_concentration > 0 && c.seconds < 60;
  report("A4", "conservation, N=3 d=2 M=32, 1000 steps", a4,
         "steps " + std::to_string(c.record.steps) + ", |u_bar| " + fmt(c.max_u_bar) + ", mean drift " + fmt(m.mass) +
             ", species sum " + fmt(m.sum_zero) + ", equimolar " + fmt(m.equimolar) + ", incompressibility " +
             fmt(m.incompressibility) + ", min c " + fmt(m.min_concentration) + ", " + fmt(c.seconds) + " s");

  // monotonicity and the energy inequality, recomputed from the samples
  const auto& smp = c.record.samples;
  const double lam = oracle::lambda_A(to_mat(cfg.species.delta));
  double cmin = cfg.species.c_bar[0];
  for (double v : cfg.species.c_bar) cmin = std::min(cmin, v);
  long increases = 0, energy = 0;
  double worst_growth = -1e300, worst_margin = -1e300;
  for (std::size_t i = 1; i < smp.size(); ++i) {
    const double growth = smp[i].h_s_norm - smp[i - 1].h_s_norm;
    worst_growth = std::max(worst_growth, growth);
    if (growth > 1e-10) ++increases;
    const double dt = smp[i].t - smp[i - 1].t;
    const double e0 = smp[i - 1].h_s_weighted * smp[i - 1].h_s_weighted;
    const double e1 = smp[i].h_s_weighted * smp[i].h_s_weighted;
    const double u2 = 0.5 * (std::pow(smp[i - 1].u_tilde_hs_norm, 2) + std::pow(smp[i].u_tilde_hs_norm, 2));
    const double lhs = (e1 - e0) / dt;
    const double rhs = -lam * cmin * cmin / 2 * u2;
    worst_margin = std::max(worst_margin, lhs - rhs);
    if (lhs > rhs + 1e-10 * std::max(1.0, std::abs(rhs))) ++energy;
  }
  report("A5", "monotone H^2 norm and energy inequality", smp.size() > 2 && increases == 0 && energy == 0,
         std::to_string(smp.size()) + " samples, increases " + std::to_string(increases) + " (worst step " +
             fmt(worst_growth) + "), energy violations " + std::to_string(energy) + " (worst lhs-rhs " +
             fmt(worst_margin) + ")");
}

void round_trip() {
  const auto r = verify::round_trip(100, 4242);
  report("A6", "velocity reconstruction round trip",
         r.states == 100 && r.max_U_error <= 1e-9 && r.max_u_bar_error <= 1e-9 && r.max_equimolar <= 1e-9 &&
             r.max_pseudo_solve_error <= 1e-9 && r.seconds < 5,
         std::to_string(r.states) + " states, U err " + fmt(r.max_U_error) + ", u_bar err " + fmt(r.max_u_bar_error) +
             ", equimolar " + fmt(r.max_equimolar) + ", solve err " + fmt(r.max_pseudo_solve_error) + ", " +
             fmt(r.seconds) + " s");
}

void order() {
  const auto e = verify::temporal_order(Scheme::Explicit);
  const auto s = verify::temporal_order(Scheme::SemiImplicit);
  const double oe = std::log2(e.error_dt / e.error_half);
  const double os = std::log2(s.error_dt / s.error_half);
  report("A7", "temporal order against a dt/64 reference", oe >= 3.8 && os >= 0.9,
         "RK4 " + fmt(oe) + " (errors " + fmt(e.error_dt) + ", " + fmt(e.error_half) + "), semi-implicit " + fmt(os) +
             " (errors " + fmt(s.error_dt) + ", " + fmt(s.error_half) + ")");
}

void stationarity() {
  const auto s = verify::stationarity();
  report("A8", "uniform data stays uniform", s.completed && s.max_U <= 1e-13 && s.max_c_tilde <= 1e-13,
         "max |U| " + fmt(s.max_U) + ", max |c~| " + fmt(s.max_c_tilde) + ", max |rhs| " + fmt(s.max_rhs) +
             ", both schemes");
}

void certificate() {
  const auto base = *find_preset("random-small");
  const auto c = verify::certificate_runs(20);
  const auto& cert = c.certificate;
  const double lam = oracle::lambda_A(to_mat(base.species.delta));
  double cmin = base.species.c_bar[0];
  for (double v : base.species.c_bar) cmin = std::min(cmin, v);
  const double res = oracle::delta_equation_residual(base.diagnostics.C_s_param, lam, cmin, cert.delta_s);
  const double root = oracle::delta_root(base.diagnostics.C_s_param, lam, cmin);
  const bool ok = std::abs(res) <= 1e-12 && res <= 0 && std::abs(cert.delta_s - root) <= 1e-12 && c.runs == 20 &&
                  c.incomplete == 0 && c.positivity_failures == 0 && c.hs_monotonicity_failures == 0 &&
                  c.max_initial_norm <= cert.delta_s * (1 + 1e-12);
  report("A9", "certificate coherence, 20 seeds", ok,
         "delta_s " + fmt(cert.delta_s) + ", Newton root " + fmt(root) + ", residual " + fmt(res) + ", max |c~in|_H2 " +
             fmt(c.max_initial_norm) + ", incomplete " + std::to_string(c.incomplete) + ", positivity " +
             std::to_string(c.positivity_failures) + ", monotonicity " + std::to_string(c.hs_monotonicity_failures));
}

}  // namespace

int main() {
  decay(1);
  decay(2);
  matrix_suite();
  conservation();
  round_trip();
  order();
  stationarity();
  certificate();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
