#include <gtest/gtest.h>

#include "helpers.hpp"
#include "ims/orthogonal.hpp"
#include "ims/state.hpp"
#include "oracles.hpp"

using namespace ims;

namespace {

DiffusionTable<double> ternary_table() {
  Mat<double> d(3, 3);
  d << 0, 1, 1.5, 1, 0, 2, 1.5, 2, 0;
  return DiffusionTable<double>(d);
}

Vec<double> ternary_c_bar() {
  Vec<double> c(3);
  c << 0.8, 1.0, 1.2;
  return c;
}

SpeciesField<double> concentrations(const SpeciesField<double>& ct, const Vec<double>& cb, double eps) {
  SpeciesField<double> c = ct;
  for (int i = 0; i < cb.size(); ++i)
    for (auto& v : c[static_cast<std::size_t>(i)]) v = cb(i) + eps * v;
  return c;
}

VectorField<double> flow(const Spectral<double>& sp) {
  SolenoidalSpec<double> spec;
  spec.modes = {{{1, 1, 0}, 0.3, 0.2, 2}, {{2, -1, 0}, 0.1, 1.0, 2}};
  return make_solenoidal(sp, spec);
}

}  // namespace

TEST(OrthogonalVelocity, SolvesPointwiseSystemOnOnesPerp) {
  const TorusGrid g(2, 16);
  const Spectral<double> sp(g);
  const auto d = ternary_table();
  const auto cb = ternary_c_bar();
  const auto ct = random_perturbation<double>(g, 3, 2, 1.0, 3);
  const auto c = concentrations(ct, cb, 0.2);
  const auto U = compute_orthogonal_velocity(sp, c, d);
  const auto grad = detail::species_gradient(sp, c);
  for (std::size_t p = 0; p < g.size(); ++p) {
    oracle::VecX cp(3);
    for (int i = 0; i < 3; ++i) cp(i) = c(static_cast<std::size_t>(i), p);
    const oracle::MatX gpinv = oracle::pinv(oracle::ms_matrix(cp, d.matrix()));
    for (int a = 0; a < 2; ++a) {
      oracle::VecX b(3);
      for (int i = 0; i < 3; ++i) b(i) = grad(i, a, p);
      const oracle::VecX ref = gpinv * b;
      for (int i = 0; i < 3; ++i) EXPECT_NEAR(U(i, a, p), ref(i), 1e-10);
      EXPECT_NEAR(U(0, a, p) + U(1, a, p) + U(2, a, p), 0, 1e-12);
    }
  }
}

TEST(OrthogonalVelocity, Errors) {
  const TorusGrid g(1, 16);
  const Spectral<double> sp(g);
  const auto d = DiffusionTable<double>::uniform(2, 1.0);
  SpeciesField<double> c(2, g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coordinate<double>(p)[0];
    c(0, p) = 1 + 0.1 * std::sin(x);
    c(1, p) = 1 + 0.1 * std::sin(x);
  }
  EXPECT_IMS_ERROR(compute_orthogonal_velocity(sp, c, d), ErrorCode::GradientNotOrthogonal);
  c(0, 3) = 0;
  EXPECT_IMS_ERROR(compute_orthogonal_velocity(sp, c, d), ErrorCode::NonPositiveConcentration);
  EXPECT_IMS_ERROR(compute_orthogonal_velocity(sp, c, DiffusionTable<double>::uniform(3, 1.0)),
                   ErrorCode::DimensionMismatch);
}

TEST(OrthogonalProperty, EquimolarAndReconstruction) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const TorusGrid g(2, 16);
    const Spectral<double> sp(g);
    const auto d = ternary_table();
    const auto cb = ternary_c_bar();
    const auto c = concentrations(random_perturbation<double>(g, 3, 2, 1.0, rng()), cb, uniform(rng, 0.05, 0.5));
    OrthogonalState<double> st{c, compute_orthogonal_velocity(sp, c, d), flow(sp), cb.sum()};
    validate(sp, st);
    const auto V = equimolar_velocity(c, st.U);
    const auto u = reconstruct_full_velocity(st);
    for (std::size_t p = 0; p < g.size(); ++p)
      for (int a = 0; a < 2; ++a) {
        double cv = 0, cu = 0, tot = 0;
        for (int i = 0; i < 3; ++i) {
          cv += c(static_cast<std::size_t>(i), p) * V(i, a, p);
          cu += c(static_cast<std::size_t>(i), p) * u(i, a, p);
          tot += c(static_cast<std::size_t>(i), p);
        }
        EXPECT_NEAR(cv, 0, 1e-12);
        EXPECT_NEAR(cu / tot, st.u_bar(static_cast<std::size_t>(a), p), 1e-12);
      }
    const auto [U2, ub2] = split_velocity(c, u, g);
    auto dU = U2;
    dU.axpy(-1, st.U);
    auto du = ub2;
    du.axpy(-1, st.u_bar);
    EXPECT_LE(dU.max_abs(), 1e-12);
    EXPECT_LE(du.max_abs(), 1e-12);
  }
}

TEST(Rhs, BinarySymmetricModeIsExactlyLinear) {
  // c1 V1 = -(1/2) d_x c~1 for c_bar = (1,1), Delta = 1 at every amplitude, so
  // the right side is -c~/2 whatever eps is.
  const TorusGrid g(1, 64);
  const Spectral<double> sp(g);
  Vec<double> cb(2), pattern(2);
  cb << 1, 1;
  pattern << 1, -1;
  const auto ct = mode_perturbation<double>(g, pattern, {1, 0, 0}, 1.0);
  for (double eps : {1e-3, 0.3, 0.9}) {
    const auto r = rhs_orthogonal(sp, ct, DiffusionTable<double>::uniform(2, 1.0), VectorField<double>(g), eps, cb);
    for (std::size_t p = 0; p < g.size(); ++p)
      for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r(i, p), -0.5 * ct(i, p), 1e-13);
  }
}

TEST(RhsProperty, ConservesMassAndSpeciesSum) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const TorusGrid g(2, 32);
    const Spectral<double> sp(g);
    const auto ct = random_perturbation<double>(g, 3, 3, 1.0, rng());
    const OrthogonalSystem<double> sys(sp, ternary_table(), ternary_c_bar(), uniform(rng, 0.01, 0.5), flow(sp));
    const auto r = sys.rhs(ct);
    EXPECT_LE(species_sum_residual(r), 1e-13);
    EXPECT_LE(mean_residual(r), 1e-14);
  }
}

TEST(Rhs, UniformStateIsStationary) {
  const TorusGrid g(2, 16);
  const Spectral<double> sp(g);
  const OrthogonalSystem<double> sys(sp, ternary_table(), ternary_c_bar(), 0.5, flow(sp));
  const SpeciesField<double> zero(3, g);
  EXPECT_EQ(sys.orthogonal_velocity(zero).max_abs(), 0);
  EXPECT_LE(sys.rhs(zero).max_abs(), 1e-15);
}

TEST(FrozenDiffusion, ReproducesRhsWithoutFlow) {
  const TorusGrid g(2, 16);
  const Spectral<double> sp(g);
  const auto ct = random_perturbation<double>(g, 3, 2, 1.0, 9);
  const OrthogonalSystem<double> sys(sp, ternary_table(), ternary_c_bar(), 0.3, VectorField<double>(g));
  const FrozenDiffusion<double> k(sp, ternary_table(), sys.concentrations(ct));
  const auto kw = k.apply(ct);
  const auto r = sys.rhs(ct);
  for (std::size_t q = 0; q < r.data().size(); ++q) EXPECT_NEAR(kw.data()[q], -r.data()[q], 1e-12);
}

TEST(FrozenDiffusion, IsDissipativeInWeightedPairing) {
  // At c = c_bar the operator is symmetric negative on sum-zero fields in the
  // c_bar^{-1} pairing, so <w, K w>_{c_bar^{-1}} >= 0.
  const TorusGrid g(1, 32);
  const Spectral<double> sp(g);
  const auto cb = ternary_c_bar();
  const FrozenDiffusion<double> k(sp, ternary_table(), concentrations(SpeciesField<double>(3, g), cb, 1));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto w = random_perturbation<double>(g, 3, 4, 1.0, seed);
    const auto kw = k.apply(w);
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += sp.inner(w[i], kw[i]) / cb(static_cast<Eigen::Index>(i));
    EXPECT_GT(s, 0);
  }
}
