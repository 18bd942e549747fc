#include <gtest/gtest.h>

#include <numbers>

#include "helpers.hpp"
#include "ims/grid.hpp"
#include "oracles.hpp"

using namespace ims;

namespace {

ScalarField<double> sample(const TorusGrid& g, auto&& f) {
  ScalarField<double> out(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) out[p] = f(g.coordinate<double>(p));
  return out;
}

}  // namespace

TEST(TorusGrid, Geometry) {
  const TorusGrid g(2, 16);
  EXPECT_EQ(g.size(), 256u);
  EXPECT_DOUBLE_EQ(g.dx<double>(), 2 * std::numbers::pi / 16);
  EXPECT_DOUBLE_EQ(g.volume<double>(), 4 * std::numbers::pi * std::numbers::pi);
  const auto idx = g.index(17);
  EXPECT_EQ(idx[0] * 16 + idx[1], 17);
  EXPECT_IMS_ERROR(TorusGrid(4, 16), ErrorCode::InvalidArgument);
  EXPECT_IMS_ERROR(TorusGrid(1, 12), ErrorCode::InvalidArgument);
  EXPECT_IMS_ERROR(TorusGrid(1, 4), ErrorCode::InvalidArgument);
}

TEST(MultiIndex, Counts) {
  // C(s + d, d) multi-indices of order at most s
  EXPECT_EQ(multi_indices_up_to(1, 3).size(), 4u);
  EXPECT_EQ(multi_indices_up_to(2, 2).size(), 6u);
  EXPECT_EQ(multi_indices_up_to(3, 2).size(), 10u);
  EXPECT_EQ(sub_indices({2, 1, 0}).size(), 6u);
  EXPECT_IMS_ERROR(SobolevOrder(9), ErrorCode::InvalidArgument);
  EXPECT_IMS_ERROR(SobolevOrder(-1), ErrorCode::InvalidArgument);
}

TEST(Spectral, DerivativesOfTrigonometricFields) {
  const TorusGrid g(2, 32);
  const Spectral<double> sp(g);
  const auto f = sample(g, [](auto x) { return std::sin(3 * x[0]) * std::cos(2 * x[1]); });
  const auto fx = sp.derivative(f, 0);
  const auto fyy = sp.derivative(f, 1, 2);
  const auto fxy = sp.partial(f, {1, 1, 0});
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto x = g.coordinate<double>(p);
    EXPECT_NEAR(fx[p], 3 * std::cos(3 * x[0]) * std::cos(2 * x[1]), 1e-12);
    EXPECT_NEAR(fyy[p], -4 * f[p], 1e-12);
    EXPECT_NEAR(fxy[p], -6 * std::cos(3 * x[0]) * std::sin(2 * x[1]), 1e-12);
  }
}

TEST(Spectral, SobolevNormOfSineMatchesClosedForm) {
  for (int dim : {1, 2, 3}) {
    const TorusGrid g(dim, dim == 3 ? 16 : 32);
    const Spectral<double> sp(g);
    std::vector<int> k = {2, -1, 3};
    k.resize(static_cast<std::size_t>(dim));
    const auto f = sample(g, [&](auto x) {
      double ph = 0;
      for (int a = 0; a < dim; ++a) ph += k[static_cast<std::size_t>(a)] * x[a];
      return 0.7 * std::sin(ph);
    });
    for (int s : {0, 1, 2, 3}) {
      const double ref = oracle::hs_norm_sq_sine(k, s, 0.7);
      EXPECT_NEAR(sp.sobolev_norm_squared(f, s), ref, 1e-10 * ref) << "dim " << dim << " s " << s;
    }
  }
}

TEST(Spectral, SobolevNormMatchesDirectTransform) {
  const TorusGrid g(1, 64);
  const Spectral<double> sp(g);
  std::mt19937_64 rng(5);
  std::vector<double> f(64);
  for (int k = 1; k < 10; ++k) {
    const double a = uniform(rng, -1, 1), b = uniform(rng, -1, 1);
    for (std::size_t p = 0; p < 64; ++p) {
      const double x = g.coordinate<double>(p)[0];
      f[p] += a * std::cos(k * x) + b * std::sin(k * x);
    }
  }
  for (int s : {0, 2, 4}) {
    const double ref = oracle::hs_norm_sq_direct(f, s);
    EXPECT_NEAR(sp.sobolev_norm_squared(f, s), ref, 1e-11 * ref);
  }
}

TEST(Spectral, WeightedComponentNorm) {
  const TorusGrid g(1, 32);
  const Spectral<double> sp(g);
  Components<double> f(2, g.size());
  const auto s1 = sample(g, [](auto x) { return std::sin(x[0]); });
  f.assign(0, s1);
  f.assign(1, s1);
  const std::vector<double> w = {2.0, 0.5};
  const double one = sp.sobolev_norm_squared(s1, 2);
  EXPECT_NEAR(sp.sobolev_norm(f, SobolevOrder(2), w), std::sqrt(4.25 * one), 1e-12);
  EXPECT_NEAR(sp.sobolev_norm(f, SobolevOrder(2)), std::sqrt(2 * one), 1e-12);
}

TEST(Spectral, IntegralAndInner) {
  const TorusGrid g(2, 16);
  const Spectral<double> sp(g);
  const auto one = sample(g, [](auto) { return 1.0; });
  const auto s = sample(g, [](auto x) { return std::sin(x[0] + x[1]); });
  EXPECT_NEAR(sp.integral(one), g.volume<double>(), 1e-12);
  EXPECT_NEAR(sp.average(one), 1, 1e-15);
  EXPECT_NEAR(sp.integral(s), 0, 1e-12);
  EXPECT_NEAR(sp.inner(s, s), g.volume<double>() / 2, 1e-12);
  EXPECT_NEAR(mean_value(sp, std::span<const double>(one)), g.volume<double>(), 1e-12);
}

TEST(Spectral, DealiasRemovesHighModesOnly) {
  const TorusGrid g(1, 32);
  const Spectral<double> sp(g);
  auto low = sample(g, [](auto x) { return std::cos(5 * x[0]); });
  auto high = sample(g, [](auto x) { return std::cos(11 * x[0]); });
  const auto low0 = low;
  sp.dealias(low);
  sp.dealias(high);
  for (std::size_t p = 0; p < g.size(); ++p) {
    EXPECT_NEAR(low[p], low0[p], 1e-14);
    EXPECT_NEAR(high[p], 0, 1e-14);
  }
}

TEST(Spectral, DivergenceOfGradientIsLaplacian) {
  const TorusGrid g(3, 16);
  const Spectral<double> sp(g);
  const auto f = sample(g, [](auto x) { return std::cos(x[0] - 2 * x[1] + x[2]); });
  const auto lap = sp.divergence(sp.gradient(f));
  for (std::size_t p = 0; p < g.size(); ++p) EXPECT_NEAR(lap[p], -6 * f[p], 1e-11);
}

TEST(Solenoidal, DiscreteDivergenceVanishes) {
  for (int dim : {2, 3}) {
    const TorusGrid g(dim, 16);
    const Spectral<double> sp(g);
    SolenoidalSpec<double> spec;
    spec.constant = {0.1, -0.2, 0.3};
    spec.modes = {{{1, 2, 0}, 0.5, 0.3, 0}, {{2, -1, 1}, 0.25, 1.1, 1}, {{1, 1, 1}, 0.1, 0.0, 2}};
    const auto u = make_solenoidal(sp, spec);
    EXPECT_GT(u.max_abs(), 0.1);
    const auto div = sp.divergence(u);
    for (double v : div) EXPECT_NEAR(v, 0, 1e-13);
  }
  const TorusGrid g1(1, 16);
  SolenoidalSpec<double> spec;
  spec.constant = {0.4, 0, 0};
  spec.modes = {{{1, 0, 0}, 1, 0, 2}};
  const auto u = make_solenoidal(Spectral<double>(g1), spec);
  for (double v : u[0]) EXPECT_DOUBLE_EQ(v, 0.4);
}

TEST(Spectral, LongDoubleAgrees) {
  const TorusGrid g(1, 32);
  const Spectral<long double> sp(g);
  std::vector<long double> f(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) f[p] = std::sin(2 * g.coordinate<long double>(p)[0]);
  const auto d = sp.derivative(f, 0);
  for (std::size_t p = 0; p < g.size(); ++p)
    EXPECT_NEAR(static_cast<double>(d[p] - 2 * std::cos(2 * g.coordinate<long double>(p)[0])), 0, 1e-16);
}
