#pragma once

// Periodic uniform grid on [0, 2pi)^dim with Fourier-pseudospectral operators.
//
// Point layout is row-major with axis 0 slowest:
//   p = (i0 * M + i1) * M + i2,   x_a = 2 pi i_a / M.
// Integrals use the rectangle rule with volume element (2 pi / M)^dim.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "ims/errors.hpp"
#include "ims/fft.hpp"

namespace ims {

class TorusGrid {
 public:
  TorusGrid() = default;
  TorusGrid(int dim, int points_per_axis) : dim_(dim), m_(points_per_axis) {
    if (dim < 1 || dim > 3) fail(ErrorCode::InvalidArgument, "grid dimension must be 1, 2 or 3");
    if (m_ < 8 || (m_ & (m_ - 1)) != 0)
      fail(ErrorCode::InvalidArgument, "points per axis must be a power of two >= 8");
    size_ = 1;
    for (int a = 0; a < dim_; ++a) size_ *= static_cast<std::size_t>(m_);
  }

  int dim() const { return dim_; }
  int points_per_axis() const { return m_; }
  std::size_t size() const { return size_; }

  template <class Scalar = double>
  Scalar dx() const {
    return Scalar(2) * std::numbers::pi_v<Scalar> / static_cast<Scalar>(m_);
  }

  template <class Scalar = double>
  Scalar volume() const {
    return std::pow(Scalar(2) * std::numbers::pi_v<Scalar>, static_cast<Scalar>(dim_));
  }

  template <class Scalar = double>
  Scalar cell_volume() const {
    return std::pow(dx<Scalar>(), static_cast<Scalar>(dim_));
  }

  std::array<int, 3> index(std::size_t p) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int a = dim_ - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(p % static_cast<std::size_t>(m_));
      p /= static_cast<std::size_t>(m_);
    }
    return idx;
  }

  template <class Scalar = double>
  std::array<Scalar, 3> coordinate(std::size_t p) const {
    const auto idx = index(p);
    std::array<Scalar, 3> x{0, 0, 0};
    for (int a = 0; a < dim_; ++a) x[a] = dx<Scalar>() * static_cast<Scalar>(idx[a]);
    return x;
  }

  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;

 private:
  int dim_{1};
  int m_{8};
  std::size_t size_{8};
};

template <class Scalar>
using ScalarField = std::vector<Scalar>;

/// A fixed number of scalar components over one grid, stored component-major.
template <class Scalar>
class Components {
 public:
  Components() = default;
  Components(std::size_t n_components, std::size_t n_points, Scalar fill = Scalar(0))
      : n_(n_components), points_(n_points), data_(n_components * n_points, fill) {}

  std::size_t components() const { return n_; }
  std::size_t points() const { return points_; }

  std::span<Scalar> operator[](std::size_t k) { return {data_.data() + k * points_, points_}; }
  std::span<const Scalar> operator[](std::size_t k) const {
    return {data_.data() + k * points_, points_};
  }
  Scalar& operator()(std::size_t k, std::size_t p) { return data_[k * points_ + p]; }
  Scalar operator()(std::size_t k, std::size_t p) const { return data_[k * points_ + p]; }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  void assign(std::size_t k, std::span<const Scalar> values) {
    for (std::size_t p = 0; p < points_; ++p) data_[k * points_ + p] = values[p];
  }

  /// this += a * x
  void axpy(Scalar a, const Components& x) {
    if (x.data_.size() != data_.size()) fail(ErrorCode::DimensionMismatch, "field shapes differ");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
  }

  void scale(Scalar a) {
    for (auto& v : data_) v *= a;
  }

  Scalar max_abs() const {
    Scalar m = 0;
    for (auto v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const Components&, const Components&) = default;

 private:
  std::size_t n_{0};
  std::size_t points_{0};
  std::vector<Scalar> data_;
};

/// dim spatial components.
template <class Scalar>
class VectorField : public Components<Scalar> {
 public:
  using Components<Scalar>::Components;
  VectorField(const TorusGrid& g, Scalar fill = Scalar(0))
      : Components<Scalar>(static_cast<std::size_t>(g.dim()), g.size(), fill) {}
};

/// One scalar field per species: c or its fluctuation.
template <class Scalar>
class SpeciesField : public Components<Scalar> {
 public:
  using Components<Scalar>::Components;
  SpeciesField(int n_species, const TorusGrid& g, Scalar fill = Scalar(0))
      : Components<Scalar>(static_cast<std::size_t>(n_species), g.size(), fill) {}
  int n_species() const { return static_cast<int>(this->components()); }
};

/// One vector field per species: u, U, V_U and friends. Component (i, a) is
/// species i, spatial direction a.
template <class Scalar>
class SpeciesVelocityField : public Components<Scalar> {
 public:
  SpeciesVelocityField() = default;
  SpeciesVelocityField(int n_species, const TorusGrid& g, Scalar fill = Scalar(0))
      : Components<Scalar>(static_cast<std::size_t>(n_species * g.dim()), g.size(), fill),
        n_species_(n_species),
        dim_(g.dim()) {}

  int n_species() const { return n_species_; }
  int dim() const { return dim_; }
  std::span<Scalar> at(int species, int axis) { return (*this)[index(species, axis)]; }
  std::span<const Scalar> at(int species, int axis) const { return (*this)[index(species, axis)]; }
  Scalar& operator()(int species, int axis, std::size_t p) {
    return Components<Scalar>::operator()(index(species, axis), p);
  }
  Scalar operator()(int species, int axis, std::size_t p) const {
    return Components<Scalar>::operator()(index(species, axis), p);
  }

 private:
  std::size_t index(int species, int axis) const {
    return static_cast<std::size_t>(species * dim_ + axis);
  }
  int n_species_{0};
  int dim_{0};
};

/// Multi-index alpha; unused trailing entries are zero.
using MultiIndex = std::array<int, 3>;

inline int order(const MultiIndex& alpha) { return alpha[0] + alpha[1] + alpha[2]; }

/// Every multi-index in N^dim with |alpha| <= s.
inline std::vector<MultiIndex> multi_indices_up_to(int dim, int s) {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= s; ++a)
    for (int b = 0; b <= (dim > 1 ? s - a : 0); ++b)
      for (int c = 0; c <= (dim > 2 ? s - a - b : 0); ++c) out.push_back({a, b, c});
  return out;
}

/// Every beta <= alpha componentwise.
inline std::vector<MultiIndex> sub_indices(const MultiIndex& alpha) {
  std::vector<MultiIndex> out;
  for (int a = 0; a <= alpha[0]; ++a)
    for (int b = 0; b <= alpha[1]; ++b)
      for (int c = 0; c <= alpha[2]; ++c) out.push_back({a, b, c});
  return out;
}

class SobolevOrder {
 public:
  static constexpr int max_order = 8;
  explicit SobolevOrder(int s) : s_(s) {
    if (s < 0 || s > max_order) fail(ErrorCode::InvalidArgument, "Sobolev order must be in [0, 8]");
  }
  int value() const { return s_; }

 private:
  int s_;
};

/// Spectral differential operators and norms on one TorusGrid. Internally owns
/// FFT scratch space, so one instance must not be shared across threads.
template <class Scalar>
class Spectral {
  using Complex = std::complex<Scalar>;

 public:
  explicit Spectral(const TorusGrid& grid)
      : grid_(grid), fft_(std::make_unique<fft::RealTransform<Scalar>>(grid.dim(), grid.points_per_axis())) {
    const int dim = grid_.dim();
    const int m = grid_.points_per_axis();
    const std::size_t nc = fft_->complex_size();
    std::array<int, 3> extent{1, 1, 1};
    for (int a = 0; a < dim; ++a) extent[a] = (a + 1 == dim) ? m / 2 + 1 : m;
    wavenumber_.resize(nc);
    multiplicity_.resize(nc);
    keep_.resize(nc);
    for (std::size_t q = 0; q < nc; ++q) {
      std::size_t r = q;
      std::array<int, 3> j{0, 0, 0};
      for (int a = dim - 1; a >= 0; --a) {
        j[a] = static_cast<int>(r % static_cast<std::size_t>(extent[a]));
        r /= static_cast<std::size_t>(extent[a]);
      }
      MultiIndex k{0, 0, 0};
      bool keep = true;
      for (int a = 0; a < dim; ++a) {
        k[a] = (a + 1 == dim || j[a] <= m / 2) ? j[a] : j[a] - m;
        if (3 * std::abs(k[a]) >= m) keep = false;
      }
      wavenumber_[q] = k;
      const int jl = j[dim - 1];
      multiplicity_[q] = (jl == 0 || jl == m / 2) ? 1 : 2;
      keep_[q] = keep;
    }
    spec_a_.resize(nc);
    spec_b_.resize(nc);
    real_.resize(grid_.size());
  }

  const TorusGrid& grid() const { return grid_; }
  std::size_t spectral_size() const { return wavenumber_.size(); }
  const std::vector<MultiIndex>& wavenumbers() const { return wavenumber_; }

  /// Fourier symbol of d^n/dx_axis^n at wavenumber k; odd derivatives vanish
  /// on the Nyquist mode so that they map real fields to real fields.
  Complex symbol(int k, int n) const {
    if (n == 0) return Complex(1);
    const int m = grid_.points_per_axis();
    if ((n % 2) == 1 && std::abs(k) == m / 2) return Complex(0);
    const Scalar kk = static_cast<Scalar>(k);
    Scalar mag = 1;
    for (int i = 0; i < n; ++i) mag *= kk;
    switch (n % 4) {
      case 0: return Complex(mag, 0);
      case 1: return Complex(0, mag);
      case 2: return Complex(-mag, 0);
      default: return Complex(0, -mag);
    }
  }

  Complex symbol(const MultiIndex& k, const MultiIndex& alpha) const {
    Complex s(1);
    for (int a = 0; a < grid_.dim(); ++a) s *= symbol(k[a], alpha[a]);
    return s;
  }

  void forward(std::span<const Scalar> f, std::vector<Complex>& out) const {
    out.resize(spectral_size());
    fft_->forward(f, out);
  }

  void backward(const std::vector<Complex>& in, std::span<Scalar> out) const { fft_->backward(in, out); }

  ScalarField<Scalar> partial(std::span<const Scalar> f, const MultiIndex& alpha) const {
    forward(f, spec_a_);
    for (std::size_t q = 0; q < spectral_size(); ++q) spec_a_[q] *= symbol(wavenumber_[q], alpha);
    ScalarField<Scalar> out(grid_.size());
    backward(spec_a_, out);
    return out;
  }

  ScalarField<Scalar> derivative(std::span<const Scalar> f, int axis, int n = 1) const {
    MultiIndex alpha{0, 0, 0};
    alpha[axis] = n;
    return partial(f, alpha);
  }

  VectorField<Scalar> gradient(std::span<const Scalar> f) const {
    VectorField<Scalar> g(grid_);
    gradient_into(f, g, 0);
    return g;
  }

  /// Writes the gradient of f into components [first, first + dim) of out.
  void gradient_into(std::span<const Scalar> f, Components<Scalar>& out, std::size_t first) const {
    forward(f, spec_a_);
    for (int a = 0; a < grid_.dim(); ++a) {
      for (std::size_t q = 0; q < spectral_size(); ++q)
        spec_b_[q] = spec_a_[q] * symbol(wavenumber_[q][a], 1);
      backward(spec_b_, out[first + static_cast<std::size_t>(a)]);
    }
  }

  /// Divergence of components [first, first + dim) of v. With `dealias`, the
  /// 2/3-rule mask is applied to the flux before differentiation.
  ScalarField<Scalar> divergence(const Components<Scalar>& v, std::size_t first = 0, bool dealias = false) const {
    ScalarField<Scalar> out(grid_.size());
    divergence_into(v, first, dealias, out);
    return out;
  }

  void divergence_into(const Components<Scalar>& v, std::size_t first, bool dealias, std::span<Scalar> out) const {
    spec_b_.assign(spectral_size(), Complex(0));
    for (int a = 0; a < grid_.dim(); ++a) {
      forward(v[first + static_cast<std::size_t>(a)], spec_a_);
      for (std::size_t q = 0; q < spectral_size(); ++q) spec_b_[q] += spec_a_[q] * symbol(wavenumber_[q][a], 1);
    }
    if (dealias)
      for (std::size_t q = 0; q < spectral_size(); ++q)
        if (!keep_[q]) spec_b_[q] = Complex(0);
    backward(spec_b_, out);
  }

  /// 2/3-rule truncation: zero every mode with 3|k_a| >= M on some axis.
  void dealias(std::span<Scalar> f) const {
    forward(f, spec_a_);
    for (std::size_t q = 0; q < spectral_size(); ++q)
      if (!keep_[q]) spec_a_[q] = Complex(0);
    backward(spec_a_, f);
  }

  /// Integral over the torus (rectangle rule).
  Scalar integral(std::span<const Scalar> f) const {
    Scalar s = 0;
    for (auto v : f) s += v;
    return s * grid_.cell_volume<Scalar>();
  }

  Scalar average(std::span<const Scalar> f) const { return integral(f) / grid_.volume<Scalar>(); }

  Scalar inner(std::span<const Scalar> f, std::span<const Scalar> g) const {
    Scalar s = 0;
    for (std::size_t p = 0; p < f.size(); ++p) s += f[p] * g[p];
    return s * grid_.cell_volume<Scalar>();
  }

  /// sum_{|alpha| <= s} || d^alpha f ||^2_{L^2}, evaluated in Fourier space.
  Scalar sobolev_norm_squared(std::span<const Scalar> f, int s) const {
    const auto& w = sobolev_weights(s);
    forward(f, spec_a_);
    Scalar acc = 0;
    for (std::size_t q = 0; q < spectral_size(); ++q)
      acc += static_cast<Scalar>(multiplicity_[q]) * w[q] * std::norm(spec_a_[q]);
    const Scalar n = static_cast<Scalar>(grid_.size());
    return acc * grid_.volume<Scalar>() / (n * n);
  }

  /// The H^s norm summed over all components, with optional per-component
  /// weights w_k entering as w_k^2 (the L^2(w) convention).
  Scalar sobolev_norm(const Components<Scalar>& f, SobolevOrder s, std::span<const Scalar> weight = {}) const {
    Scalar acc = 0;
    for (std::size_t k = 0; k < f.components(); ++k) {
      const Scalar w = weight.empty() ? Scalar(1) : weight[k];
      acc += w * w * sobolev_norm_squared(f[k], s.value());
    }
    return std::sqrt(acc);
  }

 private:
  const std::vector<Scalar>& sobolev_weights(int s) const {
    auto it = weights_.find(s);
    if (it != weights_.end()) return it->second;
    std::vector<Scalar> w(spectral_size(), Scalar(0));
    const auto alphas = multi_indices_up_to(grid_.dim(), s);
    for (std::size_t q = 0; q < spectral_size(); ++q)
      for (const auto& alpha : alphas) w[q] += std::norm(symbol(wavenumber_[q], alpha));
    return weights_.emplace(s, std::move(w)).first->second;
  }

  TorusGrid grid_;
  std::unique_ptr<fft::RealTransform<Scalar>> fft_;
  std::vector<MultiIndex> wavenumber_;
  std::vector<int> multiplicity_;
  std::vector<bool> keep_;
  mutable std::vector<Complex> spec_a_;
  mutable std::vector<Complex> spec_b_;
  mutable std::vector<Scalar> real_;
  mutable std::map<int, std::vector<Scalar>> weights_;
};

/// Integral of f over the torus (grid average times the domain volume).
template <class Scalar>
Scalar mean_value(const Spectral<Scalar>& sp, std::span<const Scalar> f) {
  return sp.integral(f);
}

/// Fourier mode of a stream function (d = 2) or of one component of a vector
/// potential (d = 3): amplitude * sin(k . x + phase).
template <class Scalar>
struct PotentialMode {
  MultiIndex k{1, 0, 0};
  Scalar amplitude{1};
  Scalar phase{0};
  int component{2};
};

template <class Scalar>
struct SolenoidalSpec {
  std::array<Scalar, 3> constant{0, 0, 0};
  std::vector<PotentialMode<Scalar>> modes;
};

/// Divergence-free velocity built as a constant plus a discrete curl, so the
/// discrete divergence vanishes to rounding. In d = 1 only the constant part
/// survives.
template <class Scalar>
VectorField<Scalar> make_solenoidal(const Spectral<Scalar>& sp, const SolenoidalSpec<Scalar>& spec) {
  const TorusGrid& g = sp.grid();
  const int dim = g.dim();
  VectorField<Scalar> u(g);
  for (int a = 0; a < dim; ++a)
    for (std::size_t p = 0; p < g.size(); ++p) u(static_cast<std::size_t>(a), p) = spec.constant[a];
  if (dim == 1 || spec.modes.empty()) return u;

  // components of the potential; in 2D only the scalar stream function (index 2)
  std::array<ScalarField<Scalar>, 3> pot;
  for (auto& f : pot) f.assign(g.size(), Scalar(0));
  for (const auto& mode : spec.modes) {
    const int comp = dim == 2 ? 2 : mode.component;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const auto x = g.coordinate<Scalar>(p);
      Scalar phase = mode.phase;
      for (int a = 0; a < dim; ++a) phase += static_cast<Scalar>(mode.k[a]) * x[a];
      pot[comp][p] += mode.amplitude * std::sin(phase);
    }
  }
  auto add = [&](int a, const ScalarField<Scalar>& f, Scalar sign) {
    for (std::size_t p = 0; p < g.size(); ++p) u(static_cast<std::size_t>(a), p) += sign * f[p];
  };
  if (dim == 2) {
    add(0, sp.derivative(pot[2], 1), Scalar(1));
    add(1, sp.derivative(pot[2], 0), Scalar(-1));
  } else {
    // curl (A0, A1, A2) = (d1 A2 - d2 A1, d2 A0 - d0 A2, d0 A1 - d1 A0)
    add(0, sp.derivative(pot[2], 1), Scalar(1));
    add(0, sp.derivative(pot[1], 2), Scalar(-1));
    add(1, sp.derivative(pot[0], 2), Scalar(1));
    add(1, sp.derivative(pot[2], 0), Scalar(-1));
    add(2, sp.derivative(pot[1], 0), Scalar(1));
    add(2, sp.derivative(pot[0], 1), Scalar(-1));
  }
  return u;
}

}  // namespace ims
