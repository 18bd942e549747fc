#pragma once

// Reference values computed without the library: plain loops, dense Eigen
// decompositions and closed forms.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// A(c): off-diagonal c_i c_j / Delta_ij, diagonal minus the rest of the row.
inline MatX ms_matrix(const VecX& c, const MatX& delta) {
  const auto n = c.size();
  MatX a = MatX::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) {
        a(i, j) = c(i) * c(j) / delta(i, j);
        a(i, i) -= c(i) * c(j) / delta(i, j);
      }
  return a;
}

/// -1/2 sum_{i != j} c_i c_j / Delta_ij (x_i - x_j)^2.
inline double pair_sum(const VecX& c, const MatX& delta, const VecX& x) {
  double s = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    for (Eigen::Index j = 0; j < c.size(); ++j)
      if (i != j) s -= 0.5 * c(i) * c(j) / delta(i, j) * (x(i) - x(j)) * (x(i) - x(j));
  return s;
}

/// Moore-Penrose pseudoinverse by complete orthogonal decomposition.
inline MatX pinv(const MatX& a) { return Eigen::CompleteOrthogonalDecomposition<MatX>(a).pseudoInverse(); }

/// Decay rates of a Fourier mode with |k|^2 = k2 for the system linearized
/// at c_bar. The mode amplitude obeys a' = -G a with
///   G = -k2 diag(c_bar) (I - 1 c_bar^T / C0) A(c_bar)^+,
/// which maps into 1-perp; the rates are the eigenvalues of G there, sorted
/// ascending.
inline std::vector<double> linear_rates(const VecX& c_bar, const MatX& delta, double k2) {
  const auto n = c_bar.size();
  const double c0 = c_bar.sum();
  const MatX proj = MatX::Identity(n, n) - VecX::Ones(n) * c_bar.transpose() / c0;
  const MatX m = -k2 * c_bar.asDiagonal() * proj * pinv(ms_matrix(c_bar, delta));
  const MatX full_q = Eigen::HouseholderQR<MatX>(MatX(VecX::Ones(n))).householderQ();
  const MatX q = full_q.rightCols(n - 1);
  const MatX r = q.transpose() * m * q;
  Eigen::EigenSolver<MatX> es(r);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i).real());
  std::sort(out.begin(), out.end());
  return out;
}

inline double lambda_A(const MatX& delta) {
  double mx = 0;
  for (Eigen::Index i = 0; i < delta.rows(); ++i)
    for (Eigen::Index j = 0; j < delta.cols(); ++j)
      if (i != j) mx = std::max(mx, delta(i, j));
  return 1 / mx;
}

/// Root of C_s x ((1+x)^4 + (1+x)^3) = lambda_A (min c_bar)^2 / 2 by Newton's
/// method from x = 0; the left side is convex and increasing for x >= 0.
inline double delta_root(double C_s, double lam, double cmin) {
  const double target = lam * cmin * cmin / 2;
  double x = 0;
  for (int it = 0; it < 200; ++it) {
    const double y = 1 + x;
    const double f = C_s * x * (std::pow(y, 4) + std::pow(y, 3)) - target;
    const double df = C_s * ((std::pow(y, 4) + std::pow(y, 3)) + x * (4 * std::pow(y, 3) + 3 * y * y));
    const double step = f / df;
    x -= step;
    if (std::abs(step) <= 1e-17 * std::max(1.0, x)) break;
  }
  return x;
}

inline double delta_equation_residual(double C_s, double lam, double cmin, double x) {
  const double y = 1 + x;
  return C_s * x * (y * y * y * y + y * y * y) - lam * cmin * cmin / 2;
}

/// |a sin(k.x)|^2_{H^s} on [0, 2pi)^dim: (a^2/2)(2pi)^dim sum_{|alpha|<=s} prod k_i^{2 alpha_i}.
inline double hs_norm_sq_sine(const std::vector<int>& k, int s, double amplitude) {
  const int dim = static_cast<int>(k.size());
  double weight = 0;
  std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
  auto rec = [&](auto&& self, int axis, int left) -> void {
    if (axis == dim) {
      double w = 1;
      for (int a = 0; a < dim; ++a) w *= std::pow(static_cast<double>(k[static_cast<std::size_t>(a)]), 2 * alpha[static_cast<std::size_t>(a)]);
      weight += w;
      return;
    }
    for (int j = 0; j <= left; ++j) {
      alpha[static_cast<std::size_t>(axis)] = j;
      self(self, axis + 1, left - j);
    }
  };
  rec(rec, 0, s);
  return amplitude * amplitude / 2 * std::pow(2 * std::numbers::pi, dim) * weight;
}

/// H^s norm squared of periodic 1D samples by a direct O(M^2) DFT.
inline double hs_norm_sq_direct(const std::vector<double>& f, int s) {
  const int m = static_cast<int>(f.size());
  double acc = 0;
  for (int k = -m / 2 + 1; k < m / 2; ++k) {
    std::complex<double> c = 0;
    for (int j = 0; j < m; ++j) c += f[static_cast<std::size_t>(j)] * std::polar(1.0, -2 * std::numbers::pi * k * j / m);
    c /= m;
    double w = 0;
    for (int q = 0; q <= s; ++q) w += std::pow(static_cast<double>(k) * k, q);
    acc += w * std::norm(c);
  }
  return 2 * std::numbers::pi * acc;
}

/// Negated least-squares slope of log y against t.
inline double log_slope_rate(const std::vector<double>& t, const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double ly = std::log(y[i]);
    st += t[i];
    sy += ly;
    stt += t[i] * t[i];
    sty += t[i] * ly;
  }
  return -(n * sty - st * sy) / (n * stt - st * st);
}

}  // namespace oracle
