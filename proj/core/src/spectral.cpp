// Copyright 2026 The rmtlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rmt/spectral.hpp"

#include <cmath>

#ifdef EIGEN_USE_LAPACKE
#include <lapacke.h>
#endif

namespace rmt {

#ifdef EIGEN_USE_LAPACKE

void eigh_inplace(Eigen::MatrixXd& a, Eigen::VectorXd& evals) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  evals.resize(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                         a.data(), n, evals.data());
  if (info != 0) {
    throw EigensolverError("LAPACKE_dsyevd failed with info = " +
                           std::to_string(info));
  }
}

void eigh_inplace(Eigen::MatrixXcd& a, Eigen::VectorXd& evals) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  evals.resize(n);
  const lapack_int info = LAPACKE_zheevd(
      LAPACK_COL_MAJOR, 'V', 'L', n,
      reinterpret_cast<lapack_complex_double*>(a.data()), n, evals.data());
  if (info != 0) {
    throw EigensolverError("LAPACKE_zheevd failed with info = " +
                           std::to_string(info));
  }
}

#else

namespace {
template <class Scalar>
void eigh_eigen(MatX<Scalar>& a, Eigen::VectorXd& evals) {
  Eigen::SelfAdjointEigenSolver<MatX<Scalar>> solver(a);
  if (solver.info() != Eigen::Success) {
    throw EigensolverError("eigensolver failed to converge");
  }
  evals = solver.eigenvalues();
  a = solver.eigenvectors();
}
}  // namespace

void eigh_inplace(Eigen::MatrixXd& a, Eigen::VectorXd& evals) {
  eigh_eigen(a, evals);
}
void eigh_inplace(Eigen::MatrixXcd& a, Eigen::VectorXd& evals) {
  eigh_eigen(a, evals);
}

#endif  // EIGEN_USE_LAPACKE

namespace {

// Root of s^2 m^2 + z m + 1 = 0 (variance-s^2 semicircle transform) with
// Im m Im z > 0. Uses the cancellation-free quadratic form: the two roots are
// (-z - s)/(2 var) and its partner via the product m+ m- = 1/var.
Complex stieltjes_root(Complex z, double var) {
  if (z.imag() == 0.0) {
    throw std::invalid_argument("Stieltjes transform needs Im z != 0");
  }
  Complex s = std::sqrt(z * z - 4.0 * var);
  // align s with z so that -z - s has no subtractive cancellation
  if (z.real() * s.real() + z.imag() * s.imag() < 0.0) s = -s;
  const Complex r1 = (-z - s) / (2.0 * var);
  const Complex r2 = 1.0 / (var * r1);
  return (r1.imag() * z.imag() > 0.0) ? r1 : r2;
}

}  // namespace

Complex m_sc(Complex z) { return stieltjes_root(z, 1.0); }

Complex m_t(Complex z, double t) {
  if (t < 0) throw std::invalid_argument("m_t: time must be nonnegative");
  return stieltjes_root(z, 1.0 + t);
}

double rho_t(double x, double t) {
  const double var = 1.0 + t;
  const double rad2 = 4.0 * var - x * x;
  if (rad2 <= 0.0) return 0.0;
  return std::sqrt(rad2) / (2.0 * M_PI * var);
}

double semicircle_cdf_t(double x, double t) {
  const double sigma = std::sqrt(1.0 + t);
  const double u = x / sigma;
  if (u <= -2.0) return 0.0;
  if (u >= 2.0) return 1.0;
  return 0.5 + u * std::sqrt(4.0 - u * u) / (4.0 * M_PI) +
         std::asin(0.5 * u) / M_PI;
}

Eigen::VectorXd quantiles(double t, int n) {
  if (n < 1) throw std::invalid_argument("quantiles: N >= 1 required");
  const double edge = 2.0 * std::sqrt(1.0 + t);
  Eigen::VectorXd gamma(n);
  for (int i = 1; i <= n; ++i) {
    const double target = static_cast<double>(i) / n;
    double lo = -edge, hi = edge;
    for (int iter = 0; iter < 100; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (semicircle_cdf_t(mid, t) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    gamma[i - 1] = 0.5 * (lo + hi);
  }
  return gamma;
}

double rigidity_gauge(const Eigen::VectorXd& lambda_sorted, double t) {
  const int n = static_cast<int>(lambda_sorted.size());
  for (int i = 1; i < n; ++i) {
    if (lambda_sorted[i] < lambda_sorted[i - 1]) {
      throw std::invalid_argument("rigidity_gauge: eigenvalues must be sorted");
    }
  }
  const Eigen::VectorXd gamma = quantiles(t, n);
  const double n23 = std::pow(static_cast<double>(n), 2.0 / 3.0);
  double gauge = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double ih = static_cast<double>(std::min(i, n + 1 - i));
    const double v =
        n23 * std::cbrt(ih) * std::abs(lambda_sorted[i - 1] - gamma[i - 1]);
    gauge = std::max(gauge, v);
  }
  return gauge;
}

}  // namespace rmt
