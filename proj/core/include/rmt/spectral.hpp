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

#ifndef RMTLAB_SPECTRAL_HPP
#define RMTLAB_SPECTRAL_HPP

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <stdexcept>
#include <vector>

#include "rmt/ensemble.hpp"

namespace rmt {

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;

struct EigensolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Eigendecomposition with ascending eigenvalues and a deterministic phase:
// the largest-magnitude component of each eigenvector is made real-positive
// (ties broken by lowest index).
template <class Scalar>
struct SpectralData {
  Eigen::VectorXd lambda;   // ascending
  MatX<Scalar> u;           // orthonormal columns
  std::uint64_t source_seed = 0;

  int dim() const { return static_cast<int>(lambda.size()); }
};

using SpectralDataR = SpectralData<double>;
using SpectralDataC = SpectralData<Complex>;

template <class Scalar>
SpectralData<Scalar> decompose(const MatX<Scalar>& w,
                               std::uint64_t source_seed = 0);

// Convenience for the real class; complex callers use decompose(w.cplx, seed).
inline SpectralDataR decompose(const WignerSample& w) {
  if (!w.is_real()) {
    throw std::invalid_argument(
        "decompose(WignerSample): complex sample passed to real overload");
  }
  return decompose<double>(w.real, w.seed);
}

// Stieltjes transform of the semicircle: the root of m^2 + z m + 1 = 0 with
// Im m Im z > 0; rejects real z.
Complex m_sc(Complex z);

// Time-evolved transform: root of (1+t) m^2 + z m + 1 = 0 with Im m Im z > 0,
// the Burgers-characteristics solution with m_0 = m_sc.
Complex m_t(Complex z, double t);

// Semicircle density of variance 1+t: sqrt((4(1+t)-x^2)_+) / (2 pi (1+t)).
double rho_t(double x, double t);

// Closed-form CDF of rho_t.
double semicircle_cdf_t(double x, double t);

// Quantiles gamma_i(t), i = 1..N: CDF_t(gamma_i) = i/N, strictly increasing.
Eigen::VectorXd quantiles(double t, int n);

// max_i N^{2/3} min(i, N+1-i)^{1/3} |lambda_i - gamma_i(t)|; requires sorted
// input.
double rigidity_gauge(const Eigen::VectorXd& lambda_sorted, double t);

// One factor of a resolvent chain: G(z) (or Im G(z)) followed by an
// observable; a == nullptr means the identity observable.
struct ResolventFactor {
  Complex z;
  const Eigen::MatrixXd* a = nullptr;
  bool imaginary_part = false;
};

// <G(z_1) A_1 ... G(z_k) A_k> (with Im G where flagged) evaluated exactly in
// the eigenbasis; O(k N^3) via successive overlap-matrix contractions.
template <class Scalar>
Complex chain_trace(const SpectralData<Scalar>& s,
                    std::span<const ResolventFactor> factors);

// <q, G(z) q> by spectral sum; q need not be normalized (callers that want
// the unit-vector convention normalize first).
template <class Scalar>
Complex isotropic_form(const SpectralData<Scalar>& s, const VecX<Scalar>& q,
                       Complex z);

// Dense resolvent built from the spectral data: U diag(f(lambda)) U^*.
template <class Scalar>
MatX<Complex> dense_resolvent(const SpectralData<Scalar>& s, Complex z);

// diag weights Im(1/(lambda_i - z)) as a vector (the Im G eigenvalues).
Eigen::VectorXd im_resolvent_weights(const Eigen::VectorXd& lambda, Complex z);

// --- implementation ---------------------------------------------------------

// Hermitian eigensolve, ascending eigenvalues; `a` holds the eigenvectors on
// return. Throws EigensolverError on failure.
void eigh_inplace(Eigen::MatrixXd& a, Eigen::VectorXd& evals);
void eigh_inplace(Eigen::MatrixXcd& a, Eigen::VectorXd& evals);

template <class Scalar>
SpectralData<Scalar> decompose(const MatX<Scalar>& w,
                               std::uint64_t source_seed) {
  if (w.rows() != w.cols()) {
    throw std::invalid_argument("decompose: matrix must be square");
  }
  SpectralData<Scalar> out;
  out.u = w;
  eigh_inplace(out.u, out.lambda);
  out.source_seed = source_seed;
  const int n = out.dim();
  for (int k = 0; k < n; ++k) {
    int arg = 0;
    double best = -1.0;
    for (int r = 0; r < n; ++r) {
      const double mag = std::abs(out.u(r, k));
      if (mag > best + 1e-14) {  // strict improvement, ties keep lowest index
        best = mag;
        arg = r;
      }
    }
    if constexpr (std::is_same_v<Scalar, double>) {
      if (out.u(arg, k) < 0) out.u.col(k) = -out.u.col(k);
    } else {
      const Complex pivot = out.u(arg, k);
      const double mag = std::abs(pivot);
      if (mag > 0) out.u.col(k) *= std::conj(pivot) / mag;
    }
  }
  return out;
}

inline Eigen::VectorXd im_resolvent_weights(const Eigen::VectorXd& lambda,
                                            Complex z) {
  const double e = z.real();
  const double eta = z.imag();
  Eigen::VectorXd k(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double d = lambda[i] - e;
    k[i] = eta / (d * d + eta * eta);
  }
  return k;
}

template <class Scalar>
Complex chain_trace(const SpectralData<Scalar>& s,
                    std::span<const ResolventFactor> factors) {
  if (factors.empty()) throw std::invalid_argument("chain_trace: empty chain");
  const int n = s.dim();
  bool all_im = true;
  for (const auto& f : factors) {
    if (f.z.imag() == 0) {
      throw std::invalid_argument("chain_trace: spectral parameter must be nonreal");
    }
    if (f.a != nullptr && (f.a->rows() != n || f.a->cols() != n)) {
      throw std::invalid_argument("chain_trace: observable dimension mismatch");
    }
    all_im = all_im && f.imaginary_part;
  }

  auto overlap = [&](const Eigen::MatrixXd& a) -> MatX<Scalar> {
    return s.u.adjoint() * a * s.u;
  };

  // All-Im chains stay in real arithmetic for real eigenvector data.
  if constexpr (std::is_same_v<Scalar, double>) {
    if (all_im) {
      Eigen::MatrixXd acc;
      bool first = true;
      for (const auto& f : factors) {
        Eigen::VectorXd k = im_resolvent_weights(s.lambda, f.z);
        Eigen::MatrixXd term;
        if (f.a) {
          term = k.asDiagonal() * overlap(*f.a);
        } else {
          term = Eigen::MatrixXd(k.asDiagonal());
        }
        acc = first ? term : Eigen::MatrixXd(acc * term);
        first = false;
      }
      return Complex(acc.trace() / static_cast<double>(n), 0.0);
    }
  }

  MatX<Complex> acc;
  bool first = true;
  for (const auto& f : factors) {
    VecX<Complex> g(n);
    for (int i = 0; i < n; ++i) {
      const Complex r = 1.0 / (s.lambda[i] - f.z);
      g[i] = f.imaginary_part ? Complex(r.imag(), 0.0) : r;
    }
    MatX<Complex> term;
    if (f.a) {
      term = g.asDiagonal() * overlap(*f.a).template cast<Complex>();
    } else {
      term = MatX<Complex>(g.asDiagonal());
    }
    acc = first ? term : MatX<Complex>(acc * term);
    first = false;
  }
  return acc.trace() / static_cast<double>(n);
}

template <class Scalar>
Complex isotropic_form(const SpectralData<Scalar>& s, const VecX<Scalar>& q,
                       Complex z) {
  if (q.size() != s.lambda.size()) {
    throw std::invalid_argument("isotropic_form: vector dimension mismatch");
  }
  VecX<Scalar> c = s.u.adjoint() * q;
  Complex out = 0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double w = std::norm(Complex(c[i]));
    out += w / (s.lambda[i] - z);
  }
  return out;
}

template <class Scalar>
MatX<Complex> dense_resolvent(const SpectralData<Scalar>& s, Complex z) {
  const int n = s.dim();
  VecX<Complex> g(n);
  for (int i = 0; i < n; ++i) g[i] = 1.0 / (s.lambda[i] - z);
  MatX<Complex> uc = s.u.template cast<Complex>();
  return uc * g.asDiagonal() * uc.adjoint();
}

}  // namespace rmt

#endif  // RMTLAB_SPECTRAL_HPP
