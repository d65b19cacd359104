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

#ifndef RMTLAB_OVERLAP_HPP
#define RMTLAB_OVERLAP_HPP

#include <cmath>
#include <span>
#include <vector>

#include "rmt/spectral.hpp"

namespace rmt {

// p_ij = <u_i, Aring u_j> for the traceless part of the observable.
// Hermitian by construction; sum_i p_ii = 0 and sum_ij |p_ij|^2 = N <Aring^2>
// up to roundoff.
template <class Scalar>
struct OverlapTable {
  MatX<Scalar> p;
  double msq = 0;  // <Aring^2>
  int dim() const { return static_cast<int>(p.rows()); }
};

using OverlapTableR = OverlapTable<double>;
using OverlapTableC = OverlapTable<Complex>;

template <class Scalar>
OverlapTable<Scalar> overlaps(const SpectralData<Scalar>& s,
                              const Observable& obs) {
  if (obs.a.rows() != s.lambda.size()) {
    throw std::invalid_argument("overlaps: dimension mismatch");
  }
  OverlapTable<Scalar> t;
  MatX<Scalar> raw = s.u.adjoint() * obs.aring * s.u;
  t.p = Scalar(0.5) * (raw + raw.adjoint());
  t.msq = obs.msq;
  return t;
}

struct IndexWindow {
  int lo = 0;   // inclusive
  int hi = -1;  // inclusive; -1 means last index
  int resolve_hi(int n) const { return hi < 0 ? n - 1 : hi; }
};

// X_i = sqrt(beta N / (2 <Aring^2>)) Re p_ii.
template <class Scalar>
double clt_statistic(const OverlapTable<Scalar>& t, int i, int beta,
                     double delta_prime = 1e-12) {
  if (t.msq < delta_prime) {
    throw std::invalid_argument(
        "clt_statistic: degenerate observable, <Aring^2> below delta'");
  }
  const double pii = std::real(Complex(t.p(i, i)));
  return std::sqrt(beta * t.dim() / (2.0 * t.msq)) * pii;
}

// max over the window of |p_ij| (the traceless part absorbs <A> delta_ij).
template <class Scalar>
double eth_max(const OverlapTable<Scalar>& t, IndexWindow w = {}) {
  const int n = t.dim();
  const int hi = w.resolve_hi(n);
  if (w.lo < 0 || hi >= n || w.lo > hi) {
    throw std::invalid_argument("eth_max: empty or out-of-range window");
  }
  double best = 0.0;
  for (int i = w.lo; i <= hi; ++i)
    for (int j = w.lo; j <= hi; ++j)
      best = std::max(best, std::abs(Complex(t.p(i, j))));
  return best;
}

struct IdentityGap {
  double lhs = 0;
  double rhs = 0;
  double gap = 0;
};

// <q, Im G(lambda_i + i eta) q> equals the kernel-regularized average of
// N |<u_i', q>|^2; exact for any eta > 0 when evaluated at lambda_i.
template <class Scalar>
IdentityGap identity_qgq(const SpectralData<Scalar>& s, const VecX<Scalar>& q,
                         int i, double eta) {
  if (eta <= 0) throw std::invalid_argument("identity_qgq: eta > 0 required");
  const int n = s.dim();
  const Complex z(s.lambda[i], eta);
  const Eigen::VectorXd k = im_resolvent_weights(s.lambda, z);
  VecX<Scalar> c = s.u.adjoint() * q;
  // (1/N) sum_r k_r * N |<u_r, q>|^2
  double lhs = 0;
  for (int r = 0; r < n; ++r) {
    lhs += k[r] * std::norm(Complex(c[r]));
  }
  const double rhs = isotropic_form(s, q, z).imag();
  return {lhs, rhs, std::abs(lhs - rhs)};
}

// One-index regularized average of N |p_{i'j}|^2 vs
// <u_j, A Im G(lambda_i + i eta) A u_j>; the right side is evaluated through
// dense matrix products in the original coordinates.
template <class Scalar>
IdentityGap identity_one_index(const SpectralData<Scalar>& s,
                               const Observable& obs,
                               const OverlapTable<Scalar>& t, int i, int j,
                               double eta) {
  if (eta <= 0) throw std::invalid_argument("identity_one_index: eta > 0 required");
  const int n = s.dim();
  const Complex z(s.lambda[i], eta);
  const Eigen::VectorXd k = im_resolvent_weights(s.lambda, z);
  // (1/N) sum_r k_r * N |p_{r j}|^2
  double lhs = 0;
  for (int r = 0; r < n; ++r) {
    lhs += k[r] * std::norm(Complex(t.p(r, j)));
  }
  const Eigen::MatrixXd img = dense_resolvent(s, z).imag();
  VecX<Complex> uj(n);
  for (int r = 0; r < n; ++r) uj[r] = Complex(s.u(r, j));
  const VecX<Complex> w = obs.aring.cast<Complex>() * uj;
  const double rhs = std::real(w.dot(img.cast<Complex>() * w));
  return {lhs, rhs, std::abs(lhs - rhs)};
}

// Two-index regularized average of N |p_{i'j'}|^2 vs the two-resolvent trace
// <A Im G(lambda_i + i eta) A Im G(lambda_j + i eta)>.
template <class Scalar>
IdentityGap identity_two_index(const SpectralData<Scalar>& s,
                               const Observable& obs,
                               const OverlapTable<Scalar>& t, int i, int j,
                               double eta) {
  if (eta <= 0) throw std::invalid_argument("identity_two_index: eta > 0 required");
  const int n = s.dim();
  const Complex zi(s.lambda[i], eta);
  const Complex zj(s.lambda[j], eta);
  const Eigen::VectorXd ki = im_resolvent_weights(s.lambda, zi);
  const Eigen::VectorXd kj = im_resolvent_weights(s.lambda, zj);
  // (1/N^2) sum_{r,c} ki_r kj_c * N |p_{rc}|^2
  double lhs = 0;
  for (int r = 0; r < n; ++r) {
    double row = 0;
    for (int c = 0; c < n; ++c) {
      row += kj[c] * std::norm(Complex(t.p(r, c)));
    }
    lhs += ki[r] * row;
  }
  lhs /= static_cast<double>(n);
  const ResolventFactor factors[] = {
      {zi, &obs.aring, /*imaginary_part=*/true},
      {zj, &obs.aring, /*imaginary_part=*/true},
  };
  const double rhs = chain_trace(s, factors).real();
  return {lhs, rhs, std::abs(lhs - rhs)};
}

struct MomentReport {
  int order = 0;
  double value = 0;
  double std_error = 0;
  double target = 0;       // 1(order even) (order-1)!!
  double zscore = 0;
};

inline std::vector<MomentReport> moment_report(std::span<const double> samples,
                                               int max_order) {
  const std::size_t m = samples.size();
  if (m < 2) throw std::invalid_argument("moment_report: need >= 2 samples");
  std::vector<MomentReport> out;
  double target = 1.0;  // (order-1)!! accumulated over even orders
  for (int order = 1; order <= max_order; ++order) {
    double mean = 0;
    for (double x : samples) mean += std::pow(x, order);
    mean /= static_cast<double>(m);
    double var = 0;
    for (double x : samples) {
      const double d = std::pow(x, order) - mean;
      var += d * d;
    }
    var /= static_cast<double>(m - 1);
    MomentReport r;
    r.order = order;
    r.value = mean;
    r.std_error = std::sqrt(var / static_cast<double>(m));
    if (order % 2 == 0) {
      target *= (order - 1);
      r.target = target;
    } else {
      r.target = 0.0;
    }
    r.zscore = r.std_error > 0 ? (r.value - r.target) / r.std_error : 0.0;
    out.push_back(r);
  }
  return out;
}

}  // namespace rmt

#endif  // RMTLAB_OVERLAP_HPP
