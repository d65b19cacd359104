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

#ifndef RMTLAB_DBM_HPP
#define RMTLAB_DBM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rmt/ensemble.hpp"
#include "rmt/spectral.hpp"

namespace rmt {

struct MatrixPath {
  std::vector<double> times;         // strictly increasing, starts at 0
  std::vector<WignerSample> snapshots;
  const WignerSample& back() const { return snapshots.back(); }
};

// dW_t = dB_t / sqrt(N), Hermitian Brownian increments with the beta-correct
// covariance (off-diagonal variance t/N, diagonal 2t/N for beta=1, t/N for
// beta=2). The SDE is additive, so each step is exact in distribution.
MatrixPath integrate_matrix_flow(const WignerSample& w0, double t, int steps,
                                 std::uint64_t seed);

// dW_t = -W_t/2 dt + dB_t / sqrt(N), integrated by the exact per-step OU
// update e^{-h/2} damping plus an independent Gaussian innovation; first two
// entry moments are preserved along the flow.
MatrixPath integrate_ou(const WignerSample& w0, double t, int steps,
                        std::uint64_t seed);

struct EigenvaluePath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> lambdas;  // sorted per snapshot
};

struct EigenvalueFlowOptions {
  double min_gap = 1e-10;   // collision floor
  int max_halvings = 40;    // per step before aborting
  int beta = 1;
};

// d lambda_i = dB_ii / sqrt(N) + (1/N) sum_{j != i} dt / (lambda_i - lambda_j);
// explicit stepping, a step that crosses the ordering is redrawn at half size.
EigenvaluePath integrate_eigenvalue_flow(const Eigen::VectorXd& lambda0,
                                         double t, int steps,
                                         std::uint64_t seed,
                                         const EigenvalueFlowOptions& opts = {});

enum class ThetaKind { kOne, kX, kX2, kX3, kX4, kSmoothBounded };

double apply_theta(ThetaKind theta, double x);
ThetaKind theta_from_name(const std::string& name);

struct GftOptions {
  int dim = 512;
  int samples = 2000;
  std::uint64_t seed = 1;
  double flow_time = 0.0;     // OU time separating the two ensembles
  Complex z{0.0, 1e-3};
  ThetaKind theta = ThetaKind::kX2;
  EntryDistribution dist = EntryDistribution::rademacher();
  SymmetryClass sym = SymmetryClass::kRealSymmetric;
  std::uint64_t observable_seed = 7;
  unsigned threads = 0;
};

struct GftReport {
  double delta = 0;      // |mean_A theta - mean_B theta|
  double mc_error = 0;   // std error of the paired differences
  double mean_a = 0;
  double mean_b = 0;
  int samples = 0;
};

// Compares E theta(sqrt(N) <Im G(z) Aring>) between an ensemble and its
// OU-evolution at flow_time. Sample k of ensemble B is the OU-evolution of
// sample k of ensemble A, so flow_time = 0 gives delta = 0 identically.
GftReport gft_compare(const GftOptions& opts);

// max_ab |(G(z1) A G(z2))_ab|; the observable's traceless part is used unless
// use_raw is set (the non-traceless control).
template <class Scalar>
double overlap_entry_bound_probe(const SpectralData<Scalar>& s,
                                 const Observable& obs, Complex z1, Complex z2,
                                 bool use_raw = false) {
  const Eigen::MatrixXd& a = use_raw ? obs.a : obs.aring;
  if (a.size() == 0) return 0.0;
  const MatX<Complex> g1 = dense_resolvent(s, z1);
  const MatX<Complex> g2 = dense_resolvent(s, z2);
  const MatX<Complex> m = g1 * a.cast<Complex>() * g2;
  return m.cwiseAbs().maxCoeff();
}

}  // namespace rmt

#endif  // RMTLAB_DBM_HPP
