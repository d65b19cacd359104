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

#include "rmt/dbm.hpp"

#include <cmath>
#include <stdexcept>

#include "rmt/parallel.hpp"

namespace rmt {
namespace {

// Hermitian Gaussian matrix with the standard Brownian covariance at unit
// time: off-diagonal variance 1/N, diagonal 2/N (beta=1) or 1/N (beta=2).
void add_brownian_increment(WignerSample& w, double dt, Rng& rng) {
  const int n = w.dim;
  std::normal_distribution<double> normal(0.0, 1.0);
  const double off_sd = std::sqrt(dt / n);
  if (w.is_real()) {
    const double diag_sd = std::sqrt(2.0 * dt / n);
    for (int i = 0; i < n; ++i) {
      w.real(i, i) += diag_sd * normal(rng);
      for (int j = i + 1; j < n; ++j) {
        const double x = off_sd * normal(rng);
        w.real(i, j) += x;
        w.real(j, i) += x;
      }
    }
  } else {
    const double diag_sd = std::sqrt(dt / n);
    const double part_sd = off_sd * M_SQRT1_2;
    for (int i = 0; i < n; ++i) {
      w.cplx(i, i) += diag_sd * normal(rng);
      for (int j = i + 1; j < n; ++j) {
        const Complex x(part_sd * normal(rng), part_sd * normal(rng));
        w.cplx(i, j) += x;
        w.cplx(j, i) += std::conj(x);
      }
    }
  }
}

void scale_sample(WignerSample& w, double factor) {
  if (w.is_real()) {
    w.real *= factor;
  } else {
    w.cplx *= factor;
  }
}

}  // namespace

MatrixPath integrate_matrix_flow(const WignerSample& w0, double t, int steps,
                                 std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("integrate_matrix_flow: steps >= 1");
  if (t < 0) throw std::invalid_argument("integrate_matrix_flow: t >= 0");
  MatrixPath path;
  path.times.push_back(0.0);
  path.snapshots.push_back(w0);
  if (t == 0) return path;
  Rng rng = make_stream(seed, 0x6d617472);  // independent driving-noise stream
  const double h = t / steps;
  WignerSample w = w0;
  for (int k = 1; k <= steps; ++k) {
    add_brownian_increment(w, h, rng);
    path.times.push_back(k * h);
    path.snapshots.push_back(w);
  }
  return path;
}

MatrixPath integrate_ou(const WignerSample& w0, double t, int steps,
                        std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("integrate_ou: steps >= 1");
  if (t < 0) throw std::invalid_argument("integrate_ou: t >= 0");
  MatrixPath path;
  path.times.push_back(0.0);
  path.snapshots.push_back(w0);
  if (t == 0) return path;
  Rng rng = make_stream(seed, 0x6f75666c);
  const double h = t / steps;
  const double damp = std::exp(-0.5 * h);
  const double innov = -std::expm1(-h);  // 1 - e^{-h}
  WignerSample w = w0;
  for (int k = 1; k <= steps; ++k) {
    scale_sample(w, damp);
    add_brownian_increment(w, innov, rng);
    path.times.push_back(k * h);
    path.snapshots.push_back(w);
  }
  return path;
}

EigenvaluePath integrate_eigenvalue_flow(const Eigen::VectorXd& lambda0,
                                         double t, int steps,
                                         std::uint64_t seed,
                                         const EigenvalueFlowOptions& opts) {
  const int n = static_cast<int>(lambda0.size());
  if (steps < 1) throw std::invalid_argument("integrate_eigenvalue_flow: steps >= 1");
  for (int i = 1; i < n; ++i) {
    if (lambda0[i] - lambda0[i - 1] <= opts.min_gap) {
      throw std::invalid_argument(
          "integrate_eigenvalue_flow: initial gap at or below the floor");
    }
  }
  EigenvaluePath path;
  path.times.push_back(0.0);
  path.lambdas.push_back(lambda0);
  if (t == 0) return path;
  Rng rng = make_stream(seed, 0x65696776);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise_var = (opts.beta == 1) ? 2.0 : 1.0;  // diagonal entries
  Eigen::VectorXd lam = lambda0;
  Eigen::VectorXd drift(n), next(n);
  const double h0 = t / steps;
  double now = 0.0;
  for (int k = 1; k <= steps; ++k) {
    const double target = k * h0;
    while (now < target - 1e-15 * t) {
      double h = target - now;
      int halvings = 0;
      for (;;) {
        for (int i = 0; i < n; ++i) {
          double d = 0;
          for (int j = 0; j < n; ++j) {
            if (j != i) d += 1.0 / (lam[i] - lam[j]);
          }
          drift[i] = d / n;
        }
        bool ok = true;
        for (int i = 0; i < n; ++i) {
          next[i] = lam[i] + h * drift[i] +
                    std::sqrt(noise_var * h / n) * normal(rng);
        }
        for (int i = 1; i < n; ++i) {
          if (next[i] - next[i - 1] <= opts.min_gap) {
            ok = false;
            break;
          }
        }
        if (ok) break;
        if (++halvings > opts.max_halvings) {
          throw std::runtime_error(
              "integrate_eigenvalue_flow: persistent crossing at the minimum "
              "gap floor (t = " + std::to_string(now) + ")");
        }
        h *= 0.5;
      }
      lam = next;
      now += h;
    }
    path.times.push_back(target);
    path.lambdas.push_back(lam);
  }
  return path;
}

double apply_theta(ThetaKind theta, double x) {
  switch (theta) {
    case ThetaKind::kOne: return 1.0;
    case ThetaKind::kX: return x;
    case ThetaKind::kX2: return x * x;
    case ThetaKind::kX3: return x * x * x;
    case ThetaKind::kX4: return x * x * x * x;
    case ThetaKind::kSmoothBounded: return std::tanh(x);
  }
  throw std::logic_error("unreachable theta kind");
}

ThetaKind theta_from_name(const std::string& name) {
  if (name == "one" || name == "1") return ThetaKind::kOne;
  if (name == "x") return ThetaKind::kX;
  if (name == "x2") return ThetaKind::kX2;
  if (name == "x3") return ThetaKind::kX3;
  if (name == "x4") return ThetaKind::kX4;
  if (name == "tanh" || name == "smooth") return ThetaKind::kSmoothBounded;
  throw std::invalid_argument("unknown theta: " + name);
}

namespace {

template <class Scalar>
double gft_statistic(const MatX<Scalar>& w, const Observable& obs, Complex z) {
  SpectralData<Scalar> s = decompose<Scalar>(w);
  const int n = s.dim();
  const Eigen::VectorXd k = im_resolvent_weights(s.lambda, z);
  // <Im G Aring> = (1/N) sum_i k_i p_ii
  MatX<Scalar> au;
  if constexpr (std::is_same_v<Scalar, double>) {
    au = obs.aring * s.u;
  } else {
    au = obs.aring.cast<Complex>() * s.u;
  }
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const double pii = std::real(Complex(s.u.col(i).dot(au.col(i))));
    acc += k[i] * pii;
  }
  return std::sqrt(static_cast<double>(n)) * acc / n;
}

}  // namespace

GftReport gft_compare(const GftOptions& opts) {
  const int m = opts.samples;
  if (m < 2) throw std::invalid_argument("gft_compare: need >= 2 samples");
  Observable obs = build_observable(opts.dim, ObservableKind::kRandomSymmetric,
                                    opts.observable_seed);
  std::vector<double> ta(m), tb(m);
  parallel_for(
      static_cast<std::size_t>(m),
      [&](std::size_t k) {
        const std::uint64_t s1 = stream_seed(opts.seed, 2 * k);
        const std::uint64_t s2 = stream_seed(opts.seed, 2 * k + 1);
        WignerSample w = sample_wigner(opts.dim, opts.sym, opts.dist, s1);
        WignerSample wb = w;
        if (opts.flow_time > 0) {
          WignerSample u = sample_gaussian(opts.dim, opts.sym, s2);
          wb = ou_mix(w, u, opts.flow_time);
        }
        if (opts.sym == SymmetryClass::kRealSymmetric) {
          ta[k] = apply_theta(opts.theta, gft_statistic<double>(w.real, obs, opts.z));
          tb[k] = apply_theta(opts.theta, gft_statistic<double>(wb.real, obs, opts.z));
        } else {
          ta[k] = apply_theta(opts.theta, gft_statistic<Complex>(w.cplx, obs, opts.z));
          tb[k] = apply_theta(opts.theta, gft_statistic<Complex>(wb.cplx, obs, opts.z));
        }
      },
      opts.threads);
  double mean_a = 0, mean_b = 0, mean_d = 0;
  for (int k = 0; k < m; ++k) {
    mean_a += ta[k];
    mean_b += tb[k];
    mean_d += ta[k] - tb[k];
  }
  mean_a /= m;
  mean_b /= m;
  mean_d /= m;
  double var_d = 0;
  for (int k = 0; k < m; ++k) {
    const double d = (ta[k] - tb[k]) - mean_d;
    var_d += d * d;
  }
  var_d /= (m - 1);
  GftReport rep;
  rep.delta = std::abs(mean_d);
  rep.mc_error = std::sqrt(var_d / m);
  rep.mean_a = mean_a;
  rep.mean_b = mean_b;
  rep.samples = m;
  return rep;
}

}  // namespace rmt
