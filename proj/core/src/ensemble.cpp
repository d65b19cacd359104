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

#include "rmt/ensemble.hpp"

#include <cmath>

namespace rmt {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double draw_base(EntryDistribution::Kind kind,
                 const std::function<double(Rng&)>& custom, Rng& rng) {
  switch (kind) {
    case EntryDistribution::Kind::kGaussian: {
      std::normal_distribution<double> normal(0.0, 1.0);
      return normal(rng);
    }
    case EntryDistribution::Kind::kRademacher:
      return (rng() & 1ULL) ? 1.0 : -1.0;
    case EntryDistribution::Kind::kUniform: {
      // centered uniform on [-sqrt(3), sqrt(3)], unit variance
      std::uniform_real_distribution<double> unif(-kSqrt3, kSqrt3);
      return unif(rng);
    }
    case EntryDistribution::Kind::kCustom:
      return custom(rng);
  }
  throw std::logic_error("unreachable entry distribution kind");
}

}  // namespace

EntryDistribution::EntryDistribution(Kind k) : kind_(k) {
  switch (k) {
    case Kind::kGaussian: name_ = "gaussian"; break;
    case Kind::kRademacher: name_ = "rademacher"; break;
    case Kind::kUniform: name_ = "uniform"; break;
    case Kind::kCustom: name_ = "custom"; break;
  }
}

EntryDistribution EntryDistribution::custom(
    std::function<double(Rng&)> sampler, double declared_variance) {
  if (!sampler) throw std::invalid_argument("custom sampler must be callable");
  if (std::abs(declared_variance - 1.0) > 1e-12) {
    throw std::invalid_argument(
        "entry distribution must have E|chi_od|^2 = 1 after normalization");
  }
  EntryDistribution d(Kind::kCustom);
  d.custom_ = std::move(sampler);
  return d;
}

double EntryDistribution::sample_real(Rng& rng) const {
  return draw_base(kind_, custom_, rng);
}

std::complex<double> EntryDistribution::sample_complex(Rng& rng) const {
  const double re = draw_base(kind_, custom_, rng);
  const double im = draw_base(kind_, custom_, rng);
  return {re * M_SQRT1_2, im * M_SQRT1_2};
}

double EntryDistribution::sample_diag(Rng& rng, SymmetryClass c) const {
  double x = draw_base(kind_, custom_, rng);
  if (c == SymmetryClass::kRealSymmetric && kind_ == Kind::kGaussian) {
    x *= M_SQRT2;  // GOE diagonal variance 2/N
  }
  return x;
}

EntryDistribution entry_distribution_from_name(const std::string& name) {
  if (name == "gaussian") return EntryDistribution::gaussian();
  if (name == "rademacher" || name == "bernoulli")
    return EntryDistribution::rademacher();
  if (name == "uniform") return EntryDistribution::uniform();
  throw std::invalid_argument("unknown entry distribution: " + name);
}

WignerSample sample_wigner(int n, SymmetryClass sym,
                           const EntryDistribution& dist, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("sample_wigner needs N >= 2");
  WignerSample w;
  w.dim = n;
  w.sym = sym;
  w.seed = seed;
  Rng rng = make_stream(seed, 0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  if (sym == SymmetryClass::kRealSymmetric) {
    w.real.resize(n, n);
    for (int i = 0; i < n; ++i) {
      w.real(i, i) = scale * dist.sample_diag(rng, sym);
      for (int j = i + 1; j < n; ++j) {
        const double x = scale * dist.sample_real(rng);
        w.real(i, j) = x;
        w.real(j, i) = x;
      }
    }
  } else {
    w.cplx.resize(n, n);
    for (int i = 0; i < n; ++i) {
      w.cplx(i, i) = scale * dist.sample_diag(rng, sym);
      for (int j = i + 1; j < n; ++j) {
        const std::complex<double> x = scale * dist.sample_complex(rng);
        w.cplx(i, j) = x;
        w.cplx(j, i) = std::conj(x);
      }
    }
  }
  return w;
}

WignerSample ou_mix(const WignerSample& w, const WignerSample& u, double t) {
  if (w.dim != u.dim || w.sym != u.sym) {
    throw std::invalid_argument("ou_mix: mismatched dimension or symmetry class");
  }
  if (t < 0) throw std::invalid_argument("ou_mix: time must be nonnegative");
  const double ct = -std::expm1(-t);  // 1 - e^{-t}
  const double a = std::sqrt(1.0 - ct);
  const double b = std::sqrt(ct);
  WignerSample out;
  out.dim = w.dim;
  out.sym = w.sym;
  out.seed = w.seed;
  if (w.is_real()) {
    out.real = a * w.real + b * u.real;
  } else {
    out.cplx = a * w.cplx + b * u.cplx;
  }
  return out;
}

Eigen::MatrixXd traceless(const Eigen::MatrixXd& a) {
  const double mean = a.trace() / static_cast<double>(a.rows());
  Eigen::MatrixXd out = a;
  out.diagonal().array() -= mean;
  return out;
}

Observable make_observable(const Eigen::MatrixXd& a, bool strict,
                           double delta_prime) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("observable matrix must be square");
  }
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("observable matrix is not symmetric");
  }
  Observable obs;
  obs.a = 0.5 * (a + a.transpose());
  obs.mean = obs.a.trace() / static_cast<double>(a.rows());
  obs.aring = obs.a;
  obs.aring.diagonal().array() -= obs.mean;
  obs.msq = obs.aring.squaredNorm() / static_cast<double>(a.rows());
  obs.norm_bound =
      obs.a.selfadjointView<Eigen::Lower>().operatorNorm();
  if (strict && obs.msq < delta_prime) {
    throw std::invalid_argument("observable rejected: <Aring^2> = " +
                                std::to_string(obs.msq) + " < delta' = " +
                                std::to_string(delta_prime));
  }
  return obs;
}

Observable build_observable(int n, ObservableKind kind, std::uint64_t seed,
                            const ObservableOptions& opts) {
  if (n < 2) throw std::invalid_argument("build_observable needs N >= 2");
  Eigen::MatrixXd a;
  switch (kind) {
    case ObservableKind::kDiagonalSigns: {
      a = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) a(i, i) = (i % 2 == 0) ? 1.0 : -1.0;
      break;
    }
    case ObservableKind::kRandomSymmetric: {
      WignerSample s =
          sample_wigner(n, SymmetryClass::kRealSymmetric,
                        EntryDistribution::gaussian(), mix64(seed ^ 0xA5A5A5A5ULL));
      a = s.real;
      break;
    }
    case ObservableKind::kProjection: {
      if (opts.rank < 1 || opts.rank > n - 1) {
        throw std::invalid_argument("projection rank must be in [1, N-1]");
      }
      a = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < opts.rank; ++i) a(i, i) = 1.0;
      break;
    }
    case ObservableKind::kUserMatrix: {
      if (opts.user.rows() != n || opts.user.cols() != n) {
        throw std::invalid_argument("user observable has wrong dimension");
      }
      a = opts.user;
      break;
    }
  }
  Observable obs = make_observable(a, /*strict=*/false);
  switch (opts.normalize) {
    case ObservableNormalization::kNone:
      break;
    case ObservableNormalization::kOperatorNorm:
      if (obs.norm_bound > 0) obs = make_observable(obs.a / obs.norm_bound);
      break;
    case ObservableNormalization::kUnitMsq:
      if (obs.msq > 0) obs = make_observable(obs.a / std::sqrt(obs.msq));
      break;
  }
  if (opts.strict && obs.msq < opts.delta_prime) {
    throw std::invalid_argument("observable rejected: <Aring^2> = " +
                                std::to_string(obs.msq) + " < delta' = " +
                                std::to_string(opts.delta_prime));
  }
  return obs;
}

}  // namespace rmt
