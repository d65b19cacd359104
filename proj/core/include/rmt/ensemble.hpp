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

#ifndef RMTLAB_ENSEMBLE_HPP
#define RMTLAB_ENSEMBLE_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "rmt/rng.hpp"

namespace rmt {

// beta = 1: real symmetric, beta = 2: complex Hermitian.
enum class SymmetryClass : int { kRealSymmetric = 1, kComplexHermitian = 2 };

inline int beta_of(SymmetryClass c) { return static_cast<int>(c); }

inline SymmetryClass symmetry_from_beta(int beta) {
  if (beta == 1) return SymmetryClass::kRealSymmetric;
  if (beta == 2) return SymmetryClass::kComplexHermitian;
  throw std::invalid_argument("beta must be 1 or 2, got " +
                              std::to_string(beta));
}

// Law of the normalized entry chi: mean zero, E|chi|^2 = 1. The complex case
// draws independent real and imaginary parts of variance 1/2 each, so
// E chi^2 = 0 holds by construction. Custom samplers declare their second
// moment and are trusted beyond a mean/variance spot check.
class EntryDistribution {
 public:
  enum class Kind { kGaussian, kRademacher, kUniform, kCustom };

  static EntryDistribution gaussian() { return EntryDistribution(Kind::kGaussian); }
  static EntryDistribution rademacher() { return EntryDistribution(Kind::kRademacher); }
  static EntryDistribution uniform() { return EntryDistribution(Kind::kUniform); }
  // `sampler` must produce mean-zero draws with the declared variance.
  static EntryDistribution custom(std::function<double(Rng&)> sampler,
                                  double declared_variance);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

  // One real draw with unit variance.
  double sample_real(Rng& rng) const;
  // One complex draw with E|chi|^2 = 1 and E chi^2 = 0.
  std::complex<double> sample_complex(Rng& rng) const;
  // Diagonal law: variance 2 for the real Gaussian class (GOE convention),
  // else variance 1 with the same base law.
  double sample_diag(Rng& rng, SymmetryClass c) const;

 private:
  explicit EntryDistribution(Kind k);
  Kind kind_;
  std::string name_;
  std::function<double(Rng&)> custom_;
};

EntryDistribution entry_distribution_from_name(const std::string& name);

// A Hermitian random matrix with entries scaled by N^{-1/2}; symmetry is
// enforced bit-exactly (the lower triangle is the conjugate of the upper).
struct WignerSample {
  int dim = 0;
  SymmetryClass sym = SymmetryClass::kRealSymmetric;
  std::uint64_t seed = 0;
  Eigen::MatrixXd real;    // populated when sym == kRealSymmetric
  Eigen::MatrixXcd cplx;   // populated when sym == kComplexHermitian

  bool is_real() const { return sym == SymmetryClass::kRealSymmetric; }

  template <class Scalar>
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& matrix() const;
};

template <>
inline const Eigen::MatrixXd& WignerSample::matrix<double>() const {
  return real;
}
template <>
inline const Eigen::MatrixXcd& WignerSample::matrix<std::complex<double>>()
    const {
  return cplx;
}

WignerSample sample_wigner(int n, SymmetryClass sym,
                           const EntryDistribution& dist, std::uint64_t seed);

inline WignerSample sample_gaussian(int n, SymmetryClass sym,
                                    std::uint64_t seed) {
  return sample_wigner(n, sym, EntryDistribution::gaussian(), seed);
}

// sqrt(1-cT) W + sqrt(cT) U with cT = 1 - exp(-t): matches the marginal law of
// the Ornstein-Uhlenbeck flow started from W after time t. U must be Gaussian.
WignerSample ou_mix(const WignerSample& w, const WignerSample& u, double t);

// Deterministic Hermitian test matrix with cached traceless part.
struct Observable {
  Eigen::MatrixXd a;       // the observable A (real symmetric)
  Eigen::MatrixXd aring;   // traceless part A - <A> I
  double mean = 0;         // <A>
  double msq = 0;          // <Aring^2>
  double norm_bound = 0;   // ||A||_2
};

enum class ObservableKind {
  kDiagonalSigns,
  kRandomSymmetric,
  kProjection,
  kUserMatrix,
};

// How build_observable scales the matrix after construction.
enum class ObservableNormalization { kNone, kOperatorNorm, kUnitMsq };

struct ObservableOptions {
  int rank = 0;  // projection rank (kProjection only)
  ObservableNormalization normalize = ObservableNormalization::kOperatorNorm;
  bool strict = false;       // reject <Aring^2> < delta_prime
  double delta_prime = 0.01;
  Eigen::MatrixXd user;      // kUserMatrix only
};

Observable build_observable(int n, ObservableKind kind, std::uint64_t seed,
                            const ObservableOptions& opts = {});

Observable make_observable(const Eigen::MatrixXd& a, bool strict = false,
                           double delta_prime = 0.01);

// Subtracts the normalized trace; idempotent, result has trace 0 up to one
// rounding of the computed mean.
Eigen::MatrixXd traceless(const Eigen::MatrixXd& a);

}  // namespace rmt

#endif  // RMTLAB_ENSEMBLE_HPP
