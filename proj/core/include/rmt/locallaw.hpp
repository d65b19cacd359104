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

#ifndef RMTLAB_LOCALLAW_HPP
#define RMTLAB_LOCALLAW_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rmt/overlap.hpp"
#include "rmt/spectral.hpp"

namespace rmt {

// One deviation statistic against its theoretical envelope. `bound` already
// includes the configured constant; `ratio` is value/bound.
struct LawReport {
  std::string label;
  double value = 0;
  double bound = 0;
  double ratio = 0;
  bool pass = false;
  bool hypothesis_ok = true;  // false when a probe precondition is violated
};

inline LawReport make_report(std::string label, double value, double bound,
                             bool hypothesis_ok = true) {
  LawReport r;
  r.label = std::move(label);
  r.value = value;
  r.bound = bound;
  r.ratio = bound > 0 ? value / bound : std::numeric_limits<double>::infinity();
  r.pass = value <= bound;
  r.hypothesis_ok = hypothesis_ok;
  return r;
}

// rho(z) = |Im m_t(z)| / pi (chain-law convention).
inline double rho_of(Complex z, double t = 0.0) {
  return std::abs(m_t(z, t).imag()) / M_PI;
}

struct SingleGReport {
  LawReport entry;  // max_ab |G_ab - delta_ab m| vs C N^xi / sqrt(N eta)
  LawReport trace;  // |<G> - m| vs N^xi / (N eta)
};

struct SingleGOptions {
  double xi = 0.2;
  double entry_constant = 2.0;  // finite-N constant on the entry bound
  double flow_time = 0.0;       // compare against m_t at this time
};

template <class Scalar>
SingleGReport check_single_g(const SpectralData<Scalar>& s, Complex z,
                             const SingleGOptions& opts = {}) {
  if (z.imag() <= 0) {
    throw std::invalid_argument("check_single_g: Im z > 0 required");
  }
  const int n = s.dim();
  const double eta = z.imag();
  const Complex m = m_t(z, opts.flow_time);
  const MatX<Complex> g = dense_resolvent(s, z);
  double entry_max = 0;
  Complex trace = 0;
  for (int i = 0; i < n; ++i) {
    trace += g(i, i);
    for (int j = 0; j < n; ++j) {
      const Complex d = g(i, j) - (i == j ? m : Complex(0));
      entry_max = std::max(entry_max, std::abs(d));
    }
  }
  const double nxi = std::pow(static_cast<double>(n), opts.xi);
  SingleGReport out;
  out.entry = make_report("single_g_entry", entry_max,
                          opts.entry_constant * nxi / std::sqrt(n * eta));
  out.trace = make_report("single_g_trace",
                          std::abs(trace / static_cast<double>(n) - m),
                          nxi / (n * eta));
  return out;
}

struct TwoGOptions {
  double pass_constant = 5.0;  // threshold constant on 1/sqrt(N eta*)
  bool enforce_traceless = true;
  double flow_time = 0.0;
};

// |<Im G(z1) A Im G(z2) A> - Im m(z1) Im m(z2) <A^2>| / (rho1 rho2) vs
// C / sqrt(N eta*), with rho_i = |Im m_t(z_i)|.
template <class Scalar>
LawReport check_two_g(const SpectralData<Scalar>& s, const Observable& obs,
                      Complex z1, Complex z2, const TwoGOptions& opts = {}) {
  const int n = s.dim();
  const double mean_abs = std::abs(obs.a.trace()) / n;
  if (opts.enforce_traceless && mean_abs > 1e-10) {
    throw std::invalid_argument(
        "check_two_g: observable is not traceless (pass the control flag to "
        "probe the failure mode)");
  }
  const Eigen::MatrixXd& a = opts.enforce_traceless ? obs.aring : obs.a;
  const double amsq = a.squaredNorm() / n;
  const ResolventFactor factors[] = {
      {z1, &a, true},
      {z2, &a, true},
  };
  const Complex m1 = m_t(z1, opts.flow_time);
  const Complex m2 = m_t(z2, opts.flow_time);
  const double value = chain_trace(s, factors).real();
  const double dev = std::abs(value - m1.imag() * m2.imag() * amsq);
  const double rho1 = std::abs(m1.imag());
  const double rho2 = std::abs(m2.imag());
  const double eta_star = std::min(std::abs(z1.imag()), std::abs(z2.imag()));
  return make_report("two_g_deviation", dev / (rho1 * rho2),
                     opts.pass_constant / std::sqrt(n * eta_star));
}

struct ChainOptions {
  double xi = 0.25;
  double epsilon = 0.05;        // hypothesis N min(rho_i eta_i) >= N^epsilon
  bool imaginary_parts = false; // probe Im G chains instead of plain G
  double flow_time = 0.0;
};

// |<G(z1) A_1 ... G(zk) A_k>| vs N^{xi + (k-3)/2} sqrt(rho*/eta*) with
// rho(z) = |Im m(z)|/pi. A hypothesis violation flags the report but the
// probe still runs.
template <class Scalar>
LawReport check_chain(const SpectralData<Scalar>& s,
                      std::span<const Eigen::MatrixXd* const> as,
                      std::span<const Complex> zs,
                      const ChainOptions& opts = {}) {
  const std::size_t k = zs.size();
  if (k < 3) throw std::invalid_argument("check_chain: k >= 3 required");
  if (as.size() != k) {
    throw std::invalid_argument("check_chain: need one observable per factor");
  }
  const int n = s.dim();
  double eta_star = std::numeric_limits<double>::infinity();
  double rho_star = 0;
  bool hypothesis = true;
  for (Complex z : zs) {
    const double eta = std::abs(z.imag());
    const double rho = rho_of(z, opts.flow_time);
    eta_star = std::min(eta_star, eta);
    rho_star = std::max(rho_star, rho);
    if (n * rho * eta < std::pow(n, opts.epsilon)) hypothesis = false;
  }
  std::vector<ResolventFactor> factors(k);
  for (std::size_t r = 0; r < k; ++r) {
    factors[r] = {zs[r], as[r], opts.imaginary_parts};
  }
  const double value = std::abs(chain_trace(s, std::span<const ResolventFactor>(factors)));
  const double bound = std::pow(static_cast<double>(n),
                                opts.xi + 0.5 * (static_cast<double>(k) - 3)) *
                       std::sqrt(rho_star / eta_star);
  return make_report("chain_trace_bound", value, bound, hypothesis);
}

}  // namespace rmt

#endif  // RMTLAB_LOCALLAW_HPP
