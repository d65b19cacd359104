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

#ifndef RMTLAB_EMF_HPP
#define RMTLAB_EMF_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rmt/dbm.hpp"
#include "rmt/ensemble.hpp"
#include "rmt/matchings.hpp"

namespace rmt {

// Inclusive index interval [lo, hi]; empty when hi < lo.
struct IndexInterval {
  int lo = 0;
  int hi = -1;
  bool contains(int i) const { return i >= lo && i <= hi; }
  int count() const { return hi >= lo ? hi - lo + 1 : 0; }
  // #{ j in J : j < v }
  int count_below(int v) const {
    if (v <= lo) return 0;
    if (v > hi) return count();
    return v - lo;
  }
};

// J = { i : gamma_i(0) in (-2 + delta, 2 - delta) }, 0-based indices.
IndexInterval bulk_indices(double delta, int n);

enum class KernelMode { kFullC, kShortC, kLatticeW, kSmoothA, kSmoothAShort };

struct KernelSpec {
  KernelMode mode = KernelMode::kFullC;
  double eta = 0.0;     // a-kernels only
  int ell = 1;          // short range
  int ell2 = 1;         // lattice crossover range
  IndexInterval bulk;   // J; c/a short-range and lattice modes need it
  double min_gap = 1e-8;

  static KernelSpec full_c(double min_gap = 1e-8);
  static KernelSpec short_c(int ell, IndexInterval bulk, double min_gap = 1e-8);
  static KernelSpec lattice_w(int ell2, IndexInterval bulk,
                              double min_gap = 1e-8);
  static KernelSpec smooth_a(double eta);
  static KernelSpec smooth_a_short(double eta, int ell, IndexInterval bulk);
};

// c_ij = 1/(N (lambda_i - lambda_j)^2), a_ij = eta/(N((lambda_i-lambda_j)^2 + eta^2)),
// with the mode's range cutoffs. i == j is rejected; a sub-floor gap under a
// c-mode is a guarded error.
double kernel_coeff(const KernelSpec& spec, const Eigen::VectorXd& lambda,
                    int i, int j);

// Sparse real-valued function on Lambda^n; keys are canonical sorted
// 2n-tuples (multiset semantics).
struct VecIntHash {
  std::size_t operator()(const std::vector<int>& v) const {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
      h ^= static_cast<std::size_t>(x) + 0x9e3779b9ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

struct FlowState {
  int particles = 0;  // n
  int ambient = 0;    // N
  std::unordered_map<std::vector<int>, double, VecIntHash> values;

  double value(const std::vector<int>& key) const {
    auto it = values.find(key);
    return it == values.end() ? 0.0 : it->second;
  }
  void set(std::vector<int> key, double v) { values[std::move(key)] = v; }

  // delta_y: pi(y)^{-1} at y, zero elsewhere.
  static FlowState delta(const std::vector<int>& y, int ambient);
  static FlowState constant(std::span<const std::vector<int>> keys, double v,
                            int particles, int ambient);
};

// pi(x) = prod_i ((n_i(x) - 1)!!)^2 over doubled counts.
double pi_weight(std::span<const int> key);
// Orbit size of the sorted representative: (2n)! / prod_i n_i(x)!.
double state_multiplicity(std::span<const int> key);

enum class Measure { kPi, kMu };

// <f, g> = sum over ordered tuples = sum over canonical keys of
// multiplicity * weight(measure) * f * g.
double inner_product(const FlowState& f, const FlowState& g, Measure m);
double norm_l2(const FlowState& f, Measure m);
double norm_l1(const FlowState& f, Measure m);
double norm_linf(const FlowState& f);

// (Gen h)(x) = sum_{i != j} k_ij (n_j(x)+1)/(n_i(x)-1) sum_{a != b} (h(x_ab^ij) - h(x))
// evaluated on the support of h and its jump neighbours. The kernel mode
// selects L (full), S (short range), or W (lattice). Reports the maximum
// total exit rate seen when requested.
FlowState apply_jump_generator(const FlowState& h,
                               const Eigen::VectorXd& lambda,
                               const KernelSpec& spec,
                               double* max_total_rate = nullptr);

inline FlowState apply_l(const FlowState& h, const Eigen::VectorXd& lambda,
                         double min_gap = 1e-8) {
  return apply_jump_generator(h, lambda, KernelSpec::full_c(min_gap));
}
inline FlowState apply_s(const FlowState& h, const Eigen::VectorXd& lambda,
                         const KernelSpec& spec) {
  return apply_jump_generator(h, lambda, spec);
}
inline FlowState apply_w(const FlowState& h, const Eigen::VectorXd& lambda,
                         const KernelSpec& spec) {
  return apply_jump_generator(h, lambda, spec);
}

// Product generator: moves all n doubled pairs at once with weight
// eta^{-1} prod_r a^S_{i_r j_r} over all-distinct index tuples; acts only on
// states whose configuration is n distinct doubled sites. mu = 1 is its
// reversible measure.
FlowState apply_a(const FlowState& h, const Eigen::VectorXd& lambda,
                  const KernelSpec& aspec);

// eta-space generator: (B f)(eta) = sum_{i != j} k_ij 2 eta_i (1 + 2 eta_j)
// (f(eta^{ij}) - f(eta)).
using EtaFunction = std::map<Configuration, double>;
EtaFunction apply_b(const EtaFunction& f, const Eigen::VectorXd& lambda,
                    const KernelSpec& spec);

// Smooth localization Av(x; K, y) = (1/K) sum_{j=K}^{2K-1} 1(||x-y||_1 < j);
// coordinates are paired sorted-to-sorted.
struct AvWindow {
  std::vector<int> center;  // sorted canonical 2n-tuple
  int width = 1;            // K
};

AvWindow make_av_window(std::vector<int> center, int width, int ambient,
                        const IndexInterval& bulk);
int l1_sorted(std::span<const int> x, std::span<const int> y);
double av(std::span<const int> x, const AvWindow& w);

// d(x, y) = sup_a |J  cap [min(x_a,y_a), max(x_a,y_a))|, sorted pairing.
int emf_distance(std::span<const int> x, std::span<const int> y,
                 const IndexInterval& bulk);

// Dirichlet form by the explicit sum-of-squares formula; equals
// <h, (-Gen) h> for the matching generator and measure.
double dirichlet_jump(const FlowState& h, const Eigen::VectorXd& lambda,
                      const KernelSpec& spec);
double dirichlet_a(const FlowState& h, const Eigen::VectorXd& lambda,
                   const KernelSpec& aspec);

// Explicit small-instance machinery.
std::vector<std::vector<int>> enumerate_lambda_states(int ambient, int n);
Eigen::MatrixXd jump_generator_matrix(std::span<const std::vector<int>> basis,
                                      const Eigen::VectorXd& lambda,
                                      const KernelSpec& spec);
Eigen::MatrixXd product_generator_matrix(
    std::span<const std::vector<int>> basis, const Eigen::VectorXd& lambda,
    const KernelSpec& aspec);

// Eigenvalue trajectory feeding the kernels: frozen quantiles
// lambda_i(t) = sqrt(1+t) gamma_i(0), or a simulated DBM path interpolated
// between snapshots.
class TrajectorySource {
 public:
  static TrajectorySource frozen_quantiles(int dim);
  static TrajectorySource dbm_path(EigenvaluePath path);
  Eigen::VectorXd eigenvalues_at(double t) const;
  int dim() const { return dim_; }

 private:
  enum class Mode { kFrozen, kPath };
  Mode mode_ = Mode::kFrozen;
  int dim_ = 0;
  Eigen::VectorXd gamma0_;
  EigenvaluePath path_;
};

struct GeneratorStage {
  KernelSpec spec;
  double t_end = 0;
};

struct TruncationPolicy {
  std::vector<int> center;
  int radius = 0;  // drop states with d(x, center) > radius
  IndexInterval bulk;
};

struct IntegrateOptions {
  double stability_factor = 0.2;       // step <= factor / max exit rate
  double max_step = 1e30;
  double min_step_fraction = 1e-12;    // of the total span; smaller aborts
  std::vector<double> record_times;
  std::optional<TruncationPolicy> truncation;
};

struct FlowPath {
  std::vector<double> times;
  std::vector<FlowState> states;
  double truncated_mass = 0;  // pi-weighted L1 mass dropped
  long steps = 0;
  double max_total_rate = 0;
  const FlowState& back() const { return states.back(); }
};

// Heun integration of d h/dt = Gen(t) h through the staged generator
// schedule; stages apply on [previous t_end, t_end].
FlowPath integrate(const FlowState& h0, const TrajectorySource& source,
                   std::span<const GeneratorStage> stages, double t0,
                   const IntegrateOptions& opts = {});

// |U_S(s1, s2)_{x y}| via the master equation started from delta_y, plus the
// pi-weighted L1 mass beyond `mass_radius` from y.
struct FiniteSpeedResult {
  double entry = 0;
  double mass_outside = 0;
  FlowState endpoint;
};
FiniteSpeedResult finite_speed_probe(const std::vector<int>& x,
                                     const std::vector<int>& y,
                                     const KernelSpec& sspec, double s1,
                                     double s2, const TrajectorySource& source,
                                     int mass_radius);

// Samples random h on the full state space of a small instance and verifies
// <h, S h>_pi <= C <h, A h>_mu <= 0. fitted_c is the largest constant for
// which the first inequality holds on every sampled h (the min of the ratio).
struct ReplacementReport {
  int samples = 0;
  int degenerate = 0;       // |<h,Ah>_mu| below tolerance, resampled
  double min_ratio = 0;     // = fitted C(n)
  double max_ratio = 0;
  double max_s_form = 0;    // max over h of <h,Sh>_pi   (<= tol)
  double max_a_form = 0;    // max over h of <h,Ah>_mu   (<= tol)
  bool nonpositive = false;
};
ReplacementReport replacement_check(int ambient, int n,
                                    const Eigen::VectorXd& lambda,
                                    const KernelSpec& sspec,
                                    const KernelSpec& aspec, int samples,
                                    std::uint64_t seed);

// Short-range L2 decay run (the energy-method experiment): evolves
// h0 = Av (g0 - 1(n even)) under S on frozen quantiles, with g0 the perfect
// matching integrand of a seeded Gaussian sample.
struct L2DecayParams {
  int ambient = 200;
  int n = 2;
  int cap_k = 14;           // K
  int ell = 5;
  double t1 = -1;           // < 0 -> sqrt(K)/N
  double eta = 0.01;
  double delta = 0.05;      // bulk cut for J
  double xi = 0.05;
  double epsilon = 0.05;
  double margin_exponent = 0.05;  // "<<" enforced as ratio >= N^margin
  double envelope_constant = 1.0;
  std::uint64_t seed = 1;
  std::vector<int> center;  // empty -> doubled pair near the middle of J
};
struct L2DecayReport {
  std::vector<double> times;
  std::vector<double> norms;     // ||h_t||_2 (pi)
  double envelope = 0;           // C K^{n/2} E
  double error_term = 0;         // E
  double endpoint_ratio = 0;     // ||h_T1||_2 / envelope
  bool monotone = true;
  double truncated_mass = 0;
  double initial_norm = 0;
};
L2DecayReport l2_decay_experiment(const L2DecayParams& params);

// Monte Carlo estimate of sup_eta |f_T(eta) - 1(n even)| over a fixed family
// of bulk configurations, with eigenvector data from an OU-evolved
// non-Gaussian ensemble (the conditional expectation is replaced by the
// unconditional sample average).
struct RelaxationParams {
  int n = 2;
  int dim = 512;
  int samples = 2000;
  double flow_time = -1;    // < 0 -> N^{-1+0.2}
  double delta = 0.1;       // configs stay inside [delta N, (1-delta) N]
  EntryDistribution dist = EntryDistribution::rademacher();
  std::uint64_t seed = 1;
  std::uint64_t observable_seed = 7;
  unsigned threads = 0;
};
struct RelaxationConfigResult {
  std::string name;
  double mean = 0;
  double std_error = 0;
  double gap = 0;  // |mean - 1(n even)|
};
struct RelaxationReport {
  std::vector<RelaxationConfigResult> configs;
  double max_gap = 0;
  double max_std_error = 0;
  double target = 0;  // 1(n even)
};
RelaxationReport relaxation_experiment(const RelaxationParams& params);

}  // namespace rmt

#endif  // RMTLAB_EMF_HPP
