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

#include "rmt/emf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "rmt/parallel.hpp"
#include "rmt/spectral.hpp"

namespace rmt {
namespace {

double factorial(int k) {
  double out = 1;
  for (int v = 2; v <= k; ++v) out *= v;
  return out;
}

// (site, doubled count) runs of a canonical key.
struct SiteCount {
  int site;
  int count;
};

std::vector<SiteCount> site_counts(std::span<const int> key) {
  std::vector<SiteCount> out;
  for (std::size_t i = 0; i < key.size();) {
    std::size_t j = i;
    while (j < key.size() && key[j] == key[i]) ++j;
    out.push_back({key[i], static_cast<int>(j - i)});
    i = j;
  }
  return out;
}

// key with two copies of `from` replaced by two copies of `to`, re-sorted.
std::vector<int> jump_key(std::span<const int> key, int from, int to) {
  std::vector<int> out(key.begin(), key.end());
  int replaced = 0;
  for (int& v : out) {
    if (v == from && replaced < 2) {
      v = to;
      ++replaced;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

IndexInterval bulk_indices(double delta, int n) {
  if (delta <= 0 || delta >= 2) {
    throw std::invalid_argument("bulk_indices: delta in (0, 2) required");
  }
  const Eigen::VectorXd gamma = quantiles(0.0, n);
  IndexInterval j{n, -1};
  for (int i = 0; i < n; ++i) {
    if (gamma[i] > -2.0 + delta && gamma[i] < 2.0 - delta) {
      j.lo = std::min(j.lo, i);
      j.hi = std::max(j.hi, i);
    }
  }
  if (j.hi < j.lo) throw std::invalid_argument("bulk_indices: empty bulk set");
  return j;
}

KernelSpec KernelSpec::full_c(double min_gap) {
  KernelSpec s;
  s.mode = KernelMode::kFullC;
  s.min_gap = min_gap;
  return s;
}
KernelSpec KernelSpec::short_c(int ell, IndexInterval bulk, double min_gap) {
  if (ell < 1) throw std::invalid_argument("short_c: ell >= 1 required");
  KernelSpec s;
  s.mode = KernelMode::kShortC;
  s.ell = ell;
  s.bulk = bulk;
  s.min_gap = min_gap;
  return s;
}
KernelSpec KernelSpec::lattice_w(int ell2, IndexInterval bulk, double min_gap) {
  if (ell2 < 1) throw std::invalid_argument("lattice_w: ell2 >= 1 required");
  KernelSpec s;
  s.mode = KernelMode::kLatticeW;
  s.ell2 = ell2;
  s.bulk = bulk;
  s.min_gap = min_gap;
  return s;
}
KernelSpec KernelSpec::smooth_a(double eta) {
  if (eta <= 0) throw std::invalid_argument("smooth_a: eta > 0 required");
  KernelSpec s;
  s.mode = KernelMode::kSmoothA;
  s.eta = eta;
  return s;
}
KernelSpec KernelSpec::smooth_a_short(double eta, int ell, IndexInterval bulk) {
  if (eta <= 0) throw std::invalid_argument("smooth_a_short: eta > 0 required");
  if (ell < 1) throw std::invalid_argument("smooth_a_short: ell >= 1 required");
  KernelSpec s;
  s.mode = KernelMode::kSmoothAShort;
  s.eta = eta;
  s.ell = ell;
  s.bulk = bulk;
  return s;
}

double kernel_coeff(const KernelSpec& spec, const Eigen::VectorXd& lambda,
                    int i, int j) {
  if (i == j) throw std::invalid_argument("kernel_coeff: i != j required");
  const double n = static_cast<double>(lambda.size());
  const double d = lambda[i] - lambda[j];
  auto c_val = [&]() {
    if (std::abs(d) < spec.min_gap) {
      throw std::runtime_error(
          "kernel guard: eigenvalue gap |lambda_" + std::to_string(i) +
          " - lambda_" + std::to_string(j) + "| = " + std::to_string(std::abs(d)) +
          " below the minimum-gap floor " + std::to_string(spec.min_gap));
    }
    return 1.0 / (n * d * d);
  };
  auto a_val = [&]() { return spec.eta / (n * (d * d + spec.eta * spec.eta)); };
  const bool in_bulk = spec.bulk.contains(i) && spec.bulk.contains(j);
  switch (spec.mode) {
    case KernelMode::kFullC:
      return c_val();
    case KernelMode::kShortC:
      return (in_bulk && std::abs(i - j) <= spec.ell) ? c_val() : 0.0;
    case KernelMode::kLatticeW:
      if (in_bulk && std::abs(i - j) <= spec.ell2) return c_val();
      return n / (static_cast<double>(i - j) * (i - j));
    case KernelMode::kSmoothA:
      return a_val();
    case KernelMode::kSmoothAShort:
      return (in_bulk && std::abs(i - j) <= spec.ell) ? a_val() : 0.0;
  }
  throw std::logic_error("unreachable kernel mode");
}

FlowState FlowState::delta(const std::vector<int>& y, int ambient) {
  std::vector<int> key = y;
  std::sort(key.begin(), key.end());
  LatticePoint::make(key);  // parity validation
  FlowState h;
  h.particles = static_cast<int>(key.size()) / 2;
  h.ambient = ambient;
  h.values[key] = 1.0 / pi_weight(key);
  return h;
}

FlowState FlowState::constant(std::span<const std::vector<int>> keys, double v,
                              int particles, int ambient) {
  FlowState h;
  h.particles = particles;
  h.ambient = ambient;
  for (const auto& k : keys) h.values[k] = v;
  return h;
}

double pi_weight(std::span<const int> key) {
  double out = 1;
  for (const auto& sc : site_counts(key)) {
    const double df = static_cast<double>(double_factorial(sc.count - 1));
    out *= df * df;
  }
  return out;
}

double state_multiplicity(std::span<const int> key) {
  double out = factorial(static_cast<int>(key.size()));
  for (const auto& sc : site_counts(key)) out /= factorial(sc.count);
  return out;
}

double inner_product(const FlowState& f, const FlowState& g, Measure m) {
  const auto& small = f.values.size() <= g.values.size() ? f : g;
  const auto& large = f.values.size() <= g.values.size() ? g : f;
  double out = 0;
  for (const auto& [key, v] : small.values) {
    auto it = large.values.find(key);
    if (it == large.values.end()) continue;
    double w = state_multiplicity(key);
    if (m == Measure::kPi) w *= pi_weight(key);
    out += w * v * it->second;
  }
  return out;
}

double norm_l2(const FlowState& f, Measure m) {
  return std::sqrt(inner_product(f, f, m));
}

double norm_l1(const FlowState& f, Measure m) {
  double out = 0;
  for (const auto& [key, v] : f.values) {
    double w = state_multiplicity(key);
    if (m == Measure::kPi) w *= pi_weight(key);
    out += w * std::abs(v);
  }
  return out;
}

double norm_linf(const FlowState& f) {
  double out = 0;
  for (const auto& [key, v] : f.values) out = std::max(out, std::abs(v));
  return out;
}

namespace {

// Enumerates the jump moves of a canonical key under the spec's kernel:
// calls visit(i, j, n_i, n_j, k_ij) for every occupied source site i
// (doubled count n_i >= 2) and admissible target j != i.
template <class Visit>
void for_each_jump(std::span<const int> key, const Eigen::VectorXd& lambda,
                   const KernelSpec& spec, Visit&& visit) {
  const int n_sites = static_cast<int>(lambda.size());
  const auto counts = site_counts(key);
  auto count_at = [&](int site) {
    for (const auto& sc : counts) {
      if (sc.site == site) return sc.count;
    }
    return 0;
  };
  const bool short_range = spec.mode == KernelMode::kShortC ||
                           spec.mode == KernelMode::kSmoothAShort;
  for (const auto& sc : counts) {
    const int i = sc.site;
    if (sc.count < 2) continue;  // needs a full pair to move
    int jlo = 0, jhi = n_sites - 1;
    if (short_range) {
      if (!spec.bulk.contains(i)) continue;
      jlo = std::max(spec.bulk.lo, i - spec.ell);
      jhi = std::min(spec.bulk.hi, i + spec.ell);
    }
    for (int j = jlo; j <= jhi; ++j) {
      if (j == i) continue;
      const double k = kernel_coeff(spec, lambda, i, j);
      if (k == 0.0) continue;
      visit(i, j, sc.count, count_at(j), k);
    }
  }
}

}  // namespace

FlowState apply_jump_generator(const FlowState& h,
                               const Eigen::VectorXd& lambda,
                               const KernelSpec& spec,
                               double* max_total_rate) {
  FlowState out;
  out.particles = h.particles;
  out.ambient = h.ambient;
  double max_rate = 0;
  for (const auto& [key, v] : h.values) {
    double exit_sum = 0;
    for_each_jump(key, lambda, spec,
                  [&](int i, int j, int ni, int nj, double k) {
                    // sum over ordered pairs a != b with x_a = x_b = i:
                    // n_i (n_i - 1) terms, each of rate k (n_j+1)/(n_i-1)
                    const double rate_fwd =
                        k * (nj + 1.0) / (ni - 1.0) * ni * (ni - 1.0);
                    // reverse move j -> i from the target state
                    const double rate_rev = k * (ni - 1.0) * (nj + 2.0);
                    exit_sum += rate_fwd;
                    out.values[jump_key(key, i, j)] += rate_rev * v;
                  });
    out.values[key] -= exit_sum * v;
    max_rate = std::max(max_rate, exit_sum);
  }
  if (max_total_rate) *max_total_rate = max_rate;
  return out;
}

namespace {

// Enumerates the product-generator moves of an all-doubled state with
// distinct sites: every ordered assignment sigma of the sites and every
// ordered tuple of distinct targets disjoint from the sites. visit(weight,
// target_sites_sorted).
template <class Visit>
void for_each_product_jump(std::span<const int> key,
                           const Eigen::VectorXd& lambda,
                           const KernelSpec& aspec, Visit&& visit) {
  const auto counts = site_counts(key);
  const int n = static_cast<int>(key.size()) / 2;
  if (static_cast<int>(counts.size()) != n) return;  // a site is not doubled
  for (const auto& sc : counts) {
    if (sc.count != 2) return;
  }
  std::vector<int> sites(n);
  for (int r = 0; r < n; ++r) sites[r] = counts[r].site;

  std::vector<int> sigma(sites);
  std::sort(sigma.begin(), sigma.end());
  const double pair_orderings = std::pow(2.0, n);  // ordered (a_r, b_r) choices
  do {
    std::vector<int> targets;
    std::vector<double> weights;  // running product of a-coefficients
    auto recurse = [&](auto&& self, int r, double w) -> void {
      if (r == n) {
        std::vector<int> sorted = targets;
        std::sort(sorted.begin(), sorted.end());
        visit(pair_orderings * w / aspec.eta, sorted);
        return;
      }
      const int i = sigma[r];
      const bool short_range = aspec.mode == KernelMode::kSmoothAShort;
      int jlo = 0, jhi = static_cast<int>(lambda.size()) - 1;
      if (short_range) {
        if (!aspec.bulk.contains(i)) return;
        jlo = std::max(aspec.bulk.lo, i - aspec.ell);
        jhi = std::min(aspec.bulk.hi, i + aspec.ell);
      }
      for (int j = jlo; j <= jhi; ++j) {
        if (std::find(sites.begin(), sites.end(), j) != sites.end()) continue;
        if (std::find(targets.begin(), targets.end(), j) != targets.end())
          continue;
        const double a = kernel_coeff(aspec, lambda, i, j);
        if (a == 0.0) continue;
        targets.push_back(j);
        self(self, r + 1, w * a);
        targets.pop_back();
      }
    };
    recurse(recurse, 0, 1.0);
  } while (std::next_permutation(sigma.begin(), sigma.end()));
}

std::vector<int> doubled_key(std::span<const int> sites) {
  std::vector<int> key;
  key.reserve(2 * sites.size());
  for (int s : sites) {
    key.push_back(s);
    key.push_back(s);
  }
  std::sort(key.begin(), key.end());
  return key;
}

}  // namespace

FlowState apply_a(const FlowState& h, const Eigen::VectorXd& lambda,
                  const KernelSpec& aspec) {
  if (aspec.mode != KernelMode::kSmoothA &&
      aspec.mode != KernelMode::kSmoothAShort) {
    throw std::invalid_argument("apply_a: an a-kernel spec is required");
  }
  FlowState out;
  out.particles = h.particles;
  out.ambient = h.ambient;
  // The per-term weight is symmetric under swapping source and target sites,
  // so scattering with the forward weight realizes the mu-symmetric action.
  for (const auto& [key, v] : h.values) {
    double exit_sum = 0;
    for_each_product_jump(key, lambda, aspec,
                          [&](double w, const std::vector<int>& tsites) {
                            exit_sum += w;
                            out.values[doubled_key(tsites)] += w * v;
                          });
    if (exit_sum != 0) out.values[key] -= exit_sum * v;
  }
  return out;
}

EtaFunction apply_b(const EtaFunction& f, const Eigen::VectorXd& lambda,
                    const KernelSpec& spec) {
  // gather over the support and its neighbours
  std::map<Configuration, double> out;
  std::vector<Configuration> domain;
  {
    std::map<Configuration, char> seen;
    auto add = [&](const Configuration& c) {
      if (seen.emplace(c, 1).second) domain.push_back(c);
    };
    for (const auto& [eta, v] : f) {
      add(eta);
      const auto key = doubled_representative(eta).coords;
      for_each_jump(key, lambda, spec,
                    [&](int i, int j, int, int, double) { add(eta.moved(i, j)); });
    }
  }
  auto value_of = [&](const Configuration& c) {
    auto it = f.find(c);
    return it == f.end() ? 0.0 : it->second;
  };
  for (const auto& eta : domain) {
    const double fv = value_of(eta);
    double acc = 0;
    const auto key = doubled_representative(eta).coords;
    for_each_jump(key, lambda, spec,
                  [&](int i, int j, int ni, int nj, double k) {
                    // doubled counts n = 2 eta: rate 2 eta_i (1 + 2 eta_j)
                    const double eta_i = 0.5 * ni;
                    const double eta_j = 0.5 * nj;
                    const double rate = k * 2.0 * eta_i * (1.0 + 2.0 * eta_j);
                    acc += rate * (value_of(eta.moved(i, j)) - fv);
                  });
    out[eta] = acc;
  }
  return out;
}

AvWindow make_av_window(std::vector<int> center, int width, int ambient,
                        const IndexInterval& bulk) {
  std::sort(center.begin(), center.end());
  LatticePoint::make(center);  // validates parity
  const int cap = static_cast<int>(std::ceil(std::sqrt(ambient)));
  if (width < 1 || width > cap) {
    throw std::invalid_argument("av window: K must satisfy 1 <= K <= ceil(sqrt(N)) = " +
                                std::to_string(cap) + ", got " +
                                std::to_string(width));
  }
  for (int c : center) {
    if (!bulk.contains(c)) {
      throw std::invalid_argument("av window: center coordinate " +
                                  std::to_string(c) + " outside the bulk set");
    }
  }
  return AvWindow{std::move(center), width};
}

int l1_sorted(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("l1_sorted: dimension mismatch");
  }
  int out = 0;
  for (std::size_t a = 0; a < x.size(); ++a) out += std::abs(x[a] - y[a]);
  return out;
}

double av(std::span<const int> x, const AvWindow& w) {
  const int d = l1_sorted(x, w.center);
  // #{ j in [K, 2K-1] : d < j } / K
  if (d < w.width) return 1.0;
  if (d >= 2 * w.width - 1) return 0.0;
  return static_cast<double>(2 * w.width - 1 - d) / w.width;
}

int emf_distance(std::span<const int> x, std::span<const int> y,
                 const IndexInterval& bulk) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("emf_distance: dimension mismatch");
  }
  int out = 0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    // |J cap [min, max)| = F(max) - F(min) with F(v) = #{j in J : j < v}
    const int d = std::abs(bulk.count_below(x[a]) - bulk.count_below(y[a]));
    out = std::max(out, d);
  }
  return out;
}

namespace {

// Domain of a quadratic form: support plus one jump neighbourhood.
std::vector<std::vector<int>> form_domain(const FlowState& h,
                                          const Eigen::VectorXd& lambda,
                                          const KernelSpec& spec) {
  std::unordered_set<std::vector<int>, VecIntHash> seen;
  std::vector<std::vector<int>> out;
  auto add = [&](const std::vector<int>& k) {
    if (seen.insert(k).second) out.push_back(k);
  };
  for (const auto& [key, v] : h.values) {
    add(key);
    if (spec.mode == KernelMode::kSmoothA ||
        spec.mode == KernelMode::kSmoothAShort) {
      for_each_product_jump(key, lambda, spec,
                            [&](double, const std::vector<int>& sites) {
                              add(doubled_key(sites));
                            });
    } else {
      for_each_jump(key, lambda, spec, [&](int i, int j, int, int, double) {
        add(jump_key(key, i, j));
      });
    }
  }
  return out;
}

}  // namespace

double dirichlet_jump(const FlowState& h, const Eigen::VectorXd& lambda,
                      const KernelSpec& spec) {
  double out = 0;
  for (const auto& key : form_domain(h, lambda, spec)) {
    const double hv = h.value(key);
    const double w = state_multiplicity(key) * pi_weight(key);
    for_each_jump(key, lambda, spec,
                  [&](int i, int j, int ni, int nj, double k) {
                    const double diff = h.value(jump_key(key, i, j)) - hv;
                    out += 0.5 * w * k * (nj + 1.0) / (ni - 1.0) * ni *
                           (ni - 1.0) * diff * diff;
                  });
  }
  return out;
}

double dirichlet_a(const FlowState& h, const Eigen::VectorXd& lambda,
                   const KernelSpec& aspec) {
  double out = 0;
  for (const auto& key : form_domain(h, lambda, aspec)) {
    const double hv = h.value(key);
    const double w = state_multiplicity(key);  // mu = 1
    for_each_product_jump(key, lambda, aspec,
                          [&](double rate, const std::vector<int>& sites) {
                            const double diff =
                                h.value(doubled_key(sites)) - hv;
                            out += 0.5 * w * rate * diff * diff;
                          });
  }
  return out;
}

std::vector<std::vector<int>> enumerate_lambda_states(int ambient, int n) {
  if (n < 0 || n > 6) {
    throw std::invalid_argument("enumerate_lambda_states: 0 <= n <= 6");
  }
  std::vector<std::vector<int>> out;
  std::vector<int> sites;
  auto recurse = [&](auto&& self, int from) -> void {
    if (static_cast<int>(sites.size()) == n) {
      out.push_back(doubled_key(sites));
      return;
    }
    for (int s = from; s < ambient; ++s) {
      sites.push_back(s);
      self(self, s);  // multisets: repetition allowed
      sites.pop_back();
    }
  };
  recurse(recurse, 0);
  return out;
}

Eigen::MatrixXd jump_generator_matrix(std::span<const std::vector<int>> basis,
                                      const Eigen::VectorXd& lambda,
                                      const KernelSpec& spec) {
  const int m = static_cast<int>(basis.size());
  std::unordered_map<std::vector<int>, int, VecIntHash> index;
  for (int r = 0; r < m; ++r) index[basis[r]] = r;
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(m, m);
  for (int r = 0; r < m; ++r) {
    for_each_jump(basis[r], lambda, spec,
                  [&](int i, int j, int ni, int nj, double k) {
                    const double rate =
                        k * (nj + 1.0) / (ni - 1.0) * ni * (ni - 1.0);
                    const auto it = index.find(jump_key(basis[r], i, j));
                    if (it == index.end()) {
                      throw std::logic_error("generator matrix: basis not closed");
                    }
                    gen(r, it->second) += rate;
                    gen(r, r) -= rate;
                  });
  }
  return gen;
}

Eigen::MatrixXd product_generator_matrix(
    std::span<const std::vector<int>> basis, const Eigen::VectorXd& lambda,
    const KernelSpec& aspec) {
  const int m = static_cast<int>(basis.size());
  std::unordered_map<std::vector<int>, int, VecIntHash> index;
  for (int r = 0; r < m; ++r) index[basis[r]] = r;
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(m, m);
  for (int r = 0; r < m; ++r) {
    for_each_product_jump(basis[r], lambda, aspec,
                          [&](double w, const std::vector<int>& sites) {
                            const auto it = index.find(doubled_key(sites));
                            if (it == index.end()) {
                              throw std::logic_error(
                                  "product generator: basis not closed");
                            }
                            gen(r, it->second) += w;
                            gen(r, r) -= w;
                          });
  }
  return gen;
}

TrajectorySource TrajectorySource::frozen_quantiles(int dim) {
  TrajectorySource s;
  s.mode_ = Mode::kFrozen;
  s.dim_ = dim;
  s.gamma0_ = quantiles(0.0, dim);
  return s;
}

TrajectorySource TrajectorySource::dbm_path(EigenvaluePath path) {
  if (path.times.empty()) {
    throw std::invalid_argument("dbm_path: empty trajectory");
  }
  TrajectorySource s;
  s.mode_ = Mode::kPath;
  s.dim_ = static_cast<int>(path.lambdas.front().size());
  s.path_ = std::move(path);
  return s;
}

Eigen::VectorXd TrajectorySource::eigenvalues_at(double t) const {
  if (mode_ == Mode::kFrozen) {
    return std::sqrt(1.0 + t) * gamma0_;
  }
  const auto& times = path_.times;
  if (t <= times.front()) return path_.lambdas.front();
  if (t >= times.back()) return path_.lambdas.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  return (1.0 - w) * path_.lambdas[lo] + w * path_.lambdas[hi];
}

namespace {

void axpy(FlowState& dst, double alpha, const FlowState& src) {
  for (const auto& [key, v] : src.values) dst.values[key] += alpha * v;
}

double truncate_state(FlowState& h, const TruncationPolicy& policy) {
  double dropped = 0;
  for (auto it = h.values.begin(); it != h.values.end();) {
    if (emf_distance(it->first, policy.center, policy.bulk) > policy.radius) {
      dropped += state_multiplicity(it->first) * pi_weight(it->first) *
                 std::abs(it->second);
      it = h.values.erase(it);
    } else {
      ++it;
    }
  }
  return dropped;
}

}  // namespace

FlowPath integrate(const FlowState& h0, const TrajectorySource& source,
                   std::span<const GeneratorStage> stages, double t0,
                   const IntegrateOptions& opts) {
  if (stages.empty()) throw std::invalid_argument("integrate: no stages");
  for (std::size_t k = 1; k < stages.size(); ++k) {
    if (stages[k].t_end < stages[k - 1].t_end) {
      throw std::invalid_argument("integrate: stage times must be ascending");
    }
  }
  const double t_final = stages.back().t_end;
  if (t_final < t0) throw std::invalid_argument("integrate: t_end < t0");
  std::vector<double> records = opts.record_times;
  std::sort(records.begin(), records.end());

  FlowPath path;
  path.times.push_back(t0);
  path.states.push_back(h0);

  FlowState h = h0;
  double t = t0;
  std::size_t rec = 0;
  while (rec < records.size() && records[rec] <= t0) ++rec;
  const double span = std::max(t_final - t0, 1e-300);

  auto flush_records = [&] {
    while (rec < records.size() && records[rec] <= t + 1e-15 * span) {
      path.times.push_back(t);
      path.states.push_back(h);
      ++rec;
    }
  };

  for (const auto& stage : stages) {
    while (t < stage.t_end - 1e-15 * span) {
      flush_records();
      double rate = 0;
      FlowState k1 = apply_jump_generator(h, source.eigenvalues_at(t),
                                          stage.spec, &rate);
      path.max_total_rate = std::max(path.max_total_rate, rate);
      double step = std::min(opts.max_step, stage.t_end - t);
      if (rate > 0) step = std::min(step, opts.stability_factor / rate);
      if (rec < records.size()) step = std::min(step, records[rec] - t);
      if (step < opts.min_step_fraction * span) {
        throw std::runtime_error(
            "integrate: step size underflow (stiff rates; max total exit "
            "rate " + std::to_string(rate) + " at t = " + std::to_string(t) + ")");
      }
      // Heun: h + step/2 (k1 + k2), k2 at the predicted point
      FlowState y1 = h;
      axpy(y1, step, k1);
      FlowState k2 = apply_jump_generator(y1, source.eigenvalues_at(t + step),
                                          stage.spec, nullptr);
      axpy(h, 0.5 * step, k1);
      axpy(h, 0.5 * step, k2);
      if (opts.truncation) {
        path.truncated_mass += truncate_state(h, *opts.truncation);
      }
      t += step;
      ++path.steps;
    }
    t = stage.t_end;
    flush_records();
  }
  if (path.times.back() < t_final - 1e-15 * span || path.states.size() == 1) {
    path.times.push_back(t_final);
    path.states.push_back(h);
  }
  return path;
}

FiniteSpeedResult finite_speed_probe(const std::vector<int>& x,
                                     const std::vector<int>& y,
                                     const KernelSpec& sspec, double s1,
                                     double s2, const TrajectorySource& source,
                                     int mass_radius) {
  if (s2 < s1) throw std::invalid_argument("finite_speed_probe: s2 >= s1");
  FlowState h0 = FlowState::delta(y, source.dim());
  std::vector<int> xs = x;
  std::sort(xs.begin(), xs.end());
  FiniteSpeedResult out;
  if (s2 == s1) {
    out.endpoint = h0;
  } else {
    const GeneratorStage stage[] = {{sspec, s2}};
    out.endpoint = integrate(h0, source, stage, s1, {}).back();
  }
  out.entry = std::abs(out.endpoint.value(xs));
  std::vector<int> ys = y;
  std::sort(ys.begin(), ys.end());
  for (const auto& [key, v] : out.endpoint.values) {
    if (emf_distance(key, ys, sspec.bulk) > mass_radius) {
      out.mass_outside +=
          state_multiplicity(key) * pi_weight(key) * std::abs(v);
    }
  }
  return out;
}

ReplacementReport replacement_check(int ambient, int n,
                                    const Eigen::VectorXd& lambda,
                                    const KernelSpec& sspec,
                                    const KernelSpec& aspec, int samples,
                                    std::uint64_t seed) {
  if (ambient > 24 || n > 2) {
    throw std::invalid_argument(
        "replacement_check: small instances only (N <= 24, n <= 2)");
  }
  const auto basis = enumerate_lambda_states(ambient, n);
  const int m = static_cast<int>(basis.size());
  const Eigen::MatrixXd sgen = jump_generator_matrix(basis, lambda, sspec);
  const Eigen::MatrixXd agen = product_generator_matrix(basis, lambda, aspec);
  Eigen::VectorXd w_pi(m), w_mu(m);
  for (int r = 0; r < m; ++r) {
    const double mult = state_multiplicity(basis[r]);
    w_pi[r] = mult * pi_weight(basis[r]);
    w_mu[r] = mult;
  }
  ReplacementReport rep;
  rep.min_ratio = std::numeric_limits<double>::infinity();
  rep.max_ratio = -std::numeric_limits<double>::infinity();
  rep.max_s_form = -std::numeric_limits<double>::infinity();
  rep.max_a_form = -std::numeric_limits<double>::infinity();
  rep.nonpositive = true;
  Rng rng = make_stream(seed, 0x7265706c);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd h(m);
  int accepted = 0;
  while (accepted < samples) {
    for (int r = 0; r < m; ++r) h[r] = normal(rng);
    const double qs = h.dot(w_pi.asDiagonal() * (sgen * h));
    const double qa = h.dot(w_mu.asDiagonal() * (agen * h));
    const double scale = h.squaredNorm();
    if (std::abs(qa) < 1e-12 * scale) {
      ++rep.degenerate;
      continue;
    }
    ++accepted;
    rep.max_s_form = std::max(rep.max_s_form, qs);
    rep.max_a_form = std::max(rep.max_a_form, qa);
    if (qs > 1e-10 * scale || qa > 1e-10 * scale) rep.nonpositive = false;
    const double ratio = qs / qa;
    rep.min_ratio = std::min(rep.min_ratio, ratio);
    rep.max_ratio = std::max(rep.max_ratio, ratio);
  }
  rep.samples = accepted;
  return rep;
}

namespace {

// All canonical states whose sorted site tuple stays within `halfwidth` of
// the window center sites (a superset box, filtered later).
std::vector<std::vector<int>> states_near(const std::vector<int>& center_sites,
                                          int halfwidth, int ambient) {
  std::vector<std::vector<int>> out;
  std::vector<int> sites;
  const int n = static_cast<int>(center_sites.size());
  auto recurse = [&](auto&& self, int r, int from) -> void {
    if (r == n) {
      out.push_back(doubled_key(sites));
      return;
    }
    const int lo = std::max({from, 0, center_sites[r] - halfwidth});
    const int hi = std::min(ambient - 1, center_sites[r] + halfwidth);
    for (int s = lo; s <= hi; ++s) {
      sites.push_back(s);
      self(self, r + 1, s);
      sites.pop_back();
    }
  };
  recurse(recurse, 0, 0);
  return out;
}

std::vector<int> center_sites_of(const std::vector<int>& center) {
  std::vector<int> sites;
  for (std::size_t i = 0; i < center.size(); i += 2) {
    sites.push_back(center[i]);
  }
  return sites;
}

}  // namespace

L2DecayReport l2_decay_experiment(const L2DecayParams& params) {
  const int n_amb = params.ambient;
  const int n = params.n;
  const double t1 =
      params.t1 < 0 ? std::sqrt(static_cast<double>(params.cap_k)) / n_amb
                    : params.t1;
  const double margin = std::pow(static_cast<double>(n_amb),
                                 params.margin_exponent);
  auto require_lt = [&](double lhs, double rhs, const std::string& what) {
    if (lhs * margin > rhs) {
      throw std::invalid_argument(
          "parameter ordering violated: " + what + " requires " +
          std::to_string(lhs) + " * N^" + std::to_string(params.margin_exponent) +
          " <= " + std::to_string(rhs));
    }
  };
  require_lt(1.0 / n_amb, params.eta, "1/N << eta");
  require_lt(params.eta, t1, "eta << T1");
  require_lt(t1, static_cast<double>(params.ell) / n_amb, "T1 << ell/N");
  require_lt(static_cast<double>(params.ell) / n_amb,
             static_cast<double>(params.cap_k) / n_amb, "ell/N << K/N");

  const IndexInterval bulk = bulk_indices(params.delta, n_amb);
  std::vector<int> center = params.center;
  if (center.empty()) {
    const int c = (bulk.lo + bulk.hi) / 2;
    std::vector<int> sites(n);
    for (int r = 0; r < n; ++r) sites[r] = c + r;
    center = doubled_key(sites);
  }
  const AvWindow window = make_av_window(center, params.cap_k, n_amb, bulk);

  // initial observable data from a seeded Gaussian sample
  WignerSample w = sample_gaussian(n_amb, SymmetryClass::kRealSymmetric,
                                   params.seed);
  SpectralDataR s = decompose(w);
  ObservableOptions oopts;
  oopts.normalize = ObservableNormalization::kUnitMsq;
  Observable obs = build_observable(n_amb, ObservableKind::kRandomSymmetric,
                                    stream_seed(params.seed, 0x6f627331),
                                    oopts);
  OverlapTableR table = overlaps(s, obs);

  const double parity = (n % 2 == 0) ? 1.0 : 0.0;
  FlowState h0;
  h0.particles = n;
  h0.ambient = n_amb;
  for (auto& key : states_near(center_sites_of(window.center),
                               params.cap_k, n_amb)) {
    const double cut = av(key, window);
    if (cut == 0.0) continue;
    const double g0 = f_observable(phi(std::span<const int>(key)), table.p,
                                   table.msq);
    const double v = cut * (g0 - parity);
    if (v != 0.0) h0.set(std::move(key), v);
  }

  TrajectorySource source = TrajectorySource::frozen_quantiles(n_amb);
  KernelSpec sspec = KernelSpec::short_c(params.ell, bulk);
  const GeneratorStage stage[] = {{sspec, t1}};
  IntegrateOptions iopts;
  const int n_records = 24;
  for (int r = 1; r <= n_records; ++r) {
    iopts.record_times.push_back(t1 * r / n_records);
  }
  iopts.truncation = TruncationPolicy{window.center, 4 * params.cap_k, bulk};
  FlowPath path = integrate(h0, source, stage, 0.0, iopts);

  L2DecayReport rep;
  rep.initial_norm = norm_l2(h0, Measure::kPi);
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    rep.times.push_back(path.times[i]);
    rep.norms.push_back(norm_l2(path.states[i], Measure::kPi));
  }
  for (std::size_t i = 1; i < rep.norms.size(); ++i) {
    if (rep.norms[i] > rep.norms[i - 1] * (1.0 + 1e-12) + 1e-30) {
      rep.monotone = false;
    }
  }
  const double n_eps = std::pow(static_cast<double>(n_amb), params.epsilon);
  const double n_xi = std::pow(static_cast<double>(n_amb),
                               params.n * params.xi);
  const double kk = static_cast<double>(params.cap_k);
  const double ell = static_cast<double>(params.ell);
  rep.error_term = n_xi * (n_eps * ell / kk + n_amb * t1 / ell +
                           n_amb * params.eta / ell +
                           n_eps / std::sqrt(n_amb * params.eta) +
                           1.0 / std::sqrt(kk));
  rep.envelope = params.envelope_constant * std::pow(kk, 0.5 * n) *
                 rep.error_term;
  rep.endpoint_ratio = rep.norms.back() / rep.envelope;
  rep.truncated_mass = path.truncated_mass;
  return rep;
}

RelaxationReport relaxation_experiment(const RelaxationParams& params) {
  const int n_amb = params.dim;
  const int n = params.n;
  if (n < 1 || n > 3) {
    throw std::invalid_argument("relaxation_experiment: 1 <= n <= 3");
  }
  const double t = params.flow_time < 0
                       ? std::pow(static_cast<double>(n_amb), -1.0 + 0.2)
                       : params.flow_time;
  const int lo = static_cast<int>(params.delta * n_amb);
  const int hi = static_cast<int>((1.0 - params.delta) * n_amb) - 1;
  if (lo + 10 >= hi) throw std::invalid_argument("relaxation_experiment: window too small");

  struct ConfigSpec {
    std::string name;
    std::vector<std::pair<int, int>> counts;
  };
  std::vector<ConfigSpec> specs;
  auto clampi = [&](int v) { return std::min(hi, std::max(lo, v)); };
  for (int c : {n_amb / 4, n_amb / 2, 3 * n_amb / 4}) {
    const int cc = clampi(c);
    const std::string at = "@" + std::to_string(cc);
    if (n == 1) {
      specs.push_back({"single" + at, {{cc, 1}}});
    } else if (n == 2) {
      specs.push_back({"stack" + at, {{cc, 2}}});
      specs.push_back({"adjacent" + at, {{cc, 1}, {clampi(cc + 1), 1}}});
      specs.push_back({"spread" + at, {{clampi(cc - 5), 1}, {clampi(cc + 5), 1}}});
    } else {
      specs.push_back({"stack" + at, {{cc, 3}}});
      specs.push_back({"mixed" + at, {{cc, 2}, {clampi(cc + 1), 1}}});
      specs.push_back(
          {"spread" + at, {{clampi(cc - 5), 1}, {cc, 1}, {clampi(cc + 5), 1}}});
    }
  }

  // compact site map shared by all configs
  std::vector<int> sites;
  for (const auto& cs : specs)
    for (auto [s, c] : cs.counts) sites.push_back(s);
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  auto compact = [&](int site) {
    return static_cast<int>(
        std::lower_bound(sites.begin(), sites.end(), site) - sites.begin());
  };
  std::vector<Configuration> configs;
  for (const auto& cs : specs) {
    std::vector<std::pair<int, int>> remapped;
    for (auto [s, c] : cs.counts) remapped.emplace_back(compact(s), c);
    configs.push_back(Configuration::from_counts(remapped));
  }

  ObservableOptions oopts;
  oopts.normalize = ObservableNormalization::kUnitMsq;
  Observable obs = build_observable(n_amb, ObservableKind::kRandomSymmetric,
                                    params.observable_seed, oopts);

  const int m = params.samples;
  const int ncfg = static_cast<int>(configs.size());
  std::vector<std::vector<double>> values(ncfg, std::vector<double>(m));
  parallel_for(
      static_cast<std::size_t>(m),
      [&](std::size_t k) {
        const std::uint64_t s1 = stream_seed(params.seed, 2 * k);
        const std::uint64_t s2 = stream_seed(params.seed, 2 * k + 1);
        WignerSample w0 = sample_wigner(n_amb, SymmetryClass::kRealSymmetric,
                                        params.dist, s1);
        WignerSample wt = w0;
        if (t > 0) {
          WignerSample u =
              sample_gaussian(n_amb, SymmetryClass::kRealSymmetric, s2);
          wt = ou_mix(w0, u, t);
        }
        SpectralDataR s = decompose(wt);
        // overlap sub-block on the needed sites only
        const int ns = static_cast<int>(sites.size());
        Eigen::MatrixXd ucols(n_amb, ns);
        for (int c = 0; c < ns; ++c) ucols.col(c) = s.u.col(sites[c]);
        Eigen::MatrixXd psub = ucols.transpose() * (obs.aring * ucols);
        psub = 0.5 * (psub + psub.transpose()).eval();
        for (int c = 0; c < ncfg; ++c) {
          values[c][k] = f_observable(configs[c], psub, obs.msq);
        }
      },
      params.threads);

  RelaxationReport rep;
  rep.target = (n % 2 == 0) ? 1.0 : 0.0;
  for (int c = 0; c < ncfg; ++c) {
    double mean = 0;
    for (double v : values[c]) mean += v;
    mean /= m;
    double var = 0;
    for (double v : values[c]) var += (v - mean) * (v - mean);
    var /= (m - 1);
    RelaxationConfigResult r;
    r.name = specs[c].name;
    r.mean = mean;
    r.std_error = std::sqrt(var / m);
    r.gap = std::abs(mean - rep.target);
    rep.max_gap = std::max(rep.max_gap, r.gap);
    rep.max_std_error = std::max(rep.max_std_error, r.std_error);
    rep.configs.push_back(std::move(r));
  }
  return rep;
}

}  // namespace rmt
