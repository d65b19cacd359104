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

#ifndef RMTLAB_MATCHINGS_HPP
#define RMTLAB_MATCHINGS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "rmt/ensemble.hpp"
#include "rmt/overlap.hpp"
#include "rmt/spectral.hpp"

namespace rmt {

// k!! = k (k-2)!! with 1!! = 0!! = (-1)!! = 1.
std::uint64_t double_factorial(int k);

// Particle configuration eta: site -> count, finite support.
class Configuration {
 public:
  Configuration() = default;
  // pairs (site, count), any order; zero counts dropped, negative rejected.
  static Configuration from_counts(std::span<const std::pair<int, int>> counts);
  static Configuration single_site(int site, int count);

  int particles() const { return total_; }
  int count_at(int site) const;
  // sorted (site, count) with count >= 1
  const std::vector<std::pair<int, int>>& sites() const { return sites_; }
  // eta^{ij}: one particle moved from i to j; identity when eta_i = 0.
  Configuration moved(int i, int j) const;

  bool operator<(const Configuration& o) const { return sites_ < o.sites_; }
  bool operator==(const Configuration& o) const { return sites_ == o.sites_; }

 private:
  std::vector<std::pair<int, int>> sites_;
  int total_ = 0;
};

// x in [N]^{2n} with every site appearing an even number of times; stored
// sorted (multiset semantics).
struct LatticePoint {
  std::vector<int> coords;
  static LatticePoint make(std::vector<int> coords);  // sorts, validates parity
};

// eta_i = n_i(x)/2; throws when x has a site of odd multiplicity.
Configuration phi(const LatticePoint& x);
Configuration phi(std::span<const int> coords);

// x-representative of eta: each site repeated 2 eta_i times, sorted.
LatticePoint doubled_representative(const Configuration& eta);

// A perfect matching of the doubled vertex set, kept as site pairs per edge.
struct PerfectMatching {
  std::vector<std::pair<int, int>> edges;
};

// All perfect matchings of V_eta; count is (2n-1)!!. Guarded at n <= 6.
std::vector<PerfectMatching> enumerate_matchings(const Configuration& eta);

// P(G) = prod over edges of p(site1, site2).
double eval_p(const PerfectMatching& g, const Eigen::MatrixXd& p);

// M(eta) = prod_i (2 eta_i - 1)!!.
std::uint64_t moment_factor(const Configuration& eta);

// Single-sample integrand of the perfect matching observable:
//   (N / (2 <A^2>))^{n/2} [(n-1)!!]^{-1} M(eta)^{-1} sum_G P(G).
// The eta-conditional expectation is realized by Monte Carlo averaging of this
// value over samples at the caller.
double f_observable(const Configuration& eta, const Eigen::MatrixXd& p,
                    double msq);
double f_observable(const Configuration& eta, const OverlapTableR& table);

// A 2-regular multigraph on [n] as its cycle decomposition; loops are
// 1-cycles, double edges 2-cycles.
using CycleDecomposition = std::vector<std::vector<int>>;

std::vector<CycleDecomposition> two_regular_multigraphs(int n);

// sum over Gr_2[n] of prod over cycles (v_1..v_k) of
// (2k-2)!! p_{j_{v1} j_{v2}} ... p_{j_{vk} j_{v1}}; equals the perfect
// matching sum for the configuration with one particle at each j.
double multigraph_sum(std::span<const int> j_sites, const Eigen::MatrixXd& p);

// Exact spectral reduction of a cycle's kernel-weighted overlap sum:
//   sum_{j_1..j_k} (prod_r a_{i_r j_r}) p_{j_1 j_2} ... p_{j_k j_1}
//     = N^{1-k} <Im G(lambda_{i_1}+i eta) A ... Im G(lambda_{i_k}+i eta) A>
// with a_{ij} = eta / (N ((lambda_i - lambda_j)^2 + eta^2)). Returns the
// absolute gap between the direct sum and the trace evaluation.
struct CycleReduction {
  double lhs = 0;
  double rhs = 0;
  double gap = 0;
};
CycleReduction chain_reduction_check(const SpectralDataR& s,
                                     const Observable& obs,
                                     std::span<const int> i_sites, double eta);

}  // namespace rmt

#endif  // RMTLAB_MATCHINGS_HPP
