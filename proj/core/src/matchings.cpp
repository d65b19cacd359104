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

#include "rmt/matchings.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rmt {

std::uint64_t double_factorial(int k) {
  if (k < -1) throw std::invalid_argument("double_factorial: k >= -1 required");
  std::uint64_t out = 1;
  for (int v = k; v >= 2; v -= 2) out *= static_cast<std::uint64_t>(v);
  return out;
}

Configuration Configuration::from_counts(
    std::span<const std::pair<int, int>> counts) {
  Configuration c;
  for (auto [site, count] : counts) {
    if (count < 0) throw std::invalid_argument("negative particle count");
    if (count == 0) continue;
    c.sites_.emplace_back(site, count);
    c.total_ += count;
  }
  std::sort(c.sites_.begin(), c.sites_.end());
  for (std::size_t i = 1; i < c.sites_.size(); ++i) {
    if (c.sites_[i].first == c.sites_[i - 1].first) {
      throw std::invalid_argument("duplicate site in configuration counts");
    }
  }
  return c;
}

Configuration Configuration::single_site(int site, int count) {
  std::pair<int, int> one[] = {{site, count}};
  return from_counts(one);
}

int Configuration::count_at(int site) const {
  for (auto& [s, c] : sites_) {
    if (s == site) return c;
  }
  return 0;
}

Configuration Configuration::moved(int i, int j) const {
  if (i == j) return *this;
  if (count_at(i) == 0) return *this;
  std::vector<std::pair<int, int>> counts = sites_;
  bool found_j = false;
  for (auto& [s, c] : counts) {
    if (s == i) c -= 1;
    if (s == j) {
      c += 1;
      found_j = true;
    }
  }
  if (!found_j) counts.emplace_back(j, 1);
  return from_counts(counts);
}

LatticePoint LatticePoint::make(std::vector<int> coords) {
  std::sort(coords.begin(), coords.end());
  for (std::size_t i = 0; i < coords.size();) {
    std::size_t j = i;
    while (j < coords.size() && coords[j] == coords[i]) ++j;
    if ((j - i) % 2 != 0) {
      throw std::invalid_argument(
          "lattice point outside Lambda^n: site multiplicity is odd");
    }
    i = j;
  }
  LatticePoint x;
  x.coords = std::move(coords);
  return x;
}

Configuration phi(std::span<const int> coords) {
  std::vector<int> sorted(coords.begin(), coords.end());
  LatticePoint x = LatticePoint::make(std::move(sorted));
  std::vector<std::pair<int, int>> counts;
  for (std::size_t i = 0; i < x.coords.size();) {
    std::size_t j = i;
    while (j < x.coords.size() && x.coords[j] == x.coords[i]) ++j;
    counts.emplace_back(x.coords[i], static_cast<int>((j - i) / 2));
    i = j;
  }
  return Configuration::from_counts(counts);
}

Configuration phi(const LatticePoint& x) { return phi(std::span(x.coords)); }

LatticePoint doubled_representative(const Configuration& eta) {
  std::vector<int> coords;
  for (auto [site, count] : eta.sites()) {
    coords.insert(coords.end(), 2 * count, site);
  }
  return LatticePoint::make(std::move(coords));
}

namespace {

void recurse_matchings(std::vector<int>& vertex_sites, std::vector<char>& used,
                       std::vector<std::pair<int, int>>& edges,
                       std::vector<PerfectMatching>& out) {
  const std::size_t v = [&] {
    for (std::size_t i = 0; i < used.size(); ++i)
      if (!used[i]) return i;
    return used.size();
  }();
  if (v == used.size()) {
    out.push_back(PerfectMatching{edges});
    return;
  }
  used[v] = 1;
  for (std::size_t w = v + 1; w < used.size(); ++w) {
    if (used[w]) continue;
    used[w] = 1;
    edges.emplace_back(vertex_sites[v], vertex_sites[w]);
    recurse_matchings(vertex_sites, used, edges, out);
    edges.pop_back();
    used[w] = 0;
  }
  used[v] = 0;
}

}  // namespace

std::vector<PerfectMatching> enumerate_matchings(const Configuration& eta) {
  const int n = eta.particles();
  if (n > 6) {
    throw std::invalid_argument(
        "enumerate_matchings: n > 6 refused; use the multigraph reduction");
  }
  std::vector<int> vertex_sites;
  for (auto [site, count] : eta.sites()) {
    vertex_sites.insert(vertex_sites.end(), 2 * count, site);
  }
  std::vector<PerfectMatching> out;
  if (vertex_sites.empty()) {
    out.push_back(PerfectMatching{});
    return out;
  }
  std::vector<char> used(vertex_sites.size(), 0);
  std::vector<std::pair<int, int>> edges;
  recurse_matchings(vertex_sites, used, edges, out);
  return out;
}

double eval_p(const PerfectMatching& g, const Eigen::MatrixXd& p) {
  double out = 1.0;
  for (auto [i, j] : g.edges) {
    if (i >= p.rows() || j >= p.rows()) {
      throw std::invalid_argument("eval_p: site outside overlap table range");
    }
    out *= p(i, j);
  }
  return out;
}

std::uint64_t moment_factor(const Configuration& eta) {
  std::uint64_t out = 1;
  for (auto [site, count] : eta.sites()) {
    out *= double_factorial(2 * count - 1);
  }
  return out;
}

double f_observable(const Configuration& eta, const Eigen::MatrixXd& p,
                    double msq) {
  if (msq <= 0) throw std::invalid_argument("f_observable: <A^2> must be positive");
  const int n = eta.particles();
  if (n == 0) return 1.0;
  double sum = 0;
  for (const auto& g : enumerate_matchings(eta)) sum += eval_p(g, p);
  const double scale =
      std::pow(static_cast<double>(p.rows()) / (2.0 * msq), 0.5 * n);
  return scale * sum /
         (static_cast<double>(double_factorial(n - 1)) *
          static_cast<double>(moment_factor(eta)));
}

double f_observable(const Configuration& eta, const OverlapTableR& table) {
  return f_observable(eta, table.p, table.msq);
}

namespace {

// Extends a partial cycle cover of [n]. Each cycle is recorded once: it
// starts at its smallest vertex, and for length >= 3 the orientation is fixed
// by second-vertex < last-vertex.
void recurse_multigraphs(int n, std::vector<char>& used,
                         CycleDecomposition& cycles,
                         std::vector<CycleDecomposition>& out) {
  int v = -1;
  for (int i = 0; i < n; ++i) {
    if (!used[i]) {
      v = i;
      break;
    }
  }
  if (v < 0) {
    out.push_back(cycles);
    return;
  }
  used[v] = 1;
  std::vector<int> cycle{v};
  // loop at v
  cycles.push_back(cycle);
  recurse_multigraphs(n, used, cycles, out);
  cycles.pop_back();
  // longer cycles through v
  std::vector<int> rest;
  for (int i = v + 1; i < n; ++i)
    if (!used[i]) rest.push_back(i);
  // choose ordered sequences of distinct vertices from `rest`
  std::vector<int> seq;
  std::vector<char> taken(rest.size(), 0);
  auto extend = [&](auto&& self) -> void {
    if (!seq.empty()) {
      if (seq.size() == 1 || seq[0] < seq.back()) {
        CycleDecomposition saved = cycles;
        std::vector<int> cyc{v};
        cyc.insert(cyc.end(), seq.begin(), seq.end());
        cycles.push_back(cyc);
        for (int u : seq) used[u] = 1;
        recurse_multigraphs(n, used, cycles, out);
        for (int u : seq) used[u] = 0;
        cycles = std::move(saved);
      }
    }
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (taken[i]) continue;
      taken[i] = 1;
      seq.push_back(rest[i]);
      self(self);
      seq.pop_back();
      taken[i] = 0;
    }
  };
  extend(extend);
  used[v] = 0;
}

}  // namespace

std::vector<CycleDecomposition> two_regular_multigraphs(int n) {
  std::vector<CycleDecomposition> out;
  if (n == 0) {
    out.push_back({});
    return out;
  }
  std::vector<char> used(n, 0);
  CycleDecomposition cycles;
  recurse_multigraphs(n, used, cycles, out);
  return out;
}

double multigraph_sum(std::span<const int> j_sites, const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(j_sites.size());
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (j_sites[a] == j_sites[b]) {
        throw std::invalid_argument("multigraph_sum: sites must be distinct");
      }
  double total = 0;
  for (const auto& graph : two_regular_multigraphs(n)) {
    double term = 1.0;
    for (const auto& cyc : graph) {
      const int k = static_cast<int>(cyc.size());
      double mono = 1.0;
      for (int r = 0; r < k; ++r) {
        mono *= p(j_sites[cyc[r]], j_sites[cyc[(r + 1) % k]]);
      }
      term *= static_cast<double>(double_factorial(2 * k - 2)) * mono;
    }
    total += term;
  }
  return total;
}

CycleReduction chain_reduction_check(const SpectralDataR& s,
                                     const Observable& obs,
                                     std::span<const int> i_sites, double eta) {
  if (eta <= 0) throw std::invalid_argument("chain_reduction_check: eta > 0");
  const int n = s.dim();
  const int k = static_cast<int>(i_sites.size());
  if (k < 1) throw std::invalid_argument("chain_reduction_check: empty cycle");
  // a_{i j} rows for the cycle's i-sites (full kernel, unrestricted j-sum)
  std::vector<Eigen::VectorXd> a(k);
  for (int r = 0; r < k; ++r) {
    const Complex z(s.lambda[i_sites[r]], eta);
    a[r] = im_resolvent_weights(s.lambda, z) / static_cast<double>(n);
  }
  const OverlapTableR table = overlaps(s, obs);

  // direct sum over j-tuples by cyclic contraction:
  // tr prod_r diag(a_r) P = sum_{j_1..j_k} (prod_r a_r(j_r)) p_{j_1 j_2}...p_{j_k j_1}
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (int r = 0; r < k; ++r) {
    m = m * (a[r].asDiagonal() * table.p);
  }
  const double lhs = m.trace();

  // independent route: dense Im G products in the original coordinates
  Eigen::MatrixXd chain = Eigen::MatrixXd::Identity(n, n);
  for (int r = 0; r < k; ++r) {
    const Complex z(s.lambda[i_sites[r]], eta);
    const Eigen::MatrixXd img = dense_resolvent(s, z).imag();
    chain = chain * img * obs.aring;
  }
  const double rhs = std::pow(static_cast<double>(n), 1 - k) * chain.trace() /
                     static_cast<double>(n);
  return {lhs, rhs, std::abs(lhs - rhs)};
}

}  // namespace rmt
