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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "rmt/ensemble.hpp"
#include "rmt/matchings.hpp"

using namespace rmt;

namespace {

Eigen::MatrixXd random_symmetric_table(int n, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd p(n, n);
  for (int i = 0; i < n; ++i) {
    p(i, i) = normal(rng);
    for (int j = i + 1; j < n; ++j) {
      p(i, j) = normal(rng);
      p(j, i) = p(i, j);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("double factorial convention") {
  CHECK(double_factorial(-1) == 1);
  CHECK(double_factorial(0) == 1);
  CHECK(double_factorial(1) == 1);
  CHECK(double_factorial(2) == 2);
  CHECK(double_factorial(3) == 3);
  CHECK(double_factorial(5) == 15);
  CHECK(double_factorial(11) == 10395);
  CHECK_THROWS_AS(double_factorial(-2), std::invalid_argument);
}

TEST_CASE("phi maps doubled tuples to configurations") {
  SUBCASE("two singles") {
    const int x[] = {3, 3, 7, 7};
    Configuration eta = phi(std::span<const int>(x));
    CHECK(eta.particles() == 2);
    CHECK(eta.count_at(3) == 1);
    CHECK(eta.count_at(7) == 1);
  }
  SUBCASE("one doubled site") {
    const int x[] = {5, 5, 5, 5};
    Configuration eta = phi(std::span<const int>(x));
    CHECK(eta.particles() == 2);
    CHECK(eta.count_at(5) == 2);
  }
  SUBCASE("odd multiplicity rejected") {
    const int x[] = {1, 1, 2};
    CHECK_THROWS_AS(phi(std::span<const int>(x)), std::invalid_argument);
  }
  SUBCASE("permutation invariance") {
    const int x1[] = {2, 9, 2, 9};
    const int x2[] = {9, 2, 9, 2};
    CHECK(phi(std::span<const int>(x1)) == phi(std::span<const int>(x2)));
  }
  SUBCASE("round trip through the doubled representative") {
    Configuration eta = Configuration::from_counts(
        std::vector<std::pair<int, int>>{{1, 2}, {4, 1}});
    CHECK(phi(doubled_representative(eta)) == eta);
  }
}

TEST_CASE("matching counts are (2n-1)!!") {
  for (int n = 0; n <= 6; ++n) {
    Configuration eta = Configuration::single_site(0, n);
    CHECK(enumerate_matchings(eta).size() == double_factorial(2 * n - 1));
  }
  // independence from the particle arrangement
  Configuration spread = Configuration::from_counts(
      std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {5, 1}});
  CHECK(enumerate_matchings(spread).size() == double_factorial(7));
  Configuration big = Configuration::single_site(0, 7);
  CHECK_THROWS_AS(enumerate_matchings(big), std::invalid_argument);
}

TEST_CASE("n = 2 matching sum reproduces p_ii p_jj + 2 p_ij^2") {
  Eigen::MatrixXd p = random_symmetric_table(4, 7);
  Configuration eta = Configuration::from_counts(
      std::vector<std::pair<int, int>>{{1, 1}, {3, 1}});
  auto ms = enumerate_matchings(eta);
  REQUIRE(ms.size() == 3);
  double total = 0;
  for (const auto& g : ms) total += eval_p(g, p);
  CHECK(total == doctest::Approx(p(1, 1) * p(3, 3) + 2 * p(1, 3) * p(1, 3))
                     .epsilon(1e-14));
}

TEST_CASE("n = 3 matching sum contains the 8-fold triangle") {
  Eigen::MatrixXd p = random_symmetric_table(3, 8);
  Configuration eta = Configuration::from_counts(
      std::vector<std::pair<int, int>>{{0, 1}, {1, 1}, {2, 1}});
  auto ms = enumerate_matchings(eta);
  REQUIRE(ms.size() == 15);
  double total = 0;
  std::map<std::vector<int>, int> monomial_census;
  for (const auto& g : ms) {
    total += eval_p(g, p);
    std::vector<int> key;
    for (auto [a, b] : g.edges) {
      key.push_back(a * 3 + b);
    }
    std::sort(key.begin(), key.end());
    ++monomial_census[key];
  }
  const double expected = p(0, 0) * p(1, 1) * p(2, 2) +
                          2 * p(0, 1) * p(0, 1) * p(2, 2) +
                          2 * p(0, 2) * p(0, 2) * p(1, 1) +
                          2 * p(1, 2) * p(1, 2) * p(0, 0) +
                          8 * p(0, 1) * p(1, 2) * p(0, 2);
  CHECK(total == doctest::Approx(expected).epsilon(1e-14));
  // the triangle monomial p_01 p_12 p_02 appears 8 times
  int triangles = 0;
  for (const auto& [key, count] : monomial_census) {
    bool has_diag = false;
    for (int e : key) {
      if (e % 3 == e / 3) has_diag = true;
    }
    if (!has_diag) triangles += count;
  }
  CHECK(triangles == 8);
}

TEST_CASE("moment factor") {
  CHECK(moment_factor(Configuration::from_counts(
            std::vector<std::pair<int, int>>{{0, 1}, {2, 1}, {9, 1}})) == 1);
  CHECK(moment_factor(Configuration::single_site(4, 3)) == 15);
  CHECK(moment_factor(Configuration::from_counts(
            std::vector<std::pair<int, int>>{{0, 2}, {1, 1}})) == 3);
}

TEST_CASE("f observable") {
  Eigen::MatrixXd p = random_symmetric_table(6, 9);
  const double msq = 0.8;
  SUBCASE("empty configuration gives 1") {
    CHECK(f_observable(Configuration{}, p, msq) == 1.0);
  }
  SUBCASE("stacked configuration reduces to a power") {
    const int n = 3, site = 2;
    Configuration eta = Configuration::single_site(site, n);
    const double expected = std::pow(6.0 / (2 * msq), 1.5) *
                            std::pow(p(site, site), 3) /
                            static_cast<double>(double_factorial(n - 1));
    CHECK(f_observable(eta, p, msq) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("invariant under consistent relabeling") {
    Configuration eta = Configuration::from_counts(
        std::vector<std::pair<int, int>>{{0, 1}, {3, 2}});
    // permute sites by a cycle and conjugate the table
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
    perm.setIdentity();
    std::vector<int> sigma = {2, 0, 5, 1, 4, 3};
    for (int i = 0; i < 6; ++i) perm.indices()[i] = sigma[i];
    Eigen::MatrixXd pp = perm.transpose() * p * perm;
    const int s0 = static_cast<int>(
        std::find(sigma.begin(), sigma.end(), 0) - sigma.begin());
    const int s3 = static_cast<int>(
        std::find(sigma.begin(), sigma.end(), 3) - sigma.begin());
    Configuration eta2 = Configuration::from_counts(
        std::vector<std::pair<int, int>>{{s0, 1}, {s3, 2}});
    CHECK(f_observable(eta, p, msq) ==
          doctest::Approx(f_observable(eta2, pp, msq)).epsilon(1e-12));
  }
  SUBCASE("zero normalization rejected") {
    CHECK_THROWS_AS(f_observable(Configuration::single_site(0, 1), p, 0.0),
                    std::invalid_argument);
  }
}

TEST_CASE("two-regular multigraph census") {
  CHECK(two_regular_multigraphs(0).size() == 1);
  CHECK(two_regular_multigraphs(1).size() == 1);
  CHECK(two_regular_multigraphs(2).size() == 2);
  CHECK(two_regular_multigraphs(3).size() == 5);
  // graphs whose cycles all have length two number 1(n even) (n-1)!!
  for (int n = 1; n <= 6; ++n) {
    int all_two = 0;
    for (const auto& graph : two_regular_multigraphs(n)) {
      bool ok = true;
      for (const auto& cyc : graph) ok = ok && cyc.size() == 2;
      all_two += ok;
    }
    const int expected =
        (n % 2 == 0) ? static_cast<int>(double_factorial(n - 1)) : 0;
    CHECK(all_two == expected);
  }
  // total matching weight identity: sum over graphs of prod (2k-2)!! = (2n-1)!!
  for (int n = 1; n <= 6; ++n) {
    double total = 0;
    for (const auto& graph : two_regular_multigraphs(n)) {
      double w = 1;
      for (const auto& cyc : graph) {
        w *= static_cast<double>(
            double_factorial(2 * static_cast<int>(cyc.size()) - 2));
      }
      total += w;
    }
    CHECK(total == doctest::Approx(
                       static_cast<double>(double_factorial(2 * n - 1))));
  }
}

TEST_CASE("multigraph closed forms for n = 2 and n = 3") {
  Eigen::MatrixXd p = random_symmetric_table(8, 10);
  const int j2[] = {1, 4};
  CHECK(multigraph_sum(j2, p) ==
        doctest::Approx(2 * p(1, 4) * p(1, 4) + p(1, 1) * p(4, 4))
            .epsilon(1e-14));
  const int j3[] = {0, 2, 5};
  const double expected =
      p(0, 0) * p(2, 2) * p(5, 5) + 2 * p(0, 2) * p(0, 2) * p(5, 5) +
      2 * p(0, 5) * p(0, 5) * p(2, 2) + 2 * p(2, 5) * p(2, 5) * p(0, 0) +
      8 * p(0, 2) * p(2, 5) * p(0, 5);
  CHECK(multigraph_sum(j3, p) == doctest::Approx(expected).epsilon(1e-14));
  const int bad[] = {1, 1};
  CHECK_THROWS_AS(multigraph_sum(bad, p), std::invalid_argument);
}

TEST_CASE("multigraph sum equals brute-force matching enumeration") {
  // oracle: enumerate_matchings + eval_p on the all-singles configuration
  int table_id = 0;
  for (int n = 2; n <= 5; ++n) {
    for (int rep = 0; rep < 25; ++rep) {
      Eigen::MatrixXd p = random_symmetric_table(n + 2, 100 + table_id++);
      std::vector<int> js(n);
      std::vector<std::pair<int, int>> counts;
      for (int r = 0; r < n; ++r) {
        js[r] = r + 1;
        counts.emplace_back(r + 1, 1);
      }
      double brute = 0;
      for (const auto& g :
           enumerate_matchings(Configuration::from_counts(counts))) {
        brute += eval_p(g, p);
      }
      const double fast = multigraph_sum(js, p);
      CHECK(std::abs(fast - brute) <=
            1e-12 * std::max(1.0, std::abs(brute)));
    }
  }
}

TEST_CASE("cycle reduction is an exact spectral identity") {
  const int n = 16;
  WignerSample w = sample_gaussian(n, SymmetryClass::kRealSymmetric, 21);
  SpectralDataR s = decompose(w);
  Observable obs = build_observable(n, ObservableKind::kRandomSymmetric, 22);
  SUBCASE("loop (k = 1)") {
    const int is[] = {5};
    CHECK(chain_reduction_check(s, obs, is, 0.3).gap <= 1e-10);
  }
  SUBCASE("two-cycle") {
    const int is[] = {3, 11};
    CHECK(chain_reduction_check(s, obs, is, 0.15).gap <= 1e-10);
  }
  SUBCASE("three-cycle") {
    const int is[] = {2, 7, 13};
    CHECK(chain_reduction_check(s, obs, is, 0.4).gap <= 1e-10);
  }
  SUBCASE("kernel row sum is the resolvent trace") {
    const double eta = 0.25;
    for (int i : {0, 6, 15}) {
      const Complex z(s.lambda[i], eta);
      double row = 0;
      for (int j = 0; j < n; ++j) {
        const double d = s.lambda[i] - s.lambda[j];
        row += eta / (n * (d * d + eta * eta));
      }
      Complex trace = 0;
      for (int j = 0; j < n; ++j) trace += 1.0 / (s.lambda[j] - z);
      CHECK(std::abs(row - (trace / static_cast<double>(n)).imag()) <= 1e-14);
    }
  }
}
