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

#ifndef RMTLAB_EXPERIMENT_HPP
#define RMTLAB_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rmt {

inline constexpr const char* kCodeVersion = "0.1.0";

enum class ExperimentKind {
  kIdentities,
  kClt,
  kEth,
  kLocalLaw,
  kRigidity,
  kEmfRelax,
  kEmfL2,
  kEmfAlgebra,
  kDbmGft,
  kSpectra,
};

std::string kind_name(ExperimentKind k);
ExperimentKind kind_from_name(const std::string& name);

// Flat experiment configuration; defaults are kind-dependent and resolved by
// validate(). Tolerances and thresholds live here, never in the experiment
// code.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kIdentities;
  int dim = 0;             // N; 0 -> kind default
  int beta = 1;
  int particles = 0;       // n; 0 -> kind default
  int samples = 0;         // M; 0 -> kind default
  std::uint64_t seed = 1;
  int index = -1;          // eigenvector index; -1 -> N/2
  double eta = -1;         // -1 -> kind default
  int ell = -1;
  int cap_k = -1;
  double t1 = -1;
  double flow_time = -1;
  double xi = -1;
  double zeta = 0.1;
  double delta = -1;        // -1 -> kind default (0.05 for emf-l2, else 0.1)
  double delta_prime = 0.01;
  int nmax = 4;
  std::string observable = "random-symmetric";
  std::string dist;         // empty -> kind default
  std::string theta = "x2";
  // pass thresholds (spec defaults)
  double tol_m1 = 0.07, tol_m2 = 0.10, tol_m3 = 0.25, tol_m4 = 0.45;
  double two_g_constant = 5.0;
  double entry_constant = 2.0;
  double pass_fraction = 0.96;
  int min_pass_count = -1;  // -1 -> ceil(pass_fraction * samples)
  double gauge_exponent = 0.15;
  double eth_exponent = 0.2;
  double chain_xi = 0.25;
  double gap_tolerance = 1e-10;
  double relax_tolerance = -1;  // -1 -> 0.1 for even n, 0.15 for odd
  double envelope_constant = 1.0;
  double gft_floor_exponent = 0.05;  // N^{-0.05} additive allowance
  // plumbing (not part of the config hash)
  std::string out;
  std::string format = "table";
  unsigned threads = 0;

  // Applies kind defaults and checks ranges/orderings; throws
  // std::invalid_argument naming the offending field.
  void validate();
  // Hash over the semantically meaningful fields.
  std::uint64_t hash() const;
  std::string canonical_text() const;
};

// Parses `key = value` lines ('#' comments); unknown keys are errors with
// line context. An empty text yields the all-defaults identities config.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

struct ExperimentRecord {
  std::string statistic;
  double value = 0;
  double error = 0;          // MC error bar; 0 when exact
  int pass = -1;             // 1/0, -1 when no criterion applies
  std::string note;
};

struct RunResult {
  std::string run_id;
  std::uint64_t config_hash = 0;
  ExperimentKind kind = ExperimentKind::kIdentities;
  std::vector<ExperimentRecord> records;
  double wall_seconds = 0;
  bool all_pass = true;  // over records with a pass flag
  // raw per-sample statistics for plot emission, keyed by series name
  std::map<std::string, std::vector<double>> series;
};

RunResult run(const ExperimentConfig& config);

// Line-delimited record output: '#' header block (key=value), then one row
// per record.
void write_records(std::ostream& os, const ExperimentConfig& cfg,
                   const RunResult& result);
// Human-readable aligned table.
void write_table(std::ostream& os, const ExperimentConfig& cfg,
                 const RunResult& result);
// Plot-ready numeric tables (histograms for clt, (parameter, statistic)
// pairs for sweeps).
void emit_plotdata(std::ostream& os, const ExperimentConfig& cfg,
                   const RunResult& result);

}  // namespace rmt

#endif  // RMTLAB_EXPERIMENT_HPP
