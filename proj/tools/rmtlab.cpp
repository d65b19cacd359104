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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rmt/experiment.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  int dim = 0;
  int beta = 0;
  int particles = 0;
  int samples = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string format;
  unsigned threads = 0;
  std::string dist;
  double flow_time = -2;
  double eta = -2;
  int ell = -2;
  int cap_k = -2;
  double t1 = -2;
  int index = -2;
  std::string plot_out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value config file");
  cmd->add_option("--dim", f.dim, "matrix dimension N");
  cmd->add_option("--beta", f.beta, "symmetry class (1 or 2)")
      ->check(CLI::IsMember({1, 2}));
  cmd->add_option("--n", f.particles, "particle number n");
  cmd->add_option("--samples", f.samples, "Monte Carlo sample count M");
  cmd->add_option("--seed", f.seed, "64-bit master seed")
      ->each([&f](const std::string&) { f.seed_set = true; });
  cmd->add_option("--out", f.out, "output file path");
  cmd->add_option("--format", f.format, "output format")
      ->check(CLI::IsMember({"table", "records"}));
  cmd->add_option("--threads", f.threads, "worker pool size (0 = hardware)");
  cmd->add_option("--dist", f.dist, "entry distribution");
  cmd->add_option("--time", f.flow_time, "flow time T");
  cmd->add_option("--eta", f.eta, "spectral scale eta");
  cmd->add_option("--ell", f.ell, "short range ell");
  cmd->add_option("--K", f.cap_k, "localization width K");
  cmd->add_option("--t1", f.t1, "short-range evolution time T1");
  cmd->add_option("--index", f.index, "eigenvector index i");
  cmd->add_option("--plot-out", f.plot_out, "write plot-ready table here");
}

int run_command(const std::string& kind, const CommonFlags& f) {
  rmt::ExperimentConfig cfg;
  try {
    if (!f.config_path.empty()) {
      cfg = rmt::load_config_file(f.config_path);
    }
    cfg.kind = rmt::kind_from_name(kind);
    if (f.dim > 0) cfg.dim = f.dim;
    if (f.beta > 0) cfg.beta = f.beta;
    if (f.particles > 0) cfg.particles = f.particles;
    if (f.samples > 0) cfg.samples = f.samples;
    if (f.seed_set) cfg.seed = f.seed;
    if (!f.out.empty()) cfg.out = f.out;
    if (!f.format.empty()) cfg.format = f.format;
    if (f.threads > 0) cfg.threads = f.threads;
    if (!f.dist.empty()) cfg.dist = f.dist;
    if (f.flow_time > -2) cfg.flow_time = f.flow_time;
    if (f.eta > -2) cfg.eta = f.eta;
    if (f.ell > -2) cfg.ell = f.ell;
    if (f.cap_k > -2) cfg.cap_k = f.cap_k;
    if (f.t1 > -2) cfg.t1 = f.t1;
    if (f.index > -2) cfg.index = f.index;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }

  rmt::RunResult result;
  try {
    result = rmt::run(cfg);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (cfg.format == "records") {
    rmt::write_records(std::cout, cfg, result);
  } else {
    rmt::write_table(std::cout, cfg, result);
  }
  if (!cfg.out.empty()) {
    std::ofstream os(cfg.out);
    if (!os) {
      std::cerr << "error: cannot open output file " << cfg.out << "\n";
      return 1;
    }
    rmt::write_records(os, cfg, result);
  }
  if (!f.plot_out.empty()) {
    std::ofstream os(f.plot_out);
    if (!os) {
      std::cerr << "error: cannot open plot file " << f.plot_out << "\n";
      return 1;
    }
    rmt::emit_plotdata(os, cfg, result);
  }
  return result.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  // keep BLAS single-threaded; the sample loop owns the parallelism
  setenv("OPENBLAS_NUM_THREADS", "1", 0);
  setenv("OMP_NUM_THREADS", "1", 0);

  CLI::App app{"rmtlab: Wigner ensemble and eigenvector moment flow experiments"};
  app.require_subcommand(1);

  const char* kinds[] = {"identities", "clt",      "eth",       "locallaw",
                         "rigidity",   "emf-relax", "emf-l2",   "emf-algebra",
                         "dbm-gft",    "spectra"};
  const char* blurbs[] = {
      "exact spectral-averaging identity suite",
      "eigenvector overlap central limit statistics",
      "maximal overlap (thermalization bound) probe",
      "single-, two- and k-resolvent local law probes",
      "eigenvalue rigidity gauge",
      "perfect matching observable relaxation",
      "short-range L2 decay of the moment flow",
      "generator algebra checks on small instances",
      "Green function comparison across an OU flow",
      "empirical spectral distribution checks",
  };
  CommonFlags flags[10];
  std::string chosen;
  for (int i = 0; i < 10; ++i) {
    CLI::App* cmd = app.add_subcommand(kinds[i], blurbs[i]);
    add_common(cmd, flags[i]);
    cmd->callback([&chosen, name = std::string(kinds[i])] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (int i = 0; i < 10; ++i) {
    if (chosen == kinds[i]) return run_command(chosen, flags[i]);
  }
  std::cerr << "configuration error: no subcommand selected\n";
  return 2;
}
