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

#include "rmt/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rmt/dbm.hpp"
#include "rmt/emf.hpp"
#include "rmt/ensemble.hpp"
#include "rmt/locallaw.hpp"
#include "rmt/matchings.hpp"
#include "rmt/overlap.hpp"
#include "rmt/parallel.hpp"
#include "rmt/rng.hpp"
#include "rmt/spectral.hpp"

namespace rmt {
namespace {

const std::map<std::string, ExperimentKind>& kind_table() {
  static const std::map<std::string, ExperimentKind> table = {
      {"identities", ExperimentKind::kIdentities},
      {"clt", ExperimentKind::kClt},
      {"eth", ExperimentKind::kEth},
      {"locallaw", ExperimentKind::kLocalLaw},
      {"rigidity", ExperimentKind::kRigidity},
      {"emf-relax", ExperimentKind::kEmfRelax},
      {"emf-l2", ExperimentKind::kEmfL2},
      {"emf-algebra", ExperimentKind::kEmfAlgebra},
      {"dbm-gft", ExperimentKind::kDbmGft},
      {"spectra", ExperimentKind::kSpectra},
  };
  return table;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string kind_name(ExperimentKind k) {
  for (const auto& [name, kind] : kind_table()) {
    if (kind == k) return name;
  }
  return "?";
}

ExperimentKind kind_from_name(const std::string& name) {
  auto it = kind_table().find(name);
  if (it == kind_table().end()) {
    throw std::invalid_argument("unknown experiment kind: " + name);
  }
  return it->second;
}

void ExperimentConfig::validate() {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("config: " + msg);
  };
  if (beta != 1 && beta != 2) fail("beta must be 1 or 2");
  switch (kind) {
    case ExperimentKind::kIdentities:
      if (dim == 0) dim = 8;
      if (samples == 0) samples = 5;
      break;
    case ExperimentKind::kClt:
      if (dim == 0) dim = 512;
      if (samples == 0) samples = 2000;
      break;
    case ExperimentKind::kEth:
      if (dim == 0) dim = 1024;
      if (samples == 0) samples = 20;
      break;
    case ExperimentKind::kLocalLaw:
      if (dim == 0) dim = 1024;
      if (samples == 0) samples = 50;
      if (xi < 0) xi = 0.2;
      break;
    case ExperimentKind::kRigidity:
      if (dim == 0) dim = 1024;
      if (samples == 0) samples = 50;
      break;
    case ExperimentKind::kEmfRelax:
      if (dim == 0) dim = 512;
      if (particles == 0) particles = 2;
      if (samples == 0) samples = 2000;
      break;
    case ExperimentKind::kEmfL2:
      if (dim == 0) dim = 200;
      if (samples == 0) samples = 1;
      if (particles == 0) particles = 2;
      if (cap_k < 0) cap_k = 14;
      if (ell < 0) ell = 5;
      if (eta < 0) eta = 0.01;
      if (xi < 0) xi = 0.05;
      break;
    case ExperimentKind::kEmfAlgebra:
      if (dim == 0) dim = 16;
      if (particles == 0) particles = 2;
      if (samples == 0) samples = 1000;
      if (eta < 0) eta = 0.05;
      if (ell < 0) ell = 8;
      break;
    case ExperimentKind::kDbmGft:
      if (dim == 0) dim = 512;
      if (samples == 0) samples = 2000;
      break;
    case ExperimentKind::kSpectra:
      if (dim == 0) dim = 2048;
      if (samples == 0) samples = 1;
      break;
  }
  if (dist.empty()) {
    dist = (kind == ExperimentKind::kEmfRelax ||
            kind == ExperimentKind::kDbmGft)
               ? "rademacher"
               : "gaussian";
  }
  if (delta < 0) delta = kind == ExperimentKind::kEmfL2 ? 0.05 : 0.1;
  if (dim < 2) fail("dim must be >= 2");
  if (samples < 1) fail("samples must be >= 1");
  if (particles < 0 || particles > 6) fail("n must be in [0, 6]");
  if (index >= dim) fail("index out of range");
  if (nmax < 1 || nmax > 8) fail("nmax must be in [1, 8]");
  if (min_pass_count < 0) {
    min_pass_count = static_cast<int>(std::ceil(pass_fraction * samples));
  }
  if (kind == ExperimentKind::kEmfL2) {
    const int cap = static_cast<int>(std::ceil(std::sqrt(dim)));
    if (cap_k > cap) {
      fail("K = " + std::to_string(cap_k) +
           " violates the Av window invariant K <= ceil(sqrt(N)) = " +
           std::to_string(cap));
    }
    const double t1_eff = t1 < 0 ? std::sqrt(static_cast<double>(cap_k)) / dim
                                 : t1;
    const double margin = std::pow(static_cast<double>(dim), 0.05);
    if ((1.0 / dim) * margin > eta) fail("parameter ordering 1/N << eta violated");
    if (eta * margin > t1_eff) fail("parameter ordering eta << T1 violated");
    if (t1_eff * margin > static_cast<double>(ell) / dim) {
      fail("parameter ordering T1 << ell/N violated");
    }
    if ((static_cast<double>(ell) / dim) * margin >
        static_cast<double>(cap_k) / dim) {
      fail("parameter ordering ell/N << K/N violated");
    }
  }
  if (format != "table" && format != "records") {
    fail("format must be 'table' or 'records'");
  }
  entry_distribution_from_name(dist);  // rejects unknown names
  theta_from_name(theta);
}

std::string ExperimentConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["kind"] = kind_name(kind);
  kv["dim"] = std::to_string(dim);
  kv["beta"] = std::to_string(beta);
  kv["particles"] = std::to_string(particles);
  kv["samples"] = std::to_string(samples);
  kv["seed"] = std::to_string(seed);
  kv["index"] = std::to_string(index);
  kv["eta"] = fmt(eta);
  kv["ell"] = std::to_string(ell);
  kv["cap_k"] = std::to_string(cap_k);
  kv["t1"] = fmt(t1);
  kv["flow_time"] = fmt(flow_time);
  kv["xi"] = fmt(xi);
  kv["zeta"] = fmt(zeta);
  kv["delta"] = fmt(delta);
  kv["delta_prime"] = fmt(delta_prime);
  kv["nmax"] = std::to_string(nmax);
  kv["observable"] = observable;
  kv["dist"] = dist;
  kv["theta"] = theta;
  kv["tol_m1"] = fmt(tol_m1);
  kv["tol_m2"] = fmt(tol_m2);
  kv["tol_m3"] = fmt(tol_m3);
  kv["tol_m4"] = fmt(tol_m4);
  kv["two_g_constant"] = fmt(two_g_constant);
  kv["entry_constant"] = fmt(entry_constant);
  kv["pass_fraction"] = fmt(pass_fraction);
  kv["min_pass_count"] = std::to_string(min_pass_count);
  kv["gauge_exponent"] = fmt(gauge_exponent);
  kv["eth_exponent"] = fmt(eth_exponent);
  kv["chain_xi"] = fmt(chain_xi);
  kv["gap_tolerance"] = fmt(gap_tolerance);
  kv["relax_tolerance"] = fmt(relax_tolerance);
  kv["envelope_constant"] = fmt(envelope_constant);
  kv["gft_floor_exponent"] = fmt(gft_floor_exponent);
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const {
  // FNV-1a over the canonical text, finished with the splitmix mixer.
  std::uint64_t h = 14695981039346656037ull;
  for (char c : canonical_text()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return mix64(h);
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto as_int = [&](auto& field) {
      try {
        field = static_cast<std::remove_reference_t<decltype(field)>>(
            std::stoll(value));
      } catch (const std::exception&) {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": bad integer for " + key);
      }
    };
    auto as_u64 = [&](std::uint64_t& field) {
      try {
        field = std::stoull(value);
      } catch (const std::exception&) {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": bad integer for " + key);
      }
    };
    auto as_double = [&](double& field) {
      try {
        field = std::stod(value);
      } catch (const std::exception&) {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": bad number for " + key);
      }
    };
    if (key == "kind") {
      try {
        cfg.kind = kind_from_name(value);
      } catch (const std::exception& e) {
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": " + e.what());
      }
    } else if (key == "dim") {
      as_int(cfg.dim);
    } else if (key == "beta") {
      as_int(cfg.beta);
    } else if (key == "n" || key == "particles") {
      as_int(cfg.particles);
    } else if (key == "samples") {
      as_int(cfg.samples);
    } else if (key == "seed") {
      as_u64(cfg.seed);
    } else if (key == "index") {
      as_int(cfg.index);
    } else if (key == "eta") {
      as_double(cfg.eta);
    } else if (key == "ell") {
      as_int(cfg.ell);
    } else if (key == "K" || key == "cap_k") {
      as_int(cfg.cap_k);
    } else if (key == "t1") {
      as_double(cfg.t1);
    } else if (key == "T" || key == "flow_time") {
      as_double(cfg.flow_time);
    } else if (key == "xi") {
      as_double(cfg.xi);
    } else if (key == "zeta") {
      as_double(cfg.zeta);
    } else if (key == "delta") {
      as_double(cfg.delta);
    } else if (key == "delta_prime") {
      as_double(cfg.delta_prime);
    } else if (key == "nmax") {
      as_int(cfg.nmax);
    } else if (key == "observable") {
      cfg.observable = value;
    } else if (key == "dist") {
      cfg.dist = value;
    } else if (key == "theta") {
      cfg.theta = value;
    } else if (key == "tol_m1") {
      as_double(cfg.tol_m1);
    } else if (key == "tol_m2") {
      as_double(cfg.tol_m2);
    } else if (key == "tol_m3") {
      as_double(cfg.tol_m3);
    } else if (key == "tol_m4") {
      as_double(cfg.tol_m4);
    } else if (key == "two_g_constant") {
      as_double(cfg.two_g_constant);
    } else if (key == "entry_constant") {
      as_double(cfg.entry_constant);
    } else if (key == "pass_fraction") {
      as_double(cfg.pass_fraction);
    } else if (key == "min_pass_count") {
      as_int(cfg.min_pass_count);
    } else if (key == "gauge_exponent") {
      as_double(cfg.gauge_exponent);
    } else if (key == "eth_exponent") {
      as_double(cfg.eth_exponent);
    } else if (key == "chain_xi") {
      as_double(cfg.chain_xi);
    } else if (key == "gap_tolerance") {
      as_double(cfg.gap_tolerance);
    } else if (key == "relax_tolerance") {
      as_double(cfg.relax_tolerance);
    } else if (key == "envelope_constant") {
      as_double(cfg.envelope_constant);
    } else if (key == "gft_floor_exponent") {
      as_double(cfg.gft_floor_exponent);
    } else if (key == "out") {
      cfg.out = value;
    } else if (key == "format") {
      cfg.format = value;
    } else if (key == "threads") {
      as_int(cfg.threads);
    } else {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

namespace {

void add_record(RunResult& r, std::string name, double value, double error,
                int pass, std::string note = "") {
  if (pass == 0) r.all_pass = false;
  r.records.push_back(
      {std::move(name), value, error, pass, std::move(note)});
}

Observable standard_observable(const ExperimentConfig& cfg, int dim,
                               ObservableNormalization normalize) {
  ObservableKind kind = ObservableKind::kRandomSymmetric;
  ObservableOptions opts;
  opts.normalize = normalize;
  if (cfg.observable == "diagonal-signs") {
    kind = ObservableKind::kDiagonalSigns;
  } else if (cfg.observable == "projection") {
    kind = ObservableKind::kProjection;
    opts.rank = dim / 2;
  } else if (cfg.observable != "random-symmetric") {
    throw std::invalid_argument("config: unknown observable '" +
                                cfg.observable + "'");
  }
  return build_observable(dim, kind, stream_seed(cfg.seed, 0x0b5eul), opts);
}

// ---- identities -------------------------------------------------------------

void run_identities(const ExperimentConfig& cfg, RunResult& out) {
  const int n = cfg.dim;
  for (int k = 0; k < cfg.samples; ++k) {
    WignerSample w = sample_gaussian(n, SymmetryClass::kRealSymmetric,
                                     stream_seed(cfg.seed, k));
    SpectralDataR s = decompose(w);
    Observable obs = build_observable(
        n, ObservableKind::kRandomSymmetric, stream_seed(cfg.seed, 1000 + k));
    OverlapTableR table = overlaps(s, obs);
    Rng rng = make_stream(cfg.seed, 2000 + k);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif_eta(0.05, 2.0);

    double qgq_gap = 0, one_gap = 0, two_gap = 0;
    for (int rep = 0; rep < 4; ++rep) {
      Eigen::VectorXd q(n);
      for (int r = 0; r < n; ++r) q[r] = normal(rng);
      q.normalize();
      const double eta = unif_eta(rng);
      const int i = static_cast<int>(rng() % n);
      const int j = static_cast<int>(rng() % n);
      qgq_gap = std::max(qgq_gap, identity_qgq(s, q, i, eta).gap);
      one_gap = std::max(one_gap, identity_one_index(s, obs, table, i, j, eta).gap);
      two_gap = std::max(two_gap, identity_two_index(s, obs, table, i, j, eta).gap);
    }
    const std::string tag = "[" + std::to_string(k) + "]";
    add_record(out, "qgq_gap" + tag, qgq_gap, 0,
               qgq_gap <= cfg.gap_tolerance);
    add_record(out, "one_index_gap" + tag, one_gap, 0,
               one_gap <= cfg.gap_tolerance);
    add_record(out, "two_index_gap" + tag, two_gap, 0,
               two_gap <= cfg.gap_tolerance);
  }
}

// ---- clt --------------------------------------------------------------------

template <class Scalar>
std::vector<double> clt_samples(const ExperimentConfig& cfg,
                                const Observable& obs, int index) {
  std::vector<double> xs(cfg.samples);
  const EntryDistribution dist = entry_distribution_from_name(cfg.dist);
  const SymmetryClass sym = symmetry_from_beta(cfg.beta);
  parallel_for(
      static_cast<std::size_t>(cfg.samples),
      [&](std::size_t k) {
        WignerSample w =
            sample_wigner(cfg.dim, sym, dist, stream_seed(cfg.seed, k));
        SpectralData<Scalar> s =
            decompose<Scalar>(w.matrix<Scalar>(), w.seed);
        // only the single diagonal overlap is needed
        const VecX<Scalar> ui = s.u.col(index);
        Scalar quad;
        if constexpr (std::is_same_v<Scalar, double>) {
          quad = ui.dot(obs.aring * ui);
        } else {
          quad = ui.dot(obs.aring.cast<Complex>() * ui);
        }
        xs[k] = std::sqrt(cfg.beta * cfg.dim / (2.0 * obs.msq)) *
                std::real(Complex(quad));
      },
      cfg.threads);
  return xs;
}

void run_clt(const ExperimentConfig& cfg, RunResult& out) {
  Observable obs =
      standard_observable(cfg, cfg.dim, ObservableNormalization::kUnitMsq);
  const int index = cfg.index < 0 ? cfg.dim / 2 : cfg.index;
  std::vector<double> xs = cfg.beta == 1
                               ? clt_samples<double>(cfg, obs, index)
                               : clt_samples<Complex>(cfg, obs, index);
  const double tol[4] = {cfg.tol_m1, cfg.tol_m2, cfg.tol_m3, cfg.tol_m4};
  for (const auto& m : moment_report(xs, cfg.nmax)) {
    int pass = -1;
    if (m.order <= 4) pass = std::abs(m.value - m.target) <= tol[m.order - 1];
    add_record(out, "m" + std::to_string(m.order), m.value, m.std_error, pass,
               "target=" + fmt(m.target));
  }
  out.series["clt_samples"] = std::move(xs);
}

// ---- eth --------------------------------------------------------------------

std::vector<double> eth_values(const ExperimentConfig& cfg, int dim,
                               std::uint64_t salt) {
  Observable obs = build_observable(dim, ObservableKind::kRandomSymmetric,
                                    stream_seed(cfg.seed, 0x0b5eul ^ salt));
  std::vector<double> vals(cfg.samples);
  parallel_for(
      static_cast<std::size_t>(cfg.samples),
      [&](std::size_t k) {
        WignerSample w = sample_gaussian(dim, SymmetryClass::kRealSymmetric,
                                         stream_seed(cfg.seed ^ salt, k));
        SpectralDataR s = decompose(w);
        vals[k] = eth_max(overlaps(s, obs), {});
      },
      cfg.threads);
  return vals;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

void run_eth(const ExperimentConfig& cfg, RunResult& out) {
  const double threshold =
      std::pow(static_cast<double>(cfg.dim), -0.5 + cfg.eth_exponent);
  std::vector<double> vals = eth_values(cfg, cfg.dim, 0);
  int pass_count = 0;
  for (int k = 0; k < cfg.samples; ++k) {
    const bool ok = vals[k] <= threshold;
    pass_count += ok;
    add_record(out, "eth_max[" + std::to_string(k) + "]", vals[k], 0, ok,
               "bound=" + fmt(threshold));
  }
  add_record(out, "pass_count", pass_count, 0, pass_count == cfg.samples);
  // two-point sweep: the median must decrease from N/2 to N
  std::vector<double> vals_half = eth_values(cfg, cfg.dim / 2, 0x5157ul);
  const double med_full = median_of(vals);
  const double med_half = median_of(vals_half);
  add_record(out, "median_decreasing", med_full / med_half, 0,
             med_full < med_half,
             "median@" + std::to_string(cfg.dim) + "=" + fmt(med_full));
  out.series["eth_dim"] = {static_cast<double>(cfg.dim / 2),
                           static_cast<double>(cfg.dim)};
  out.series["eth_median"] = {med_half, med_full};
}

// ---- locallaw ---------------------------------------------------------------

void run_locallaw(const ExperimentConfig& cfg, RunResult& out) {
  const int n2 = cfg.dim;        // two-G dimension
  const int nc = cfg.dim / 2;    // chain and single-G dimension
  const int m = cfg.samples;

  // two-G law at eta = N^{-0.8}, E = 0
  {
    const double eta = std::pow(static_cast<double>(n2), -0.8);
    const Complex z(0.0, eta);
    Observable obs = standard_observable(cfg, n2,
                                         ObservableNormalization::kOperatorNorm);
    std::vector<double> dev(m), ratio(m);
    TwoGOptions topts;
    topts.pass_constant = cfg.two_g_constant;
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t k) {
          WignerSample w = sample_gaussian(n2, SymmetryClass::kRealSymmetric,
                                           stream_seed(cfg.seed, k));
          SpectralDataR s = decompose(w);
          LawReport r = check_two_g(s, obs, z, z, topts);
          dev[k] = r.value;
          ratio[k] = r.ratio;
        },
        cfg.threads);
    int pass_count = 0;
    for (int k = 0; k < m; ++k) pass_count += ratio[k] <= 1.0;
    add_record(out, "two_g_pass_count", pass_count, 0,
               pass_count >= cfg.min_pass_count,
               "bound=" + fmt(cfg.two_g_constant / std::sqrt(n2 * eta)));
    // non-traceless control on one sample: identity observable
    WignerSample w = sample_gaussian(n2, SymmetryClass::kRealSymmetric,
                                     stream_seed(cfg.seed, 0));
    SpectralDataR s = decompose(w);
    Observable ident = make_observable(Eigen::MatrixXd::Identity(n2, n2));
    TwoGOptions copts = topts;
    copts.enforce_traceless = false;
    LawReport ctrl = check_two_g(s, ident, z, z, copts);
    add_record(out, "two_g_control_ratio", ctrl.ratio, 0, ctrl.ratio > 10.0,
               "control_must_violate");
    out.series["two_g_dev"] = std::move(dev);
  }

  // k = 3 chain law at eta = N^{-0.6}
  {
    const double eta = std::pow(static_cast<double>(nc), -0.6);
    const Complex zs_arr[3] = {Complex(0.0, eta), Complex(0.3, eta),
                               Complex(-0.2, eta)};
    Observable obs = build_observable(
        nc, ObservableKind::kRandomSymmetric, stream_seed(cfg.seed, 0x0b5e2ul));
    const Eigen::MatrixXd* as_arr[3] = {&obs.aring, &obs.aring, &obs.aring};
    ChainOptions copts;
    copts.xi = cfg.chain_xi;
    std::vector<double> ratio(m);
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t k) {
          WignerSample w = sample_gaussian(nc, SymmetryClass::kRealSymmetric,
                                           stream_seed(cfg.seed ^ 0xC4A1ul, k));
          SpectralDataR s = decompose(w);
          LawReport r = check_chain(s, as_arr, zs_arr, copts);
          ratio[k] = r.ratio;
        },
        cfg.threads);
    int pass_count = 0;
    for (int k = 0; k < m; ++k) pass_count += ratio[k] <= 1.0;
    add_record(out, "chain_pass_count", pass_count, 0,
               pass_count >= cfg.min_pass_count, "k=3 xi=" + fmt(cfg.chain_xi));
    // control: Im-G chain with identity observables (the F_k object)
    WignerSample w = sample_gaussian(nc, SymmetryClass::kRealSymmetric,
                                     stream_seed(cfg.seed ^ 0xC4A1ul, 0));
    SpectralDataR s = decompose(w);
    const Eigen::MatrixXd* ids[3] = {nullptr, nullptr, nullptr};
    ChainOptions imopts = copts;
    imopts.imaginary_parts = true;
    LawReport ctrl = check_chain(s, ids, zs_arr, imopts);
    add_record(out, "chain_control_ratio", ctrl.ratio, 0, ctrl.ratio > 5.0,
               "control_must_violate");
    out.series["chain_ratio"] = std::move(ratio);
  }

  // single-G entry/trace law at eta = N^{-0.7}
  {
    const double eta = std::pow(static_cast<double>(nc), -0.7);
    const Complex z(0.0, eta);
    SingleGOptions sopts;
    sopts.xi = cfg.xi;
    sopts.entry_constant = cfg.entry_constant;
    std::vector<double> er(m), tr(m);
    parallel_for(
        static_cast<std::size_t>(m),
        [&](std::size_t k) {
          WignerSample w = sample_gaussian(nc, SymmetryClass::kRealSymmetric,
                                           stream_seed(cfg.seed ^ 0x51F1ul, k));
          SpectralDataR s = decompose(w);
          SingleGReport r = check_single_g(s, z, sopts);
          er[k] = r.entry.ratio;
          tr[k] = r.trace.ratio;
        },
        cfg.threads);
    int entry_pass = 0, trace_pass = 0;
    for (int k = 0; k < m; ++k) {
      entry_pass += er[k] <= 1.0;
      trace_pass += tr[k] <= 1.0;
    }
    add_record(out, "single_entry_pass_count", entry_pass, 0,
               entry_pass >= cfg.min_pass_count,
               "constant=" + fmt(cfg.entry_constant));
    add_record(out, "single_trace_pass_count", trace_pass, 0,
               trace_pass >= cfg.min_pass_count);
  }

  // small eta-sweep of the mean two-G deviation for plot emission
  {
    const int nsweep = 256;
    Observable obs = build_observable(nsweep, ObservableKind::kRandomSymmetric,
                                      stream_seed(cfg.seed, 0x0b5e3ul));
    std::vector<double> etas, devs, bounds;
    for (double expo : {-0.4, -0.5, -0.6, -0.7, -0.8}) {
      const double eta = std::pow(static_cast<double>(nsweep), expo);
      const Complex z(0.0, eta);
      double acc = 0;
      const int msweep = 8;
      for (int k = 0; k < msweep; ++k) {
        WignerSample w =
            sample_gaussian(nsweep, SymmetryClass::kRealSymmetric,
                            stream_seed(cfg.seed ^ 0x53EEul, k));
        SpectralDataR s = decompose(w);
        TwoGOptions topts;
        acc += check_two_g(s, obs, z, z, topts).value;
      }
      etas.push_back(eta);
      devs.push_back(acc / msweep);
      bounds.push_back(1.0 / std::sqrt(nsweep * eta));
    }
    out.series["sweep_eta"] = etas;
    out.series["sweep_dev"] = devs;
    out.series["sweep_bound"] = bounds;
  }
}

// ---- rigidity ---------------------------------------------------------------

void run_rigidity(const ExperimentConfig& cfg, RunResult& out) {
  const double threshold =
      std::pow(static_cast<double>(cfg.dim), cfg.gauge_exponent);
  std::vector<double> gauges(cfg.samples);
  parallel_for(
      static_cast<std::size_t>(cfg.samples),
      [&](std::size_t k) {
        WignerSample w = sample_gaussian(cfg.dim, symmetry_from_beta(cfg.beta),
                                         stream_seed(cfg.seed, k));
        Eigen::VectorXd lam =
            cfg.beta == 1
                ? decompose<double>(w.real).lambda
                : decompose<Complex>(w.cplx).lambda;
        gauges[k] = rigidity_gauge(lam, 0.0);
      },
      cfg.threads);
  int pass_count = 0;
  for (int k = 0; k < cfg.samples; ++k) {
    const bool ok = gauges[k] <= threshold;
    pass_count += ok;
    add_record(out, "gauge[" + std::to_string(k) + "]", gauges[k], 0, ok,
               "bound=" + fmt(threshold));
  }
  add_record(out, "pass_count", pass_count, 0,
             pass_count >= cfg.min_pass_count,
             "threshold=N^" + fmt(cfg.gauge_exponent));
  // small-N sweep rows for plot emission
  std::vector<double> dims, medians;
  for (int d : {cfg.dim / 4, cfg.dim / 2, cfg.dim}) {
    if (d < 8) continue;
    const int msweep = std::min(cfg.samples, 16);
    std::vector<double> g(msweep);
    parallel_for(
        static_cast<std::size_t>(msweep),
        [&](std::size_t k) {
          WignerSample w = sample_gaussian(d, SymmetryClass::kRealSymmetric,
                                           stream_seed(cfg.seed ^ 0x9137ul, k));
          g[k] = rigidity_gauge(decompose(w).lambda, 0.0);
        },
        cfg.threads);
    dims.push_back(d);
    medians.push_back(median_of(g));
  }
  out.series["gauge"] = std::move(gauges);
  out.series["sweep_dim"] = dims;
  out.series["sweep_median"] = medians;
}

// ---- emf passthroughs -------------------------------------------------------

void run_emf_relax(const ExperimentConfig& cfg, RunResult& out) {
  RelaxationParams params;
  params.n = cfg.particles;
  params.dim = cfg.dim;
  params.samples = cfg.samples;
  params.flow_time = cfg.flow_time;
  params.delta = cfg.delta;
  params.dist = entry_distribution_from_name(cfg.dist);
  params.seed = cfg.seed;
  params.threads = cfg.threads;
  const double tol = cfg.relax_tolerance > 0
                         ? cfg.relax_tolerance
                         : (cfg.particles % 2 == 0 ? 0.1 : 0.15);
  RelaxationReport rep = relaxation_experiment(params);
  for (const auto& c : rep.configs) {
    add_record(out, "f[" + c.name + "]", c.mean, c.std_error,
               c.gap <= tol, "target=" + fmt(rep.target));
  }
  add_record(out, "max_gap", rep.max_gap, rep.max_std_error,
             rep.max_gap <= tol, "tolerance=" + fmt(tol));
}

void run_emf_l2(const ExperimentConfig& cfg, RunResult& out) {
  L2DecayParams params;
  params.ambient = cfg.dim;
  params.n = cfg.particles;
  params.cap_k = cfg.cap_k;
  params.ell = cfg.ell;
  params.t1 = cfg.t1;
  params.eta = cfg.eta;
  params.delta = cfg.delta;
  params.xi = cfg.xi;
  params.epsilon = cfg.xi;
  params.envelope_constant = cfg.envelope_constant;
  params.seed = cfg.seed;
  L2DecayReport rep = l2_decay_experiment(params);
  add_record(out, "initial_norm", rep.initial_norm, 0, -1);
  add_record(out, "endpoint_norm", rep.norms.back(), 0, -1);
  add_record(out, "envelope", rep.envelope, 0, -1,
             "error_term=" + fmt(rep.error_term));
  add_record(out, "endpoint_ratio", rep.endpoint_ratio, 0,
             rep.endpoint_ratio <= 1.0);
  add_record(out, "monotone", rep.monotone ? 1 : 0, 0, rep.monotone);
  add_record(out, "truncated_mass", rep.truncated_mass, 0, -1);
  out.series["l2_time"] = rep.times;
  out.series["l2_norm"] = rep.norms;
}

void run_emf_algebra(const ExperimentConfig& cfg, RunResult& out) {
  const int n_amb = cfg.dim;
  const int n = std::min(cfg.particles, 2);
  WignerSample w = sample_gaussian(n_amb, SymmetryClass::kRealSymmetric,
                                   stream_seed(cfg.seed, 0));
  Eigen::VectorXd lambda = decompose(w).lambda;
  const IndexInterval bulk{1, n_amb - 2};
  const KernelSpec sspec = KernelSpec::short_c(cfg.ell, bulk);
  const KernelSpec aspec = KernelSpec::smooth_a_short(cfg.eta, cfg.ell, bulk);
  const auto basis = enumerate_lambda_states(n_amb, n);
  const int m = static_cast<int>(basis.size());
  const Eigen::MatrixXd sgen = jump_generator_matrix(basis, lambda, sspec);
  const Eigen::MatrixXd lgen =
      jump_generator_matrix(basis, lambda, KernelSpec::full_c());
  const Eigen::MatrixXd agen = product_generator_matrix(basis, lambda, aspec);
  Eigen::VectorXd w_pi(m), w_mu(m);
  for (int r = 0; r < m; ++r) {
    const double mult = state_multiplicity(basis[r]);
    w_pi[r] = mult * pi_weight(basis[r]);
    w_mu[r] = mult;
  }
  auto sym_gap = [&](const Eigen::MatrixXd& gen, const Eigen::VectorXd& wgt) {
    Eigen::MatrixXd weighted = wgt.asDiagonal() * gen;
    const double scale = std::max(1.0, weighted.cwiseAbs().maxCoeff());
    return (weighted - weighted.transpose()).cwiseAbs().maxCoeff() / scale;
  };
  const double psym_l = sym_gap(lgen, w_pi);
  const double psym_s = sym_gap(sgen, w_pi);
  const double musym = sym_gap(agen, w_mu);
  add_record(out, "pi_symmetry_L", psym_l, 0, psym_l <= 1e-12);
  add_record(out, "pi_symmetry_S", psym_s, 0, psym_s <= 1e-12);
  add_record(out, "mu_symmetry_A", musym, 0, musym <= 1e-12);
  const double const_l = (lgen * Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff();
  const double const_a = (agen * Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff();
  const double const_scale = std::max(1.0, lgen.cwiseAbs().maxCoeff());
  add_record(out, "constants_in_kernel_L", const_l / const_scale, 0,
             const_l / const_scale <= 1e-12);
  add_record(out, "constants_in_kernel_A", const_a / std::max(1.0, agen.cwiseAbs().maxCoeff()),
             0, const_a <= 1e-12 * std::max(1.0, agen.cwiseAbs().maxCoeff()));

  // B/L equivalence through phi on random eta-functions
  {
    Rng rng = make_stream(cfg.seed, 0xB1);
    std::normal_distribution<double> normal(0.0, 1.0);
    EtaFunction f;
    std::vector<Configuration> etas;
    for (const auto& key : basis) {
      Configuration c = phi(std::span<const int>(key));
      etas.push_back(c);
      f[c] = normal(rng);
    }
    EtaFunction bf = apply_b(f, lambda, KernelSpec::full_c());
    FlowState g;
    g.particles = n;
    g.ambient = n_amb;
    for (std::size_t r = 0; r < basis.size(); ++r) g.set(basis[r], f[etas[r]]);
    FlowState lg = apply_jump_generator(g, lambda, KernelSpec::full_c(), nullptr);
    double gap = 0;
    for (std::size_t r = 0; r < basis.size(); ++r) {
      gap = std::max(gap, std::abs(bf[etas[r]] - lg.value(basis[r])));
    }
    const double scale = std::max(1.0, lgen.cwiseAbs().maxCoeff());
    add_record(out, "b_l_equivalence", gap / scale, 0, gap / scale <= 1e-12);
  }

  // Dirichlet form two-route agreement on a random state
  {
    Rng rng = make_stream(cfg.seed, 0xD1);
    std::normal_distribution<double> normal(0.0, 1.0);
    FlowState h;
    h.particles = n;
    h.ambient = n_amb;
    for (const auto& key : basis) h.set(key, normal(rng));
    const double d_sos = dirichlet_jump(h, lambda, sspec);
    Eigen::VectorXd hv(m);
    for (int r = 0; r < m; ++r) hv[r] = h.value(basis[r]);
    const double d_bilinear = -hv.dot(w_pi.asDiagonal() * (sgen * hv));
    const double gap = std::abs(d_sos - d_bilinear) / std::max(1.0, d_sos);
    add_record(out, "dirichlet_two_route", gap, 0, gap <= 1e-12);
  }

  // Lemma-style replacement inequality on random h
  ReplacementReport rep = replacement_check(n_amb, n, lambda, sspec, aspec,
                                            cfg.samples, cfg.seed);
  add_record(out, "forms_nonpositive", rep.nonpositive ? 1 : 0, 0,
             rep.nonpositive);
  add_record(out, "replacement_fitted_c", rep.min_ratio, 0,
             rep.min_ratio > 0 && std::isfinite(rep.max_ratio),
             "max_ratio=" + fmt(rep.max_ratio));
  // stability across two disjoint batches
  ReplacementReport rep1 = replacement_check(n_amb, n, lambda, sspec, aspec,
                                             cfg.samples / 2, cfg.seed ^ 0xAAA);
  ReplacementReport rep2 = replacement_check(n_amb, n, lambda, sspec, aspec,
                                             cfg.samples / 2, cfg.seed ^ 0xBBB);
  const double c1 = rep1.min_ratio, c2 = rep2.min_ratio;
  const double spread = std::abs(c1 - c2) / (0.5 * (c1 + c2));
  add_record(out, "fitted_c_stability", spread, 0, spread <= 0.2,
             "batches=" + fmt(c1) + "," + fmt(c2));
  add_record(out, "degenerate_resamples", rep.degenerate, 0, -1);
}

// ---- dbm-gft ----------------------------------------------------------------

void run_dbm_gft(const ExperimentConfig& cfg, RunResult& out) {
  GftOptions opts;
  opts.dim = cfg.dim;
  opts.samples = cfg.samples;
  opts.seed = cfg.seed;
  opts.flow_time = cfg.flow_time < 0
                       ? std::pow(static_cast<double>(cfg.dim), -1.0 + 0.2)
                       : cfg.flow_time;
  const double eta = std::pow(static_cast<double>(cfg.dim), -1.0 - cfg.zeta);
  opts.z = Complex(0.3, eta);
  opts.theta = theta_from_name(cfg.theta);
  opts.dist = entry_distribution_from_name(cfg.dist);
  opts.sym = symmetry_from_beta(cfg.beta);
  opts.observable_seed = stream_seed(cfg.seed, 0x0b5eul);
  opts.threads = cfg.threads;
  GftReport rep = gft_compare(opts);
  const double allowance =
      3.0 * rep.mc_error +
      std::pow(static_cast<double>(cfg.dim), -cfg.gft_floor_exponent);
  add_record(out, "delta", rep.delta, rep.mc_error, rep.delta <= allowance,
             "allowance=" + fmt(allowance));
  add_record(out, "mean_start", rep.mean_a, 0, -1);
  add_record(out, "mean_evolved", rep.mean_b, 0, -1);
}

// ---- spectra ----------------------------------------------------------------

void run_spectra(const ExperimentConfig& cfg, RunResult& out) {
  std::vector<double> all;
  for (int k = 0; k < cfg.samples; ++k) {
    WignerSample w = sample_gaussian(cfg.dim, symmetry_from_beta(cfg.beta),
                                     stream_seed(cfg.seed, k));
    Eigen::VectorXd lam = cfg.beta == 1 ? decompose<double>(w.real).lambda
                                        : decompose<Complex>(w.cplx).lambda;
    double ks = 0;
    const int n = cfg.dim;
    for (int i = 0; i < n; ++i) {
      const double c = semicircle_cdf_t(lam[i], 0.0);
      ks = std::max(ks, std::abs(c - static_cast<double>(i + 1) / n));
      ks = std::max(ks, std::abs(c - static_cast<double>(i) / n));
    }
    add_record(out, "ks_distance[" + std::to_string(k) + "]", ks, 0,
               ks <= 0.03);
    add_record(out, "edge[" + std::to_string(k) + "]",
               std::max(std::abs(lam[0]), std::abs(lam[n - 1])), 0, -1);
    for (int i = 0; i < n; ++i) all.push_back(lam[i]);
  }
  out.series["eigenvalues"] = std::move(all);
}

}  // namespace

RunResult run(const ExperimentConfig& config) {
  ExperimentConfig cfg = config;
  cfg.validate();
  RunResult out;
  out.kind = cfg.kind;
  out.config_hash = cfg.hash();
  {
    std::ostringstream id;
    id << std::hex << std::setw(16) << std::setfill('0') << out.config_hash;
    out.run_id = id.str();
  }
  const auto t0 = std::chrono::steady_clock::now();
  switch (cfg.kind) {
    case ExperimentKind::kIdentities: run_identities(cfg, out); break;
    case ExperimentKind::kClt: run_clt(cfg, out); break;
    case ExperimentKind::kEth: run_eth(cfg, out); break;
    case ExperimentKind::kLocalLaw: run_locallaw(cfg, out); break;
    case ExperimentKind::kRigidity: run_rigidity(cfg, out); break;
    case ExperimentKind::kEmfRelax: run_emf_relax(cfg, out); break;
    case ExperimentKind::kEmfL2: run_emf_l2(cfg, out); break;
    case ExperimentKind::kEmfAlgebra: run_emf_algebra(cfg, out); break;
    case ExperimentKind::kDbmGft: run_dbm_gft(cfg, out); break;
    case ExperimentKind::kSpectra: run_spectra(cfg, out); break;
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

namespace {

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ' ' || c == '\t') c = '_';
  }
  return out.empty() ? "-" : out;
}

}  // namespace

void write_records(std::ostream& os, const ExperimentConfig& cfg,
                   const RunResult& result) {
  os << "# rmtlab-records v1\n";
  os << "# run_id=" << result.run_id << "\n";
  os << "# config_hash=" << result.config_hash << "\n";
  os << "# code_version=" << kCodeVersion << "\n";
  os << "# wall_seconds=" << result.wall_seconds << "\n";
  std::istringstream cfg_lines(cfg.canonical_text());
  std::string line;
  while (std::getline(cfg_lines, line)) os << "# cfg." << line << "\n";
  os << "statistic value error pass note\n";
  os << std::setprecision(17);
  for (const auto& r : result.records) {
    os << sanitize(r.statistic) << ' ' << r.value << ' ' << r.error << ' '
       << r.pass << ' ' << sanitize(r.note) << "\n";
  }
}

void write_table(std::ostream& os, const ExperimentConfig& cfg,
                 const RunResult& result) {
  os << "experiment " << kind_name(result.kind) << "  (run " << result.run_id
     << ", " << std::fixed << std::setprecision(2) << result.wall_seconds
     << " s)\n";
  os.unsetf(std::ios_base::floatfield);
  os << std::setprecision(6);
  os << std::left << std::setw(28) << "statistic" << std::right
     << std::setw(14) << "value" << std::setw(12) << "error" << std::setw(7)
     << "pass" << "  note\n";
  for (const auto& r : result.records) {
    os << std::left << std::setw(28) << r.statistic << std::right
       << std::setw(14) << r.value << std::setw(12) << r.error << std::setw(7)
       << (r.pass < 0 ? "-" : (r.pass ? "ok" : "FAIL")) << "  " << r.note
       << "\n";
  }
  os << (result.all_pass ? "ALL PASS" : "FAILURES PRESENT") << "\n";
}

void emit_plotdata(std::ostream& os, const ExperimentConfig& cfg,
                   const RunResult& result) {
  if (result.records.empty()) {
    throw std::invalid_argument("emit_plotdata: no records");
  }
  os << std::setprecision(12);
  switch (result.kind) {
    case ExperimentKind::kClt: {
      const auto& xs = result.series.at("clt_samples");
      const int bins = 50;
      const double lo = -4.0, hi = 4.0;
      std::vector<long> count(bins, 0);
      for (double x : xs) {
        int b = static_cast<int>((x - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);  // clamp keeps the total count = M
        ++count[b];
      }
      os << "# bin_center count\n";
      for (int b = 0; b < bins; ++b) {
        os << lo + (b + 0.5) * (hi - lo) / bins << ' ' << count[b] << "\n";
      }
      break;
    }
    case ExperimentKind::kSpectra: {
      const auto& xs = result.series.at("eigenvalues");
      const int bins = 60;
      const double lo = -2.5, hi = 2.5;
      std::vector<long> count(bins, 0);
      for (double x : xs) {
        const int b = static_cast<int>((x - lo) / (hi - lo) * bins);
        if (b >= 0 && b < bins) ++count[b];
      }
      os << "# bin_center density semicircle\n";
      const double width = (hi - lo) / bins;
      for (int b = 0; b < bins; ++b) {
        const double c = lo + (b + 0.5) * width;
        os << c << ' '
           << count[b] / (width * static_cast<double>(xs.size())) << ' '
           << rho_t(c, 0.0) << "\n";
      }
      break;
    }
    case ExperimentKind::kLocalLaw: {
      const auto& etas = result.series.at("sweep_eta");
      const auto& devs = result.series.at("sweep_dev");
      const auto& bounds = result.series.at("sweep_bound");
      os << "# eta mean_deviation bound\n";
      std::vector<std::size_t> order(etas.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return etas[a] < etas[b]; });
      for (std::size_t i : order) {
        os << etas[i] << ' ' << devs[i] << ' ' << bounds[i] << "\n";
      }
      break;
    }
    case ExperimentKind::kRigidity: {
      const auto& dims = result.series.at("sweep_dim");
      const auto& med = result.series.at("sweep_median");
      os << "# dim median_gauge\n";
      for (std::size_t i = 0; i < dims.size(); ++i) {
        os << dims[i] << ' ' << med[i] << "\n";
      }
      break;
    }
    case ExperimentKind::kEth: {
      const auto& dims = result.series.at("eth_dim");
      const auto& med = result.series.at("eth_median");
      os << "# dim median_eth_max\n";
      for (std::size_t i = 0; i < dims.size(); ++i) {
        os << dims[i] << ' ' << med[i] << "\n";
      }
      break;
    }
    case ExperimentKind::kEmfL2: {
      const auto& t = result.series.at("l2_time");
      const auto& nrm = result.series.at("l2_norm");
      os << "# time l2_norm\n";
      for (std::size_t i = 0; i < t.size(); ++i) {
        os << t[i] << ' ' << nrm[i] << "\n";
      }
      break;
    }
    default: {
      os << "# statistic value error\n";
      for (const auto& r : result.records) {
        os << sanitize(r.statistic) << ' ' << r.value << ' ' << r.error << "\n";
      }
      break;
    }
  }
}

}  // namespace rmt
